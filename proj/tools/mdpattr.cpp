// mdpattr: importance of states and paths for reaching a target in an MDP.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "mdpattr/encodings.hpp"
#include "mdpattr/importance.hpp"
#include "mdpattr/io.hpp"
#include "mdpattr/models.hpp"
#include "mdpattr/solve.hpp"

using namespace mdpattr;

namespace {

enum Exit { kOk = 0, kInput = 1, kUndefined = 2, kBudget = 3 };

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write '" + path + "'");
  out << text;
}

GridCell parse_cell(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("cell must be X,Y: '" + s + "'");
  return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
}

StrategyClass parse_class(const std::string& s) {
  return s == "opt" ? StrategyClass::ReachOptimal : StrategyClass::All;
}

struct Common {
  std::string model;
  std::string target;
  std::string strategy_class = "all";
  double epsilon = 1e-4;
  std::uint64_t node_limit = 10'000'000;
  double time_limit = 600.0;
  unsigned jobs = 1;
  std::string out;

  void add(CLI::App* cmd, bool with_jobs) {
    cmd->add_option("model", model, "model JSON file")->required();
    cmd->add_option("-t,--target", target, "target state (defaults to the file's target)");
    cmd->add_option("--class", strategy_class, "strategy class")
        ->check(CLI::IsMember({"all", "opt"}));
    cmd->add_option("--epsilon", epsilon, "minimum reach probability for class all")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--node-limit", node_limit, "search node budget per bound");
    cmd->add_option("--time-limit", time_limit, "search time budget per bound, seconds");
    if (with_jobs) cmd->add_option("-j,--jobs", jobs, "parallel queries")->check(CLI::PositiveNumber);
  }

  BatchOptions batch() const {
    BatchOptions b;
    b.strategy_class = parse_class(strategy_class);
    b.epsilon = epsilon;
    b.jobs = jobs;
    b.node_limit = node_limit;
    b.time_limit_seconds = time_limit;
    return b;
  }

  std::optional<std::string> target_name() const {
    return target.empty() ? std::nullopt : std::optional(target);
  }
};

bool g_timings = false;

int cmd_gen(const std::string& name, const GridworldParams& grid, const RandomParams& rnd,
            const std::string& out) {
  ModelFile f;
  if (name == "loan") {
    f = loan_model();
  } else if (name == "nonmono") {
    f = nonmono_model();
  } else if (name == "gridworld") {
    f = gridworld_model(grid);
  } else {
    f = random_model(rnd);
  }
  write_output(out, model_to_json(f).dump(2) + "\n");
  return kOk;
}

int cmd_importance(const Common& c, const std::string& state, const std::string& path,
                   bool absolute, const std::string& side) {
  ModelFile f = load_model(c.model);
  auto m = std::make_shared<const Mdp>(f.mdp);
  StateId t = resolve_target(f, c.target_name());

  ImportanceQuery q;
  q.target = t;
  q.strategy_class = parse_class(c.strategy_class);
  q.side = side == "min" ? BoundSide::Min : side == "max" ? BoundSide::Max : BoundSide::Both;
  q.normalized = !absolute;
  q.epsilon = c.epsilon;
  q.node_limit = c.node_limit;
  q.time_limit_seconds = c.time_limit;

  AnalysisReport r;
  r.target = m->state_name(t);
  r.strategy_class = c.strategy_class;
  r.normalized = !absolute;
  r.epsilon = c.epsilon;
  if (!path.empty()) {
    PathSpec p = parse_path(*m, path);
    if (absolute) throw std::invalid_argument("--absolute applies to states only");
    q.subject = p;
    r.subject_kind = "path";
    r.subject = path;
    r.path_following = true;
  } else {
    q.subject = m->state(state);
    r.subject_kind = "state";
    r.subject = state;
  }

  auto start = std::chrono::steady_clock::now();
  int code = kOk;
  try {
    fill_report(r, importance_bounds(m, q));
    if (r.status == "budget") code = kBudget;
  } catch (const UndefinedImportance& e) {
    r.status = "undefined";
    r.basis = "undefined";
    r.message = e.what();
    code = kUndefined;
  }
  if (g_timings) {
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  write_output(c.out, report_to_json(r).dump(2) + "\n");
  if (code == kUndefined) std::cerr << "mdpattr: importance undefined: " << r.message << "\n";
  return code;
}

int exit_for(const std::vector<BatchRow>& rows) {
  for (const auto& r : rows) {
    if (r.status == "budget") return kBudget;
  }
  return kOk;
}

int cmd_batch(const Common& c, const std::string& format, bool absolute) {
  ModelFile f = load_model(c.model);
  auto m = std::make_shared<const Mdp>(f.mdp);
  StateId t = resolve_target(f, c.target_name());
  BatchOptions opt = c.batch();
  opt.normalized = !absolute;
  auto rows = batch_importance(m, t, opt);
  write_output(c.out, format == "json" ? batch_json(rows, g_timings).dump(2) + "\n"
                                       : batch_csv(rows, g_timings));
  return exit_for(rows);
}

struct ExportArgs {
  std::string encoding = "lpstar";
  std::string state;
  std::string sense = "max";
  std::string prefix;
  std::optional<double> p_star;
  EncodingConfig cfg;
  bool no_restrict = false;
  bool no_zero_rows = false;
};

OptModel make_model(const ExportArgs& a, const ProductMdp& p, StateId t, double& p_star_out) {
  const Mdp& base = *p.base;
  Sense sense = parse_sense(a.sense);
  if (a.encoding == "qp") {
    OptModel qp = build_qp(p, t, sense, a.cfg);
    if (!a.p_star) {
      throw std::invalid_argument(
          "the qp encoding has a fractional objective, which the LP format cannot express; "
          "pass --p-star P to pin the denominator, or export qpstar/lpstar instead");
    }
    p_star_out = *a.p_star;
    return pin_denominator(std::move(qp), *a.p_star);
  }
  p_star_out = a.p_star ? *a.p_star : max_reach_prob(base, t).p_star;
  if (p_star_out <= 0.0) throw UndefinedImportance("target unreachable from the initial state");
  return a.encoding == "qpstar" ? build_qp_star(p, t, p_star_out, sense, a.cfg)
                                : build_lp_star(p, t, p_star_out, sense, a.cfg);
}

int cmd_export(const Common& c, ExportArgs a) {
  ModelFile f = load_model(c.model);
  auto m = std::make_shared<const Mdp>(f.mdp);
  StateId t = resolve_target(f, c.target_name());
  a.cfg.epsilon = c.epsilon;
  a.cfg.restrict_to_reachable = !a.no_restrict;
  a.cfg.include_redundant_zero_constraint = !a.no_zero_rows;
  check_config(a.cfg);
  ProductMdp p = memory_product(m, m->state(a.state));
  precheck_feasible(p, t, a.cfg);
  double p_star = 0.0;
  OptModel model = make_model(a, p, t, p_star);
  std::optional<double> recorded = a.encoding == "qp" && !a.p_star ? std::nullopt : std::optional(p_star);
  write_output(a.prefix + ".lp", serialize_lp(model));
  write_output(a.prefix + ".meta.json", model_metadata(model, p, t, a.cfg, recorded).dump(2) + "\n");
  return kOk;
}

int cmd_crosscheck(const Common& c, ExportArgs a, std::string solution) {
  ModelFile f = load_model(c.model);
  auto m = std::make_shared<const Mdp>(f.mdp);
  StateId t = resolve_target(f, c.target_name());
  a.cfg.epsilon = c.epsilon;
  a.cfg.restrict_to_reachable = !a.no_restrict;
  ProductMdp p = memory_product(m, m->state(a.state));
  double p_star = 0.0;
  OptModel model = make_model(a, p, t, p_star);

  if (solution.empty()) {
    const char* dir = std::getenv("MDPATTR_SOLVER_SOLUTION_DIR");
    if (!dir) throw std::invalid_argument("no --solution given and MDPATTR_SOLVER_SOLUTION_DIR is unset");
    solution = (std::filesystem::path(dir) /
                (sanitize_name(a.state) + "." + a.encoding + "." + a.sense + ".sol"))
                   .string();
  }
  std::ifstream in(solution);
  if (!in) throw ModelError("cannot open solution file '" + solution + "'");
  std::stringstream buf;
  buf << in.rdbuf();

  SolveOptions opt;
  opt.sense = parse_sense(a.sense);
  opt.strategy_class = a.encoding == "qp" ? StrategyClass::All : StrategyClass::ReachOptimal;
  opt.epsilon = c.epsilon;
  opt.p_star = p_star;
  opt.node_limit = c.node_limit;
  opt.time_limit_seconds = c.time_limit;
  Discrepancy d = cross_check_external(p, t, model, parse_solution(buf.str()), opt);

  nlohmann::ordered_json j;
  j["solution"] = solution;
  if (!d.error.empty()) {
    j["error"] = d.error;
  } else {
    j["externalObjective"] = d.external_objective;
    j["recomputed"] = d.recomputed;
    j["exactOptimum"] = d.exact_optimum ? nlohmann::ordered_json(*d.exact_optimum) : nullptr;
    j["recomputeGap"] = d.recompute_gap;
    j["optimumGap"] = d.optimum_gap;
    j["tolerance"] = kAgreementTolerance;
  }
  j["flagged"] = d.flagged;
  write_output(c.out, j.dump(2) + "\n");
  return d.flagged || !d.error.empty() ? kInput : kOk;
}

int cmd_explain(const Common& c, double high, double low) {
  ModelFile f = load_model(c.model);
  auto m = std::make_shared<const Mdp>(f.mdp);
  StateId t = resolve_target(f, c.target_name());
  auto rows = batch_importance(m, t, c.batch());
  write_output(c.out, explanation_text(*m, t, explain(*m, t, rows, high, low), high, low));
  return exit_for(rows);
}

int cmd_heatmap(const Common& c, const std::string& grid, const std::string& image) {
  ModelFile f = load_model(c.model);
  auto m = std::make_shared<const Mdp>(f.mdp);
  StateId t = resolve_target(f, c.target_name());

  std::optional<std::pair<int, int>> size = grid_extent(*m);
  if (!image.empty() && !size) throw ModelError("--image needs a model with cell:x,y labels");
  if (!grid.empty()) {
    auto x = grid.find('x');
    if (x == std::string::npos) throw std::invalid_argument("--grid must be WxH");
    size = {std::stoi(grid.substr(0, x)), std::stoi(grid.substr(x + 1))};
  }

  auto rows = batch_importance(m, t, c.batch());
  std::string csv = "state,lower,upper\n";
  for (const auto& r : rows) {
    csv += r.state + "," + (r.lower ? format_probability(*r.lower) : "") + "," +
           (r.upper ? format_probability(*r.upper) : "") + "\n";
  }
  write_output(c.out, csv);
  if (!image.empty()) {
    auto cells = cell_importance(m, t, c.batch());
    write_output(image, heatmap_ppm(cells, size->first, size->second));
  }
  return exit_for(rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Importance of states and paths for reaching a target in an MDP"};
  app.require_subcommand(1);
  app.add_flag("--timings", g_timings, "include wall-clock times in outputs");

  // gen
  auto* gen = app.add_subcommand("gen", "write an example model");
  std::string gen_name, gen_out;
  GridworldParams grid;
  std::string grid_start, grid_key, grid_goal;
  RandomParams rnd;
  gen->add_option("name", gen_name)->required()->check(CLI::IsMember({"loan", "gridworld", "nonmono", "random"}));
  gen->add_option("-o,--out", gen_out, "output file (default stdout)");
  gen->add_option("--width", grid.width);
  gen->add_option("--height", grid.height);
  gen->add_option("--lava-row", grid.lava_row);
  gen->add_option("--door-x", grid.door_x);
  gen->add_option("--start", grid_start, "X,Y");
  gen->add_option("--key", grid_key, "X,Y");
  gen->add_option("--goal", grid_goal, "X,Y");
  gen->add_option("--states", rnd.states);
  gen->add_option("--actions", rnd.actions);
  gen->add_option("--branching", rnd.branching);
  gen->add_option("--back-edge", rnd.back_edge);
  gen->add_option("--seed", rnd.seed);
  gen->add_flag("--unreachable-goal", rnd.unreachable_goal);

  // importance
  auto* imp = app.add_subcommand("importance", "importance bounds of one state or path");
  Common imp_c;
  std::string imp_state, imp_path, imp_side = "both";
  bool imp_abs = false;
  imp_c.add(imp, false);
  auto* st = imp->add_option("-s,--state", imp_state, "subject state");
  auto* pa = imp->add_option("-p,--path", imp_path, "subject path s0,a0,s1,...");
  st->excludes(pa);
  imp->add_flag("--absolute", imp_abs, "absolute instead of normalized importance");
  imp->add_option("--side", imp_side)->check(CLI::IsMember({"both", "min", "max"}));
  imp->add_option("-o,--out", imp_c.out, "report file (default stdout)");

  // batch
  auto* batch = app.add_subcommand("batch", "importance bounds of every state");
  Common batch_c;
  std::string batch_format = "csv";
  bool batch_abs = false;
  batch_c.add(batch, true);
  batch->add_flag("--all-states", "kept for compatibility; every state is always included");
  batch->add_flag("--absolute", batch_abs);
  batch->add_option("--out", batch_format, "output format")->check(CLI::IsMember({"csv", "json"}));
  batch->add_option("-o,--output", batch_c.out, "output file (default stdout)");

  // export / crosscheck
  auto add_encoding = [](CLI::App* cmd, ExportArgs& a) {
    cmd->add_option("--encoding", a.encoding)->check(CLI::IsMember({"qp", "qpstar", "lpstar"}));
    cmd->add_option("-s,--state", a.state, "subject state")->required();
    cmd->add_option("--sense", a.sense)->check(CLI::IsMember({"min", "max"}));
    cmd->add_option("--p-star", a.p_star, "maximal reach probability (computed if omitted)");
    cmd->add_option("--big-m", a.cfg.big_m);
    cmd->add_flag("--hierarchical", a.cfg.hierarchical, "qpstar: keep the reach objective first");
    cmd->add_flag("--no-restrict", a.no_restrict, "declare reach variables for every state");
    cmd->add_flag("--no-zero-rows", a.no_zero_rows, "omit the redundant cross-target rows");
  };
  auto* exp = app.add_subcommand("export", "write an optimization encoding as LP + metadata");
  Common exp_c;
  ExportArgs exp_a;
  exp_c.add(exp, false);
  add_encoding(exp, exp_a);
  exp->add_option("--out", exp_a.prefix, "output prefix")->required();

  auto* cc = app.add_subcommand("crosscheck", "compare an external solution with the exact search");
  Common cc_c;
  ExportArgs cc_a;
  std::string cc_solution;
  cc_c.add(cc, false);
  add_encoding(cc, cc_a);
  cc->add_option("--solution", cc_solution, "name value solution file");
  cc->add_option("-o,--out", cc_c.out);

  // explain
  auto* ex = app.add_subcommand("explain", "list indispensable and detrimental states");
  Common ex_c;
  double high = 0.95, low = 0.05;
  ex_c.add(ex, true);
  ex->add_option("--high", high, "lower-bound threshold for indispensable");
  ex->add_option("--low", low, "upper-bound threshold for detrimental");
  ex->add_option("-o,--out", ex_c.out);

  // heatmap
  auto* hm = app.add_subcommand("heatmap", "per-state bounds as CSV, optionally a grid image");
  Common hm_c;
  std::string hm_grid, hm_image;
  hm_c.add(hm, true);
  hm->add_option("--out", hm_c.out, "CSV file (default stdout)");
  hm->add_option("--grid", hm_grid, "image size WxH (default: from cell labels)");
  hm->add_option("--image", hm_image, "PPM image file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*gen) {
      if (!grid_start.empty()) grid.start = parse_cell(grid_start);
      if (!grid_key.empty()) grid.key = parse_cell(grid_key);
      if (!grid_goal.empty()) grid.goal = parse_cell(grid_goal);
      return cmd_gen(gen_name, grid, rnd, gen_out);
    }
    if (*imp) {
      if (imp_state.empty() && imp_path.empty()) throw std::invalid_argument("give --state or --path");
      return cmd_importance(imp_c, imp_state, imp_path, imp_abs, imp_side);
    }
    if (*batch) return cmd_batch(batch_c, batch_format, batch_abs);
    if (*exp) return cmd_export(exp_c, exp_a);
    if (*cc) return cmd_crosscheck(cc_c, cc_a, cc_solution);
    if (*ex) return cmd_explain(ex_c, high, low);
    if (*hm) return cmd_heatmap(hm_c, hm_grid, hm_image);
  } catch (const UndefinedImportance& e) {
    std::cerr << "mdpattr: importance undefined: " << e.what() << "\n";
    return kUndefined;
  } catch (const std::exception& e) {
    std::cerr << "mdpattr: error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
