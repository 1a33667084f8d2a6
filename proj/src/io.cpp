#include "mdpattr/io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace mdpattr {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double parse_number(std::string_view s, const std::string& context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ModelError(context + ": bad probability '" + std::string(s) + "'");
  }
  return v;
}

/// Probability given as a JSON number or a "p/q" / decimal string.
std::pair<double, std::string> parse_probability(const json& v, const std::string& context) {
  if (v.is_number()) return {v.get<double>(), ""};
  if (!v.is_string()) throw ModelError(context + ": prob must be a number or a \"p/q\" string");
  std::string s = v.get<std::string>();
  if (auto slash = s.find('/'); slash != std::string::npos) {
    double num = parse_number(std::string_view(s).substr(0, slash), context);
    double den = parse_number(std::string_view(s).substr(slash + 1), context);
    if (den == 0.0) throw ModelError(context + ": zero denominator");
    return {num / den, s};
  }
  return {parse_number(s, context), s};
}

const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ModelError(std::string("model file lacks '") + key + "'");
  return doc.at(key);
}

}  // namespace

ModelFile model_from_json(const json& doc) {
  if (!doc.is_object()) throw ModelError("model file must be a JSON object");
  ModelFile f;
  try {
    f.version = doc.value("version", 1);
    if (f.version != 1) throw ModelError("unsupported model version " + std::to_string(f.version));
    MdpBuilder b;
    std::set<std::string> states, actions;
    for (const auto& s : require(doc, "states")) {
      auto name = s.get<std::string>();
      if (!states.insert(name).second) throw ModelError("duplicate state '" + name + "'");
      b.add_state(name);
    }
    if (doc.contains("actions")) {
      for (const auto& a : doc.at("actions")) {
        auto name = a.get<std::string>();
        actions.insert(name);
        b.add_action(name);
      }
    }
    auto initial = require(doc, "initial").get<std::string>();
    if (!states.count(initial)) throw ModelError("initial state '" + initial + "' is not declared");
    b.set_initial(initial);
    std::size_t i = 0;
    for (const auto& t : require(doc, "transitions")) {
      std::string ctx = "transition " + std::to_string(i++);
      auto from = require(t, "from").get<std::string>();
      auto action = require(t, "action").get<std::string>();
      auto to = require(t, "to").get<std::string>();
      if (!states.count(from) || !states.count(to)) {
        throw ModelError(ctx + ": unknown state '" + (states.count(from) ? to : from) + "'");
      }
      if (!actions.empty() && !actions.count(action)) {
        throw ModelError(ctx + ": undeclared action '" + action + "'");
      }
      auto [p, exact] = parse_probability(require(t, "prob"), ctx);
      b.add_transition(from, action, to, p, exact);
    }
    if (doc.contains("labels")) {
      for (const auto& [state, ls] : doc.at("labels").items()) {
        if (!states.count(state)) throw ModelError("label for unknown state '" + state + "'");
        for (const auto& l : ls) b.add_label(state, l.get<std::string>());
      }
    }
    Mdp m = b.build();
    auto violations = validate(m);
    if (!violations.empty()) {
      std::string msg = violations.front().message;
      if (violations.size() > 1) msg += " (and " + std::to_string(violations.size() - 1) + " more)";
      throw ModelError(msg);
    }
    f.mdp = normalized(m);
    if (doc.contains("target") && !doc.at("target").is_null()) {
      f.target = doc.at("target").get<std::string>();
      if (!states.count(*f.target)) throw ModelError("target '" + *f.target + "' is not declared");
    }
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model file: ") + e.what());
  }
  return f;
}

ordered_json model_to_json(const ModelFile& f) {
  const Mdp& m = f.mdp;
  ordered_json doc;
  doc["version"] = f.version;
  doc["states"] = m.state_names();
  doc["actions"] = m.actions();
  doc["initial"] = m.state_name(m.initial());
  ordered_json transitions = ordered_json::array();
  for (StateId s = 0; s < m.num_states(); ++s) {
    for (const auto& c : m.choices(s)) {
      for (const auto& o : c.outcomes) {
        ordered_json t;
        t["from"] = m.state_name(s);
        t["action"] = c.action;
        t["to"] = m.state_name(o.next);
        if (o.exact.find('/') != std::string::npos) {
          t["prob"] = o.exact;
        } else {
          t["prob"] = o.probability;
        }
        transitions.push_back(std::move(t));
      }
    }
  }
  doc["transitions"] = std::move(transitions);
  ordered_json labels = ordered_json::object();
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (!m.labels(s).empty()) labels[m.state_name(s)] = m.labels(s);
  }
  if (!labels.empty()) doc["labels"] = std::move(labels);
  if (f.target) doc["target"] = *f.target;
  return doc;
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ModelError("'" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

void save_model(const ModelFile& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write '" + path + "'");
  out << model_to_json(f).dump(2) << "\n";
}

StateId resolve_target(const ModelFile& f, const std::optional<std::string>& name) {
  if (name) return f.mdp.state(*name);
  if (f.target) return f.mdp.state(*f.target);
  throw ModelError("no target given and the model file names none");
}

// ---- reports ---------------------------------------------------------------

namespace {

ordered_json witness_json(const std::vector<WitnessEntry>& w) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : w) arr.push_back({{"state", e.state}, {"memory", e.memory}, {"action", e.action}});
  return arr;
}

std::vector<WitnessEntry> witness_from(const json& arr) {
  std::vector<WitnessEntry> out;
  for (const auto& e : arr) {
    out.push_back({e.at("state").get<std::string>(), e.at("memory").get<std::string>(),
                   e.at("action").get<std::string>()});
  }
  return out;
}

bool same(const std::vector<WitnessEntry>& a, const std::vector<WitnessEntry>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](const auto& x, const auto& y) {
    return x.state == y.state && x.memory == y.memory && x.action == y.action;
  });
}

const char* status_of(SolveStatus s) {
  return s == SolveStatus::Budget ? "budget" : "ok";
}

}  // namespace

bool AnalysisReport::operator==(const AnalysisReport& o) const {
  return target == o.target && subject_kind == o.subject_kind && subject == o.subject &&
         strategy_class == o.strategy_class && normalized == o.normalized &&
         path_following == o.path_following && epsilon == o.epsilon && status == o.status &&
         lower == o.lower && upper == o.upper && basis == o.basis &&
         same(lower_witness, o.lower_witness) && same(upper_witness, o.upper_witness) &&
         nodes == o.nodes && seconds == o.seconds && message == o.message;
}

ordered_json report_to_json(const AnalysisReport& r) {
  ordered_json doc;
  doc["query"] = {{"target", r.target},
                  {"subject", {{"kind", r.subject_kind}, {"value", r.subject}}},
                  {"class", r.strategy_class},
                  {"normalized", r.normalized},
                  {"epsilon", r.epsilon}};
  doc["status"] = r.status;
  ordered_json interval;
  interval["lower"] = r.lower ? ordered_json(*r.lower) : ordered_json(nullptr);
  interval["upper"] = r.upper ? ordered_json(*r.upper) : ordered_json(nullptr);
  interval["class"] = r.strategy_class;
  interval["pathFollowing"] = r.path_following;
  interval["normalized"] = r.normalized;
  interval["basis"] = r.basis;
  doc["interval"] = std::move(interval);
  doc["witnesses"] = {{"lower", witness_json(r.lower_witness)}, {"upper", witness_json(r.upper_witness)}};
  doc["solver"] = {{"engine", "exact-search"}, {"nodes", r.nodes}};
  if (r.seconds) doc["solver"]["seconds"] = *r.seconds;
  if (!r.message.empty()) doc["message"] = r.message;
  return doc;
}

AnalysisReport report_from_json(const json& doc) {
  AnalysisReport r;
  try {
    const auto& q = doc.at("query");
    r.target = q.at("target").get<std::string>();
    r.subject_kind = q.at("subject").at("kind").get<std::string>();
    r.subject = q.at("subject").at("value").get<std::string>();
    r.strategy_class = q.at("class").get<std::string>();
    r.normalized = q.at("normalized").get<bool>();
    r.epsilon = q.at("epsilon").get<double>();
    r.status = doc.at("status").get<std::string>();
    const auto& iv = doc.at("interval");
    if (!iv.at("lower").is_null()) r.lower = iv.at("lower").get<double>();
    if (!iv.at("upper").is_null()) r.upper = iv.at("upper").get<double>();
    r.path_following = iv.at("pathFollowing").get<bool>();
    r.basis = iv.at("basis").get<std::string>();
    r.lower_witness = witness_from(doc.at("witnesses").at("lower"));
    r.upper_witness = witness_from(doc.at("witnesses").at("upper"));
    r.nodes = doc.at("solver").at("nodes").get<std::uint64_t>();
    if (doc.at("solver").contains("seconds")) r.seconds = doc.at("solver").at("seconds").get<double>();
    r.message = doc.value("message", "");
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed report: ") + e.what());
  }
  return r;
}

void fill_report(AnalysisReport& r, const ImportanceInterval& iv) {
  r.lower = iv.lower;
  r.upper = iv.upper;
  r.normalized = iv.normalized;
  r.path_following = iv.path_following;
  r.strategy_class = to_string(iv.strategy_class);
  r.basis = iv.basis;
  r.nodes = iv.nodes;
  r.status = iv.budget_exceeded() ? "budget" : "ok";
  if (iv.product) {
    if (iv.lower_witness.num_states() > 0) r.lower_witness = describe_strategy(*iv.product, iv.lower_witness);
    if (iv.upper_witness.num_states() > 0) r.upper_witness = describe_strategy(*iv.product, iv.upper_witness);
  }
  if (iv.budget_exceeded()) {
    r.message = std::string("search budget exhausted (lower: ") + status_of(iv.lower_status) +
                ", upper: " + status_of(iv.upper_status) + "); bounds are the best found";
  } else if (iv.strategy_class == StrategyClass::All && iv.basis == "search") {
    r.message = "bounds over deterministic memoryless strategies on the memory product";
  }
}

// ---- batch -----------------------------------------------------------------

namespace {

/// Runs body(i) for i in [0, n) on `jobs` threads; results must be written by index.
template <class Body>
void parallel_for(std::size_t n, unsigned jobs, Body body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) body(i);
  };
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

template <class Row>
void run_query(std::shared_ptr<const Mdp> m, const ImportanceQuery& q, Row& row) {
  auto start = std::chrono::steady_clock::now();
  try {
    ImportanceInterval iv = importance_bounds(std::move(m), q);
    row.lower = iv.lower;
    row.upper = iv.upper;
    row.status = iv.budget_exceeded() ? "budget" : "ok";
    if constexpr (requires { row.nodes; }) row.nodes = iv.nodes;
  } catch (const UndefinedImportance&) {
    row.status = "undefined";
  } catch (const std::exception&) {
    row.status = "error";
  }
  if constexpr (requires { row.seconds; }) {
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
}

ImportanceQuery base_query(StateId t, const BatchOptions& opt) {
  ImportanceQuery q;
  q.target = t;
  q.strategy_class = opt.strategy_class;
  q.normalized = opt.normalized;
  q.epsilon = opt.epsilon;
  q.node_limit = opt.node_limit;
  q.time_limit_seconds = opt.time_limit_seconds;
  return q;
}

}  // namespace

std::vector<BatchRow> batch_importance(std::shared_ptr<const Mdp> m, StateId t,
                                       const BatchOptions& opt) {
  const std::size_t n = m->num_states();
  std::vector<BatchRow> rows(n);
  parallel_for(n, opt.jobs, [&](std::size_t s) {
    rows[s].state = m->state_name(s);
    ImportanceQuery q = base_query(t, opt);
    q.subject = StateId{s};
    run_query(m, q, rows[s]);
  });
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.state < b.state; });
  return rows;
}

std::string format_probability(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);  // no "-0"
  return buf;
}

std::string batch_csv(const std::vector<BatchRow>& rows, bool timings) {
  std::string out = timings ? "state,lower,upper,status,nodes,seconds\n" : "state,lower,upper,status,nodes\n";
  for (const auto& r : rows) {
    std::string state = r.state;
    if (state.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : state) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      state = quoted + "\"";
    }
    out += state + "," + (r.lower ? format_probability(*r.lower) : "") + "," +
           (r.upper ? format_probability(*r.upper) : "") + "," + r.status + "," + std::to_string(r.nodes);
    if (timings) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", r.seconds);
      out += std::string(",") + buf;
    }
    out += "\n";
  }
  return out;
}

ordered_json batch_json(const std::vector<BatchRow>& rows, bool timings) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json row;
    row["state"] = r.state;
    row["lower"] = r.lower ? ordered_json(*r.lower) : ordered_json(nullptr);
    row["upper"] = r.upper ? ordered_json(*r.upper) : ordered_json(nullptr);
    row["status"] = r.status;
    row["nodes"] = r.nodes;
    if (timings) row["seconds"] = r.seconds;
    arr.push_back(std::move(row));
  }
  return arr;
}

// ---- explain ---------------------------------------------------------------

Explanation explain(const Mdp& m, StateId t, const std::vector<BatchRow>& rows, double high,
                    double low) {
  Explanation e;
  for (const auto& r : rows) {
    if (r.state == m.state_name(m.initial()) || r.state == m.state_name(t)) continue;
    if (r.status != "ok" || !r.lower || !r.upper) continue;
    if (*r.lower >= high) e.indispensable.push_back(r);
    if (*r.upper <= low) e.detrimental.push_back(r);
  }
  return e;
}

std::string explanation_text(const Mdp& m, StateId t, const Explanation& e, double high,
                             double low) {
  std::ostringstream out;
  auto list = [&](const std::vector<BatchRow>& rows) {
    if (rows.empty()) out << "  (none)\n";
    for (const auto& r : rows) {
      out << "  " << r.state << "  [" << format_probability(*r.lower) << ", "
          << format_probability(*r.upper) << "]\n";
    }
  };
  out << "States indispensable for reaching " << m.state_name(t) << " (lower bound >= "
      << format_probability(high) << "):\n";
  list(e.indispensable);
  out << "States detrimental for reaching " << m.state_name(t) << " (upper bound <= "
      << format_probability(low) << "):\n";
  list(e.detrimental);
  out << "The initial state " << m.state_name(m.initial()) << " and the target " << m.state_name(t)
      << " always have importance 1 and are not listed.\n";
  return out.str();
}

// ---- heatmap ---------------------------------------------------------------

std::optional<std::pair<int, int>> grid_extent(const Mdp& m) {
  int w = 0, h = 0;
  bool any = false;
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (auto c = cell_of(m, s)) {
      any = true;
      w = std::max(w, c->x + 1);
      h = std::max(h, c->y + 1);
    }
  }
  if (!any) return std::nullopt;
  return std::make_pair(w, h);
}

std::vector<CellImportance> cell_importance(std::shared_ptr<const Mdp> m, StateId t,
                                            const BatchOptions& opt) {
  std::map<GridCell, StateSet> cells;
  for (StateId s = 0; s < m->num_states(); ++s) {
    if (auto c = cell_of(*m, s)) {
      auto& set = cells[*c];
      set.resize(m->num_states(), false);
      set[s] = true;
    }
  }
  if (cells.empty()) throw ModelError("model has no grid coordinates (cell:x,y labels)");
  std::vector<CellImportance> out;
  std::vector<StateSet> sets;
  for (const auto& [cell, set] : cells) {
    out.push_back({cell, std::nullopt, std::nullopt, ""});
    sets.push_back(set);
  }
  parallel_for(out.size(), opt.jobs, [&](std::size_t i) {
    ImportanceQuery q = base_query(t, opt);
    q.subject = sets[i];
    run_query(m, q, out[i]);
  });
  return out;
}

std::string heatmap_ppm(const std::vector<CellImportance>& cells, int width, int height, int scale) {
  if (width <= 0 || height <= 0 || scale <= 0) throw std::invalid_argument("bad image size");
  std::vector<std::array<int, 3>> colour(static_cast<std::size_t>(width * height), {128, 128, 128});
  for (const auto& c : cells) {
    if (c.cell.x >= width || c.cell.y >= height || c.cell.x < 0 || c.cell.y < 0) continue;
    if (c.status != "ok" || !c.lower) continue;
    int v = static_cast<int>(std::lround(255.0 * std::clamp(*c.lower, 0.0, 1.0)));
    colour[static_cast<std::size_t>(c.cell.y * width + c.cell.x)] = {255, v, v};
  }
  std::ostringstream out;
  out << "P3\n" << width * scale << " " << height * scale << "\n255\n";
  for (int y = 0; y < height * scale; ++y) {
    for (int x = 0; x < width * scale; ++x) {
      const auto& px = colour[static_cast<std::size_t>((y / scale) * width + x / scale)];
      out << px[0] << " " << px[1] << " " << px[2] << (x + 1 == width * scale ? "\n" : " ");
    }
  }
  return out.str();
}

}  // namespace mdpattr
