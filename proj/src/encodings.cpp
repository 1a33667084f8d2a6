#include "mdpattr/encodings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace mdpattr {

const char* to_string(Sense s) {
  return s == Sense::Min ? "min" : "max";
}

Sense parse_sense(std::string_view s) {
  if (s == "min") return Sense::Min;
  if (s == "max") return Sense::Max;
  throw std::invalid_argument("sense must be 'min' or 'max'");
}

void check_config(const EncodingConfig& cfg) {
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(cfg.big_m >= 1.0) || !std::isfinite(cfg.big_m)) {
    throw std::invalid_argument("bigM must be finite and at least 1");
  }
}

std::size_t OptModel::add_variable(std::string name, Domain d, double lower, double upper) {
  variables.push_back({std::move(name), d, lower, upper});
  return variables.size() - 1;
}

std::optional<std::size_t> OptModel::find_variable(std::string_view name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t OptModel::count_family(std::string_view family) const {
  return static_cast<std::size_t>(std::count_if(
      constraints.begin(), constraints.end(), [&](const Constraint& c) { return c.family == family; }));
}

bool OptModel::has_quadratic() const {
  for (const auto& c : constraints) {
    if (!c.quadratic.empty()) return true;
  }
  for (const auto& o : objectives) {
    if (!o.quadratic.empty()) return true;
  }
  return false;
}

void check_model(const OptModel& m) {
  std::set<std::string> names;
  for (const auto& v : m.variables) {
    if (!names.insert(v.name).second) throw std::invalid_argument("duplicate variable " + v.name);
    if (!std::isfinite(v.lower) || !std::isfinite(v.upper) || v.lower > v.upper) {
      throw std::invalid_argument("bad bounds on " + v.name);
    }
  }
  const auto n = m.variables.size();
  auto check_terms = [&](const std::vector<LinearTerm>& lin, const std::vector<QuadTerm>& quad,
                         const std::string& where) {
    for (const auto& t : lin) {
      if (t.var >= n) throw std::invalid_argument("dangling variable in " + where);
    }
    for (const auto& q : quad) {
      if (q.left >= n || q.right >= n) throw std::invalid_argument("dangling variable in " + where);
    }
  };
  std::set<std::string> rows;
  for (const auto& c : m.constraints) {
    if (!rows.insert(c.name).second) throw std::invalid_argument("duplicate constraint " + c.name);
    check_terms(c.linear, c.quadratic, c.name);
  }
  for (const auto& o : m.objectives) {
    check_terms(o.linear, o.quadratic, o.name);
    if (o.fraction) {
      check_terms(o.fraction->numerator, {}, o.name);
      check_terms(o.fraction->denominator, {}, o.name);
    }
  }
}

StateSet terminal_states(const ProductMdp& p, StateId t, const EncodingConfig& cfg) {
  const Mdp& m = p.product;
  StateSet out(m.num_states(), false);
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (p.base_state[s] == t) out[s] = true;
    if (cfg.detect_terminals) {
      auto cs = m.choices(s);
      if (cs.size() == 1 && cs[0].outcomes.size() == 1 && cs[0].outcomes[0].next == s) out[s] = true;
    }
    for (const auto& name : cfg.extra_terminals) {
      if (p.base->state_name(p.base_state[s]) == name) out[s] = true;
    }
  }
  return out;
}

namespace {

/// Variable layout shared by the three encodings.
struct Layout {
  std::vector<std::vector<std::optional<std::size_t>>> choice;  // [state][choice]
  std::vector<std::size_t> top, bot, ord;
  StateSet is_top, is_bot, terminal, reaches_top, reaches_bot;
};

Layout declare(OptModel& model, const ProductMdp& p, StateId t, const EncodingConfig& cfg,
               Domain strategy_domain) {
  check_config(cfg);
  if (t >= p.base->num_states()) throw ModelError("unknown target state");
  const Mdp& m = p.product;
  const auto n = m.num_states();
  Layout l;
  l.is_top = p.targets_visited(t);
  l.is_bot = p.targets_bypassed(t);
  l.terminal = terminal_states(p, t, cfg);
  l.reaches_top = reach_set(m, l.is_top);
  l.reaches_bot = reach_set(m, l.is_bot);
  if (!cfg.restrict_to_reachable) {
    l.reaches_top.assign(n, true);
    l.reaches_bot.assign(n, true);
  }

  l.choice.resize(n);
  for (StateId s = 0; s < n; ++s) {
    auto cs = m.choices(s);
    l.choice[s].resize(cs.size());
    if (l.is_top[s] || l.is_bot[s]) continue;
    for (std::size_t c = 0; c < cs.size(); ++c) {
      bool enabled = !p.forced[s] || *p.forced[s] == c;
      double upper = enabled ? 1.0 : 0.0;
      auto v = model.add_variable("p_" + m.state_name(s) + "_" + cs[c].action, strategy_domain,
                                  p.forced[s] && enabled ? 1.0 : 0.0, upper);
      l.choice[s][c] = v;
      model.strategy_vars.push_back({v, s, c});
    }
  }
  for (StateId s = 0; s < n; ++s) {
    bool fixed_one = l.is_top[s];
    bool can = l.reaches_top[s] && !l.is_bot[s];
    l.top.push_back(model.add_variable("reach_top_" + m.state_name(s), Domain::Continuous,
                                       fixed_one ? 1.0 : 0.0, can ? 1.0 : 0.0));
  }
  for (StateId s = 0; s < n; ++s) {
    bool fixed_one = l.is_bot[s];
    bool can = l.reaches_bot[s] && !l.is_top[s];
    l.bot.push_back(model.add_variable("reach_bot_" + m.state_name(s), Domain::Continuous,
                                       fixed_one ? 1.0 : 0.0, can ? 1.0 : 0.0));
  }
  for (StateId s = 0; s < n; ++s) {
    l.ord.push_back(model.add_variable("ord_" + m.state_name(s), Domain::Continuous, -cfg.big_m,
                                       cfg.big_m));
  }
  model.numerator_var = l.top[m.initial()];
  model.denominator_var = l.bot[m.initial()];
  return l;
}

bool is_target(const Layout& l, StateId s) { return l.is_top[s] || l.is_bot[s]; }

void add_common(OptModel& model, const ProductMdp& p, const Layout& l, const EncodingConfig& cfg) {
  const Mdp& m = p.product;
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (is_target(l, s)) continue;
    Constraint c{"sum_" + m.state_name(s), "strategy_sum", {}, {}, Comparator::Equal, 1.0};
    for (const auto& v : l.choice[s]) c.linear.push_back({*v, 1.0});
    model.constraints.push_back(std::move(c));
  }
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (l.is_top[s]) {
      model.constraints.push_back(
          {"one_top_" + m.state_name(s), "target_one", {{l.top[s], 1.0}}, {}, Comparator::Equal, 1.0});
    }
    if (l.is_bot[s]) {
      model.constraints.push_back(
          {"one_bot_" + m.state_name(s), "target_one", {{l.bot[s], 1.0}}, {}, Comparator::Equal, 1.0});
    }
  }
  if (cfg.include_redundant_zero_constraint) {
    for (StateId s = 0; s < m.num_states(); ++s) {
      if (l.is_top[s]) {
        model.constraints.push_back({"zero_bot_" + m.state_name(s), "target_cross_zero",
                                     {{l.bot[s], 1.0}}, {}, Comparator::Equal, 0.0});
      }
      if (l.is_bot[s]) {
        model.constraints.push_back({"zero_top_" + m.state_name(s), "target_cross_zero",
                                     {{l.top[s], 1.0}}, {}, Comparator::Equal, 0.0});
      }
    }
  }
}

void add_min_reach(OptModel& model, const Layout&, const EncodingConfig& cfg) {
  model.constraints.push_back({"min_reach", "min_reach",
                               {{model.denominator_var, 1.0}, {model.numerator_var, 1.0}}, {},
                               Comparator::GreaterEqual, cfg.epsilon});
}

void add_pinned_reach(OptModel& model, double p_star) {
  model.constraints.push_back({"pinned_reach", "pinned_reach",
                               {{model.denominator_var, 1.0}, {model.numerator_var, 1.0}}, {},
                               Comparator::Equal, p_star});
}

/// Quadratic Bellman equalities p_{s,t} = sum_a sum_s' p_sa * delta * p_{s',t}.
void add_bellman(OptModel& model, const ProductMdp& p, const Layout& l) {
  const Mdp& m = p.product;
  for (int side = 0; side < 2; ++side) {
    const auto& reach = side == 0 ? l.top : l.bot;
    const auto& reaches = side == 0 ? l.reaches_top : l.reaches_bot;
    for (StateId s = 0; s < m.num_states(); ++s) {
      if (is_target(l, s) || !reaches[s]) continue;
      Constraint c{std::string(side == 0 ? "bellman_top_" : "bellman_bot_") + m.state_name(s),
                   "bellman", {{reach[s], 1.0}}, {}, Comparator::Equal, 0.0};
      auto cs = m.choices(s);
      for (std::size_t a = 0; a < cs.size(); ++a) {
        for (const auto& o : cs[a].outcomes) {
          if (!reaches[o.next]) continue;
          c.quadratic.push_back({*l.choice[s][a], reach[o.next], -o.probability});
        }
      }
      model.constraints.push_back(std::move(c));
    }
  }
}

ObjectiveFn importance_objective(const OptModel& model, Sense sense) {
  // Maximization is expressed as minimizing the negated objective.
  ObjectiveFn f;
  f.name = "importance";
  f.sense = Sense::Min;
  f.linear.push_back({model.numerator_var, sense == Sense::Max ? -1.0 : 1.0});
  return f;
}

void check_p_star(double p_star) {
  if (!(p_star > 0.0)) throw UndefinedImportance("optimal reachability is 0: target unreachable");
  if (p_star > 1.0 + 1e-12) throw std::invalid_argument("p* must be a probability");
}

}  // namespace

OptModel build_qp(const ProductMdp& p, StateId t, Sense sense, const EncodingConfig& cfg) {
  OptModel model;
  model.kind = "qp";
  Layout l = declare(model, p, t, cfg, Domain::Continuous);
  const Mdp& m = p.product;
  add_common(model, p, l, cfg);
  add_min_reach(model, l, cfg);
  add_bellman(model, p, l);
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (l.terminal[s]) continue;
    // ord_s + 1 <= sum_a sum_s' p_sa * delta * ord_s'
    Constraint c{"order_" + m.state_name(s), "ordering", {{l.ord[s], 1.0}}, {}, Comparator::LessEqual, -1.0};
    auto cs = m.choices(s);
    for (std::size_t a = 0; a < cs.size(); ++a) {
      for (const auto& o : cs[a].outcomes) {
        c.quadratic.push_back({*l.choice[s][a], l.ord[o.next], -o.probability});
      }
    }
    model.constraints.push_back(std::move(c));
  }
  ObjectiveFn f;
  f.name = "importance";
  f.sense = Sense::Min;
  Fraction fr;
  fr.numerator.push_back({model.numerator_var, sense == Sense::Max ? -1.0 : 1.0});
  fr.denominator = {{model.denominator_var, 1.0}, {model.numerator_var, 1.0}};
  f.fraction = std::move(fr);
  model.objectives.push_back(std::move(f));
  check_model(model);
  return model;
}

OptModel build_qp_star(const ProductMdp& p, StateId t, double p_star, Sense sense,
                       const EncodingConfig& cfg) {
  check_p_star(p_star);
  OptModel model;
  model.kind = "qpstar";
  Layout l = declare(model, p, t, cfg, Domain::Continuous);
  const Mdp& m = p.product;
  add_common(model, p, l, cfg);
  if (cfg.hierarchical) {
    add_min_reach(model, l, cfg);
  } else {
    add_pinned_reach(model, p_star);
  }
  add_bellman(model, p, l);
  // sum_b p_{s,t_b} >= sum_{s',b} delta(s,a,s') p_{s',t_b} for every action.
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (is_target(l, s)) continue;
    auto cs = m.choices(s);
    for (std::size_t a = 0; a < cs.size(); ++a) {
      Constraint c{"lower_" + m.state_name(s) + "_" + cs[a].action, "action_lower_bound",
                   {{l.top[s], 1.0}, {l.bot[s], 1.0}}, {}, Comparator::GreaterEqual, 0.0};
      for (const auto& o : cs[a].outcomes) {
        c.linear.push_back({l.top[o.next], -o.probability});
        c.linear.push_back({l.bot[o.next], -o.probability});
      }
      model.constraints.push_back(std::move(c));
    }
  }
  if (cfg.hierarchical) {
    ObjectiveFn total;
    total.name = "total_reach";
    total.sense = Sense::Min;
    for (StateId s = 0; s < m.num_states(); ++s) {
      total.linear.push_back({l.top[s], 1.0});
      total.linear.push_back({l.bot[s], 1.0});
    }
    model.objectives.push_back(std::move(total));
  }
  model.objectives.push_back(importance_objective(model, sense));
  check_model(model);
  return model;
}

OptModel build_lp_star(const ProductMdp& p, StateId t, double p_star, Sense sense,
                       const EncodingConfig& cfg) {
  check_p_star(p_star);
  OptModel model;
  model.kind = "lpstar";
  Layout l = declare(model, p, t, cfg, Domain::Binary);
  const Mdp& m = p.product;
  add_common(model, p, l, cfg);
  add_pinned_reach(model, p_star);
  for (int side = 0; side < 2; ++side) {
    const auto& reach = side == 0 ? l.top : l.bot;
    const auto& reaches = side == 0 ? l.reaches_top : l.reaches_bot;
    for (StateId s = 0; s < m.num_states(); ++s) {
      if (is_target(l, s) || !reaches[s]) continue;
      auto cs = m.choices(s);
      for (std::size_t a = 0; a < cs.size(); ++a) {
        // p_{s,t} - sum delta p_{s',t} + p_sa <= 1
        Constraint c{std::string(side == 0 ? "bellman_top_" : "bellman_bot_") + m.state_name(s) +
                         "_" + cs[a].action,
                     "bellman_bigm", {{reach[s], 1.0}}, {}, Comparator::LessEqual, 1.0};
        for (const auto& o : cs[a].outcomes) {
          if (reaches[o.next]) c.linear.push_back({reach[o.next], -o.probability});
        }
        c.linear.push_back({*l.choice[s][a], 1.0});
        model.constraints.push_back(std::move(c));
      }
    }
  }
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (is_target(l, s) || l.terminal[s]) continue;
    auto cs = m.choices(s);
    for (std::size_t a = 0; a < cs.size(); ++a) {
      // ord_s + 1 <= sum delta ord_s' + M - M p_sa
      Constraint c{"order_" + m.state_name(s) + "_" + cs[a].action, "ordering_bigm",
                   {{l.ord[s], 1.0}}, {}, Comparator::LessEqual, cfg.big_m - 1.0};
      for (const auto& o : cs[a].outcomes) c.linear.push_back({l.ord[o.next], -o.probability});
      c.linear.push_back({*l.choice[s][a], cfg.big_m});
      model.constraints.push_back(std::move(c));
    }
  }
  model.objectives.push_back(importance_objective(model, sense));
  check_model(model);
  return model;
}

OptModel pin_denominator(OptModel m, double value) {
  if (!(value > 0.0)) throw std::invalid_argument("denominator must be positive");
  bool pinned = false;
  for (auto& f : m.objectives) {
    if (!f.fraction) continue;
    Constraint c{"pinned_reach", "pinned_reach", f.fraction->denominator, {}, Comparator::Equal, value};
    if (!pinned) m.constraints.push_back(std::move(c));
    pinned = true;
    for (auto t : f.fraction->numerator) f.linear.push_back({t.var, t.coef / value});
    f.fraction.reset();
  }
  if (!pinned) throw std::invalid_argument("model has no fractional objective to pin");
  check_model(m);
  return m;
}

void precheck_feasible(const ProductMdp& p, StateId t, const EncodingConfig& cfg) {
  check_config(cfg);
  StateSet targets = p.targets_visited(t);
  StateSet bot = p.targets_bypassed(t);
  for (std::size_t s = 0; s < targets.size(); ++s) targets[s] = targets[s] || bot[s];
  double best = max_reach_prob(p.product, targets).p_star;
  if (best < cfg.epsilon) {
    throw UndefinedImportance("encoding infeasible: no strategy reaches '" + p.base->state_name(t) +
                              "' with probability >= epsilon");
  }
}

std::string sanitize_name(std::string_view name) {
  std::string out(name);
  for (char& c : out) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) c = '_';
  }
  return out;
}

namespace {

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Appends tokens, breaking lines before they get long.
class LineWriter {
 public:
  explicit LineWriter(std::string& out) : out_(out) {}
  void start(const std::string& head) {
    out_ += head;
    width_ = head.size();
  }
  void token(const std::string& t) {
    if (width_ + t.size() + 1 > 200) {
      out_ += "\n  ";
      width_ = 2;
    } else {
      out_ += ' ';
      ++width_;
    }
    out_ += t;
    width_ += t.size();
  }
  void end() { out_ += '\n'; }

 private:
  std::string& out_;
  std::size_t width_ = 0;
};

void write_linear(LineWriter& w, const std::vector<LinearTerm>& terms,
                  const std::vector<std::string>& names, bool& first) {
  for (const auto& t : terms) {
    if (t.coef == 0.0) continue;
    std::string sign = t.coef < 0 ? "-" : (first ? "" : "+");
    double mag = std::abs(t.coef);
    std::string s = sign.empty() ? "" : sign + " ";
    if (mag != 1.0) s += number(mag) + " ";
    w.token(s + names[t.var]);
    first = false;
  }
}

void write_quadratic(LineWriter& w, const std::vector<QuadTerm>& terms,
                     const std::vector<std::string>& names, bool& first) {
  if (terms.empty()) return;
  w.token(first ? "[" : "+ [");
  bool inner = true;
  for (const auto& q : terms) {
    std::string sign = q.coef < 0 ? "-" : (inner ? "" : "+");
    std::string s = sign.empty() ? "" : sign + " ";
    double mag = std::abs(q.coef);
    if (mag != 1.0) s += number(mag) + " ";
    w.token(s + names[q.left] + " * " + names[q.right]);
    inner = false;
  }
  w.token("]");
  first = false;
}

const char* comparator(Comparator c) {
  switch (c) {
    case Comparator::LessEqual:
      return "<=";
    case Comparator::Equal:
      return "=";
    case Comparator::GreaterEqual:
      return ">=";
  }
  return "=";
}

}  // namespace

std::string serialize_lp(const OptModel& m) {
  check_model(m);
  if (m.objectives.empty()) throw std::invalid_argument("model has no objective");
  for (const auto& f : m.objectives) {
    if (f.fraction) {
      throw std::invalid_argument(
          "fractional objective cannot be written in LP format; pin the denominator first "
          "(e.g. use the reachability-optimal encodings with p*)");
    }
    if (!f.quadratic.empty()) throw std::invalid_argument("quadratic objectives are not supported");
  }
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& v : m.variables) {
    names.push_back(sanitize_name(v.name));
    if (!seen.insert(names.back()).second) {
      throw std::invalid_argument("variable name collision after sanitization: " + names.back());
    }
  }
  std::set<std::string> rows;
  for (const auto& c : m.constraints) {
    if (!rows.insert(sanitize_name(c.name)).second) {
      throw std::invalid_argument("constraint name collision after sanitization: " + c.name);
    }
  }

  std::string out;
  LineWriter w(out);
  if (!m.kind.empty()) out += "\\ mdpattr " + m.kind + " encoding\n";
  for (std::size_t i = 1; i < m.objectives.size(); ++i) {
    // Secondary objectives of the hierarchy are recorded but inactive.
    const auto& f = m.objectives[i];
    out += "\\ objective " + std::to_string(i + 1) + " (optimized after objective " +
           std::to_string(i) + "): " + (f.sense == Sense::Min ? "minimize" : "maximize");
    std::string line;
    LineWriter cw(line);
    cw.start("\\  " + f.name + ":");
    bool first = true;
    write_linear(cw, f.linear, names, first);
    out += "\n" + line + "\n";
  }
  const auto& obj = m.objectives.front();
  out += obj.sense == Sense::Min ? "Minimize\n" : "Maximize\n";
  w.start(" " + sanitize_name(obj.name) + ":");
  bool first = true;
  write_linear(w, obj.linear, names, first);
  if (first) w.token("0");
  w.end();

  out += "Subject To\n";
  for (const auto& c : m.constraints) {
    w.start(" " + sanitize_name(c.name) + ":");
    first = true;
    write_linear(w, c.linear, names, first);
    write_quadratic(w, c.quadratic, names, first);
    if (first) w.token("0");
    w.token(comparator(c.cmp));
    w.token(number(c.rhs));
    w.end();
  }

  std::string bounds, binaries, generals;
  for (std::size_t i = 0; i < m.variables.size(); ++i) {
    const auto& v = m.variables[i];
    if (v.domain == Domain::Binary) {
      binaries += " " + names[i] + "\n";
      if (v.lower == 0.0 && v.upper == 1.0) continue;
    }
    if (v.domain == Domain::Integer) generals += " " + names[i] + "\n";
    if (v.lower == v.upper) {
      bounds += " " + names[i] + " = " + number(v.lower) + "\n";
    } else {
      bounds += " " + number(v.lower) + " <= " + names[i] + " <= " + number(v.upper) + "\n";
    }
  }
  if (!bounds.empty()) out += "Bounds\n" + bounds;
  if (!binaries.empty()) out += "Binaries\n" + binaries;
  if (!generals.empty()) out += "Generals\n" + generals;
  out += "End\n";
  return out;
}

nlohmann::json model_metadata(const OptModel& m, const ProductMdp& p, StateId t,
                              const EncodingConfig& cfg, std::optional<double> p_star) {
  using nlohmann::json;
  json meta;
  meta["format"] = "mdpattr-encoding";
  meta["version"] = 1;
  meta["kind"] = m.kind;
  meta["target"] = p.base->state_name(t);
  json pivots = json::array();
  for (StateId s = 0; s < p.pivots.size(); ++s) {
    if (p.pivots[s]) pivots.push_back(p.base->state_name(s));
  }
  meta["pivots"] = pivots;
  meta["config"] = {{"epsilon", cfg.epsilon},
                    {"bigM", cfg.big_m},
                    {"includeRedundantZeroConstraint", cfg.include_redundant_zero_constraint},
                    {"restrictToReachable", cfg.restrict_to_reachable},
                    {"hierarchical", cfg.hierarchical}};
  meta["pStar"] = p_star ? json(*p_star) : json(nullptr);
  meta["numerator"] = sanitize_name(m.variables[m.numerator_var].name);
  meta["denominator"] = sanitize_name(m.variables[m.denominator_var].name);
  json objectives = json::array();
  for (std::size_t i = 0; i < m.objectives.size(); ++i) {
    objectives.push_back({{"name", m.objectives[i].name},
                          {"sense", to_string(m.objectives[i].sense)},
                          {"priority", i},
                          {"activeInFile", i == 0}});
  }
  meta["objectives"] = objectives;
  json vars = json::array();
  for (const auto& sv : m.strategy_vars) {
    const Mdp& base = *p.base;
    vars.push_back({{"var", sanitize_name(m.variables[sv.var].name)},
                    {"state", base.state_name(p.base_state[sv.state])},
                    {"memory", to_string(p.memory[sv.state])},
                    {"action", p.product.choices(sv.state)[sv.choice].action}});
  }
  meta["strategyVariables"] = vars;
  meta["variables"] = m.variables.size();
  meta["constraints"] = m.constraints.size();
  return meta;
}

Assignment parse_solution(std::string_view text) {
  Assignment out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string name, value, extra;
    if (!(ls >> name)) continue;
    if (!(ls >> value) || (ls >> extra)) {
      throw ModelError("solution line " + std::to_string(lineno) + ": expected 'name value'");
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ModelError("solution line " + std::to_string(lineno) + ": bad number '" + value + "'");
    }
    out[name] = v;
  }
  return out;
}

StrategyTable strategy_from_solution(const OptModel& m, const Assignment& a, const ProductMdp& p) {
  const Mdp& prod = p.product;
  std::vector<std::vector<double>> rows(prod.num_states());
  std::vector<bool> covered(prod.num_states(), false);
  for (StateId s = 0; s < prod.num_states(); ++s) rows[s].assign(prod.choices(s).size(), 0.0);
  for (const auto& sv : m.strategy_vars) {
    const auto name = sanitize_name(m.variables[sv.var].name);
    auto it = a.find(name);
    if (it == a.end()) throw ModelError("solution lacks strategy variable " + name);
    double v = it->second;
    if (v < -1e-6 || v > 1.0 + 1e-6) throw ModelError("strategy variable " + name + " out of [0,1]");
    rows[sv.state][sv.choice] = std::clamp(v, 0.0, 1.0);
    covered[sv.state] = true;
  }
  bool binary = true;
  for (StateId s = 0; s < prod.num_states(); ++s) {
    if (!covered[s]) {
      rows[s][0] = 1.0;  // targets: the action is irrelevant
      continue;
    }
    double sum = 0.0;
    for (double w : rows[s]) sum += w;
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ModelError("strategy row of '" + prod.state_name(s) + "' sums to " + number(sum));
    }
    for (double& w : rows[s]) {
      w /= sum;
      if (std::abs(w - std::round(w)) > 1e-6) binary = false;
    }
  }
  if (binary) {
    std::vector<std::size_t> choice(prod.num_states());
    for (StateId s = 0; s < prod.num_states(); ++s) {
      choice[s] = static_cast<std::size_t>(
          std::max_element(rows[s].begin(), rows[s].end()) - rows[s].begin());
    }
    return StrategyTable::deterministic(prod, std::move(choice));
  }
  return StrategyTable::stochastic(std::move(rows));
}

}  // namespace mdpattr
