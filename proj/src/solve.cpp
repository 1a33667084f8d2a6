#include "mdpattr/solve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/LU>

namespace mdpattr {

const char* to_string(StrategyClass c) {
  return c == StrategyClass::All ? "all" : "opt";
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Undefined:
      return "undefined";
    case SolveStatus::InfeasibleClass:
      return "infeasible-class";
    case SolveStatus::Budget:
      return "budget";
  }
  return "?";
}

namespace {

constexpr double kGain = 1e-12;       // strict improvement for policy switches and incumbents
constexpr double kPruneTol = 1e-13;   // parametric test slack
constexpr double kReachOptTol = 1e-8;
constexpr int kStop = -1;

using Assign = std::vector<std::optional<std::size_t>>;

struct Relaxed {
  double value = 0.0;
  std::vector<std::size_t> policy;  // complete deterministic strategy
};

class Context {
 public:
  Context(const ProductMdp& p, StateId t, const SolveOptions& opt)
      : m_(p.product), n_(m_.num_states()) {
    if (t >= p.base->num_states()) throw ModelError("unknown target state");
    top_ = p.targets_visited(t);
    bot_ = p.targets_bypassed(t);
    terminal_.assign(n_, false);
    for (StateId s = 0; s < n_; ++s) terminal_[s] = top_[s] || bot_[s];

    std::vector<std::vector<std::size_t>> base_allowed;
    if (opt.strategy_class == StrategyClass::ReachOptimal) {
      base_allowed = filter_reach_optimal_actions(*p.base, t);
    }
    allowed_.resize(n_);
    for (StateId s = 0; s < n_; ++s) {
      if (p.forced[s]) {
        allowed_[s] = {*p.forced[s]};
      } else if (!base_allowed.empty()) {
        allowed_[s] = base_allowed[p.base_state[s]];
      } else {
        allowed_[s].resize(m_.choices(s).size());
        std::iota(allowed_[s].begin(), allowed_[s].end(), 0);
      }
    }
  }

  const Mdp& mdp() const { return m_; }
  std::size_t size() const { return n_; }
  const StateSet& terminal() const { return terminal_; }
  const std::vector<std::size_t>& allowed(StateId s) const { return allowed_[s]; }

  std::span<const std::size_t> available(const Assign& a, StateId s) const {
    if (a[s]) return {&*a[s], 1};
    return allowed_[s];
  }

  /// Greatest set of non-target states that can stay away from the targets forever.
  StateSet avoid_set(const Assign& a) const {
    StateSet x(n_);
    for (StateId s = 0; s < n_; ++s) x[s] = !terminal_[s];
    bool changed = true;
    while (changed) {
      changed = false;
      for (StateId s = 0; s < n_; ++s) {
        if (!x[s]) continue;
        bool keep = false;
        for (std::size_t c : available(a, s)) {
          const auto& outs = m_.choices(s)[c].outcomes;
          if (std::all_of(outs.begin(), outs.end(), [&](const Outcome& o) { return x[o.next]; })) {
            keep = true;
            break;
          }
        }
        if (!keep) {
          x[s] = false;
          changed = true;
        }
      }
    }
    return x;
  }

  /**
   * Values of a policy for terminal rewards (w_top on visited targets, w_bot on
   * bypassed ones, 0 elsewhere). States that cannot reach a target under the
   * policy get 0, so any policy can be evaluated.
   */
  Eigen::VectorXd evaluate(const std::vector<int>& pol, double w_top, double w_bot) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
    // Backward closure of the targets under the policy.
    StateSet live = terminal_;
    bool changed = true;
    while (changed) {
      changed = false;
      for (StateId s = 0; s < n_; ++s) {
        if (live[s] || pol[s] == kStop) continue;
        for (const auto& o : m_.choices(s)[pol[s]].outcomes) {
          if (live[o.next]) {
            live[s] = true;
            changed = true;
            break;
          }
        }
      }
    }
    std::vector<Eigen::Index> idx(n_, -1);
    Eigen::Index k = 0;
    for (StateId s = 0; s < n_; ++s) {
      if (live[s] && !terminal_[s]) idx[s] = k++;
    }
    for (StateId s = 0; s < n_; ++s) {
      if (top_[s]) v[s] = w_top;
      if (bot_[s]) v[s] = w_bot;
    }
    if (k == 0) return v;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    for (StateId s = 0; s < n_; ++s) {
      if (idx[s] < 0) continue;
      for (const auto& o : m_.choices(s)[pol[s]].outcomes) {
        if (terminal_[o.next]) {
          b[idx[s]] += o.probability * v[o.next];
        } else if (idx[o.next] >= 0) {
          a(idx[s], idx[o.next]) -= o.probability;
        }
      }
    }
    Eigen::VectorXd x = a.partialPivLu().solve(b);
    for (StateId s = 0; s < n_; ++s) {
      if (idx[s] >= 0) v[s] = x[idx[s]];
    }
    return v;
  }

  double backup(StateId s, std::size_t c, const Eigen::VectorXd& v) const {
    double q = 0.0;
    for (const auto& o : m_.choices(s)[c].outcomes) q += o.probability * v[o.next];
    return q;
  }

  /// max over completions of a of the terminal-reward value, by policy iteration.
  Relaxed relax(const Assign& a, double w_top, double w_bot) const {
    StateSet avoid = avoid_set(a);
    std::vector<int> pol(n_, 0);
    for (StateId s = 0; s < n_; ++s) {
      if (terminal_[s]) {
        pol[s] = static_cast<int>(available(a, s)[0]);
      } else {
        pol[s] = avoid[s] ? kStop : static_cast<int>(available(a, s)[0]);
      }
    }
    Eigen::VectorXd v;
    for (int iter = 0; iter < 100000; ++iter) {
      v = evaluate(pol, w_top, w_bot);
      bool changed = false;
      for (StateId s = 0; s < n_; ++s) {
        if (terminal_[s]) continue;
        double best = v[s];
        int best_c = pol[s];
        if (avoid[s] && 0.0 > best + kGain) {
          best = 0.0;
          best_c = kStop;
        }
        for (std::size_t c : available(a, s)) {
          double q = backup(s, c, v);
          if (q > best + kGain) {
            best = q;
            best_c = static_cast<int>(c);
          }
        }
        if (best_c != pol[s]) {
          pol[s] = best_c;
          changed = true;
        }
      }
      if (!changed) break;
    }
    Relaxed r;
    r.value = v[m_.initial()];
    r.policy.resize(n_);
    for (StateId s = 0; s < n_; ++s) {
      if (pol[s] != kStop) {
        r.policy[s] = static_cast<std::size_t>(pol[s]);
        continue;
      }
      // Realize "stop" by an action that stays inside the avoid set.
      r.policy[s] = available(a, s)[0];
      for (std::size_t c : available(a, s)) {
        const auto& outs = m_.choices(s)[c].outcomes;
        if (std::all_of(outs.begin(), outs.end(), [&](const Outcome& o) { return avoid[o.next]; })) {
          r.policy[s] = c;
          break;
        }
      }
    }
    return r;
  }

  ProductValue exact(const std::vector<std::size_t>& policy) const {
    std::vector<int> pol(policy.begin(), policy.end());
    ProductValue out;
    out.numerator = evaluate(pol, 1.0, 0.0)[m_.initial()];
    out.reach = out.numerator + evaluate(pol, 0.0, 1.0)[m_.initial()];
    return out;
  }

 private:
  const Mdp& m_;
  std::size_t n_;
  StateSet top_, bot_, terminal_;
  std::vector<std::vector<std::size_t>> allowed_;
};

double resolve_p_star(const ProductMdp& p, StateId t, const SolveOptions& opt) {
  if (opt.p_star) return *opt.p_star;
  return max_reach_prob(*p.base, t).p_star;
}

double feasibility_floor(double p_star, const SolveOptions& opt) {
  return opt.strategy_class == StrategyClass::All ? opt.epsilon : p_star - kReachOptTol;
}

class Search {
 public:
  Search(const ProductMdp& p, StateId t, const SolveOptions& opt)
      : ctx_(p, t, opt), opt_(opt), forced_path_(std::any_of(p.forced.begin(), p.forced.end(),
                                                             [](const auto& f) { return f.has_value(); })) {
    p_star_ = resolve_p_star(p, t, opt);
    floor_ = feasibility_floor(p_star_, opt);
  }

  SolveResult run() {
    start_ = std::chrono::steady_clock::now();
    SolveResult res;
    const std::size_t n = ctx_.size();
    Assign root(n);

    if (p_star_ <= 0.0 || (opt_.strategy_class == StrategyClass::All && p_star_ < opt_.epsilon)) {
      res.status = SolveStatus::Undefined;
      res.message = "no strategy reaches the target with probability >= epsilon";
      return finish(res);
    }
    Relaxed reach = ctx_.relax(root, 1.0, 1.0);
    if (reach.value < floor_) {
      if (opt_.strategy_class == StrategyClass::All || forced_path_) {
        res.status = SolveStatus::Undefined;
        res.message = opt_.strategy_class == StrategyClass::All
                          ? "no strategy reaches the target with probability >= epsilon"
                          : "no reachability-optimal strategy follows the path";
      } else {
        res.status = SolveStatus::InfeasibleClass;
        res.message = "optimal reachability not attainable by locally optimal actions";
      }
      return finish(res);
    }

    plan_branching(root);
    consider(reach.policy);
    if (opt_.prune) dinkelbach(root);

    budget_hit_ = false;
    dfs(root, 0);

    if (!incumbent_) {
      res.status = budget_hit_ ? SolveStatus::Budget : SolveStatus::InfeasibleClass;
      res.message = budget_hit_ ? "search budget exhausted before any feasible strategy"
                                : "no deterministic strategy satisfies the class constraint";
      res.value = std::numeric_limits<double>::quiet_NaN();
      return finish(res);
    }
    res.status = budget_hit_ ? SolveStatus::Budget : SolveStatus::Optimal;
    if (budget_hit_) res.message = "search budget exhausted; value is the best found";
    res.value = best_value_;
    res.numerator = best_eval_.numerator;
    res.reach = best_eval_.reach;
    res.witness = StrategyTable::deterministic(ctx_.mdp(), *incumbent_);
    return finish(res);
  }

 private:
  SolveResult& finish(SolveResult& r) {
    r.nodes = nodes_;
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return r;
  }

  bool maximize() const { return opt_.sense == Sense::Max; }

  double objective(const ProductValue& v) const {
    if (opt_.absolute) return v.numerator;
    return v.reach > 0.0 ? v.numerator / v.reach : 0.0;
  }

  bool feasible(const ProductValue& v) const {
    if (opt_.strategy_class == StrategyClass::All) return v.reach >= opt_.epsilon;
    return std::abs(v.reach - p_star_) <= kReachOptTol;
  }

  /// Evaluates a complete strategy and keeps it if strictly better than the incumbent.
  bool consider(const std::vector<std::size_t>& policy) {
    ProductValue v = ctx_.exact(policy);
    if (!feasible(v)) return false;
    double obj = objective(v);
    bool better = !incumbent_ || (maximize() ? obj > best_value_ + kGain : obj < best_value_ - kGain);
    if (!better) return false;
    incumbent_ = policy;
    best_value_ = obj;
    best_eval_ = v;
    return true;
  }

  /// Terminal rewards whose relaxed maximum is <= 0 iff no completion beats the incumbent.
  void parametric(double& w_top, double& w_bot, double& offset) const {
    const double lambda = best_value_;
    offset = 0.0;
    if (opt_.absolute) {
      w_top = maximize() ? 1.0 : -1.0;
      w_bot = 0.0;
      offset = maximize() ? -lambda : lambda;
    } else if (maximize()) {
      w_top = 1.0 - lambda;
      w_bot = -lambda;
    } else {
      w_top = lambda - 1.0;
      w_bot = lambda;
    }
  }

  void dinkelbach(const Assign& root) {
    for (int i = 0; i < 100 && incumbent_; ++i) {
      double wt, wb, off;
      parametric(wt, wb, off);
      Relaxed r = ctx_.relax(root, wt, wb);
      if (r.value + off <= kPruneTol) break;
      if (!consider(r.policy)) break;
    }
  }

  void plan_branching(Assign& root) {
    const Mdp& m = ctx_.mdp();
    const std::size_t n = ctx_.size();
    // Forward reachability and backward reach of the targets over allowed actions.
    StateSet fwd(n, false);
    std::vector<StateId> stack{m.initial()};
    fwd[m.initial()] = true;
    while (!stack.empty()) {
      StateId s = stack.back();
      stack.pop_back();
      if (ctx_.terminal()[s]) continue;
      for (std::size_t c : ctx_.allowed(s)) {
        for (const auto& o : m.choices(s)[c].outcomes) {
          if (!fwd[o.next]) {
            fwd[o.next] = true;
            stack.push_back(o.next);
          }
        }
      }
    }
    StateSet back = ctx_.terminal();
    bool changed = true;
    while (changed) {
      changed = false;
      for (StateId s = 0; s < n; ++s) {
        if (back[s]) continue;
        for (std::size_t c : ctx_.allowed(s)) {
          for (const auto& o : m.choices(s)[c].outcomes) {
            if (back[o.next]) back[s] = true;
          }
        }
        if (back[s]) changed = true;
      }
    }

    // Uniform strategy over allowed actions, targets absorbing.
    MarkovChain uniform;
    uniform.initial = m.initial();
    uniform.transitions = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (StateId s = 0; s < n; ++s) {
      if (ctx_.terminal()[s]) {
        uniform.transitions(s, s) = 1.0;
        continue;
      }
      const auto& al = ctx_.allowed(s);
      for (std::size_t c : al) {
        for (const auto& o : m.choices(s)[c].outcomes) {
          uniform.transitions(s, o.next) += o.probability / static_cast<double>(al.size());
        }
      }
    }

    std::vector<std::pair<double, StateId>> order;
    for (StateId s = 0; s < n; ++s) {
      bool relevant = fwd[s] && back[s] && !ctx_.terminal()[s] && ctx_.allowed(s).size() >= 2;
      if (!relevant) {
        root[s] = ctx_.allowed(s)[0];
        continue;
      }
      double visit = chain_reach_prob(uniform, m.initial(), make_set(n, {s}), ctx_.terminal());
      order.emplace_back(visit, s);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (const auto& [visit, s] : order) order_.push_back(s);
  }

  bool out_of_budget() {
    if (budget_hit_) return true;
    if (nodes_ >= opt_.node_limit) budget_hit_ = true;
    if ((nodes_ & 0xff) == 0) {
      double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
      if (elapsed > opt_.time_limit_seconds) budget_hit_ = true;
    }
    return budget_hit_;
  }

  void dfs(Assign& a, std::size_t depth) {
    if (out_of_budget()) return;
    ++nodes_;
    std::optional<std::size_t> hint;
    if (opt_.prune) {
      Relaxed r = ctx_.relax(a, 1.0, 1.0);
      if (r.value < floor_) return;
      consider(r.policy);
      if (depth < order_.size()) hint = r.policy[order_[depth]];
      if (incumbent_) {
        double wt, wb, off;
        parametric(wt, wb, off);
        Relaxed q = ctx_.relax(a, wt, wb);
        if (q.value + off <= kPruneTol) return;
        if (consider(q.policy)) {
          parametric(wt, wb, off);
          // The incumbent moved; the node may now be dominated.
          if (ctx_.relax(a, wt, wb).value + off <= kPruneTol) return;
        }
        if (depth < order_.size()) hint = q.policy[order_[depth]];
      }
    }
    if (depth == order_.size()) {
      std::vector<std::size_t> policy(a.size());
      for (StateId s = 0; s < a.size(); ++s) policy[s] = *a[s];
      consider(policy);
      return;
    }
    StateId s = order_[depth];
    std::vector<std::size_t> children(ctx_.allowed(s).begin(), ctx_.allowed(s).end());
    if (hint) {
      auto it = std::find(children.begin(), children.end(), *hint);
      if (it != children.end()) std::rotate(children.begin(), it, it + 1);
    }
    for (std::size_t c : children) {
      a[s] = c;
      dfs(a, depth + 1);
      a[s].reset();
      if (budget_hit_) return;
    }
  }

  Context ctx_;
  SolveOptions opt_;
  bool forced_path_;
  double p_star_ = 0.0;
  double floor_ = 0.0;
  std::vector<StateId> order_;
  std::optional<std::vector<std::size_t>> incumbent_;
  double best_value_ = 0.0;
  ProductValue best_eval_;
  std::uint64_t nodes_ = 0;
  bool budget_hit_ = false;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

ProductValue evaluate_product(const ProductMdp& p, StateId t, const StrategyTable& sigma) {
  check_strategy(p.product, sigma);
  MarkovChain c = induce_chain(p.product, sigma);
  StateSet top = p.targets_visited(t);
  StateSet bot = p.targets_bypassed(t);
  ProductValue v;
  v.numerator = reach_probabilities(c, top, bot)[c.initial];
  v.reach = v.numerator + reach_probabilities(c, bot, top)[c.initial];
  return v;
}

SolveResult solve_exact(const ProductMdp& p, StateId t, const SolveOptions& opt) {
  if (!(opt.epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  Search search(p, t, opt);
  return search.run();
}

double optimistic_bound(const SearchNode& node, const ProductMdp& p, StateId t,
                        const SolveOptions& opt) {
  Context ctx(p, t, opt);
  if (node.assignment.size() != ctx.size()) throw std::invalid_argument("assignment size mismatch");
  for (StateId s = 0; s < ctx.size(); ++s) {
    if (!node.assignment[s]) continue;
    const auto& al = ctx.allowed(s);
    if (std::find(al.begin(), al.end(), *node.assignment[s]) == al.end()) {
      throw ModelError("assignment uses a disallowed action at '" + ctx.mdp().state_name(s) + "'");
    }
  }
  const double floor = feasibility_floor(resolve_p_star(p, t, opt), opt);
  const auto& a = node.assignment;
  double n_max = ctx.relax(a, 1.0, 0.0).value;
  double n_min = -ctx.relax(a, -1.0, 0.0).value;
  double d_max = ctx.relax(a, 1.0, 1.0).value;
  double d_min = -ctx.relax(a, -1.0, -1.0).value;
  if (opt.absolute) return opt.sense == Sense::Max ? n_max : n_min;
  if (opt.sense == Sense::Max) return std::min(1.0, n_max / std::max(d_min, floor));
  if (d_max < floor) return 1.0;
  return n_min / d_max;
}

std::vector<std::vector<std::size_t>> filter_reach_optimal_actions(const Mdp& m, StateId t) {
  ReachResult r = max_reach_prob(m, t);
  std::vector<std::vector<std::size_t>> out(m.num_states());
  for (StateId s = 0; s < m.num_states(); ++s) {
    auto cs = m.choices(s);
    for (std::size_t c = 0; c < cs.size(); ++c) {
      double q = 0.0;
      for (const auto& o : cs[c].outcomes) q += o.probability * r.values[o.next];
      if (s == t || q >= r.values[s] - 1e-9) out[s].push_back(c);
    }
  }
  return out;
}

Discrepancy cross_check_external(const ProductMdp& p, StateId t, const OptModel& model,
                                 const Assignment& solution, const SolveOptions& opt) {
  Discrepancy d;
  StrategyTable sigma;
  try {
    sigma = strategy_from_solution(model, solution, p);
  } catch (const std::exception& e) {
    d.error = e.what();
    d.flagged = true;
    return d;
  }
  auto value_of = [&](std::size_t var) -> double {
    auto it = solution.find(sanitize_name(model.variables.at(var).name));
    if (it == solution.end()) throw ModelError("solution lacks " + model.variables.at(var).name);
    return it->second;
  };
  try {
    double num = value_of(model.numerator_var);
    double den = num + value_of(model.denominator_var);
    d.external_objective = opt.absolute ? num : (den > 0.0 ? num / den : 0.0);
  } catch (const std::exception& e) {
    d.error = e.what();
    d.flagged = true;
    return d;
  }
  ProductValue v = evaluate_product(p, t, sigma);
  d.recomputed = opt.absolute ? v.numerator : (v.reach > 0.0 ? v.numerator / v.reach : 0.0);
  d.recompute_gap = std::abs(d.external_objective - d.recomputed);
  SolveResult best = solve_exact(p, t, opt);
  if (best.status == SolveStatus::Optimal) {
    d.exact_optimum = best.value;
    d.optimum_gap = std::abs(d.external_objective - best.value);
  }
  d.flagged = d.recompute_gap > kAgreementTolerance || d.optimum_gap > kAgreementTolerance;
  return d;
}

}  // namespace mdpattr
