#include "mdpattr/importance.hpp"

#include <algorithm>

namespace mdpattr {

namespace {

double reach_under(const MarkovChain& c, StateId t) {
  return chain_reach_prob(c, c.initial, t);
}

[[noreturn]] void undefined_target(const Mdp& m, StateId t) {
  throw UndefinedImportance("importance undefined for target '" + m.state_name(t) +
                            "': no strategy in the class reaches it");
}

}  // namespace

double state_importance_under(const Mdp& m, const StrategyTable& sigma, StateId s, StateId t) {
  check_strategy(m, sigma);
  MarkovChain c = induce_chain(m, sigma);
  double reach = reach_under(c, t);
  if (reach <= 0.0) undefined_target(m, t);
  return std::clamp(event_prob_s_before_t(c, s, t) / reach, 0.0, 1.0);
}

double absolute_importance_under(const Mdp& m, const StrategyTable& sigma, StateId s, StateId t) {
  check_strategy(m, sigma);
  return event_prob_s_before_t(induce_chain(m, sigma), s, t);
}

double path_importance_under(const Mdp& m, const StrategyTable& sigma, const PathSpec& path,
                             StateId t) {
  check_strategy(m, sigma);
  fix_path_prefix(m, path, t);
  MarkovChain c = induce_chain(m, sigma);
  double reach = reach_under(c, t);
  if (reach <= 0.0) undefined_target(m, t);
  double prefix = 1.0;
  for (std::size_t i = 0; i < path.length(); ++i) {
    StateId s = path.states[i];
    prefix *= sigma.weight(s, path.choices[i]) * m.probability(s, path.choices[i], path.states[i + 1]);
  }
  if (prefix == 0.0) return 0.0;
  return std::clamp(prefix * chain_reach_prob(c, path.last(), t) / reach, 0.0, 1.0);
}

ImportanceInterval importance_bounds(std::shared_ptr<const Mdp> m, const ImportanceQuery& q) {
  const Mdp& base = *m;
  const StateId t = q.target;
  if (t >= base.num_states()) throw ModelError("unknown target state");

  ImportanceInterval out;
  out.normalized = q.normalized;
  out.strategy_class = q.strategy_class;
  out.path_following = std::holds_alternative<PathSpec>(q.subject);

  const double p_star = max_reach_prob(base, t).p_star;
  if (p_star <= 0.0 || (q.strategy_class == StrategyClass::All && p_star < q.epsilon)) {
    undefined_target(base, t);
  }

  // Pivot set for state subjects; nullopt for path subjects.
  std::optional<StateSet> pivots;
  if (const auto* s = std::get_if<StateId>(&q.subject)) {
    if (*s >= base.num_states()) throw ModelError("unknown subject state");
    pivots = make_set(base.num_states(), {*s});
  } else if (const auto* set = std::get_if<StateSet>(&q.subject)) {
    if (set->size() != base.num_states()) throw ModelError("subject set size mismatch");
    pivots = *set;
  }

  bool defaults_to_one = false;
  if (pivots) {
    defaults_to_one = (*pivots)[base.initial()] || (*pivots)[t];
  } else {
    const auto& path = std::get<PathSpec>(q.subject);
    fix_path_prefix(base, path, t);
    defaults_to_one = path.length() == 0;
  }

  std::shared_ptr<const ProductMdp> product;
  if (defaults_to_one) {
    if (q.normalized || t == base.initial()) {
      out.lower = out.upper = 1.0;
      out.basis = "default";
      return out;
    }
    // Every t-reaching run sees the subject: the numerator is Pr(reach t).
    product = std::make_shared<const ProductMdp>(memory_product(m, t));
  } else if (pivots) {
    StateSet fwd = forward_reachable(base, base.initial());
    StateSet back = reach_set(base, t);
    bool relevant = false;
    for (StateId s = 0; s < base.num_states(); ++s) relevant = relevant || ((*pivots)[s] && fwd[s] && back[s]);
    if (!relevant) {
      out.lower = out.upper = 0.0;
      out.basis = "unreachable";
      return out;
    }
    product = std::make_shared<const ProductMdp>(memory_product(m, *pivots));
  } else {
    product = std::make_shared<const ProductMdp>(path_product(m, std::get<PathSpec>(q.subject), t));
  }
  out.product = product;

  SolveOptions opt;
  opt.strategy_class = q.strategy_class;
  opt.absolute = !q.normalized;
  opt.epsilon = q.epsilon;
  opt.p_star = p_star;
  opt.node_limit = q.node_limit;
  opt.time_limit_seconds = q.time_limit_seconds;

  auto run = [&](Sense sense, double& value, StrategyTable& witness, SolveStatus& status) {
    opt.sense = sense;
    SolveResult r = solve_exact(*product, t, opt);
    out.nodes += r.nodes;
    status = r.status;
    if (r.status == SolveStatus::Undefined || r.status == SolveStatus::InfeasibleClass) {
      throw UndefinedImportance(r.message);
    }
    value = r.value;
    witness = r.witness;
  };
  if (q.side != BoundSide::Max) run(Sense::Min, out.lower, out.lower_witness, out.lower_status);
  if (q.side != BoundSide::Min) run(Sense::Max, out.upper, out.upper_witness, out.upper_status);
  if (q.side == BoundSide::Min) out.upper = out.lower;
  if (q.side == BoundSide::Max) out.lower = out.upper;
  return out;
}

ImportanceInterval state_importance_bounds(std::shared_ptr<const Mdp> m, StateId s, StateId t,
                                           StrategyClass c) {
  ImportanceQuery q;
  q.target = t;
  q.subject = s;
  q.strategy_class = c;
  return importance_bounds(std::move(m), q);
}

ImportanceInterval path_importance_bounds(std::shared_ptr<const Mdp> m, const PathSpec& path,
                                          StateId t, StrategyClass c) {
  ImportanceQuery q;
  q.target = t;
  q.subject = path;
  q.strategy_class = c;
  return importance_bounds(std::move(m), q);
}

ImportanceInterval absolute_importance_bounds(std::shared_ptr<const Mdp> m, StateId s, StateId t,
                                              StrategyClass c) {
  ImportanceQuery q;
  q.target = t;
  q.subject = s;
  q.strategy_class = c;
  q.normalized = false;
  return importance_bounds(std::move(m), q);
}

}  // namespace mdpattr
