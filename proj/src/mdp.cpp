#include "mdpattr/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include <Eigen/LU>

namespace mdpattr {

std::optional<StateId> Mdp::find_state(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

StateId Mdp::state(std::string_view name) const {
  if (auto s = find_state(name)) return *s;
  throw ModelError("unknown state '" + std::string(name) + "'");
}

std::optional<std::size_t> Mdp::find_choice(StateId s, std::string_view action) const {
  const auto& cs = choices_.at(s);
  for (std::size_t c = 0; c < cs.size(); ++c) {
    if (cs[c].action == action) return c;
  }
  return std::nullopt;
}

std::size_t Mdp::choice(StateId s, std::string_view action) const {
  if (auto c = find_choice(s, action)) return *c;
  throw ModelError("action '" + std::string(action) + "' is not enabled in state '" +
                   names_.at(s) + "'");
}

double Mdp::probability(StateId s, std::size_t c, StateId next) const {
  double p = 0.0;
  for (const auto& o : choices_.at(s).at(c).outcomes) {
    if (o.next == next) p += o.probability;
  }
  return p;
}

StateId MdpBuilder::add_state(std::string_view name) {
  if (auto s = mdp_.find_state(name)) return *s;
  StateId id = mdp_.names_.size();
  mdp_.names_.emplace_back(name);
  mdp_.index_.emplace(std::string(name), id);
  mdp_.choices_.emplace_back();
  mdp_.labels_.emplace_back();
  return id;
}

void MdpBuilder::set_initial(std::string_view name) {
  mdp_.initial_ = add_state(name);
  initial_set_ = true;
}

void MdpBuilder::add_label(std::string_view state, std::string_view label) {
  auto& ls = mdp_.labels_[add_state(state)];
  if (std::find(ls.begin(), ls.end(), label) == ls.end()) ls.emplace_back(label);
}

void MdpBuilder::add_action(std::string_view name) {
  if (std::find(mdp_.actions_.begin(), mdp_.actions_.end(), name) == mdp_.actions_.end()) {
    mdp_.actions_.emplace_back(name);
  }
}

void MdpBuilder::add_transition(std::string_view from, std::string_view action,
                                std::string_view to, double probability, std::string exact) {
  StateId f = add_state(from);
  StateId t = add_state(to);
  auto& cs = mdp_.choices_[f];
  auto it = std::find_if(cs.begin(), cs.end(), [&](const Choice& c) { return c.action == action; });
  if (it == cs.end()) {
    cs.push_back(Choice{std::string(action), {}});
    it = std::prev(cs.end());
  }
  add_action(action);
  for (auto& o : it->outcomes) {
    if (o.next == t) {
      o.probability += probability;
      o.exact.clear();
      return;
    }
  }
  it->outcomes.push_back(Outcome{t, probability, std::move(exact)});
}

Mdp MdpBuilder::build() const {
  Mdp m = mdp_;
  if (!initial_set_ && m.num_states() > 0) m.initial_ = 0;
  return m;
}

std::vector<Violation> validate(const Mdp& m) {
  std::vector<Violation> out;
  if (m.num_states() == 0) {
    out.push_back({"initial", "", "", "model has no states"});
    return out;
  }
  if (m.initial() >= m.num_states()) {
    out.push_back({"initial", "", "", "initial state is not a state of the model"});
  }
  for (StateId s = 0; s < m.num_states(); ++s) {
    const auto& name = m.state_name(s);
    if (m.choices(s).empty()) {
      out.push_back({"no enabled action", name, "", "state '" + name + "' has no enabled action"});
    }
    for (const auto& c : m.choices(s)) {
      double sum = 0.0;
      for (const auto& o : c.outcomes) {
        if (o.next >= m.num_states()) {
          out.push_back({"unknown state", name, c.action, "transition leads outside the model"});
        }
        if (!(o.probability > 0.0 && o.probability <= 1.0)) {
          std::ostringstream msg;
          msg << "probability " << o.probability << " outside (0, 1]";
          out.push_back({"probability range", name, c.action, msg.str()});
        }
        sum += o.probability;
      }
      if (std::abs(sum - 1.0) > kDistributionTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "distribution of (" << name << ", " << c.action << ") sums to " << sum;
        out.push_back({"distribution sum", name, c.action, msg.str()});
      }
    }
  }
  return out;
}

Mdp normalized(const Mdp& m) {
  auto violations = validate(m);
  if (!violations.empty()) throw ModelError(violations.front().message);
  MdpBuilder b;
  for (StateId s = 0; s < m.num_states(); ++s) b.add_state(m.state_name(s));
  b.set_initial(m.state_name(m.initial()));
  for (const auto& a : m.actions()) b.add_action(a);
  for (StateId s = 0; s < m.num_states(); ++s) {
    for (const auto& l : m.labels(s)) b.add_label(m.state_name(s), l);
    for (const auto& c : m.choices(s)) {
      double sum = 0.0;
      for (const auto& o : c.outcomes) sum += o.probability;
      for (const auto& o : c.outcomes) {
        b.add_transition(m.state_name(s), c.action, m.state_name(o.next), o.probability / sum,
                         o.exact);
      }
    }
  }
  return b.build();
}

namespace {

std::vector<std::vector<StateId>> predecessors(const Mdp& m) {
  std::vector<std::vector<StateId>> pred(m.num_states());
  for (StateId s = 0; s < m.num_states(); ++s) {
    for (const auto& c : m.choices(s)) {
      for (const auto& o : c.outcomes) {
        if (o.probability > 0.0) pred[o.next].push_back(s);
      }
    }
  }
  for (auto& p : pred) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
  }
  return pred;
}

}  // namespace

StateSet reach_set(const Mdp& m, const StateSet& targets) {
  auto pred = predecessors(m);
  StateSet seen(m.num_states(), false);
  std::deque<StateId> queue;
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (targets.at(s)) {
      seen[s] = true;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (StateId p : pred[s]) {
      if (!seen[p]) {
        seen[p] = true;
        queue.push_back(p);
      }
    }
  }
  return seen;
}

StateSet reach_set(const Mdp& m, StateId t) {
  if (t >= m.num_states()) throw ModelError("unknown target state");
  return reach_set(m, make_set(m.num_states(), {t}));
}

StateSet forward_reachable(const Mdp& m, StateId from) {
  StateSet seen(m.num_states(), false);
  std::deque<StateId> queue{from};
  seen.at(from) = true;
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (const auto& c : m.choices(s)) {
      for (const auto& o : c.outcomes) {
        if (o.probability > 0.0 && !seen[o.next]) {
          seen[o.next] = true;
          queue.push_back(o.next);
        }
      }
    }
  }
  return seen;
}

StrategyTable StrategyTable::deterministic(const Mdp& m, std::vector<std::size_t> choice) {
  if (choice.size() != m.num_states()) throw ModelError("strategy size does not match model");
  StrategyTable t;
  t.kind_ = Kind::Deterministic;
  t.weights_.resize(choice.size());
  for (StateId s = 0; s < choice.size(); ++s) {
    auto n = m.choices(s).size();
    if (choice[s] >= n) {
      throw ModelError("strategy chooses a disabled action in state '" + m.state_name(s) + "'");
    }
    t.weights_[s].assign(n, 0.0);
    t.weights_[s][choice[s]] = 1.0;
  }
  return t;
}

StrategyTable StrategyTable::stochastic(std::vector<std::vector<double>> weights) {
  StrategyTable t;
  t.weights_ = std::move(weights);
  bool one_hot = true;
  for (const auto& row : t.weights_) {
    auto ones = std::count(row.begin(), row.end(), 1.0);
    auto zeros = std::count(row.begin(), row.end(), 0.0);
    if (ones != 1 || ones + zeros != static_cast<std::ptrdiff_t>(row.size())) one_hot = false;
  }
  t.kind_ = one_hot ? Kind::Deterministic : Kind::Stochastic;
  return t;
}

StrategyTable StrategyTable::uniform(const Mdp& m) {
  std::vector<std::vector<double>> w(m.num_states());
  for (StateId s = 0; s < m.num_states(); ++s) {
    auto n = m.choices(s).size();
    w[s].assign(n, 1.0 / static_cast<double>(n));
  }
  return stochastic(std::move(w));
}

std::size_t StrategyTable::action(StateId s) const {
  const auto& row = weights_.at(s);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

void check_strategy(const Mdp& m, const StrategyTable& sigma) {
  if (sigma.num_states() != m.num_states()) {
    throw ModelError("strategy covers " + std::to_string(sigma.num_states()) +
                     " states, model has " + std::to_string(m.num_states()));
  }
  for (StateId s = 0; s < m.num_states(); ++s) {
    auto row = sigma.row(s);
    if (row.size() != m.choices(s).size()) {
      throw ModelError("strategy row of state '" + m.state_name(s) +
                       "' references actions that are not enabled");
    }
    double sum = 0.0;
    for (double w : row) {
      if (w < 0.0) throw ModelError("negative strategy weight in state '" + m.state_name(s) + "'");
      sum += w;
    }
    if (std::abs(sum - 1.0) > kDistributionTolerance) {
      throw ModelError("strategy row of state '" + m.state_name(s) + "' does not sum to 1");
    }
  }
}

StrategyTable strategy_from_names(
    const Mdp& m, const std::vector<std::pair<std::string, std::string>>& choices) {
  std::vector<std::size_t> pick(m.num_states(), 0);
  for (const auto& [state, action] : choices) {
    StateId s = m.state(state);
    pick[s] = m.choice(s, action);
  }
  return StrategyTable::deterministic(m, std::move(pick));
}

MarkovChain induce_chain(const Mdp& m, const StrategyTable& sigma) {
  check_strategy(m, sigma);
  const auto n = static_cast<Eigen::Index>(m.num_states());
  MarkovChain c;
  c.initial = m.initial();
  c.transitions = Eigen::MatrixXd::Zero(n, n);
  for (StateId s = 0; s < m.num_states(); ++s) {
    auto cs = m.choices(s);
    for (std::size_t a = 0; a < cs.size(); ++a) {
      double w = sigma.weight(s, a);
      if (w == 0.0) continue;
      for (const auto& o : cs[a].outcomes) {
        c.transitions(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(o.next)) +=
            w * o.probability;
      }
    }
  }
  return c;
}

Eigen::VectorXd reach_probabilities(const MarkovChain& c, const StateSet& goal,
                                    const StateSet& avoid) {
  const auto n = c.num_states();
  if (goal.size() != n || avoid.size() != n) throw std::invalid_argument("state set size mismatch");
  for (StateId s = 0; s < n; ++s) {
    if (goal[s] && avoid[s]) throw std::invalid_argument("goal and avoid sets overlap");
  }
  const auto& P = c.transitions;

  // States that reach the goal with positive probability without touching avoid.
  StateSet relevant(n, false);
  std::deque<StateId> queue;
  for (StateId s = 0; s < n; ++s) {
    if (goal[s]) {
      relevant[s] = true;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    auto s = static_cast<Eigen::Index>(queue.front());
    queue.pop_front();
    for (StateId p = 0; p < n; ++p) {
      if (!relevant[p] && !avoid[p] && P(static_cast<Eigen::Index>(p), s) > 0.0) {
        relevant[p] = true;
        queue.push_back(p);
      }
    }
  }

  std::vector<StateId> unknown;
  std::vector<Eigen::Index> pos(n, -1);
  for (StateId s = 0; s < n; ++s) {
    if (relevant[s] && !goal[s]) {
      pos[s] = static_cast<Eigen::Index>(unknown.size());
      unknown.push_back(s);
    }
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (StateId s = 0; s < n; ++s) {
    if (goal[s]) x(static_cast<Eigen::Index>(s)) = 1.0;
  }
  if (unknown.empty()) return x;

  const auto k = static_cast<Eigen::Index>(unknown.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    auto s = static_cast<Eigen::Index>(unknown[static_cast<std::size_t>(i)]);
    for (StateId j = 0; j < n; ++j) {
      double p = P(s, static_cast<Eigen::Index>(j));
      if (p == 0.0) continue;
      if (goal[j]) {
        b(i) += p;
      } else if (pos[j] >= 0) {
        A(i, pos[j]) -= p;
      }
    }
  }
  Eigen::VectorXd y = A.partialPivLu().solve(b);
  for (Eigen::Index i = 0; i < k; ++i) {
    x(static_cast<Eigen::Index>(unknown[static_cast<std::size_t>(i)])) =
        std::clamp(y(i), 0.0, 1.0);
  }
  return x;
}

double chain_reach_prob(const MarkovChain& c, StateId from, const StateSet& goal,
                        const StateSet& avoid) {
  if (from >= c.num_states()) throw ModelError("unknown state index");
  if (goal.at(from) && !avoid.at(from)) return 1.0;
  if (avoid.at(from) && !goal.at(from)) return 0.0;
  return reach_probabilities(c, goal, avoid)(static_cast<Eigen::Index>(from));
}

double chain_reach_prob(const MarkovChain& c, StateId from, StateId goal) {
  const auto n = c.num_states();
  return chain_reach_prob(c, from, make_set(n, {goal}), StateSet(n, false));
}

double event_prob_s_before_t(const MarkovChain& c, StateId s, StateId t) {
  const auto n = c.num_states();
  if (s >= n || t >= n) throw ModelError("unknown state index");
  if (s == t) return chain_reach_prob(c, c.initial, t);
  double to_s = chain_reach_prob(c, c.initial, make_set(n, {s}), make_set(n, {t}));
  if (to_s == 0.0) return 0.0;
  return to_s * chain_reach_prob(c, s, t);
}

namespace {

// States from which some strategy reaches the targets with probability 1.
StateSet prob1_exists(const Mdp& m, const StateSet& targets) {
  const auto n = m.num_states();
  StateSet u(n, true);
  while (true) {
    StateSet r = targets;
    bool grew = true;
    while (grew) {
      grew = false;
      for (StateId s = 0; s < n; ++s) {
        if (r[s] || !u[s]) continue;
        for (const auto& c : m.choices(s)) {
          bool inside = true;
          bool hits = false;
          for (const auto& o : c.outcomes) {
            if (!u[o.next]) inside = false;
            if (r[o.next]) hits = true;
          }
          if (inside && hits) {
            r[s] = true;
            grew = true;
            break;
          }
        }
      }
    }
    if (r == u) return u;
    u = r;
  }
}

double backup(const Choice& c, const Eigen::VectorXd& v) {
  double q = 0.0;
  for (const auto& o : c.outcomes) q += o.probability * v(static_cast<Eigen::Index>(o.next));
  return q;
}

}  // namespace

ReachResult max_reach_prob(const Mdp& m, const StateSet& targets) {
  const auto n = m.num_states();
  const auto reach = reach_set(m, targets);
  const auto sure = prob1_exists(m, targets);

  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (StateId s = 0; s < n; ++s) {
    if (sure[s]) v(static_cast<Eigen::Index>(s)) = 1.0;
  }
  constexpr double kStop = 1e-12;
  constexpr int kMaxSweeps = 1'000'000;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double delta = 0.0;
    for (StateId s = 0; s < n; ++s) {
      if (sure[s] || !reach[s]) continue;
      double best = 0.0;
      for (const auto& c : m.choices(s)) best = std::max(best, backup(c, v));
      auto i = static_cast<Eigen::Index>(s);
      delta = std::max(delta, std::abs(best - v(i)));
      v(i) = best;
    }
    if (delta < kStop) break;
  }

  // Attractor-style extraction: among near-optimal actions prefer ones that
  // make progress toward an already-settled state, so end components cannot
  // trap the extracted strategy.
  std::vector<std::size_t> pick(n, 0);
  StateSet settled = targets;
  bool changed = true;
  while (changed) {
    changed = false;
    for (StateId s = 0; s < n; ++s) {
      if (settled[s] || !reach[s]) continue;
      auto cs = m.choices(s);
      for (std::size_t a = 0; a < cs.size(); ++a) {
        if (backup(cs[a], v) < v(static_cast<Eigen::Index>(s)) - 1e-9) continue;
        bool progress = std::any_of(cs[a].outcomes.begin(), cs[a].outcomes.end(),
                                    [&](const Outcome& o) { return settled[o.next]; });
        if (progress) {
          pick[s] = a;
          settled[s] = true;
          changed = true;
          break;
        }
      }
    }
  }

  // Policy iteration polish; terminates at a Bellman fixpoint that is also a
  // strategy value, hence the optimum.
  StrategyTable sigma;
  Eigen::VectorXd values;
  for (int round = 0; round < 10'000; ++round) {
    sigma = StrategyTable::deterministic(m, pick);
    auto chain = induce_chain(m, sigma);
    values = reach_probabilities(chain, targets, StateSet(n, false));
    bool improved = false;
    for (StateId s = 0; s < n; ++s) {
      if (targets[s]) continue;
      auto cs = m.choices(s);
      double current = values(static_cast<Eigen::Index>(s));
      for (std::size_t a = 0; a < cs.size(); ++a) {
        double q = backup(cs[a], values);
        if (q > current + 1e-12) {
          current = q;
          pick[s] = a;
          improved = true;
        }
      }
    }
    if (!improved) break;
  }

  ReachResult r;
  r.values = values;
  r.p_star = values(static_cast<Eigen::Index>(m.initial()));
  r.strategy = std::move(sigma);
  return r;
}

ReachResult max_reach_prob(const Mdp& m, StateId t) {
  if (t >= m.num_states()) throw ModelError("unknown target state");
  return max_reach_prob(m, make_set(m.num_states(), {t}));
}

void check_path(const Mdp& m, const PathSpec& path) {
  if (path.states.empty() || path.states.size() != path.choices.size() + 1) {
    throw ModelError("path must alternate states and actions, starting and ending in a state");
  }
  if (path.states.front() != m.initial()) {
    throw ModelError("path must start in the initial state '" + m.state_name(m.initial()) + "'");
  }
  std::vector<StateId> sorted = path.states;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ModelError("path is not simple");
  }
  for (std::size_t i = 0; i < path.choices.size(); ++i) {
    StateId s = path.states[i];
    if (path.choices[i] >= m.choices(s).size()) {
      throw ModelError("path uses an action not enabled in '" + m.state_name(s) + "'");
    }
    if (m.probability(s, path.choices[i], path.states[i + 1]) <= 0.0) {
      throw ModelError("path step from '" + m.state_name(s) + "' to '" +
                       m.state_name(path.states[i + 1]) + "' has probability 0");
    }
  }
}

PathSpec parse_path(const Mdp& m, std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (ch == ',') {
      tokens.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur.push_back(ch);
    }
  }
  tokens.push_back(cur);
  if (tokens.size() % 2 == 0) throw ModelError("path must end in a state");
  PathSpec p;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i % 2 == 0) {
      p.states.push_back(m.state(tokens[i]));
    } else {
      p.choices.push_back(m.choice(p.states.back(), tokens[i]));
    }
  }
  check_path(m, p);
  return p;
}

StateSet make_set(std::size_t n, std::initializer_list<StateId> members) {
  StateSet s(n, false);
  for (StateId m : members) s.at(m) = true;
  return s;
}

}  // namespace mdpattr
