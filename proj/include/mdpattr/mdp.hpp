#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace mdpattr {

using StateId = std::size_t;
using StateSet = std::vector<bool>;

/// Thrown for malformed models, unknown identifiers and invalid strategies.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an importance value is not defined (no strategy reaches the target).
class UndefinedImportance : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kDistributionTolerance = 1e-9;

struct Outcome {
  StateId next = 0;
  double probability = 0.0;
  /// Exact literal the probability was given as ("1/3", "0.95"); empty if unknown.
  std::string exact;
};

/// An action enabled at a particular state together with its successor distribution.
struct Choice {
  std::string action;
  std::vector<Outcome> outcomes;
};

/**
 * Finite MDP with string identifiers. Dense indices follow insertion order.
 *
 * Action names are unique per state only; the same name may label
 * different distributions at different states.
 */
class Mdp {
 public:
  Mdp() = default;

  std::size_t num_states() const { return names_.size(); }
  StateId initial() const { return initial_; }

  const std::string& state_name(StateId s) const { return names_.at(s); }
  const std::vector<std::string>& state_names() const { return names_; }
  std::optional<StateId> find_state(std::string_view name) const;
  /// Throws ModelError for unknown names.
  StateId state(std::string_view name) const;

  std::span<const Choice> choices(StateId s) const { return choices_.at(s); }
  std::optional<std::size_t> find_choice(StateId s, std::string_view action) const;
  std::size_t choice(StateId s, std::string_view action) const;

  /// Ordered set of all action names, in first-use order.
  const std::vector<std::string>& actions() const { return actions_; }
  const std::vector<std::string>& labels(StateId s) const { return labels_.at(s); }

  /// Probability of moving from s to next under choice c (0 if not a successor).
  double probability(StateId s, std::size_t c, StateId next) const;

 private:
  friend class MdpBuilder;

  std::vector<std::string> names_;
  std::unordered_map<std::string, StateId> index_;
  std::vector<std::vector<Choice>> choices_;
  std::vector<std::vector<std::string>> labels_;
  std::vector<std::string> actions_;
  StateId initial_ = 0;
};

class MdpBuilder {
 public:
  /// Adds a state if not present; returns its index.
  StateId add_state(std::string_view name);
  void set_initial(std::string_view name);
  /// Declares an action name so the action list keeps declaration order.
  void add_action(std::string_view name);
  void add_label(std::string_view state, std::string_view label);
  /// Adds one outcome to (from, action), creating the action if needed.
  void add_transition(std::string_view from, std::string_view action, std::string_view to,
                      double probability, std::string exact = {});
  Mdp build() const;

 private:
  Mdp mdp_;
  bool initial_set_ = false;
};

struct Violation {
  std::string kind;
  std::string state;
  std::string action;
  std::string message;
};

/// Lists every violated well-formedness invariant; empty iff the model is valid.
std::vector<Violation> validate(const Mdp& m);

/// Returns a copy with distributions rescaled to sum to exactly 1.
/// Throws ModelError if any distribution is off by more than the tolerance.
Mdp normalized(const Mdp& m);

/// Backward closure of the target set over positive-probability edges.
StateSet reach_set(const Mdp& m, const StateSet& targets);
StateSet reach_set(const Mdp& m, StateId t);

/// States reachable from `from` under some strategy.
StateSet forward_reachable(const Mdp& m, StateId from);

/**
 * Memoryless strategy: one weight row per state, indexed like Mdp::choices(s).
 */
class StrategyTable {
 public:
  enum class Kind { Deterministic, Stochastic };

  StrategyTable() = default;
  static StrategyTable deterministic(const Mdp& m, std::vector<std::size_t> choice);
  static StrategyTable stochastic(std::vector<std::vector<double>> weights);
  /// Uniform over all enabled actions.
  static StrategyTable uniform(const Mdp& m);

  Kind kind() const { return kind_; }
  bool is_deterministic() const { return kind_ == Kind::Deterministic; }
  std::size_t num_states() const { return weights_.size(); }
  double weight(StateId s, std::size_t c) const { return weights_.at(s).at(c); }
  std::span<const double> row(StateId s) const { return weights_.at(s); }
  /// Chosen action index of a deterministic row (largest weight otherwise).
  std::size_t action(StateId s) const;

  bool operator==(const StrategyTable&) const = default;

 private:
  Kind kind_ = Kind::Stochastic;
  std::vector<std::vector<double>> weights_;
};

/// Throws ModelError if the strategy does not fit the model.
void check_strategy(const Mdp& m, const StrategyTable& sigma);

/// Builds a strategy from state/action names; unspecified states take their first action.
StrategyTable strategy_from_names(
    const Mdp& m, const std::vector<std::pair<std::string, std::string>>& choices);

struct MarkovChain {
  StateId initial = 0;
  Eigen::MatrixXd transitions;

  std::size_t num_states() const { return static_cast<std::size_t>(transitions.rows()); }
};

MarkovChain induce_chain(const Mdp& m, const StrategyTable& sigma);

/**
 * Probability, for every state, of reaching `goal` without first entering `avoid`.
 * Solved by partial-pivot LU over the states that can reach the goal.
 */
Eigen::VectorXd reach_probabilities(const MarkovChain& c, const StateSet& goal,
                                    const StateSet& avoid);

double chain_reach_prob(const MarkovChain& c, StateId from, const StateSet& goal,
                        const StateSet& avoid);
double chain_reach_prob(const MarkovChain& c, StateId from, StateId goal);

/// Pr(eventually t, and s visited before t) from the chain's initial state.
double event_prob_s_before_t(const MarkovChain& c, StateId s, StateId t);

struct ReachResult {
  double p_star = 0.0;
  Eigen::VectorXd values;
  /// A deterministic strategy attaining the maximum from every state.
  StrategyTable strategy;
};

/// Maximal probability of reaching t, per state and from the initial state.
ReachResult max_reach_prob(const Mdp& m, StateId t);
ReachResult max_reach_prob(const Mdp& m, const StateSet& targets);

/// Simple path s0, a0, s1, ..., sn through the model.
struct PathSpec {
  std::vector<StateId> states;
  std::vector<std::size_t> choices;  // choices[i] is the action index taken at states[i]

  std::size_t length() const { return choices.size(); }
  StateId last() const { return states.back(); }
};

/// Parses "s0,a0,s1,..." and checks it is a simple path from the initial state.
PathSpec parse_path(const Mdp& m, std::string_view text);
void check_path(const Mdp& m, const PathSpec& path);

StateSet make_set(std::size_t n, std::initializer_list<StateId> members);

}  // namespace mdpattr
