#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdpattr/encodings.hpp"
#include "mdpattr/product.hpp"

namespace mdpattr {

enum class StrategyClass { All, ReachOptimal };
const char* to_string(StrategyClass c);

enum class SolveStatus { Optimal, Undefined, InfeasibleClass, Budget };
const char* to_string(SolveStatus s);

struct SolveOptions {
  Sense sense = Sense::Max;
  StrategyClass strategy_class = StrategyClass::All;
  /// Optimize Pr(reach (t,visited)) alone instead of the normalized ratio.
  bool absolute = false;
  double epsilon = 1e-4;
  /// Optimal reachability of t in the base model; computed when absent.
  std::optional<double> p_star;
  std::uint64_t node_limit = 10'000'000;
  double time_limit_seconds = 600.0;
  bool prune = true;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Undefined;
  double value = 0.0;
  StrategyTable witness;   ///< deterministic, over product states
  double numerator = 0.0;  ///< Pr(reach (t, visited)) under the witness
  double reach = 0.0;      ///< Pr(reach t) under the witness
  std::uint64_t nodes = 0;
  double wall_time = 0.0;
  std::string message;
};

/// Reach probabilities of the visited and bypassed copies of t under a product strategy.
struct ProductValue {
  double numerator = 0.0;
  double reach = 0.0;
};
ProductValue evaluate_product(const ProductMdp& p, StateId t, const StrategyTable& sigma);

/**
 * Exact optimum of the importance ratio (or of the numerator alone) over
 * deterministic memoryless product strategies that pass the class filter:
 * Pr(reach t) >= epsilon, or Pr(reach t) = p* within 1e-8.
 *
 * Branch-and-bound: bounds come from a terminal-reward relaxation solved by
 * policy iteration, combined with a Dinkelbach-style parametric test against
 * the incumbent.
 */
SolveResult solve_exact(const ProductMdp& p, StateId t, const SolveOptions& opt);

/// Partial assignment over product states (nullopt = free).
struct SearchNode {
  std::vector<std::optional<std::size_t>> assignment;
  std::size_t depth = 0;
};

/// Admissible bound on the objective over all completions of the node.
double optimistic_bound(const SearchNode& node, const ProductMdp& p, StateId t,
                        const SolveOptions& opt);

/// Per state, the choices whose Bellman backup attains the optimal reach value within 1e-9.
std::vector<std::vector<std::size_t>> filter_reach_optimal_actions(const Mdp& m, StateId t);

struct Discrepancy {
  double external_objective = 0.0;   ///< objective recomputed from the assignment's own variables
  double recomputed = 0.0;           ///< exact importance of the decoded strategy
  std::optional<double> exact_optimum;
  double recompute_gap = 0.0;
  double optimum_gap = 0.0;
  bool flagged = false;
  std::string error;  ///< decode failure; other fields are meaningless when set
};

inline constexpr double kAgreementTolerance = 4e-4;

/// Decodes an external solution of `model`, re-evaluates it exactly and compares.
Discrepancy cross_check_external(const ProductMdp& p, StateId t, const OptModel& model,
                                 const Assignment& solution, const SolveOptions& opt);

}  // namespace mdpattr
