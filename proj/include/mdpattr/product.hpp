#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mdpattr/mdp.hpp"

namespace mdpattr {

/// Memory mode carried by product states.
enum class Memory : std::uint8_t {
  Bypassed,  ///< subject not (yet) visited, or path deviated from
  Visited,   ///< subject visited, or path followed completely
  Tracking,  ///< still following the path prefix
};

const char* to_string(Memory m);

/**
 * Base MDP extended with one bit of memory recording whether the subject
 * (a pivot state set, or a path prefix) has been seen.
 *
 * Reaching (t, Visited) means t was reached after the subject; reaching t in
 * any other mode means t was reached without it.
 */
struct ProductMdp {
  std::shared_ptr<const Mdp> base;
  Mdp product;
  std::vector<StateId> base_state;
  std::vector<Memory> memory;
  /// Forced base action per product state (path-following restriction).
  std::vector<std::optional<std::size_t>> forced;
  StateSet pivots;  ///< base states acting as subject (empty for path products)

  std::optional<StateId> find(StateId base_id, Memory m) const;
  /// Product states whose base state is t, split by whether the subject was seen.
  StateSet targets_visited(StateId t) const;
  StateSet targets_bypassed(StateId t) const;
};

/// Product for a single pivot state; the pivot must differ from the initial state.
ProductMdp memory_product(std::shared_ptr<const Mdp> m, StateId pivot);
/// Product for a pivot set (visiting any member flips the memory bit).
ProductMdp memory_product(std::shared_ptr<const Mdp> m, const StateSet& pivots);

struct PrefixConstraint {
  PathSpec path;
  double prefix_probability = 1.0;
};

struct PathPrefix {
  /// Forced action per base state (s_i -> a_i for i < n).
  std::vector<std::optional<std::size_t>> forced;
  PrefixConstraint constraint;
};

/// Forced actions along the path and its probability. Throws UndefinedImportance
/// if the path ends outside Reach(t) and ModelError if it visits t.
PathPrefix fix_path_prefix(const Mdp& m, const PathSpec& path, StateId t);

/**
 * Product tracking progress along a path prefix: Tracking copies for s_0..s_{n-1},
 * then Visited once s_n is entered through the prefix, Bypassed after any deviation.
 * Every copy of s_i is forced to take a_i.
 */
ProductMdp path_product(std::shared_ptr<const Mdp> m, const PathSpec& path, StateId t);

/// Lifts a base strategy to the product by ignoring the memory mode.
StrategyTable lift_strategy(const ProductMdp& p, const StrategyTable& base_strategy);

/// Human-readable product witness rows.
struct WitnessEntry {
  std::string state;
  std::string memory;
  std::string action;
};
std::vector<WitnessEntry> describe_strategy(const ProductMdp& p, const StrategyTable& sigma);
std::vector<WitnessEntry> describe_strategy(const Mdp& m, const StrategyTable& sigma);

}  // namespace mdpattr
