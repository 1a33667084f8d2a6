#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>

#include "mdpattr/product.hpp"
#include "mdpattr/solve.hpp"

namespace mdpattr {

/// Importance of `s` for reaching t under sigma: Pr(t reached, s seen before t) / Pr(t reached).
/// Throws UndefinedImportance when sigma never reaches t.
double state_importance_under(const Mdp& m, const StrategyTable& sigma, StateId s, StateId t);

/// Pr(follow the path exactly, then reach t) / Pr(t reached).
double path_importance_under(const Mdp& m, const StrategyTable& sigma, const PathSpec& path,
                             StateId t);

/// Unnormalized numerator Pr(t reached, s seen before t).
double absolute_importance_under(const Mdp& m, const StrategyTable& sigma, StateId s, StateId t);

enum class BoundSide { Both, Min, Max };

/// Subject of a query: a single state, a set of states visited as one unit, or a path.
using Subject = std::variant<StateId, StateSet, PathSpec>;

struct ImportanceQuery {
  StateId target = 0;
  Subject subject = StateId{0};
  StrategyClass strategy_class = StrategyClass::All;
  BoundSide side = BoundSide::Both;
  bool normalized = true;
  double epsilon = 1e-4;
  std::uint64_t node_limit = 10'000'000;
  double time_limit_seconds = 600.0;
};

struct ImportanceInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool normalized = true;
  StrategyClass strategy_class = StrategyClass::All;
  bool path_following = false;
  /// Witnesses over `product`; empty when the bound follows from a default value.
  StrategyTable lower_witness;
  StrategyTable upper_witness;
  std::shared_ptr<const ProductMdp> product;
  SolveStatus lower_status = SolveStatus::Optimal;
  SolveStatus upper_status = SolveStatus::Optimal;
  std::uint64_t nodes = 0;
  /// "default" (s0 / t / empty path), "unreachable", or "search".
  std::string basis = "search";

  bool budget_exceeded() const {
    return lower_status == SolveStatus::Budget || upper_status == SolveStatus::Budget;
  }
};

/// Throws UndefinedImportance when the class admits no strategy reaching t.
ImportanceInterval importance_bounds(std::shared_ptr<const Mdp> m, const ImportanceQuery& q);

ImportanceInterval state_importance_bounds(std::shared_ptr<const Mdp> m, StateId s, StateId t,
                                           StrategyClass c = StrategyClass::All);
ImportanceInterval path_importance_bounds(std::shared_ptr<const Mdp> m, const PathSpec& path,
                                          StateId t, StrategyClass c = StrategyClass::All);
ImportanceInterval absolute_importance_bounds(std::shared_ptr<const Mdp> m, StateId s, StateId t,
                                              StrategyClass c = StrategyClass::All);

}  // namespace mdpattr
