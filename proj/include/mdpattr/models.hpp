#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdpattr/mdp.hpp"

namespace mdpattr {

/// A model together with the target named in its file (if any).
struct ModelFile {
  int version = 1;
  Mdp mdp;
  std::optional<std::string> target;
};

/// Loan application process: 10 states, target Granted.
ModelFile loan_model();

/// Five-state model showing that importance is not monotone in reachability; target st.
ModelFile nonmono_model();

struct GridCell {
  int x = 0;
  int y = 0;
  auto operator<=>(const GridCell&) const = default;
};

/**
 * Deterministic key/door/lava gridworld. The default is a reconstruction:
 * a river of lava across row `lava_row` with a door at `door_x`, the key on
 * the cell just above the door, and the goal on the far bank.
 */
struct GridworldParams {
  int width = 7;
  int height = 5;
  GridCell start{0, 0};
  GridCell key{3, 1};
  int lava_row = 2;
  int door_x = 3;
  GridCell goal{3, 4};
};

void check_params(const GridworldParams& g);
ModelFile gridworld_model(const GridworldParams& g = {});

/// Cell coordinates from "cell:x,y" labels; nullopt for states without one.
std::optional<GridCell> cell_of(const Mdp& m, StateId s);

/**
 * Seeded layered MDP: states s0..s{n-1}, plus "goal" (the target) and "sink".
 * Edges mostly point to later layers; `back_edge` is the chance of an extra
 * edge to an earlier state. Probabilities are small-integer fractions.
 */
struct RandomParams {
  std::size_t states = 6;
  std::size_t actions = 2;  ///< maximum actions per state
  std::size_t branching = 2;  ///< maximum successors per action
  double back_edge = 0.2;
  std::uint64_t seed = 1;
  bool unreachable_goal = false;  ///< no edge enters the goal
};

ModelFile random_model(const RandomParams& p);

}  // namespace mdpattr
