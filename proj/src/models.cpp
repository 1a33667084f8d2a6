#include "mdpattr/models.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <random>

namespace mdpattr {

ModelFile loan_model() {
  MdpBuilder b;
  for (const char* s : {"s0", "Application", "Error", "Consultation", "Angry", "Application+",
                        "Rework", "Resubmit", "Granted", "Rejected"}) {
    b.add_state(s);
  }
  b.set_initial("s0");
  b.add_transition("s0", "Apply", "Application", 0.95, "0.95");
  b.add_transition("s0", "Apply", "Error", 0.05, "0.05");
  b.add_transition("s0", "Consult", "Consultation", 1.0, "1");
  b.add_transition("Application", "Provider", "Application+", 0.5, "0.5");
  b.add_transition("Application", "Provider", "Consultation", 0.5, "0.5");
  b.add_transition("Error", "Consult", "Consultation", 1.0, "1");
  b.add_transition("Error", "Quit", "Rejected", 1.0, "1");
  b.add_transition("Consultation", "Angry", "Angry", 1.0, "1");
  b.add_transition("Consultation", "Apply", "Application+", 1.0, "1");
  b.add_transition("Angry", "Quit", "Rejected", 1.0, "1");
  b.add_transition("Application+", "Provider", "Rework", 0.1, "0.1");
  b.add_transition("Application+", "Provider", "Granted", 0.9, "0.9");
  b.add_transition("Rework", "Submit", "Resubmit", 1.0, "1");
  b.add_transition("Rework", "Quit", "Rejected", 1.0, "1");
  b.add_transition("Resubmit", "Provider", "Granted", 0.8, "0.8");
  b.add_transition("Resubmit", "Provider", "Rejected", 0.2, "0.2");
  b.add_transition("Granted", "stay", "Granted", 1.0, "1");
  b.add_transition("Rejected", "stay", "Rejected", 1.0, "1");
  return {1, b.build(), "Granted"};
}

ModelFile nonmono_model() {
  MdpBuilder b;
  for (const char* s : {"s0", "s1", "s2", "tau", "st"}) b.add_state(s);
  b.set_initial("s0");
  b.add_transition("s0", "a", "s1", 0.1, "0.1");
  b.add_transition("s0", "a", "s2", 0.9, "0.9");
  b.add_transition("s1", "a", "st", 0.1, "0.1");
  b.add_transition("s1", "a", "tau", 0.9, "0.9");
  b.add_transition("s2", "a", "st", 1.0, "1");
  b.add_transition("s2", "b", "s1", 1.0, "1");
  b.add_transition("tau", "stay", "tau", 1.0, "1");
  b.add_transition("st", "stay", "st", 1.0, "1");
  return {1, b.build(), "st"};
}

void check_params(const GridworldParams& g) {
  auto inside = [&](GridCell c) { return c.x >= 0 && c.y >= 0 && c.x < g.width && c.y < g.height; };
  if (g.width < 2 || g.height < 3) throw std::invalid_argument("gridworld must be at least 2x3");
  if (g.lava_row <= 0 || g.lava_row >= g.height - 1) {
    throw std::invalid_argument("lava row must lie strictly inside the grid");
  }
  if (g.door_x < 0 || g.door_x >= g.width) throw std::invalid_argument("door outside the grid");
  if (!inside(g.start) || !inside(g.key) || !inside(g.goal)) {
    throw std::invalid_argument("start, key and goal must lie inside the grid");
  }
  if (g.start.y >= g.lava_row || g.key.y >= g.lava_row) {
    throw std::invalid_argument("start and key must lie before the lava row");
  }
  if (g.goal.y <= g.lava_row) throw std::invalid_argument("goal must lie beyond the lava row");
  if (g.start == g.key) throw std::invalid_argument("start and key must differ");
}

namespace {

std::string cell_state(GridCell c, bool key) {
  return "c" + std::to_string(c.x) + "_" + std::to_string(c.y) + (key ? "_k" : "");
}

}  // namespace

ModelFile gridworld_model(const GridworldParams& g) {
  check_params(g);
  const GridCell door{g.door_x, g.lava_row};
  auto lava = [&](GridCell c) { return c.y == g.lava_row && c.x != g.door_x; };

  struct Node {
    GridCell cell;
    bool key;
    auto operator<=>(const Node&) const = default;
  };
  MdpBuilder b;
  std::map<Node, bool> seen;
  std::deque<Node> queue{{g.start, false}};
  seen[{g.start, false}] = true;
  struct Move {
    const char* name;
    int dx, dy;
  };
  const Move moves[] = {{"up", 0, -1}, {"down", 0, 1}, {"left", -1, 0}, {"right", 1, 0}};

  // Breadth-first over reachable (cell, key) pairs keeps numbering stable.
  std::vector<std::tuple<Node, std::string, Node>> edges;
  std::vector<Node> order;
  while (!queue.empty()) {
    Node n = queue.front();
    queue.pop_front();
    order.push_back(n);
    if (lava(n.cell) || n.cell == g.goal) continue;
    auto visit = [&](const char* action, Node next) {
      edges.emplace_back(n, action, next);
      if (!seen[next]) {
        seen[next] = true;
        queue.push_back(next);
      }
    };
    for (const auto& mv : moves) {
      GridCell c{n.cell.x + mv.dx, n.cell.y + mv.dy};
      if (c.x < 0 || c.y < 0 || c.x >= g.width || c.y >= g.height) continue;
      if (c == door && !n.key) continue;
      visit(mv.name, {c, n.key});
    }
    if (n.cell == g.key && !n.key) visit("pickup", {n.cell, true});
  }

  for (const auto& n : order) b.add_state(cell_state(n.cell, n.key));
  b.add_state("dead");
  b.set_initial(cell_state(g.start, false));
  for (const auto& n : order) {
    const auto name = cell_state(n.cell, n.key);
    b.add_label(name, "cell:" + std::to_string(n.cell.x) + "," + std::to_string(n.cell.y));
    if (lava(n.cell)) {
      b.add_label(name, "lava");
      b.add_transition(name, "die", "dead", 1.0, "1");
    }
    if (n.cell == g.key) b.add_label(name, "key");
    if (n.cell == door) b.add_label(name, "door");
    if (n.cell == g.goal) {
      b.add_label(name, "goal");
      b.add_transition(name, "stay", name, 1.0, "1");
    }
  }
  for (const auto& [from, action, to] : edges) {
    b.add_transition(cell_state(from.cell, from.key), action, cell_state(to.cell, to.key), 1.0, "1");
  }
  b.add_transition("dead", "stay", "dead", 1.0, "1");

  // The goal may be reached with or without the key; only the keyed copy is reachable.
  return {1, b.build(), cell_state(g.goal, true)};
}

std::optional<GridCell> cell_of(const Mdp& m, StateId s) {
  for (const auto& l : m.labels(s)) {
    if (l.rfind("cell:", 0) != 0) continue;
    auto comma = l.find(',');
    if (comma == std::string::npos) continue;
    try {
      return GridCell{std::stoi(l.substr(5, comma - 5)), std::stoi(l.substr(comma + 1))};
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

ModelFile random_model(const RandomParams& p) {
  if (p.states == 0 || p.actions == 0 || p.branching == 0) {
    throw std::invalid_argument("random model needs at least one state, action and successor");
  }
  if (p.back_edge < 0.0 || p.back_edge > 1.0) throw std::invalid_argument("back_edge must be in [0,1]");
  // Plain modulo keeps the stream identical across standard libraries.
  std::mt19937_64 rng(p.seed);
  auto pick = [&](std::uint64_t n) { return static_cast<std::size_t>(rng() % n); };

  MdpBuilder b;
  const std::size_t n = p.states;
  auto name = [](std::size_t i) { return "s" + std::to_string(i); };
  for (std::size_t i = 0; i < n; ++i) b.add_state(name(i));
  b.add_state("goal");
  b.add_state("sink");
  b.set_initial(name(0));

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 1 + pick(p.actions);
    for (std::size_t a = 0; a < k; ++a) {
      std::vector<std::string> forward;
      for (std::size_t j = i + 1; j < n; ++j) forward.push_back(name(j));
      if (!p.unreachable_goal) forward.push_back("goal");
      forward.push_back("sink");
      std::vector<std::string> succ;
      std::size_t m = 1 + pick(p.branching);
      for (std::size_t c = 0; c < m && !forward.empty(); ++c) {
        std::size_t idx = pick(forward.size());
        succ.push_back(forward[idx]);
        forward.erase(forward.begin() + static_cast<std::ptrdiff_t>(idx));
      }
      if (pick(1000) < static_cast<std::size_t>(p.back_edge * 1000.0)) {
        std::string back = name(pick(i + 1));
        if (std::find(succ.begin(), succ.end(), back) == succ.end()) succ.push_back(back);
      }
      std::vector<unsigned> w;
      unsigned total = 0;
      for (std::size_t c = 0; c < succ.size(); ++c) {
        w.push_back(1 + static_cast<unsigned>(pick(4)));
        total += w.back();
      }
      for (std::size_t c = 0; c < succ.size(); ++c) {
        std::string exact = w[c] == total ? "1" : std::to_string(w[c]) + "/" + std::to_string(total);
        b.add_transition(name(i), "a" + std::to_string(a), succ[c],
                         static_cast<double>(w[c]) / static_cast<double>(total), exact);
      }
    }
  }
  b.add_transition("goal", "stay", "goal", 1.0, "1");
  b.add_transition("sink", "stay", "sink", 1.0, "1");
  return {1, b.build(), "goal"};
}

}  // namespace mdpattr
