#include "mdpattr/product.hpp"

#include <map>

namespace mdpattr {

const char* to_string(Memory m) {
  switch (m) {
    case Memory::Bypassed:
      return "bypassed";
    case Memory::Visited:
      return "visited";
    case Memory::Tracking:
      return "tracking";
  }
  return "?";
}

std::optional<StateId> ProductMdp::find(StateId base_id, Memory m) const {
  for (StateId s = 0; s < base_state.size(); ++s) {
    if (base_state[s] == base_id && memory[s] == m) return s;
  }
  return std::nullopt;
}

StateSet ProductMdp::targets_visited(StateId t) const {
  StateSet out(base_state.size(), false);
  for (StateId s = 0; s < base_state.size(); ++s) {
    out[s] = base_state[s] == t && memory[s] == Memory::Visited;
  }
  return out;
}

StateSet ProductMdp::targets_bypassed(StateId t) const {
  StateSet out(base_state.size(), false);
  for (StateId s = 0; s < base_state.size(); ++s) {
    out[s] = base_state[s] == t && memory[s] != Memory::Visited;
  }
  return out;
}

namespace {

std::string product_name(const Mdp& m, StateId s, Memory mode) {
  return m.state_name(s) + "#" + to_string(mode);
}

}  // namespace

ProductMdp memory_product(std::shared_ptr<const Mdp> m, const StateSet& pivots) {
  const Mdp& base = *m;
  if (pivots.size() != base.num_states()) throw ModelError("pivot set size mismatch");
  if (pivots[base.initial()]) {
    throw ModelError("the initial state cannot be a pivot (its importance is always 1)");
  }

  ProductMdp p;
  p.base = m;
  p.pivots = pivots;
  MdpBuilder b;
  // (pivot, Bypassed) is unreachable: entering a pivot flips the mode.
  for (StateId s = 0; s < base.num_states(); ++s) {
    for (Memory mode : {Memory::Bypassed, Memory::Visited}) {
      if (mode == Memory::Bypassed && pivots[s]) continue;
      b.add_state(product_name(base, s, mode));
      p.base_state.push_back(s);
      p.memory.push_back(mode);
    }
  }
  b.set_initial(product_name(base, base.initial(), Memory::Bypassed));
  for (StateId i = 0; i < p.base_state.size(); ++i) {
    StateId s = p.base_state[i];
    Memory mode = p.memory[i];
    for (const auto& l : base.labels(s)) b.add_label(product_name(base, s, mode), l);
    for (const auto& c : base.choices(s)) {
      for (const auto& o : c.outcomes) {
        Memory next = pivots[o.next] ? Memory::Visited : mode;
        b.add_transition(product_name(base, s, mode), c.action, product_name(base, o.next, next),
                         o.probability, o.exact);
      }
    }
  }
  p.product = b.build();
  p.forced.assign(p.base_state.size(), std::nullopt);
  return p;
}

ProductMdp memory_product(std::shared_ptr<const Mdp> m, StateId pivot) {
  if (pivot >= m->num_states()) throw ModelError("unknown pivot state");
  return memory_product(m, make_set(m->num_states(), {pivot}));
}

PathPrefix fix_path_prefix(const Mdp& m, const PathSpec& path, StateId t) {
  check_path(m, path);
  for (StateId s : path.states) {
    if (s == t) throw ModelError("path visits the target '" + m.state_name(t) + "'");
  }
  if (!reach_set(m, t)[path.last()]) {
    throw UndefinedImportance("path importance undefined: '" + m.state_name(path.last()) +
                              "' cannot reach '" + m.state_name(t) + "'");
  }
  PathPrefix out;
  out.forced.assign(m.num_states(), std::nullopt);
  out.constraint.path = path;
  for (std::size_t i = 0; i < path.length(); ++i) {
    StateId s = path.states[i];
    out.forced[s] = path.choices[i];
    out.constraint.prefix_probability *= m.probability(s, path.choices[i], path.states[i + 1]);
  }
  return out;
}

ProductMdp path_product(std::shared_ptr<const Mdp> m, const PathSpec& path, StateId t) {
  const Mdp& base = *m;
  auto prefix = fix_path_prefix(base, path, t);

  ProductMdp p;
  p.base = m;
  p.pivots.assign(base.num_states(), false);
  MdpBuilder b;
  std::map<StateId, std::size_t> position;  // base state -> index along the prefix
  for (std::size_t i = 0; i < path.length(); ++i) position[path.states[i]] = i;

  auto add = [&](StateId s, Memory mode) {
    b.add_state(product_name(base, s, mode));
    p.base_state.push_back(s);
    p.memory.push_back(mode);
  };
  for (std::size_t i = 0; i < path.length(); ++i) add(path.states[i], Memory::Tracking);
  for (StateId s = 0; s < base.num_states(); ++s) {
    add(s, Memory::Bypassed);
    add(s, Memory::Visited);
  }
  b.set_initial(product_name(base, base.initial(),
                             path.length() == 0 ? Memory::Visited : Memory::Tracking));

  for (StateId i = 0; i < p.base_state.size(); ++i) {
    StateId s = p.base_state[i];
    Memory mode = p.memory[i];
    const auto from = product_name(base, s, mode);
    for (const auto& l : base.labels(s)) b.add_label(from, l);
    auto cs = base.choices(s);
    for (std::size_t a = 0; a < cs.size(); ++a) {
      for (const auto& o : cs[a].outcomes) {
        Memory next = mode;
        if (mode == Memory::Tracking) {
          std::size_t k = position.at(s);
          bool on_path = a == path.choices[k] && o.next == path.states[k + 1];
          if (!on_path) {
            next = Memory::Bypassed;
          } else {
            next = k + 1 == path.length() ? Memory::Visited : Memory::Tracking;
          }
        }
        b.add_transition(from, cs[a].action, product_name(base, o.next, next), o.probability,
                         o.exact);
      }
    }
  }
  p.product = b.build();
  p.forced.resize(p.base_state.size());
  for (StateId i = 0; i < p.base_state.size(); ++i) p.forced[i] = prefix.forced[p.base_state[i]];
  return p;
}

StrategyTable lift_strategy(const ProductMdp& p, const StrategyTable& base_strategy) {
  check_strategy(*p.base, base_strategy);
  if (base_strategy.is_deterministic()) {
    std::vector<std::size_t> choice(p.base_state.size());
    for (StateId i = 0; i < p.base_state.size(); ++i) choice[i] = base_strategy.action(p.base_state[i]);
    return StrategyTable::deterministic(p.product, std::move(choice));
  }
  std::vector<std::vector<double>> rows(p.base_state.size());
  for (StateId i = 0; i < p.base_state.size(); ++i) {
    auto r = base_strategy.row(p.base_state[i]);
    rows[i].assign(r.begin(), r.end());
  }
  return StrategyTable::stochastic(std::move(rows));
}

std::vector<WitnessEntry> describe_strategy(const ProductMdp& p, const StrategyTable& sigma) {
  std::vector<WitnessEntry> out;
  const Mdp& base = *p.base;
  for (StateId i = 0; i < p.base_state.size(); ++i) {
    StateId s = p.base_state[i];
    auto cs = base.choices(s);
    std::string action;
    if (sigma.is_deterministic()) {
      action = cs[sigma.action(i)].action;
    } else {
      for (std::size_t a = 0; a < cs.size(); ++a) {
        if (sigma.weight(i, a) == 0.0) continue;
        if (!action.empty()) action += ";";
        action += cs[a].action + "=" + std::to_string(sigma.weight(i, a));
      }
    }
    out.push_back({base.state_name(s), to_string(p.memory[i]), action});
  }
  return out;
}

std::vector<WitnessEntry> describe_strategy(const Mdp& m, const StrategyTable& sigma) {
  std::vector<WitnessEntry> out;
  for (StateId s = 0; s < m.num_states(); ++s) {
    out.push_back({m.state_name(s), "", m.choices(s)[sigma.action(s)].action});
  }
  return out;
}

}  // namespace mdpattr
