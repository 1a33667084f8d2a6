#include <doctest.h>

#include "mdpattr/mdp.hpp"
#include "mdpattr/models.hpp"

using namespace mdpattr;

namespace {

Mdp nonmono() { return nonmono_model().mdp; }

StrategyTable sigma(const Mdp& m, const char* s2_action) {
  return strategy_from_names(m, {{"s2", s2_action}});
}

}  // namespace

TEST_CASE("builder keeps insertion order and merges duplicate successors") {
  MdpBuilder b;
  b.add_state("x");
  b.add_state("y");
  b.add_transition("x", "go", "y", 0.25, "1/4");
  b.add_transition("x", "go", "y", 0.75, "3/4");
  b.add_transition("y", "stay", "y", 1.0, "1");
  Mdp m = b.build();
  CHECK(m.num_states() == 2);
  CHECK(m.state("y") == 1);
  REQUIRE(m.choices(0).size() == 1);
  REQUIRE(m.choices(0)[0].outcomes.size() == 1);
  CHECK(m.choices(0)[0].outcomes[0].probability == doctest::Approx(1.0));
  CHECK(m.choices(0)[0].outcomes[0].exact.empty());
  CHECK(validate(m).empty());
}

TEST_CASE("validate reports every broken invariant") {
  MdpBuilder b;
  b.add_state("a");
  b.add_state("b");
  b.add_state("c");
  b.add_transition("a", "go", "b", 0.5);
  b.add_transition("b", "go", "b", 1.0);
  Mdp m = b.build();
  auto v = validate(m);
  REQUIRE(v.size() == 2);
  CHECK(v[0].kind == "distribution sum");
  CHECK(v[0].state == "a");
  CHECK(v[1].kind == "no enabled action");
  CHECK(v[1].state == "c");
  CHECK_THROWS_AS(normalized(m), ModelError);
}

TEST_CASE("probabilities within tolerance are renormalized") {
  MdpBuilder b;
  b.add_state("a");
  b.add_state("b");
  b.add_transition("a", "go", "a", 0.333333333333, "1/3");
  b.add_transition("a", "go", "b", 0.666666666667, "2/3");
  b.add_transition("b", "stay", "b", 1.0);
  Mdp m = normalized(b.build());
  double sum = 0.0;
  for (const auto& o : m.choices(0)[0].outcomes) sum += o.probability;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.choices(0)[0].outcomes[0].exact == "1/3");
}

TEST_CASE("action names are per state") {
  Mdp m = loan_model().mdp;
  CHECK(m.num_states() == 10);
  CHECK(m.find_choice(m.state("Error"), "Quit").has_value());
  CHECK(m.find_choice(m.state("Rework"), "Quit").has_value());
  CHECK_FALSE(m.find_choice(m.state("s0"), "Quit").has_value());
  CHECK_THROWS_AS(m.choice(m.state("s0"), "Quit"), ModelError);
  CHECK_THROWS_AS(m.state("nowhere"), ModelError);
}

TEST_CASE("reach sets") {
  Mdp m = nonmono();
  StateSet co = reach_set(m, m.state("st"));
  CHECK(co[m.state("s0")]);
  CHECK(co[m.state("s1")]);
  CHECK_FALSE(co[m.state("tau")]);
  StateSet fwd = forward_reachable(m, m.state("s1"));
  CHECK(fwd[m.state("tau")]);
  CHECK_FALSE(fwd[m.state("s2")]);
}

TEST_CASE("reach probabilities on the non-monotone chains") {
  Mdp m = nonmono();
  const StateId t = m.state("st"), s1 = m.state("s1"), s2 = m.state("s2");

  MarkovChain c0 = induce_chain(m, sigma(m, "a"));
  CHECK(chain_reach_prob(c0, c0.initial, t) == doctest::Approx(0.91).epsilon(1e-12));
  CHECK(event_prob_s_before_t(c0, s1, t) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(event_prob_s_before_t(c0, s2, t) == doctest::Approx(0.9).epsilon(1e-12));

  MarkovChain c1 = induce_chain(m, sigma(m, "b"));
  CHECK(chain_reach_prob(c1, c1.initial, t) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(chain_reach_prob(c1, s2, t) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(event_prob_s_before_t(c1, s1, t) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(event_prob_s_before_t(c1, t, t) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("stochastic strategies mix rows") {
  Mdp m = nonmono();
  std::vector<std::vector<double>> w(m.num_states(), {1.0});
  w[m.state("s2")] = {0.5, 0.5};
  StrategyTable half = StrategyTable::stochastic(w);
  CHECK_NOTHROW(check_strategy(m, half));
  MarkovChain c = induce_chain(m, half);
  // From s2: 0.5 * 1 + 0.5 * 0.1.
  CHECK(chain_reach_prob(c, m.state("s2"), m.state("st")) == doctest::Approx(0.55));

  w[m.state("s2")] = {0.5, 0.6};
  CHECK_THROWS_AS(check_strategy(m, StrategyTable::stochastic(w)), ModelError);
}

TEST_CASE("goal and avoid must be disjoint") {
  Mdp m = nonmono();
  MarkovChain c = induce_chain(m, sigma(m, "a"));
  auto both = make_set(m.num_states(), {m.state("st")});
  CHECK_THROWS_AS(chain_reach_prob(c, 0, both, both), std::invalid_argument);
}

TEST_CASE("maximal reach probability") {
  Mdp m = nonmono();
  ReachResult r = max_reach_prob(m, m.state("st"));
  CHECK(r.p_star == doctest::Approx(0.91).epsilon(1e-12));
  CHECK(r.strategy.action(m.state("s2")) == m.choice(m.state("s2"), "a"));

  Mdp loan = loan_model().mdp;
  CHECK(max_reach_prob(loan, loan.state("Granted")).p_star == doctest::Approx(0.98).epsilon(1e-12));
}

TEST_CASE("end components do not fool the maximum") {
  // "loop" can stay forever or exit to the goal; the maximum is 1, not the
  // spurious fixpoint that keeps looping.
  MdpBuilder b;
  for (const char* s : {"s", "loop", "goal"}) b.add_state(s);
  b.add_transition("s", "go", "loop", 1.0);
  b.add_transition("loop", "spin", "loop", 1.0);
  b.add_transition("loop", "exit", "goal", 1.0);
  b.add_transition("goal", "stay", "goal", 1.0);
  Mdp m = b.build();
  CHECK(max_reach_prob(m, m.state("goal")).p_star == doctest::Approx(1.0));
}

TEST_CASE("paths") {
  Mdp m = loan_model().mdp;
  PathSpec p = parse_path(m, "s0, Apply, Application");
  CHECK(p.length() == 1);
  CHECK(p.last() == m.state("Application"));
  CHECK_THROWS_AS(parse_path(m, "s0,Apply"), ModelError);
  CHECK_THROWS_AS(parse_path(m, "Application,Provider,Consultation"), ModelError);
  CHECK_THROWS_AS(parse_path(m, "s0,Consult,Application"), ModelError);
  CHECK_THROWS_AS(parse_path(m, "s0,Fly,Application"), ModelError);
}
