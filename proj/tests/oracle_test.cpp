#include <doctest.h>

#include <cmath>
#include <memory>

#include "mdpattr/models.hpp"
#include "mdpattr/oracle.hpp"

using namespace mdpattr;
using oracle::Rational;

namespace {

Rational r(const char* s) { return oracle::parse_rational(s); }

std::vector<std::size_t> choices_of(const Mdp& m, const char* s2_action) {
  std::vector<std::size_t> c(m.num_states(), 0);
  c[m.state("s2")] = m.choice(m.state("s2"), s2_action);
  return c;
}

}  // namespace

TEST_CASE("decimal and fraction literals are exact") {
  CHECK(r("0.1") == Rational(1, 10));
  CHECK(r("1/3") == Rational(1, 3));
  CHECK(r("2.5e-3") == Rational(1, 400));
  CHECK(r("-0.5") == Rational(-1, 2));
  CHECK(r("7") == Rational(7));
  CHECK_THROWS(r("abc"));
  CHECK_THROWS(r("1/0"));
  CHECK(oracle::to_rational("", 0.25) == Rational(1, 4));
  CHECK(oracle::to_string(Rational(90, 91)) == "90/91");
}

TEST_CASE("exact reach probabilities on the non-monotone chains") {
  Mdp m = nonmono_model().mdp;
  const StateId t = m.state("st");
  auto goal = make_set(m.num_states(), {t});
  StateSet none(m.num_states(), false);

  auto c0 = oracle::rational_chain(m, choices_of(m, "a"));
  CHECK(oracle::rational_chain_solve(c0, c0.initial, goal, none) == Rational(91, 100));
  auto c1 = oracle::rational_chain(m, choices_of(m, "b"));
  CHECK(oracle::rational_chain_solve(c1, m.state("s2"), goal, none) == Rational(1, 10));
  CHECK(oracle::rational_chain_solve(c1, t, goal, none) == Rational(1));

  // Float and rational agree to 1e-12.
  auto f0 = oracle::reach_vector<double>(oracle::float_chain(m, choices_of(m, "a")), goal, none);
  CHECK(std::abs(f0(0) - 0.91) <= 1e-12);
}

TEST_CASE("a one-third self loop gives exact halves") {
  MdpBuilder b;
  for (const char* s : {"x", "t", "sink"}) b.add_state(s);
  b.add_transition("x", "go", "x", 1.0 / 3, "1/3");
  b.add_transition("x", "go", "t", 1.0 / 3, "1/3");
  b.add_transition("x", "go", "sink", 1.0 / 3, "1/3");
  b.add_transition("t", "stay", "t", 1.0, "1");
  b.add_transition("sink", "stay", "sink", 1.0, "1");
  Mdp m = b.build();
  auto c = oracle::rational_chain(m, {0, 0, 0});
  auto goal = make_set(3, {m.state("t")});
  CHECK(oracle::rational_chain_solve(c, 0, goal, StateSet(3, false)) == Rational(1, 2));
}

TEST_CASE("enumeration order and guard") {
  Mdp loan = loan_model().mdp;
  CHECK(oracle::count_deterministic(loan) == 16);
  auto all = oracle::enumerate_deterministic(loan);
  REQUIRE(all.size() == 16);
  CHECK(all.front().action(0) == 0);
  CHECK(all.back().action(0) == 1);  // state 0 is most significant

  RandomParams rp;
  rp.states = 30;
  rp.actions = 3;
  Mdp big = random_model(rp).mdp;
  CHECK(oracle::count_deterministic(big) > oracle::kEnumerationGuard);
  CHECK_THROWS_AS(oracle::StrategyEnumerator{big}, std::length_error);
}

TEST_CASE("brute-force bounds, rational") {
  Mdp m = nonmono_model().mdp;
  oracle::OracleQuery q;
  q.target = m.state("st");
  q.subject = m.state("s1");
  q.arithmetic = oracle::Arithmetic::Rational;
  auto all = oracle::brute_force_bounds(m, q);
  CHECK(*all.lower_exact == Rational(1, 91));
  CHECK(*all.upper_exact == Rational(1));

  q.strategy_class = StrategyClass::ReachOptimal;
  auto opt = oracle::brute_force_bounds(m, q);
  CHECK(*opt.lower_exact == Rational(1, 91));
  CHECK(*opt.upper_exact == Rational(1, 91));

  q.strategy_class = StrategyClass::All;
  q.subject = m.state("s2");
  auto s2 = oracle::brute_force_bounds(m, q);
  CHECK(*s2.lower_exact == Rational(9, 10));
  CHECK(*s2.upper_exact == Rational(90, 91));

  q.subject = m.state("s1");
  q.normalized = false;
  auto abs = oracle::brute_force_bounds(m, q);
  CHECK(*abs.lower_exact == Rational(1, 100));
  CHECK(*abs.upper_exact == Rational(1, 10));
}

TEST_CASE("brute-force path bounds on the loan model") {
  Mdp m = loan_model().mdp;
  oracle::OracleQuery q;
  q.target = m.state("Granted");
  q.subject = parse_path(m, "s0,Apply,Application");
  q.arithmetic = oracle::Arithmetic::Rational;
  auto iv = oracle::brute_force_bounds(m, q);
  CHECK(*iv.lower_exact == Rational(855, 953));  // 0.4275 / 0.4765
  CHECK(*iv.upper_exact == Rational(1));

  q.arithmetic = oracle::Arithmetic::Float;
  auto fl = oracle::brute_force_bounds(m, q);
  CHECK(std::abs(fl.lower - 855.0 / 953.0) <= 1e-12);
}

TEST_CASE("the reach-optimal class never widens the interval") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RandomParams rp;
    rp.states = 4;
    rp.seed = seed;
    Mdp m = random_model(rp).mdp;
    oracle::OracleQuery q;
    q.target = m.state("goal");
    q.subject = m.state("s1");
    try {
      auto all = oracle::brute_force_bounds(m, q);
      q.strategy_class = StrategyClass::ReachOptimal;
      auto opt = oracle::brute_force_bounds(m, q);
      CHECK(opt.lower >= all.lower - 1e-12);
      CHECK(opt.upper <= all.upper + 1e-12);
    } catch (const UndefinedImportance&) {
    }
  }
}

TEST_CASE("undefined when nothing reaches the target") {
  RandomParams rp;
  rp.unreachable_goal = true;
  Mdp m = random_model(rp).mdp;
  oracle::OracleQuery q;
  q.target = m.state("goal");
  q.subject = m.state("s1");
  CHECK_THROWS_AS(oracle::brute_force_bounds(m, q), UndefinedImportance);
}
