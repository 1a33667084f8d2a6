#include <doctest.h>

#include <memory>

#include "mdpattr/importance.hpp"
#include "mdpattr/models.hpp"

using namespace mdpattr;

namespace {

std::shared_ptr<const Mdp> nonmono() { return std::make_shared<const Mdp>(nonmono_model().mdp); }
std::shared_ptr<const Mdp> loan() { return std::make_shared<const Mdp>(loan_model().mdp); }

constexpr double kTol = 1e-9;

}  // namespace

TEST_CASE("importance under a fixed strategy") {
  auto m = nonmono();
  const StateId t = m->state("st"), s1 = m->state("s1"), s2 = m->state("s2");
  StrategyTable sigma0 = strategy_from_names(*m, {{"s2", "a"}});
  StrategyTable sigma1 = strategy_from_names(*m, {{"s2", "b"}});

  CHECK(state_importance_under(*m, sigma0, s1, t) == doctest::Approx(1.0 / 91).epsilon(kTol));
  CHECK(state_importance_under(*m, sigma0, s2, t) == doctest::Approx(90.0 / 91).epsilon(kTol));
  CHECK(state_importance_under(*m, sigma1, s1, t) == doctest::Approx(1.0).epsilon(kTol));
  CHECK(state_importance_under(*m, sigma1, s2, t) == doctest::Approx(0.9).epsilon(kTol));

  CHECK(absolute_importance_under(*m, sigma0, s1, t) == doctest::Approx(0.01));
  CHECK(absolute_importance_under(*m, sigma1, s1, t) == doctest::Approx(0.1));

  CHECK(state_importance_under(*m, sigma0, m->initial(), t) == doctest::Approx(1.0));
  CHECK(state_importance_under(*m, sigma1, t, t) == doctest::Approx(1.0));

  PathSpec path = parse_path(*m, "s0,a,s2");
  CHECK(path_importance_under(*m, sigma0, path, t) == doctest::Approx(90.0 / 91));
}

TEST_CASE("a strategy that misses the target leaves importance undefined") {
  MdpBuilder b;
  for (const char* s : {"s0", "x", "t", "sink"}) b.add_state(s);
  b.add_transition("s0", "go", "x", 1.0);
  b.add_transition("s0", "drop", "sink", 1.0);
  b.add_transition("x", "go", "t", 1.0);
  b.add_transition("t", "stay", "t", 1.0);
  b.add_transition("sink", "stay", "sink", 1.0);
  Mdp m = b.build();
  StrategyTable drop = strategy_from_names(m, {{"s0", "drop"}});
  CHECK_THROWS_AS(state_importance_under(m, drop, m.state("x"), m.state("t")), UndefinedImportance);
}

TEST_CASE("nonmono bounds") {
  auto m = nonmono();
  const StateId t = m->state("st");

  auto all = state_importance_bounds(m, m->state("s1"), t);
  CHECK(all.lower == doctest::Approx(1.0 / 91).epsilon(kTol));
  CHECK(all.upper == doctest::Approx(1.0).epsilon(kTol));
  CHECK(all.basis == "search");
  CHECK(all.lower_witness.action(all.product->product.state("s2#bypassed")) == m->choice(m->state("s2"), "a"));

  auto opt = state_importance_bounds(m, m->state("s1"), t, StrategyClass::ReachOptimal);
  CHECK(opt.lower == doctest::Approx(1.0 / 91).epsilon(kTol));
  CHECK(opt.upper == doctest::Approx(1.0 / 91).epsilon(kTol));

  auto s2 = state_importance_bounds(m, m->state("s2"), t);
  CHECK(s2.lower == doctest::Approx(0.9).epsilon(kTol));
  CHECK(s2.upper == doctest::Approx(90.0 / 91).epsilon(kTol));

  auto abs = absolute_importance_bounds(m, m->state("s1"), t);
  CHECK(abs.lower == doctest::Approx(0.01).epsilon(kTol));
  CHECK(abs.upper == doctest::Approx(0.1).epsilon(kTol));
  CHECK_FALSE(abs.normalized);
}

TEST_CASE("default values") {
  auto m = nonmono();
  const StateId t = m->state("st");
  for (StateId s : {m->initial(), t}) {
    auto iv = state_importance_bounds(m, s, t);
    CHECK(iv.lower == 1.0);
    CHECK(iv.upper == 1.0);
    CHECK(iv.basis == "default");
  }
  auto tau = state_importance_bounds(m, m->state("tau"), t);
  CHECK(tau.lower == 0.0);
  CHECK(tau.upper == 0.0);
  CHECK(tau.basis == "unreachable");
}

TEST_CASE("loan bounds") {
  auto m = loan();
  const StateId t = m->state("Granted");
  auto app_plus = state_importance_bounds(m, m->state("Application+"), t);
  CHECK(app_plus.lower == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(app_plus.upper == doctest::Approx(1.0).epsilon(1e-12));

  auto angry = state_importance_bounds(m, m->state("Angry"), t);
  CHECK(angry.lower == 0.0);
  CHECK(angry.upper == 0.0);
  auto angry_abs = absolute_importance_bounds(m, m->state("Angry"), t);
  CHECK(angry_abs.upper == 0.0);

  // Following the path, Consultation answers Angry and Rework quits: 0.95*0.5*0.9.
  // Deviating through Error, the bypass branch does its best: 0.05*0.98.
  auto path = path_importance_bounds(m, parse_path(*m, "s0,Apply,Application"), t);
  CHECK(path.lower == doctest::Approx(0.4275 / 0.4765).epsilon(kTol));
  CHECK(path.upper == doctest::Approx(1.0).epsilon(kTol));
  CHECK(path.path_following);
}

TEST_CASE("one-sided queries") {
  auto m = nonmono();
  ImportanceQuery q;
  q.target = m->state("st");
  q.subject = m->state("s1");
  q.side = BoundSide::Max;
  auto iv = importance_bounds(m, q);
  CHECK(iv.upper == doctest::Approx(1.0));
  CHECK(iv.lower_witness.num_states() == 0);
}

TEST_CASE("state sets count any member as a visit") {
  auto m = nonmono();
  ImportanceQuery q;
  q.target = m->state("st");
  q.subject = make_set(m->num_states(), {m->state("s1"), m->state("s2")});
  auto iv = importance_bounds(m, q);
  CHECK(iv.lower == doctest::Approx(1.0));
  CHECK(iv.upper == doctest::Approx(1.0));
}

TEST_CASE("unreachable target") {
  RandomParams rp;
  rp.unreachable_goal = true;
  auto m = std::make_shared<const Mdp>(random_model(rp).mdp);
  const StateId t = m->state("goal");
  CHECK_THROWS_AS(state_importance_bounds(m, m->state("s1"), t), UndefinedImportance);
  CHECK_THROWS_AS(state_importance_bounds(m, m->initial(), t), UndefinedImportance);
}

TEST_CASE("epsilon excludes strategies that barely reach the target") {
  // One strategy reaches t with probability 1e-6 < epsilon only.
  MdpBuilder b;
  for (const char* s : {"s0", "x", "t", "sink"}) b.add_state(s);
  b.add_transition("s0", "go", "x", 1.0);
  b.add_transition("x", "try", "t", 1e-6);
  b.add_transition("x", "try", "sink", 1.0 - 1e-6);
  b.add_transition("t", "stay", "t", 1.0);
  b.add_transition("sink", "stay", "sink", 1.0);
  auto m = std::make_shared<const Mdp>(b.build());
  CHECK_THROWS_AS(state_importance_bounds(m, m->state("x"), m->state("t")), UndefinedImportance);
  ImportanceQuery q;
  q.target = m->state("t");
  q.subject = m->state("x");
  q.epsilon = 1e-7;
  CHECK(importance_bounds(m, q).lower == doctest::Approx(1.0));
}
