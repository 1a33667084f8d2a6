#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <Eigen/Core>

#include "mdpattr/importance.hpp"

// Brute-force ground truth. Deliberately independent of the product
// construction and of the solver: strategies are enumerated on the base
// model and the memory bit is realized as a pair of base strategies.

namespace mdpattr::oracle {

using Rational = boost::multiprecision::number<boost::multiprecision::cpp_rational_backend,
                                               boost::multiprecision::et_off>;

/// Exact value of a probability literal: "p/q", a decimal ("0.95", "1e-3"), or,
/// when `exact` is empty, the shortest decimal that round-trips `fallback`.
Rational to_rational(std::string_view exact, double fallback);
Rational parse_rational(std::string_view text);
std::string to_string(const Rational& r);

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Markov chain with exact transition probabilities.
struct RationalChain {
  StateId initial = 0;
  Matrix<Rational> transitions;

  std::size_t num_states() const { return static_cast<std::size_t>(transitions.rows()); }
};

/// Chain induced by a deterministic choice vector; rows sum to exactly 1 after normalization.
RationalChain rational_chain(const Mdp& m, const std::vector<std::size_t>& choice);
Matrix<double> float_chain(const Mdp& m, const std::vector<std::size_t>& choice);

/**
 * Per-state probability of reaching `goal` without entering `avoid`.
 * Gauss-Jordan elimination over the states that can reach the goal; exact for
 * Rational, partial pivoting for double.
 */
template <class Scalar>
Vector<Scalar> reach_vector(const Matrix<Scalar>& p, const StateSet& goal, const StateSet& avoid);

Rational rational_chain_solve(const RationalChain& c, StateId from, const StateSet& goal,
                              const StateSet& avoid);

inline constexpr std::uint64_t kEnumerationGuard = 1'000'000;

/// Number of deterministic memoryless strategies (saturating).
std::uint64_t count_deterministic(const Mdp& m,
                                  const std::vector<std::vector<std::size_t>>& allowed = {});

/**
 * Deterministic memoryless strategies in lexicographic order (state 0 most
 * significant). Throws std::length_error above the guard.
 */
class StrategyEnumerator {
 public:
  explicit StrategyEnumerator(const Mdp& m, std::vector<std::vector<std::size_t>> allowed = {});
  /// Writes the next strategy into `choice`; false when exhausted.
  bool next(std::vector<std::size_t>& choice);

 private:
  std::vector<std::vector<std::size_t>> allowed_;
  std::vector<std::size_t> digit_;
  bool started_ = false;
  bool done_ = false;
};

std::vector<StrategyTable> enumerate_deterministic(const Mdp& m);

enum class Arithmetic { Float, Rational };

struct OracleInterval {
  double lower = 0.0;
  double upper = 0.0;
  std::optional<Rational> lower_exact;  ///< set in rational mode
  std::optional<Rational> upper_exact;
  /// Witness pairs of base strategies: (before, after) the subject was seen.
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> lower_witness;
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> upper_witness;
  std::uint64_t feasible = 0;  ///< strategy pairs passing the class filter
};

struct OracleQuery {
  StateId target = 0;
  Subject subject = StateId{0};
  StrategyClass strategy_class = StrategyClass::All;
  bool normalized = true;
  double epsilon = 1e-4;
  Arithmetic arithmetic = Arithmetic::Float;
};

/// Exhaustive min/max over pairs of deterministic base strategies.
/// Throws UndefinedImportance when no pair passes the class filter.
OracleInterval brute_force_bounds(const Mdp& m, const OracleQuery& q);

/// Lifts a witness pair to a product strategy (for comparing with the solver).
StrategyTable lift_pair(const ProductMdp& p, const std::vector<std::size_t>& before,
                        const std::vector<std::size_t>& after);

}  // namespace mdpattr::oracle
