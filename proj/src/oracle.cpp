#include "mdpattr/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace mdpattr::oracle {

using boost::multiprecision::cpp_int;

Rational parse_rational(std::string_view text) {
  auto bad = [&]() -> ModelError {
    return ModelError("not a probability literal: '" + std::string(text) + "'");
  };
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) throw bad();

  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational num = parse_rational(text.substr(0, slash));
    Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) throw bad();
    return num / den;
  }

  bool negative = false;
  std::size_t i = 0;
  if (text[i] == '+' || text[i] == '-') negative = text[i++] == '-';
  std::string digits;
  long frac = 0;
  bool dot = false;
  for (; i < text.size() && text[i] != 'e' && text[i] != 'E'; ++i) {
    char c = text[i];
    if (c == '.' && !dot) {
      dot = true;
    } else if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (dot) ++frac;
    } else {
      throw bad();
    }
  }
  if (digits.empty()) throw bad();
  long exponent = 0;
  if (i < text.size()) {
    auto rest = text.substr(i + 1);
    if (!rest.empty() && rest.front() == '+') rest.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), exponent);
    if (ec != std::errc() || ptr != rest.data() + rest.size() || rest.empty()) throw bad();
  }
  // cpp_int reads a leading zero as an octal prefix.
  auto first = digits.find_first_not_of('0');
  Rational value{first == std::string::npos ? cpp_int(0) : cpp_int(digits.substr(first))};
  long shift = exponent - frac;
  cpp_int scale = boost::multiprecision::pow(cpp_int(10), static_cast<unsigned>(std::labs(shift)));
  value = shift >= 0 ? value * Rational(scale) : value / Rational(scale);
  return negative ? Rational(-value) : value;
}

Rational to_rational(std::string_view exact, double fallback) {
  if (!exact.empty()) return parse_rational(exact);
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, fallback);
  if (ec != std::errc()) throw ModelError("cannot convert probability");
  return parse_rational(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

std::string to_string(const Rational& r) {
  return r.str();
}

namespace {

template <class Scalar>
Scalar magnitude(const Scalar& x) {
  return x < Scalar(0) ? Scalar(-x) : x;
}

/// Gauss-Jordan; partial pivoting for floating point, first non-zero pivot otherwise.
template <class Scalar>
Vector<Scalar> solve_dense(Matrix<Scalar> a, Vector<Scalar> b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = -1;
    for (Eigen::Index r = col; r < n; ++r) {
      if (a(r, col) == Scalar(0)) continue;
      if constexpr (std::is_floating_point_v<Scalar>) {
        if (pivot < 0 || magnitude(a(r, col)) > magnitude(a(pivot, col))) pivot = r;
      } else {
        pivot = r;
        break;
      }
    }
    if (pivot < 0) throw std::runtime_error("singular system in oracle elimination");
    if (pivot != col) {
      a.row(pivot).swap(a.row(col));
      std::swap(b(pivot), b(col));
    }
    Scalar inv = Scalar(1) / a(col, col);
    for (Eigen::Index c = col; c < n; ++c) a(col, c) = a(col, c) * inv;
    b(col) = b(col) * inv;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col || a(r, col) == Scalar(0)) continue;
      Scalar f = a(r, col);
      for (Eigen::Index c = col; c < n; ++c) a(r, c) = a(r, c) - f * a(col, c);
      b(r) = b(r) - f * b(col);
    }
  }
  return b;
}

template <class Scalar>
Scalar probability_of(const Outcome& o) {
  if constexpr (std::is_floating_point_v<Scalar>) {
    return o.probability;
  } else {
    return to_rational(o.exact, o.probability);
  }
}

template <class Scalar>
Matrix<Scalar> chain_of(const Mdp& m, const std::vector<std::size_t>& choice) {
  const auto n = static_cast<Eigen::Index>(m.num_states());
  Matrix<Scalar> p = Matrix<Scalar>::Zero(n, n);
  for (StateId s = 0; s < m.num_states(); ++s) {
    const auto& outs = m.choices(s)[choice.at(s)].outcomes;
    Scalar sum(0);
    for (const auto& o : outs) {
      Scalar q = probability_of<Scalar>(o);
      p(s, o.next) = p(s, o.next) + q;
      sum = sum + q;
    }
    if constexpr (!std::is_floating_point_v<Scalar>) {
      // Literals like 0.333 for 1/3 are accepted within tolerance; make rows exact.
      if (sum != Scalar(1)) {
        for (Eigen::Index c = 0; c < n; ++c) p(s, c) = p(s, c) / sum;
      }
    }
  }
  return p;
}

}  // namespace

template <class Scalar>
Vector<Scalar> reach_vector(const Matrix<Scalar>& p, const StateSet& goal, const StateSet& avoid) {
  const auto n = static_cast<std::size_t>(p.rows());
  if (goal.size() != n || avoid.size() != n) throw std::invalid_argument("set size mismatch");
  for (std::size_t s = 0; s < n; ++s) {
    if (goal[s] && avoid[s]) throw std::invalid_argument("goal and avoid overlap");
  }
  StateSet relevant = goal;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      if (relevant[s] || avoid[s]) continue;
      for (std::size_t r = 0; r < n; ++r) {
        if (relevant[r] && p(s, r) != Scalar(0)) {
          relevant[s] = true;
          changed = true;
          break;
        }
      }
    }
  }
  std::vector<Eigen::Index> idx(n, -1);
  Eigen::Index k = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (relevant[s] && !goal[s]) idx[s] = k++;
  }
  Vector<Scalar> x = Vector<Scalar>::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    if (goal[s]) x(s) = Scalar(1);
  }
  if (k == 0) return x;
  Matrix<Scalar> a = Matrix<Scalar>::Identity(k, k);
  Vector<Scalar> b = Vector<Scalar>::Zero(k);
  for (std::size_t s = 0; s < n; ++s) {
    if (idx[s] < 0) continue;
    for (std::size_t r = 0; r < n; ++r) {
      if (p(s, r) == Scalar(0)) continue;
      if (goal[r]) {
        b(idx[s]) = b(idx[s]) + p(s, r);
      } else if (idx[r] >= 0) {
        a(idx[s], idx[r]) = a(idx[s], idx[r]) - p(s, r);
      }
    }
  }
  Vector<Scalar> y = solve_dense<Scalar>(std::move(a), std::move(b));
  for (std::size_t s = 0; s < n; ++s) {
    if (idx[s] >= 0) x(s) = y(idx[s]);
  }
  return x;
}

template Vector<double> reach_vector<double>(const Matrix<double>&, const StateSet&, const StateSet&);
template Vector<Rational> reach_vector<Rational>(const Matrix<Rational>&, const StateSet&,
                                                 const StateSet&);

RationalChain rational_chain(const Mdp& m, const std::vector<std::size_t>& choice) {
  return {m.initial(), chain_of<Rational>(m, choice)};
}

Matrix<double> float_chain(const Mdp& m, const std::vector<std::size_t>& choice) {
  return chain_of<double>(m, choice);
}

Rational rational_chain_solve(const RationalChain& c, StateId from, const StateSet& goal,
                              const StateSet& avoid) {
  if (from >= c.num_states()) throw ModelError("unknown state index");
  return reach_vector<Rational>(c.transitions, goal, avoid)(static_cast<Eigen::Index>(from));
}

std::uint64_t count_deterministic(const Mdp& m, const std::vector<std::vector<std::size_t>>& allowed) {
  std::uint64_t total = 1;
  for (StateId s = 0; s < m.num_states(); ++s) {
    std::uint64_t k = allowed.empty() ? m.choices(s).size() : allowed[s].size();
    if (k == 0) return 0;
    if (total > std::numeric_limits<std::uint64_t>::max() / k) return std::numeric_limits<std::uint64_t>::max();
    total *= k;
  }
  return total;
}

StrategyEnumerator::StrategyEnumerator(const Mdp& m, std::vector<std::vector<std::size_t>> allowed)
    : allowed_(std::move(allowed)) {
  if (allowed_.empty()) {
    allowed_.resize(m.num_states());
    for (StateId s = 0; s < m.num_states(); ++s) {
      for (std::size_t c = 0; c < m.choices(s).size(); ++c) allowed_[s].push_back(c);
    }
  }
  if (allowed_.size() != m.num_states()) throw std::invalid_argument("allowed table size mismatch");
  std::uint64_t total = count_deterministic(m, allowed_);
  if (total > kEnumerationGuard) {
    throw std::length_error("too many deterministic strategies to enumerate (" +
                            std::to_string(total) + ")");
  }
  done_ = total == 0;
  digit_.assign(allowed_.size(), 0);
}

bool StrategyEnumerator::next(std::vector<std::size_t>& choice) {
  if (done_) return false;
  if (started_) {
    std::size_t i = digit_.size();
    while (i > 0) {
      --i;
      if (++digit_[i] < allowed_[i].size()) break;
      digit_[i] = 0;
      if (i == 0) {
        done_ = true;
        return false;
      }
    }
    if (digit_.empty()) {
      done_ = true;
      return false;
    }
  }
  started_ = true;
  choice.resize(digit_.size());
  for (std::size_t s = 0; s < digit_.size(); ++s) choice[s] = allowed_[s][digit_[s]];
  return true;
}

std::vector<StrategyTable> enumerate_deterministic(const Mdp& m) {
  std::vector<StrategyTable> out;
  StrategyEnumerator e(m);
  std::vector<std::size_t> choice;
  while (e.next(choice)) out.push_back(StrategyTable::deterministic(m, choice));
  return out;
}

namespace {

template <class Scalar>
double to_double(const Scalar& x) {
  if constexpr (std::is_floating_point_v<Scalar>) {
    return x;
  } else {
    return x.template convert_to<double>();
  }
}

template <class Scalar>
struct PairTerms {
  std::vector<std::size_t> choice;
  std::vector<Scalar> before;  // per pivot (state subject) or a single entry (path subject)
  Scalar bypass{0};            // mass reaching t without the subject
  std::vector<Scalar> after;   // matching continuation probabilities
  Scalar reach{0};             // Pr(reach t) under the strategy on its own
};

template <class Scalar>
OracleInterval run(const Mdp& m, const OracleQuery& q) {
  const StateId t = q.target;
  const auto n = m.num_states();
  if (t >= n) throw ModelError("unknown target state");
  const bool is_path = std::holds_alternative<PathSpec>(q.subject);

  std::vector<std::vector<std::size_t>> allowed(n);
  for (StateId s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < m.choices(s).size(); ++c) allowed[s].push_back(c);
  }
  StateSet pivots(n, false);
  std::vector<StateId> pivot_list;
  PathSpec path;
  if (is_path) {
    path = std::get<PathSpec>(q.subject);
    fix_path_prefix(m, path, t);
    for (std::size_t i = 0; i < path.length(); ++i) allowed[path.states[i]] = {path.choices[i]};
  } else {
    if (const auto* s = std::get_if<StateId>(&q.subject)) {
      pivots.at(*s) = true;
    } else {
      pivots = std::get<StateSet>(q.subject);
    }
    for (StateId s = 0; s < n; ++s) {
      if (pivots[s]) pivot_list.push_back(s);
    }
  }

  // Per-strategy terms; every strategy can serve in either role.
  std::vector<PairTerms<Scalar>> terms;
  Scalar p_star(0);
  {
    StrategyEnumerator all(m);
    std::vector<std::size_t> choice;
    while (all.next(choice)) {
      Matrix<Scalar> p = chain_of<Scalar>(m, choice);
      Scalar r = reach_vector<Scalar>(p, make_set(n, {t}), StateSet(n, false))(m.initial());
      if (r > p_star) p_star = r;
    }
  }
  StrategyEnumerator e(m, allowed);
  std::vector<std::size_t> choice;
  while (e.next(choice)) {
    Matrix<Scalar> p = chain_of<Scalar>(m, choice);
    PairTerms<Scalar> pt;
    pt.choice = choice;
    Vector<Scalar> to_t = reach_vector<Scalar>(p, make_set(n, {t}), StateSet(n, false));
    pt.reach = to_t(m.initial());
    if (is_path) {
      Scalar prefix(1);
      Scalar deviate(0);
      for (std::size_t i = 0; i < path.length(); ++i) {
        StateId s = path.states[i];
        for (const auto& o : m.choices(s)[path.choices[i]].outcomes) {
          if (o.next == path.states[i + 1]) continue;
          deviate = deviate + prefix * p(s, o.next) * to_t(o.next);
        }
        prefix = prefix * p(s, path.states[i + 1]);
      }
      pt.before = {prefix};
      pt.bypass = deviate;
      pt.after = {to_t(path.last())};
    } else if (pivots[m.initial()]) {
      pt.before = {Scalar(1)};
      pt.after = {to_t(m.initial())};
    } else {
      for (StateId k : pivot_list) {
        StateSet avoid = pivots;
        avoid[k] = false;
        if (k != t) avoid[t] = true;
        pt.before.push_back(reach_vector<Scalar>(p, make_set(n, {k}), avoid)(m.initial()));
        pt.after.push_back(k == t ? Scalar(1) : to_t(k));
      }
      pt.bypass = pivots[t] ? Scalar(0)
                            : reach_vector<Scalar>(p, make_set(n, {t}), pivots)(m.initial());
    }
    terms.push_back(std::move(pt));
  }

  Scalar eps;
  if constexpr (std::is_floating_point_v<Scalar>) {
    eps = q.epsilon;
  } else {
    eps = to_rational("", q.epsilon);
  }
  auto feasible = [&](const Scalar& d) {
    if (q.strategy_class == StrategyClass::All) return d >= eps && d > Scalar(0);
    if constexpr (std::is_floating_point_v<Scalar>) {
      return std::abs(d - p_star) <= 1e-8 && d > 0.0;
    } else {
      return d == p_star && d > Scalar(0);
    }
  };

  OracleInterval out;
  std::optional<Scalar> lo, hi;
  for (const auto& b : terms) {
    for (const auto& a : terms) {
      Scalar num(0);
      for (std::size_t k = 0; k < b.before.size(); ++k) num = num + b.before[k] * a.after[k];
      Scalar den = num + b.bypass;
      if (!feasible(den)) continue;
      ++out.feasible;
      Scalar v = q.normalized ? Scalar(num / den) : num;
      if (!lo || v < *lo) {
        lo = v;
        out.lower_witness = {b.choice, a.choice};
      }
      if (!hi || v > *hi) {
        hi = v;
        out.upper_witness = {b.choice, a.choice};
      }
    }
  }
  if (!lo) throw UndefinedImportance("no strategy in the class reaches the target");
  out.lower = to_double(*lo);
  out.upper = to_double(*hi);
  if constexpr (!std::is_floating_point_v<Scalar>) {
    out.lower_exact = *lo;
    out.upper_exact = *hi;
  }
  return out;
}

}  // namespace

OracleInterval brute_force_bounds(const Mdp& m, const OracleQuery& q) {
  if (q.arithmetic == Arithmetic::Rational) return run<Rational>(m, q);
  return run<double>(m, q);
}

StrategyTable lift_pair(const ProductMdp& p, const std::vector<std::size_t>& before,
                        const std::vector<std::size_t>& after) {
  std::vector<std::size_t> choice(p.base_state.size());
  for (StateId i = 0; i < p.base_state.size(); ++i) {
    const auto& src = p.memory[i] == Memory::Visited ? after : before;
    choice[i] = src.at(p.base_state[i]);
  }
  return StrategyTable::deterministic(p.product, std::move(choice));
}

}  // namespace mdpattr::oracle
