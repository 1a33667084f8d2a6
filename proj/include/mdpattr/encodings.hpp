#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdpattr/product.hpp"

namespace mdpattr {

enum class Sense { Min, Max };
const char* to_string(Sense s);
Sense parse_sense(std::string_view s);

struct EncodingConfig {
  double epsilon = 1e-4;
  double big_m = 1e16;
  bool include_redundant_zero_constraint = true;
  bool restrict_to_reachable = true;
  /// Reachability-optimal encodings: hierarchical objective instead of pinning p*.
  bool hierarchical = false;
  /// Treat every state whose only action is a probability-1 self-loop as terminal.
  bool detect_terminals = true;
  std::vector<std::string> extra_terminals;  ///< base state names added to the terminal set
};

void check_config(const EncodingConfig& cfg);

enum class Domain { Continuous, Binary, Integer };
enum class Comparator { LessEqual, Equal, GreaterEqual };

struct Variable {
  std::string name;
  Domain domain = Domain::Continuous;
  double lower = 0.0;
  double upper = 1.0;
};

struct LinearTerm {
  std::size_t var;
  double coef;
};

struct QuadTerm {
  std::size_t left;
  std::size_t right;
  double coef;
};

struct Constraint {
  std::string name;
  std::string family;
  std::vector<LinearTerm> linear;
  std::vector<QuadTerm> quadratic;
  Comparator cmp = Comparator::Equal;
  double rhs = 0.0;
};

struct Fraction {
  std::vector<LinearTerm> numerator;
  std::vector<LinearTerm> denominator;
};

struct ObjectiveFn {
  std::string name;
  Sense sense = Sense::Min;
  std::vector<LinearTerm> linear;
  std::vector<QuadTerm> quadratic;
  std::optional<Fraction> fraction;  ///< objective = numerator / denominator
};

/// Links a strategy variable to its product state and action.
struct StrategyVar {
  std::size_t var;
  StateId state;
  std::size_t choice;
};

/**
 * Solver-neutral optimization model. Objectives are hierarchical: later
 * entries are optimized subject to earlier ones being optimal.
 */
struct OptModel {
  std::string kind;  ///< "qp", "qpstar" or "lpstar"
  std::vector<Variable> variables;
  std::vector<Constraint> constraints;
  std::vector<ObjectiveFn> objectives;

  std::vector<StrategyVar> strategy_vars;
  std::size_t numerator_var = 0;    ///< reach probability of (t, visited) from the initial state
  std::size_t denominator_var = 0;  ///< reach probability of (t, bypassed) from the initial state

  std::size_t add_variable(std::string name, Domain d, double lower, double upper);
  std::optional<std::size_t> find_variable(std::string_view name) const;
  std::size_t count_family(std::string_view family) const;
  bool has_quadratic() const;
};

/// Throws std::invalid_argument on duplicate names or dangling variable references.
void check_model(const OptModel& m);

/// Product states treated as terminal by the ordering constraints.
StateSet terminal_states(const ProductMdp& p, StateId t, const EncodingConfig& cfg);

OptModel build_qp(const ProductMdp& p, StateId t, Sense sense, const EncodingConfig& cfg);
OptModel build_qp_star(const ProductMdp& p, StateId t, double p_star, Sense sense,
                       const EncodingConfig& cfg);
OptModel build_lp_star(const ProductMdp& p, StateId t, double p_star, Sense sense,
                       const EncodingConfig& cfg);

/// Replaces a fractional objective by numerator / value and pins the denominator to value.
OptModel pin_denominator(OptModel m, double value);

/// Throws UndefinedImportance when no strategy reaches t with probability >= epsilon,
/// i.e. when the encodings are infeasible.
void precheck_feasible(const ProductMdp& p, StateId t, const EncodingConfig& cfg);

/// [A-Za-z0-9_] version of a name.
std::string sanitize_name(std::string_view name);

/// LP text format. Throws std::invalid_argument for fractional objectives or
/// names that collide after sanitization.
std::string serialize_lp(const OptModel& m);

/// Companion metadata describing variables, configuration and objective hierarchy.
nlohmann::json model_metadata(const OptModel& m, const ProductMdp& p, StateId t,
                              const EncodingConfig& cfg, std::optional<double> p_star);

using Assignment = std::map<std::string, double>;

/// Flat "name value" lines; '#' starts a comment.
Assignment parse_solution(std::string_view text);

/// Decodes the strategy variables of a (sanitized-name) assignment.
StrategyTable strategy_from_solution(const OptModel& m, const Assignment& a, const ProductMdp& p);

}  // namespace mdpattr
