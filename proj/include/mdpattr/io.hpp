#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdpattr/importance.hpp"
#include "mdpattr/models.hpp"

namespace mdpattr {

// ---- model files -----------------------------------------------------------

/// Decodes a model document; probabilities may be numbers or "p/q" strings.
/// Throws ModelError listing the first violation.
ModelFile model_from_json(const nlohmann::json& doc);
nlohmann::ordered_json model_to_json(const ModelFile& f);

ModelFile load_model(const std::string& path);
void save_model(const ModelFile& f, const std::string& path);

/// Resolves an explicit target name, falling back to the one stored in the file.
StateId resolve_target(const ModelFile& f, const std::optional<std::string>& name);

// ---- reports ---------------------------------------------------------------

struct AnalysisReport {
  std::string target;
  std::string subject_kind;  ///< "state", "path" or "cell"
  std::string subject;
  std::string strategy_class;  ///< "all", "opt"
  bool normalized = true;
  bool path_following = false;
  double epsilon = 1e-4;
  std::string status;  ///< "ok", "undefined" or "budget"
  std::optional<double> lower;
  std::optional<double> upper;
  std::string basis;  ///< how the bounds were obtained
  std::vector<WitnessEntry> lower_witness;
  std::vector<WitnessEntry> upper_witness;
  std::uint64_t nodes = 0;
  std::optional<double> seconds;  ///< only when timings were requested
  std::string message;

  bool operator==(const AnalysisReport&) const;
};

nlohmann::ordered_json report_to_json(const AnalysisReport& r);
AnalysisReport report_from_json(const nlohmann::json& doc);

/// Fills bounds, statuses and witness tables from a computed interval.
void fill_report(AnalysisReport& r, const ImportanceInterval& iv);

// ---- batch / explain / heatmap --------------------------------------------

struct BatchRow {
  std::string state;
  std::optional<double> lower;
  std::optional<double> upper;
  std::string status;  ///< "ok", "undefined", "budget" or "error"
  std::uint64_t nodes = 0;
  double seconds = 0.0;
};

struct BatchOptions {
  StrategyClass strategy_class = StrategyClass::All;
  bool normalized = true;
  double epsilon = 1e-4;
  unsigned jobs = 1;
  std::uint64_t node_limit = 10'000'000;
  double time_limit_seconds = 600.0;
};

/// Bounds for every state, sorted by state name. Per-state failures become row statuses.
std::vector<BatchRow> batch_importance(std::shared_ptr<const Mdp> m, StateId t,
                                       const BatchOptions& opt);

/// CSV: state,lower,upper,status,nodes[,seconds]; 12 significant digits.
std::string batch_csv(const std::vector<BatchRow>& rows, bool timings);
nlohmann::ordered_json batch_json(const std::vector<BatchRow>& rows, bool timings);

std::string format_probability(double v);

struct Explanation {
  std::vector<BatchRow> indispensable;  ///< lower >= high
  std::vector<BatchRow> detrimental;    ///< upper <= low
};

/// Initial state and target are excluded (their importance is 1 by definition).
Explanation explain(const Mdp& m, StateId t, const std::vector<BatchRow>& rows, double high,
                    double low);
std::string explanation_text(const Mdp& m, StateId t, const Explanation& e, double high,
                             double low);

struct CellImportance {
  GridCell cell;
  std::optional<double> lower;
  std::optional<double> upper;
  std::string status;
};

/// Importance of each labelled grid cell, visiting any of its states counting as a visit.
std::vector<CellImportance> cell_importance(std::shared_ptr<const Mdp> m, StateId t,
                                            const BatchOptions& opt);

/// Grid size implied by the cell labels; nullopt if the model has none.
std::optional<std::pair<int, int>> grid_extent(const Mdp& m);

/// Plain PPM (P3): white for lower bound 1 fading to red for 0; grey for cells without data.
std::string heatmap_ppm(const std::vector<CellImportance>& cells, int width, int height,
                        int scale = 16);

}  // namespace mdpattr
