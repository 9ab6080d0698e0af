#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "firelp/panel.hpp"
#include "firelp/spatial.hpp"

namespace firelp {

// A column recipe: a stored series, an optional transform, and a temporal
// shift (lag > 0 looks back).
struct SeriesRef {
  enum class Transform { level, log };
  std::string series;
  Transform transform = Transform::level;
  int lag = 0;
  std::string label() const;
};

// High/low regime indicator: 1 when the indicator series exceeds the given
// percentile of its distribution, computed per county or over the pooled
// sample, using only non-missing values.
struct StateRule {
  enum class Scope { county, sample };
  std::string series;
  double percentile = 70.0;
  Scope scope = Scope::county;
};

// Row/county filters applied when assembling a design.
struct SampleFilter {
  enum class Kind {
    attribute_above_median,  // counties with attribute > median
    attribute_below_median,  // counties with attribute <= median
    region,                  // counties whose region tag matches `value`
    clean_control            // rows: treated now, or no fire/missing within +-window
  };
  Kind kind;
  std::string name;   // attribute or tag name; shock series for clean_control
  std::string value;  // region label
  int window = 36;    // clean_control half-width in periods
  std::string describe() const;
};

struct ModelSpec {
  SeriesRef outcome;  // level or log; response is f(x[t+h]) - f(x[t-1])
  std::string shock;  // level series, contemporaneous value is the impulse
  int horizons = 36;
  int shock_lags = -1;    // -1: frequency default (24 monthly, 2 annual)
  int outcome_lags = -1;  // lags of the transformed outcome level
  std::vector<SeriesRef> controls;
  bool county_effects = true;
  bool period_effects = true;
  std::optional<StateRule> state;
  bool spatial = false;  // add W*shock and W^2*shock terms with their lags
  std::vector<SampleFilter> filters;
  double impulse_size = 13.1;  // shock units for reporting scaled effects
  double ci_level = 0.95;

  int resolved_shock_lags(Frequency freq) const;
  int resolved_outcome_lags(Frequency freq) const;
};

int default_lags(Frequency freq);

// One horizon's regression problem. Shock columns come first; fixed effects
// are absorbed later by the estimator, not materialized here.
struct HorizonDesign {
  int horizon = 0;
  Eigen::VectorXd response;
  Eigen::MatrixXd regressors;
  std::vector<std::string> column_names;
  int n_shock_columns = 1;
  std::vector<int> row_county;          // panel county index per row
  std::vector<int> row_period;          // absolute period code per row
  std::vector<std::string> dropped_columns;  // identically-zero columns removed
  int rows_dropped_missing_state = 0;
  bool county_effects = true;
  bool period_effects = true;

  int n_rows() const { return static_cast<int>(response.size()); }
  int n_cols() const { return static_cast<int>(regressors.cols()); }
};

// Assemble the horizon-h design: response, shock block (shock + lags), outcome
// lags, extra controls; complete-case rows only. A state rule splits the
// contemporaneous shock into high/low regime columns; a spatial spec prepends
// neighbor and second-ring shock terms. Identically-zero columns are dropped
// and recorded. Fails when the sample is empty or column names collide.
HorizonDesign build_design(const PanelDataset& panel, const ModelSpec& spec, int horizon,
                           const AdjacencyMatrix* adjacency = nullptr);

// Panel with all derived series a spec needs (transformed outcome, spatial
// shock aggregates, state indicator) materialized once, so per-horizon design
// builds are pure lookups. build_design calls this internally when needed;
// the horizon loop calls it once up front.
PanelDataset augment_for_spec(const PanelDataset& panel, const ModelSpec& spec,
                              const AdjacencyMatrix* adjacency = nullptr);

// 0/1/NaN indicator per panel cell for a state rule (NaN where the indicator
// series is missing, or everywhere for an all-missing county).
std::vector<double> state_indicator(const PanelDataset& panel, const StateRule& rule);

// Split the first shock column into high-regime and low-regime interactions.
// Rows whose indicator is missing are dropped and counted.
HorizonDesign interact_state(const HorizonDesign& design, const PanelDataset& panel,
                             const std::vector<double>& indicator);

// Clean-control row mask: a cell passes when the county has a positive shock
// now, or has no positive and no missing shock anywhere within +-window
// periods (clipped to the panel range).
std::vector<std::uint8_t> clean_control_mask(const PanelDataset& panel,
                                             const std::string& shock, int window);

struct MedianSplit {
  std::vector<int> above;  // attribute > median
  std::vector<int> below;  // attribute <= median
  double median_value = kNaN;
};

// Counties split by an attribute's median (ties go below). Needs at least two
// distinct non-missing values; counties with a missing attribute are excluded.
MedianSplit median_split(const PanelDataset& panel, const std::string& attribute);

// Sum of squared shares. Shares must be non-negative with a positive sum; a
// sum away from one is renormalized (flagged via `renormalized`).
double herfindahl(const std::vector<double>& shares, bool* renormalized = nullptr);

}  // namespace firelp
