#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "firelp/estimator.hpp"

namespace firelp {

// Per-horizon inference policy. The default pairs the Bartlett kernel with
// bandwidth = horizon + 1: response overlap makes residuals MA(horizon), so
// serial dependence can reach that far, and Bartlett weights keep the
// estimate positive semidefinite. (With the lagged-shock controls in place
// the residualized shock is the shock innovation, so the score process is
// close to serially uncorrelated and the kernel choice mostly guards against
// misspecification.) The rectangular kernel weights every lag fully but can
// produce an indefinite estimate in finite samples.
struct InferencePolicy {
  enum class Bandwidth { horizon, horizon_plus_one, fixed };
  HacKernel kernel = HacKernel::bartlett;
  Bandwidth bandwidth_rule = Bandwidth::horizon_plus_one;
  int fixed_bandwidth = 0;
  bool small_sample = true;

  int bandwidth_for(int horizon) const {
    switch (bandwidth_rule) {
      case Bandwidth::horizon: return horizon;
      case Bandwidth::horizon_plus_one: return horizon + 1;
      case Bandwidth::fixed: return fixed_bandwidth;
    }
    return horizon;
  }
  DkOptions dk_options() const { return DkOptions{kernel, small_sample}; }
};

// One estimated response path. `beta` is per shock unit; `scaled_*` are in
// percentage points per impulse (beta * impulse_size * 100), with lo/hi the
// normal-theory confidence band at `ci_level`.
struct ImpulseResponse {
  std::string label;
  double impulse_size = 13.1;
  double ci_level = 0.95;
  std::vector<double> beta;
  std::vector<double> se;
  std::vector<double> scaled_beta;
  std::vector<double> scaled_se;
  std::vector<double> lo;
  std::vector<double> hi;

  int max_horizon() const { return static_cast<int>(beta.size()) - 1; }
};

struct IrfOptions {
  InferencePolicy inference;
  DemeanOptions demean;
  OlsOptions ols;
  int threads = 1;
};

struct IrfResult {
  std::vector<ImpulseResponse> paths;  // own/baseline path first
  std::vector<int> n_obs;              // per horizon
  std::vector<int> bandwidth;          // per horizon
  std::vector<std::string> notes;      // dropped columns etc.

  const ImpulseResponse& path(const std::string& label) const;
  bool has_path(const std::string& label) const;
};

// Estimate the impulse response at horizons 0..spec.horizons. Baseline specs
// yield one path ("baseline"); a state rule yields "high" and "low"; spatial
// terms yield "own", "neighbor" and "second_ring". Shock columns that are
// identically zero at every horizon (e.g. no neighbor ever shocked) drop out
// with a note instead of a path.
IrfResult estimate_irf(const PanelDataset& panel, const ModelSpec& spec,
                       const AdjacencyMatrix* adjacency = nullptr,
                       const IrfOptions& options = {});

// Multiply a per-unit coefficient path into percentage points per impulse.
std::vector<double> rescale(const std::vector<double>& beta, double impulse_size);

struct ConfidenceBand {
  std::vector<double> lo;
  std::vector<double> hi;
};

ConfidenceBand confidence_band(const std::vector<double>& scaled_beta,
                               const std::vector<double>& scaled_se, double level);

// Sum of scaled responses over horizons 1..max_horizon (the impact month is
// excluded: employment cannot respond within the month by convention).
double cumulative_effect(const ImpulseResponse& path, int max_horizon,
                         bool include_impact = false);

struct JackknifeOptions {
  int draws = 1000;
  double drop_share = 0.05;
  std::uint64_t seed = 0;
  // delete-d rescaling (retained/dropped) makes the spread across draws an
  // estimate of the sampling variance; `none` leaves the raw draw covariance.
  enum class Scale { delete_d, none } scale = Scale::delete_d;
  double max_failure_share = 0.10;
  std::string target_column;  // default: first shock column
  int threads = 1;
};

struct JackknifeResult {
  Eigen::MatrixXd covariance;   // (H+1)x(H+1), scaled units
  Eigen::MatrixXd draw_paths;   // draws x (H+1), scaled units
  std::vector<std::vector<int>> dropped;  // per draw, panel county indices
  double sd_cumulative = 0.0;   // sd of sum over horizons 1..H
  double scale_factor = 1.0;
  int n_counties = 0;
  int n_dropped_per_draw = 0;
  int failures = 0;
  std::uint64_t seed = 0;
};

// Block jackknife over counties: re-estimate the target coefficient path with
// a random drop_share of the sample's counties removed, `draws` times. Draws
// whose reduced system is singular are redrawn; more than max_failure_share
// failed attempts is an error. Deterministic for a given seed regardless of
// thread count. Design-level derived quantities (state thresholds, median
// splits, clean-control masks) stay fixed at their full-sample values.
JackknifeResult block_jackknife(const PanelDataset& panel, const ModelSpec& spec,
                                const AdjacencyMatrix* adjacency,
                                const JackknifeOptions& options);

}  // namespace firelp
