#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "firelp/design.hpp"

namespace firelp {

struct DemeanOptions {
  double tolerance = 1e-10;  // relative to each column's initial scale
  int max_sweeps = 10000;
};

struct DemeanInfo {
  int sweeps = 0;
  double max_residual_mean = 0.0;  // largest |group mean| at exit, scaled
  int singleton_counties = 0;
  int singleton_periods = 0;
};

struct DemeanedSystem {
  Eigen::MatrixXd regressors;
  Eigen::VectorXd response;
  DemeanInfo info;
};

// Absorb county and period fixed effects by alternating within-group
// demeaning until every group mean is below tolerance (relative to the
// column's initial scale). Fails if max_sweeps is hit first.
DemeanedSystem two_way_demean(Eigen::MatrixXd regressors, Eigen::VectorXd response,
                              const std::vector<int>& county, const std::vector<int>& period,
                              const DemeanOptions& options = {});

// Single-dimension variant (exact, one pass): absorb one set of group means.
DemeanedSystem one_way_demean(Eigen::MatrixXd regressors, Eigen::VectorXd response,
                              const std::vector<int>& group);

struct OlsOptions {
  double rank_tolerance = 1e-10;
};

struct OlsResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd gram;  // X'X of the (possibly demeaned) regressors
};

// Least squares via normal equations with a pivoted-Cholesky rank check.
// Rank deficiency is an estimation error naming the dependent columns.
OlsResult ols_fit(const Eigen::MatrixXd& regressors, const Eigen::VectorXd& response,
                  const std::vector<std::string>* column_names = nullptr,
                  const OlsOptions& options = {});

enum class HacKernel { bartlett, rectangular };

struct DkOptions {
  HacKernel kernel = HacKernel::bartlett;
  bool small_sample = true;  // multiply the score covariance by T/(T-1)
};

// Cross-section-robust HAC covariance: sum scores within each period,
// h_t = sum_c x_ct e_ct, then V = (X'X)^-1 S (X'X)^-1 with
// S = Omega_0 + sum_{j=1..m} w_j (Omega_j + Omega_j'),
// Omega_j = sum_t h_t h_{t-j}', Bartlett w_j = 1 - j/(m+1) or rectangular
// w_j = 1. Lag distance is measured in period codes, so calendar gaps count.
Eigen::MatrixXd dk_covariance(const Eigen::MatrixXd& regressors,
                              const Eigen::VectorXd& residuals,
                              const std::vector<int>& period, int bandwidth,
                              const DkOptions& options = {},
                              const Eigen::MatrixXd* gram = nullptr);

struct FitOptions {
  DemeanOptions demean;
  OlsOptions ols;
  DkOptions dk;
  int dk_bandwidth = 0;
};

struct FitResult {
  std::vector<std::string> column_names;
  Eigen::VectorXd coef;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
  Eigen::VectorXd residuals;
  int n_obs = 0;
  int n_counties = 0;
  int n_periods = 0;
  int horizon = 0;
  int dk_bandwidth = 0;
  int clamped_variances = 0;  // nuisance-column diagonals floored at zero
  DemeanInfo demean_info;

  int column(const std::string& name) const;  // -1 when absent
};

// Full per-horizon fit: absorb the design's fixed effects, run least squares,
// attach the cross-section-robust covariance. The rectangular kernel is not
// positive semidefinite in finite samples: a negative variance on a shock
// column (the reported estimates) is an estimation error, while negative
// nuisance-column diagonals are floored at zero and counted.
FitResult fit_design(const HorizonDesign& design, const FitOptions& options);

}  // namespace firelp
