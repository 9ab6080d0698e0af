#pragma once

// Test-only oracles and data builders. The estimators under test must agree
// with these independent, brute-force implementations.

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "firelp/common.hpp"
#include "firelp/panel.hpp"

namespace testutil {

// Reference least squares with explicit dummy variables: regress y on
// [X, county dummies, period dummies minus one reference], via a
// rank-revealing QR. Returns the first k coefficients.
inline Eigen::VectorXd dummy_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<int>& county, const std::vector<int>& period,
                                 bool county_fe, bool period_fe) {
  const int n = static_cast<int>(x.rows());
  const int k = static_cast<int>(x.cols());
  std::vector<int> county_levels(county.begin(), county.end());
  std::sort(county_levels.begin(), county_levels.end());
  county_levels.erase(std::unique(county_levels.begin(), county_levels.end()),
                      county_levels.end());
  std::vector<int> period_levels(period.begin(), period.end());
  std::sort(period_levels.begin(), period_levels.end());
  period_levels.erase(std::unique(period_levels.begin(), period_levels.end()),
                      period_levels.end());
  // Full county dummy set; drop one period level only when the county block
  // already spans an intercept (both-FE case).
  const int n_c = county_fe ? static_cast<int>(county_levels.size()) : 0;
  const int period_offset = county_fe && period_fe ? 1 : 0;
  const int n_p = period_fe ? static_cast<int>(period_levels.size()) - period_offset : 0;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, k + n_c + n_p);
  full.leftCols(k) = x;
  for (int r = 0; r < n; ++r) {
    if (county_fe) {
      const int c = static_cast<int>(std::lower_bound(county_levels.begin(), county_levels.end(),
                                                      county[static_cast<std::size_t>(r)]) -
                                     county_levels.begin());
      full(r, k + c) = 1.0;
    }
    if (period_fe) {
      const int p = static_cast<int>(std::lower_bound(period_levels.begin(), period_levels.end(),
                                                      period[static_cast<std::size_t>(r)]) -
                                     period_levels.begin());
      if (p >= period_offset) full(r, k + n_c + p - period_offset) = 1.0;
    }
  }
  const Eigen::VectorXd coef = full.colPivHouseholderQr().solve(y);
  return coef.head(k);
}

// Unbalanced random panel data for equivalence tests: row labels plus a
// random regressor matrix and response.
struct RawPanel {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<int> county;
  std::vector<int> period;
};

inline RawPanel random_raw_panel(firelp::Rng& rng, int n_counties, int n_periods, int k,
                                 double keep_probability = 0.85) {
  RawPanel out;
  std::vector<std::pair<int, int>> cells;
  for (int c = 0; c < n_counties; ++c) {
    for (int t = 0; t < n_periods; ++t) {
      if (rng.uniform() < keep_probability) cells.emplace_back(c, t);
    }
  }
  if (cells.size() < static_cast<std::size_t>(k + 3)) {
    return random_raw_panel(rng, n_counties, n_periods, k, 1.0);
  }
  const int n = static_cast<int>(cells.size());
  out.x.resize(n, k);
  out.y.resize(n);
  out.county.resize(static_cast<std::size_t>(n));
  out.period.resize(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    out.county[static_cast<std::size_t>(r)] = cells[static_cast<std::size_t>(r)].first;
    out.period[static_cast<std::size_t>(r)] = cells[static_cast<std::size_t>(r)].second;
    for (int j = 0; j < k; ++j) out.x(r, j) = rng.normal();
    out.y(r) = rng.normal();
  }
  return out;
}

// Small in-memory panel: values[series][c*T + t], NaN for missing.
inline firelp::PanelDataset make_panel(
    int n_counties, int n_periods, firelp::Frequency freq,
    const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  std::vector<std::string> ids;
  for (int c = 0; c < n_counties; ++c) ids.push_back("C" + std::to_string(c + 1));
  const int first = freq == firelp::Frequency::monthly ? 2010 * 12 : 2010;
  firelp::PanelDataset panel(ids, firelp::PeriodRange{first, first + n_periods - 1}, freq);
  for (const auto& [name, values] : series) panel.add_series(name, values);
  return panel;
}

}  // namespace testutil
