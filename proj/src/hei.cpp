#include "firelp/hei.hpp"

#include <algorithm>
#include <cmath>

namespace firelp {

std::vector<double> convolve_impact(const ImpulseResponse& path,
                                    const std::vector<double>& shocks, int depth) {
  if (depth < 0) fail(ErrorKind::data, "convolution depth must be non-negative");
  if (depth > path.max_horizon()) {
    fail(ErrorKind::data, "convolution depth " + std::to_string(depth) +
                              " exceeds the estimated path (max horizon " +
                              std::to_string(path.max_horizon()) + ")");
  }
  if (path.impulse_size <= 0.0) fail(ErrorKind::data, "impulse size must be positive");
  std::vector<double> kernel(static_cast<std::size_t>(depth) + 1);
  for (int j = 0; j <= depth; ++j) {
    const double b = path.scaled_beta[static_cast<std::size_t>(j)];
    if (is_missing(b)) {
      fail(ErrorKind::data, "response path missing at horizon " + std::to_string(j));
    }
    kernel[static_cast<std::size_t>(j)] = b / path.impulse_size;
  }
  for (const double s : shocks) {
    if (is_missing(s)) fail(ErrorKind::data, "shock sequence has missing values");
    if (s < 0.0) fail(ErrorKind::data, "shock sequence has negative values");
  }
  const int t_max = static_cast<int>(shocks.size());
  std::vector<double> impact(shocks.size(), 0.0);
  for (int t = 0; t < t_max; ++t) {
    double total = 0.0;
    for (int j = 0; j <= depth; ++j) {
      const int s = t - j;
      if (s < 0) break;  // earlier shocks are outside the observed window
      total += kernel[static_cast<std::size_t>(j)] * shocks[static_cast<std::size_t>(s)];
    }
    impact[static_cast<std::size_t>(t)] = total;
  }
  return impact;
}

std::vector<double> project_impact(const ImpulseResponse& path,
                                   const std::vector<double>& shocks, int depth) {
  return convolve_impact(path, shocks, depth);
}

HeiResult historical_impact(const PanelDataset& panel, const ImpulseResponse& path,
                            const HeiOptions& options) {
  const int N = panel.n_counties();
  const int T = panel.n_periods();
  const auto& shock = panel.series(options.shock);
  const auto& region = panel.tag(options.region_tag);
  const auto& population = panel.attribute(options.population_attribute);

  HeiResult out;
  out.first_period = panel.periods().first;
  out.frequency = panel.frequency();
  out.county_impact.resize(N, T);
  for (int c = 0; c < N; ++c) {
    std::vector<double> series(static_cast<std::size_t>(T));
    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    for (int t = 0; t < T; ++t) {
      double v = shock[base + static_cast<std::size_t>(t)];
      if (is_missing(v)) {
        ++out.missing_shock_cells;
        v = 0.0;  // no recorded shock contributes no impact
      }
      series[static_cast<std::size_t>(t)] = v;
    }
    const std::vector<double> impact = convolve_impact(path, series, options.depth);
    for (int t = 0; t < T; ++t) {
      out.county_impact(c, t) = impact[static_cast<std::size_t>(t)];
    }
  }

  RegionalImpact& reg = out.regional;
  reg.region_of.resize(static_cast<std::size_t>(N));
  for (int c = 0; c < N; ++c) {
    const std::string& label = region[static_cast<std::size_t>(c)];
    if (label.empty()) {
      fail(ErrorKind::data, "county '" + panel.county(c) + "' has no region label");
    }
    const auto it = std::lower_bound(reg.regions.begin(), reg.regions.end(), label);
    if (it == reg.regions.end() || *it != label) reg.regions.insert(it, label);
  }
  for (int c = 0; c < N; ++c) {
    reg.region_of[static_cast<std::size_t>(c)] = static_cast<int>(
        std::lower_bound(reg.regions.begin(), reg.regions.end(), region[static_cast<std::size_t>(c)]) -
        reg.regions.begin());
  }

  const int n_regions = static_cast<int>(reg.regions.size());
  std::vector<double> region_pop(static_cast<std::size_t>(n_regions), 0.0);
  for (int c = 0; c < N; ++c) {
    const double p = population[static_cast<std::size_t>(c)];
    if (is_missing(p) || p < 0.0) {
      fail(ErrorKind::data, "county '" + panel.county(c) + "' needs a non-negative population");
    }
    region_pop[static_cast<std::size_t>(reg.region_of[static_cast<std::size_t>(c)])] += p;
  }
  for (int r = 0; r < n_regions; ++r) {
    if (region_pop[static_cast<std::size_t>(r)] <= 0.0) {
      fail(ErrorKind::data, "region '" + reg.regions[static_cast<std::size_t>(r)] +
                                "' has zero total population");
    }
  }
  reg.weights.resize(static_cast<std::size_t>(N));
  for (int c = 0; c < N; ++c) {
    reg.weights[static_cast<std::size_t>(c)] =
        population[static_cast<std::size_t>(c)] /
        region_pop[static_cast<std::size_t>(reg.region_of[static_cast<std::size_t>(c)])];
  }
  reg.impact.setZero(n_regions, T);
  for (int c = 0; c < N; ++c) {
    reg.impact.row(reg.region_of[static_cast<std::size_t>(c)]) +=
        reg.weights[static_cast<std::size_t>(c)] * out.county_impact.row(c);
  }
  return out;
}

}  // namespace firelp
