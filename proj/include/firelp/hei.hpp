#pragma once

#include <map>
#include <string>
#include <vector>

#include "firelp/irf.hpp"
#include "firelp/panel.hpp"

namespace firelp {

// Per-period historical impact for one unit: the causal convolution of the
// estimated per-unit response path with the unit's realized shock sequence,
// impact[t] = sum_{j=0..depth} (scaled_beta[j] / impulse_size) * shock[t-j],
// with out-of-range shocks treated as zero. Units follow scaled_beta
// (percentage points), divided by the impulse so shocks enter per shock unit.
std::vector<double> convolve_impact(const ImpulseResponse& path,
                                    const std::vector<double>& shocks, int depth);

struct RegionalImpact {
  std::vector<std::string> regions;          // sorted unique labels
  std::vector<int> region_of;                // per county
  std::vector<double> weights;               // per county, sums to 1 within region
  Eigen::MatrixXd impact;                    // regions x periods, percentage points
};

// County impacts aggregated into population-weighted regional averages.
// Every county needs a non-empty region label and a positive-total-population
// region. Missing shock cells are treated as zero exposure and counted.
struct HeiOptions {
  std::string shock = "burn_area";
  std::string region_tag = "region";
  std::string population_attribute = "population";
  int depth = 36;
};

struct HeiResult {
  RegionalImpact regional;
  Eigen::MatrixXd county_impact;  // counties x periods
  int missing_shock_cells = 0;
  int first_period = 0;
  Frequency frequency = Frequency::monthly;
};

HeiResult historical_impact(const PanelDataset& panel, const ImpulseResponse& path,
                            const HeiOptions& options = {});

// Same convolution applied to a hypothetical forward shock sequence.
std::vector<double> project_impact(const ImpulseResponse& path,
                                   const std::vector<double>& shocks, int depth);

}  // namespace firelp
