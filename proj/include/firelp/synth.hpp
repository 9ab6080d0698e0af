#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "firelp/panel.hpp"

namespace firelp {

// Shock process: each period a county ignites with probability `occurrence`;
// sizes are lognormal(mu, sigma); rho carries a share of last period's burn
// forward (persistent exposure).
struct FireProcess {
  double occurrence = 0.15;
  double lognormal_mu = 1.8526122302071057;  // ln(13.1) - sigma^2/2
  double lognormal_sigma = 1.2;
  double rho = 0.0;
};

// Planted response paths are in scaled units: percentage points per
// impulse_size shock units, horizon by horizon. For log outcomes the path is
// planted as growth increments so the local-projection estimand equals the
// path itself; for level outcomes the path is planted directly on levels.
struct StatePlant {
  std::string series = "unemployment";
  double percentile = 70.0;
  std::vector<double> kernel_high;
  std::vector<double> kernel_low;
};

struct SplitPlant {
  std::string attribute = "hhi";
  std::vector<double> kernel_above;
  std::vector<double> kernel_below;
};

struct DgpConfig {
  int n_counties = 500;
  int n_periods = 250;
  Frequency frequency = Frequency::monthly;
  std::uint64_t seed = 1;
  std::string outcome_series = "employment";
  bool log_outcome = true;
  std::vector<double> kernel;  // default: default_planted_kernel(36)
  double impulse_size = 13.1;
  FireProcess fire;
  double outcome_ar = 0.0;     // AR(1) in the outcome growth
  double noise_sd = 8e-4;
  double county_effect_sd = 5e-4;
  double period_effect_sd = 5e-4;
  std::optional<StatePlant> state;
  std::optional<SplitPlant> split;
};

struct SynthTruth {
  std::vector<double> kernel;         // as planted (scaled units)
  std::vector<double> implied;        // regression estimand given fire rho / outcome AR
  std::vector<double> kernel_high;    // empty unless a state plant was used
  std::vector<double> kernel_low;
  std::vector<double> kernel_above;   // empty unless a split plant was used
  std::vector<double> kernel_below;
  double split_median = kNaN;
};

struct SynthOutput {
  PanelDataset panel;
  SynthTruth truth;
};

// Hump-shaped employment decline: zero on impact, an early dip around three
// months and a deeper one around two years, fading by three years.
std::vector<double> default_planted_kernel(int max_horizon = 36);

// The estimand a local projection with lag controls recovers under this
// config: the planted path filtered through outcome AR feedback and the
// shock's own persistence.
std::vector<double> implied_irf(const std::vector<double>& kernel, const DgpConfig& config);

struct PlantSummary {
  double fire_probability = 0.0;
  double mean_fire_size = 0.0;     // conditional on a new ignition
  double median_fire_size = 0.0;
  double mean_burn = 0.0;          // unconditional per county-period
};

PlantSummary plant_summary(const DgpConfig& config);

// Deterministic synthetic panel: outcome, burn_area, unemployment and smoke
// series plus population/hhi/no_diploma_share attributes and a region tag.
// Identical seeds give identical panels.
SynthOutput generate(const DgpConfig& config);

}  // namespace firelp
