#include "firelp/synth.hpp"

#include <algorithm>
#include <cmath>

namespace firelp {

namespace {

constexpr std::uint64_t kCountyStream = 1;
constexpr std::uint64_t kPeriodStream = 2;

std::vector<double> increments(const std::vector<double>& kernel) {
  std::vector<double> out(kernel.size());
  for (std::size_t j = 0; j < kernel.size(); ++j) {
    out[j] = kernel[j] - (j == 0 ? 0.0 : kernel[j - 1]);
  }
  return out;
}

const char* kRegions[4] = {"West", "South", "Midwest", "Northeast"};

}  // namespace

std::vector<double> default_planted_kernel(int max_horizon) {
  std::vector<double> kernel(static_cast<std::size_t>(max_horizon) + 1, 0.0);
  for (int h = 1; h <= max_horizon; ++h) {
    const double early = (h - 1.0) / 4.0;
    const double late = (h - 24.0) / 6.0;
    kernel[static_cast<std::size_t>(h)] =
        -(0.006 * std::exp(-early * early) + 0.015 * std::exp(-late * late));
  }
  return kernel;
}

std::vector<double> implied_irf(const std::vector<double>& kernel, const DgpConfig& config) {
  const std::size_t n = kernel.size();
  // Outcome AR feedback: each growth increment echoes forward.
  const std::vector<double> delta = increments(kernel);
  std::vector<double> psi(n);
  for (std::size_t j = 0; j < n; ++j) {
    psi[j] = delta[j] + (j == 0 ? 0.0 : config.outcome_ar * psi[j - 1]);
  }
  std::vector<double> path(n);
  double cum = 0.0;
  for (std::size_t h = 0; h < n; ++h) {
    cum += psi[h];
    path[h] = cum;
  }
  if (!config.log_outcome) path = kernel;  // levels carry the kernel directly
  // Shock persistence: a burn innovation raises future burns by rho^s, each
  // starting its own response.
  if (config.fire.rho != 0.0) {
    std::vector<double> with_rho(n, 0.0);
    for (std::size_t h = 0; h < n; ++h) {
      double total = 0.0;
      double weight = 1.0;
      for (std::size_t s = 0; s <= h; ++s) {
        total += weight * path[h - s];
        weight *= config.fire.rho;
      }
      with_rho[h] = total;
    }
    return with_rho;
  }
  return path;
}

PlantSummary plant_summary(const DgpConfig& config) {
  PlantSummary s;
  s.fire_probability = config.fire.occurrence;
  if (config.fire.occurrence <= 0.0) return s;
  s.mean_fire_size =
      std::exp(config.fire.lognormal_mu + 0.5 * config.fire.lognormal_sigma * config.fire.lognormal_sigma);
  s.median_fire_size = std::exp(config.fire.lognormal_mu);
  s.mean_burn = config.fire.occurrence * s.mean_fire_size / (1.0 - config.fire.rho);
  return s;
}

SynthOutput generate(const DgpConfig& config) {
  if (config.n_counties < 2) fail(ErrorKind::config, "synthetic panel needs at least 2 counties");
  if (config.n_periods < 2) fail(ErrorKind::config, "synthetic panel needs at least 2 periods");
  if (config.impulse_size <= 0.0) fail(ErrorKind::config, "impulse size must be positive");
  if (!(config.fire.occurrence >= 0.0 && config.fire.occurrence <= 1.0)) {
    fail(ErrorKind::config, "fire occurrence must be in [0, 1]");
  }
  if (config.fire.rho < 0.0 || config.fire.rho >= 1.0) {
    fail(ErrorKind::config, "fire rho must be in [0, 1)");
  }
  if (std::abs(config.outcome_ar) >= 1.0) {
    fail(ErrorKind::config, "outcome AR coefficient must have magnitude below 1");
  }
  if (config.state.has_value() && config.split.has_value()) {
    fail(ErrorKind::config, "state and split plants cannot be combined");
  }

  const std::vector<double> base_kernel =
      config.kernel.empty() ? default_planted_kernel(36) : config.kernel;
  SynthTruth truth;
  truth.kernel = base_kernel;
  truth.implied = implied_irf(base_kernel, config);

  const int N = config.n_counties;
  const int T = config.n_periods;
  const std::size_t cells = static_cast<std::size_t>(N) * static_cast<std::size_t>(T);
  // Scaled paths (pp per impulse) -> raw per-shock-unit responses.
  const double unit = 1.0 / (config.impulse_size * 100.0);

  // Per-regime increment (log outcome) or level (level outcome) sequences.
  std::vector<std::vector<double>> plant(1);
  plant[0] = config.log_outcome ? increments(base_kernel) : base_kernel;
  if (config.state.has_value()) {
    if (config.state->kernel_high.empty() || config.state->kernel_low.empty()) {
      fail(ErrorKind::config, "state plant needs both regime kernels");
    }
    truth.kernel_high = config.state->kernel_high;
    truth.kernel_low = config.state->kernel_low;
    plant.assign(2, {});
    plant[0] = config.log_outcome ? increments(config.state->kernel_low)
                                  : config.state->kernel_low;
    plant[1] = config.log_outcome ? increments(config.state->kernel_high)
                                  : config.state->kernel_high;
  }
  if (config.split.has_value()) {
    if (config.split->kernel_above.empty() || config.split->kernel_below.empty()) {
      fail(ErrorKind::config, "split plant needs both group kernels");
    }
    truth.kernel_above = config.split->kernel_above;
    truth.kernel_below = config.split->kernel_below;
    plant.assign(2, {});
    plant[0] = config.log_outcome ? increments(config.split->kernel_below)
                                  : config.split->kernel_below;
    plant[1] = config.log_outcome ? increments(config.split->kernel_above)
                                  : config.split->kernel_above;
  }

  // Shared period effects.
  Rng period_rng(mix_seed(config.seed, kPeriodStream, 0));
  std::vector<double> period_effect(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) period_effect[static_cast<std::size_t>(t)] = period_rng.normal(0.0, config.period_effect_sd);

  std::vector<double> outcome(cells), burn(cells), unemployment(cells), smoke(cells);
  std::vector<double> population(static_cast<std::size_t>(N)), hhi(static_cast<std::size_t>(N)),
      no_diploma(static_cast<std::size_t>(N));
  std::vector<std::string> region(static_cast<std::size_t>(N));
  std::vector<std::string> ids(static_cast<std::size_t>(N));

  // First pass: everything except the outcome (split groups depend on the
  // full attribute draw, state regimes on the full unemployment path).
  for (int c = 0; c < N; ++c) {
    Rng rng(mix_seed(config.seed, kCountyStream, static_cast<std::uint64_t>(c)));
    char buf[24];
    std::snprintf(buf, sizeof(buf), "C%05d", c + 1);
    ids[static_cast<std::size_t>(c)] = buf;
    region[static_cast<std::size_t>(c)] = kRegions[c % 4];
    population[static_cast<std::size_t>(c)] = rng.lognormal(std::log(5e4), 1.0);
    hhi[static_cast<std::size_t>(c)] = 0.15 + 0.7 * rng.uniform();
    no_diploma[static_cast<std::size_t>(c)] = 0.05 + 0.55 * rng.uniform();

    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    double carry = 0.0;
    for (int t = 0; t < T; ++t) {
      double ignition = 0.0;
      if (rng.uniform() < config.fire.occurrence) {
        ignition = rng.lognormal(config.fire.lognormal_mu, config.fire.lognormal_sigma);
      }
      carry = config.fire.rho * carry + ignition;
      burn[base + static_cast<std::size_t>(t)] = carry;
    }
    double u = 5.0;
    for (int t = 0; t < T; ++t) {
      u = 5.0 + 0.8 * (u - 5.0) + rng.normal(0.0, 1.5);
      unemployment[base + static_cast<std::size_t>(t)] = u;
    }
    for (int t = 0; t < T; ++t) {
      const double lag = t > 0 ? burn[base + static_cast<std::size_t>(t - 1)] : 0.0;
      smoke[base + static_cast<std::size_t>(t)] =
          0.4 * burn[base + static_cast<std::size_t>(t)] + 0.2 * lag +
          std::abs(rng.normal(0.0, 0.5));
    }
  }

  // Regime selector per cell (state) or per county (split).
  std::vector<int> county_group(static_cast<std::size_t>(N), 0);
  std::vector<std::uint8_t> cell_high;
  if (config.state.has_value()) {
    cell_high.assign(cells, 0);
    const std::vector<double>* indicator_series = nullptr;
    if (config.state->series == "unemployment") {
      indicator_series = &unemployment;
    } else {
      fail(ErrorKind::config, "state plant series must be 'unemployment'");
    }
    for (int c = 0; c < N; ++c) {
      const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
      std::vector<double> values(indicator_series->begin() + static_cast<std::ptrdiff_t>(base),
                                 indicator_series->begin() + static_cast<std::ptrdiff_t>(base + static_cast<std::size_t>(T)));
      const double threshold = percentile_type7(std::move(values), config.state->percentile);
      for (int t = 0; t < T; ++t) {
        cell_high[base + static_cast<std::size_t>(t)] =
            (*indicator_series)[base + static_cast<std::size_t>(t)] > threshold ? 1 : 0;
      }
    }
  }
  if (config.split.has_value()) {
    if (config.split->attribute != "hhi") {
      fail(ErrorKind::config, "split plant attribute must be 'hhi'");
    }
    truth.split_median = median(hhi);
    for (int c = 0; c < N; ++c) {
      county_group[static_cast<std::size_t>(c)] = hhi[static_cast<std::size_t>(c)] > truth.split_median ? 1 : 0;
    }
  }

  // Second pass: outcome paths. A fresh per-county stream keeps the noise
  // sequence independent of the draws above.
  const int depth = static_cast<int>(plant[0].size()) - 1;
  for (int c = 0; c < N; ++c) {
    Rng rng(mix_seed(config.seed, kCountyStream + 2, static_cast<std::uint64_t>(c)));
    const double county_effect = rng.normal(0.0, config.county_effect_sd);
    const double log_base = std::log(2e4) + rng.normal(0.0, 0.5);
    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    double level = config.log_outcome ? log_base : 3.0 + county_effect;
    double growth_prev = 0.0;
    for (int t = 0; t < T; ++t) {
      double fire_term = 0.0;
      for (int j = 0; j <= std::min(depth, t); ++j) {
        const std::size_t cell = base + static_cast<std::size_t>(t - j);
        const double d = burn[cell];
        if (d == 0.0) continue;
        int group = 0;
        if (config.state.has_value()) {
          group = cell_high[cell];
        } else if (config.split.has_value()) {
          group = county_group[static_cast<std::size_t>(c)];
        }
        fire_term += plant[static_cast<std::size_t>(group)][static_cast<std::size_t>(j)] * unit * d;
      }
      const double eps = rng.normal(0.0, config.noise_sd);
      if (config.log_outcome) {
        const double g = county_effect + period_effect[static_cast<std::size_t>(t)] +
                         config.outcome_ar * growth_prev + fire_term + eps;
        level += g;
        growth_prev = g;
        outcome[base + static_cast<std::size_t>(t)] = std::exp(level);
      } else {
        outcome[base + static_cast<std::size_t>(t)] =
            level + period_effect[static_cast<std::size_t>(t)] + fire_term + eps;
      }
    }
  }

  const int first = config.frequency == Frequency::monthly ? 2000 * 12 : 2000;
  PanelDataset panel(ids, PeriodRange{first, first + T - 1}, config.frequency);
  panel.add_series(config.outcome_series, std::move(outcome));
  panel.add_series("burn_area", std::move(burn));
  panel.add_series("unemployment", std::move(unemployment));
  panel.add_series("smoke", std::move(smoke));
  panel.set_attribute("population", std::move(population));
  panel.set_attribute("hhi", std::move(hhi));
  panel.set_attribute("no_diploma_share", std::move(no_diploma));
  panel.set_tag("region", std::move(region));

  SynthOutput out;
  out.panel = std::move(panel);
  out.truth = std::move(truth);
  return out;
}

}  // namespace firelp
