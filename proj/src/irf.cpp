#include "firelp/irf.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace firelp {

namespace {

// Expected (label, design column name) pairs for a spec's shock block.
std::vector<std::pair<std::string, std::string>> shock_layout(const ModelSpec& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  if (spec.state.has_value()) {
    out.emplace_back("high", spec.shock + "_high");
    out.emplace_back("low", spec.shock + "_low");
  } else if (spec.spatial) {
    out.emplace_back("own", spec.shock);
    out.emplace_back("neighbor", "W." + spec.shock);
    out.emplace_back("second_ring", "W2." + spec.shock);
  } else {
    out.emplace_back("baseline", spec.shock);
  }
  return out;
}

}  // namespace

const ImpulseResponse& IrfResult::path(const std::string& label) const {
  for (const auto& p : paths) {
    if (p.label == label) return p;
  }
  fail(ErrorKind::data, "no impulse-response path labelled '" + label + "'");
}

bool IrfResult::has_path(const std::string& label) const {
  for (const auto& p : paths) {
    if (p.label == label) return true;
  }
  return false;
}

std::vector<double> rescale(const std::vector<double>& beta, double impulse_size) {
  std::vector<double> out(beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) out[i] = beta[i] * impulse_size * 100.0;
  return out;
}

ConfidenceBand confidence_band(const std::vector<double>& scaled_beta,
                               const std::vector<double>& scaled_se, double level) {
  if (scaled_beta.size() != scaled_se.size()) {
    fail(ErrorKind::data, "band inputs have mismatched lengths");
  }
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::data, "confidence level must be in (0,1)");
  const double z = normal_quantile(0.5 + level / 2.0);
  ConfidenceBand band;
  band.lo.resize(scaled_beta.size());
  band.hi.resize(scaled_beta.size());
  for (std::size_t i = 0; i < scaled_beta.size(); ++i) {
    band.lo[i] = scaled_beta[i] - z * scaled_se[i];
    band.hi[i] = scaled_beta[i] + z * scaled_se[i];
  }
  return band;
}

double cumulative_effect(const ImpulseResponse& path, int max_horizon, bool include_impact) {
  if (max_horizon < 0 || max_horizon > path.max_horizon()) {
    fail(ErrorKind::data, "cumulative horizon outside the estimated path");
  }
  double total = 0.0;
  for (int h = include_impact ? 0 : 1; h <= max_horizon; ++h) {
    const double v = path.scaled_beta[static_cast<std::size_t>(h)];
    if (is_missing(v)) {
      fail(ErrorKind::estimation,
           "cumulative effect undefined: path missing at horizon " + std::to_string(h));
    }
    total += v;
  }
  return total;
}

IrfResult estimate_irf(const PanelDataset& panel, const ModelSpec& spec,
                       const AdjacencyMatrix* adjacency, const IrfOptions& options) {
  if (spec.horizons < 0) fail(ErrorKind::config, "horizons must be non-negative");
  const PanelDataset augmented = augment_for_spec(panel, spec, adjacency);
  const int n_h = spec.horizons + 1;
  std::vector<FitResult> fits(static_cast<std::size_t>(n_h));
  std::vector<std::vector<std::string>> dropped(static_cast<std::size_t>(n_h));
  parallel_for(n_h, options.threads, [&](int h) {
    const HorizonDesign design = build_design(augmented, spec, h, adjacency);
    FitOptions fit_options;
    fit_options.demean = options.demean;
    fit_options.ols = options.ols;
    fit_options.dk = options.inference.dk_options();
    fit_options.dk_bandwidth = options.inference.bandwidth_for(h);
    fits[static_cast<std::size_t>(h)] = fit_design(design, fit_options);
    dropped[static_cast<std::size_t>(h)] = design.dropped_columns;
  });

  IrfResult out;
  out.n_obs.resize(static_cast<std::size_t>(n_h));
  out.bandwidth.resize(static_cast<std::size_t>(n_h));
  for (int h = 0; h < n_h; ++h) {
    out.n_obs[static_cast<std::size_t>(h)] = fits[static_cast<std::size_t>(h)].n_obs;
    out.bandwidth[static_cast<std::size_t>(h)] = fits[static_cast<std::size_t>(h)].dk_bandwidth;
  }

  for (const auto& [label, column] : shock_layout(spec)) {
    ImpulseResponse path;
    path.label = label;
    path.impulse_size = spec.impulse_size;
    path.ci_level = spec.ci_level;
    path.beta.assign(static_cast<std::size_t>(n_h), kNaN);
    path.se.assign(static_cast<std::size_t>(n_h), kNaN);
    bool ever_present = false;
    for (int h = 0; h < n_h; ++h) {
      const FitResult& fit = fits[static_cast<std::size_t>(h)];
      const int j = fit.column(column);
      if (j < 0) continue;
      ever_present = true;
      path.beta[static_cast<std::size_t>(h)] = fit.coef(j);
      path.se[static_cast<std::size_t>(h)] = fit.se(j);
    }
    if (!ever_present) {
      out.notes.push_back("column '" + column + "' dropped at every horizon (identically zero)");
      continue;
    }
    for (int h = 0; h < n_h; ++h) {
      if (is_missing(path.beta[static_cast<std::size_t>(h)])) {
        out.notes.push_back("column '" + column + "' missing at horizon " + std::to_string(h));
      }
    }
    path.scaled_beta = rescale(path.beta, spec.impulse_size);
    path.scaled_se = rescale(path.se, spec.impulse_size);
    const ConfidenceBand band = confidence_band(path.scaled_beta, path.scaled_se, spec.ci_level);
    path.lo = band.lo;
    path.hi = band.hi;
    out.paths.push_back(std::move(path));
  }
  if (out.paths.empty()) fail(ErrorKind::estimation, "every shock column dropped out of the design");

  std::set<std::string> seen;
  for (int h = 0; h < n_h; ++h) {
    for (const auto& name : dropped[static_cast<std::size_t>(h)]) {
      if (seen.insert(name).second) {
        out.notes.push_back("identically-zero column '" + name + "' dropped");
      }
    }
  }
  std::string clamped;
  for (int h = 0; h < n_h; ++h) {
    if (fits[static_cast<std::size_t>(h)].clamped_variances > 0) {
      if (!clamped.empty()) clamped += ' ';
      clamped += std::to_string(h);
    }
  }
  if (!clamped.empty()) {
    out.notes.push_back("control-column variance floored at zero at horizon(s) " + clamped +
                        "; shock-column inference unaffected");
  }
  return out;
}

namespace {

// Per-horizon sufficient statistics for fast county-deletion re-estimation.
// County effects are eliminated by within-county demeaning, period effects by
// a partitioned (Schur-complement) solve of the period-dummy block, so a
// county's removal only subtracts its contributions from the pieces below.
struct DeletionWorkspace {
  int k = 0;
  bool county_fe = true;
  bool period_fe = true;
  Eigen::MatrixXd x;  // demeaned regressors, rows grouped by county
  Eigen::VectorXd y;
  std::vector<int> row_slot;        // compact period index per row
  int n_slots = 0;
  std::vector<int> span_start;      // per design county
  std::vector<int> span_count;
  std::vector<int> panel_county;    // design county -> panel county index
  std::vector<Eigen::MatrixXd> county_gram;   // x_c' x_c
  std::vector<Eigen::VectorXd> county_moment; // x_c' y_c
  Eigen::MatrixXd gram;             // x'x over all rows
  Eigen::VectorXd moment;           // x'y
  Eigen::MatrixXd period_sums;      // n_slots x k
  Eigen::VectorXd period_sums_y;
  Eigen::MatrixXd period_gram;      // A = diag(n_t) - sum_c m_c m_c' / T_c
  std::vector<int> period_count;
  int target = -1;
};

DeletionWorkspace build_workspace(HorizonDesign design, const std::string& target_column) {
  DeletionWorkspace ws;
  ws.k = design.n_cols();
  ws.county_fe = design.county_effects;
  ws.period_fe = design.period_effects;
  for (std::size_t j = 0; j < design.column_names.size(); ++j) {
    if (design.column_names[j] == target_column) ws.target = static_cast<int>(j);
  }
  if (ws.target < 0) {
    fail(ErrorKind::estimation, "jackknife target column '" + target_column +
                                    "' absent at horizon " + std::to_string(design.horizon));
  }
  const int n = design.n_rows();
  ws.x = std::move(design.regressors);
  ws.y = std::move(design.response);

  // Rows come out of the design builder grouped by county.
  for (int r = 0; r < n; ++r) {
    if (r == 0 || design.row_county[static_cast<std::size_t>(r)] !=
                      design.row_county[static_cast<std::size_t>(r - 1)]) {
      ws.span_start.push_back(r);
      ws.span_count.push_back(0);
      ws.panel_county.push_back(design.row_county[static_cast<std::size_t>(r)]);
    }
    ++ws.span_count.back();
  }

  std::vector<int> slots = design.row_period;
  std::sort(slots.begin(), slots.end());
  slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
  ws.n_slots = static_cast<int>(slots.size());
  ws.row_slot.resize(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    ws.row_slot[static_cast<std::size_t>(r)] = static_cast<int>(
        std::lower_bound(slots.begin(), slots.end(), design.row_period[static_cast<std::size_t>(r)]) -
        slots.begin());
  }

  const int n_counties = static_cast<int>(ws.span_start.size());
  if (ws.county_fe) {
    for (int c = 0; c < n_counties; ++c) {
      const int start = ws.span_start[static_cast<std::size_t>(c)];
      const int count = ws.span_count[static_cast<std::size_t>(c)];
      const Eigen::RowVectorXd x_mean = ws.x.middleRows(start, count).colwise().mean();
      const double y_mean = ws.y.segment(start, count).mean();
      ws.x.middleRows(start, count).rowwise() -= x_mean;
      ws.y.segment(start, count).array() -= y_mean;
    }
  }

  ws.county_gram.resize(static_cast<std::size_t>(n_counties));
  ws.county_moment.resize(static_cast<std::size_t>(n_counties));
  ws.gram.setZero(ws.k, ws.k);
  ws.moment.setZero(ws.k);
  for (int c = 0; c < n_counties; ++c) {
    const int start = ws.span_start[static_cast<std::size_t>(c)];
    const int count = ws.span_count[static_cast<std::size_t>(c)];
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(ws.k, ws.k);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(ws.x.middleRows(start, count).transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    ws.county_gram[static_cast<std::size_t>(c)] = gram;
    ws.county_moment[static_cast<std::size_t>(c)] =
        ws.x.middleRows(start, count).transpose() * ws.y.segment(start, count);
    ws.gram += gram;
    ws.moment += ws.county_moment[static_cast<std::size_t>(c)];
  }

  if (ws.period_fe) {
    ws.period_sums.setZero(ws.n_slots, ws.k);
    ws.period_sums_y.setZero(ws.n_slots);
    ws.period_count.assign(static_cast<std::size_t>(ws.n_slots), 0);
    for (int r = 0; r < n; ++r) {
      const int slot = ws.row_slot[static_cast<std::size_t>(r)];
      ws.period_sums.row(slot) += ws.x.row(r);
      ws.period_sums_y(slot) += ws.y(r);
      ++ws.period_count[static_cast<std::size_t>(slot)];
    }
    ws.period_gram.setZero(ws.n_slots, ws.n_slots);
    for (int t = 0; t < ws.n_slots; ++t) {
      ws.period_gram(t, t) = static_cast<double>(ws.period_count[static_cast<std::size_t>(t)]);
    }
    if (ws.county_fe) {
      for (int c = 0; c < n_counties; ++c) {
        const int start = ws.span_start[static_cast<std::size_t>(c)];
        const int count = ws.span_count[static_cast<std::size_t>(c)];
        const double w = 1.0 / static_cast<double>(count);
        for (int i = 0; i < count; ++i) {
          const int si = ws.row_slot[static_cast<std::size_t>(start + i)];
          for (int j = i; j < count; ++j) {
            const int sj = ws.row_slot[static_cast<std::size_t>(start + j)];
            ws.period_gram(si, sj) -= w;
            if (si != sj) ws.period_gram(sj, si) -= w;
          }
        }
      }
    }
  }
  return ws;
}

// Solve the target coefficient with the given design counties removed.
// Returns false when the reduced system is singular or non-finite.
bool solve_without(const DeletionWorkspace& ws, const std::vector<int>& drop_design_counties,
                   double& target_beta) {
  Eigen::MatrixXd gram = ws.gram;
  Eigen::VectorXd moment = ws.moment;
  for (const int c : drop_design_counties) {
    gram -= ws.county_gram[static_cast<std::size_t>(c)];
    moment -= ws.county_moment[static_cast<std::size_t>(c)];
  }

  Eigen::MatrixXd reduced;
  Eigen::VectorXd reduced_rhs;
  if (ws.period_fe) {
    Eigen::MatrixXd a = ws.period_gram;
    Eigen::MatrixXd b = ws.period_sums;
    Eigen::VectorXd by = ws.period_sums_y;
    std::vector<int> count = ws.period_count;
    for (const int c : drop_design_counties) {
      const int start = ws.span_start[static_cast<std::size_t>(c)];
      const int n_c = ws.span_count[static_cast<std::size_t>(c)];
      for (int i = 0; i < n_c; ++i) {
        const int si = ws.row_slot[static_cast<std::size_t>(start + i)];
        b.row(si) -= ws.x.row(start + i);
        by(si) -= ws.y(start + i);
        --count[static_cast<std::size_t>(si)];
        a(si, si) -= 1.0;
      }
      if (ws.county_fe) {
        const double w = 1.0 / static_cast<double>(n_c);
        for (int i = 0; i < n_c; ++i) {
          const int si = ws.row_slot[static_cast<std::size_t>(start + i)];
          for (int j = i; j < n_c; ++j) {
            const int sj = ws.row_slot[static_cast<std::size_t>(start + j)];
            a(si, sj) += w;
            if (si != sj) a(sj, si) += w;
          }
        }
      }
    }

    // Active periods, minus one reference dummy for identification.
    std::vector<int> active;
    for (int t = 0; t < ws.n_slots; ++t) {
      if (count[static_cast<std::size_t>(t)] > 0) active.push_back(t);
    }
    if (active.size() < 2) return false;
    active.erase(active.begin());
    const int p = static_cast<int>(active.size());
    Eigen::MatrixXd a_red(p, p);
    Eigen::MatrixXd b_red(p, ws.k);
    Eigen::VectorXd by_red(p);
    for (int i = 0; i < p; ++i) {
      const int si = active[static_cast<std::size_t>(i)];
      for (int j = 0; j < p; ++j) a_red(i, j) = a(si, active[static_cast<std::size_t>(j)]);
      b_red.row(i) = b.row(si);
      by_red(i) = by(si);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(a_red);
    if (llt.info() != Eigen::Success) return false;
    reduced = gram - b_red.transpose() * llt.solve(b_red);
    reduced_rhs = moment - b_red.transpose() * llt.solve(by_red);
  } else {
    reduced = gram;
    reduced_rhs = moment;
  }

  const Eigen::LLT<Eigen::MatrixXd> llt(reduced);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd beta = llt.solve(reduced_rhs);
  if (!beta.allFinite()) return false;
  target_beta = beta(ws.target);
  return true;
}

}  // namespace

JackknifeResult block_jackknife(const PanelDataset& panel, const ModelSpec& spec,
                                const AdjacencyMatrix* adjacency,
                                const JackknifeOptions& options) {
  if (options.draws < 2) fail(ErrorKind::config, "jackknife needs at least two draws");
  if (options.drop_share < 0.0 || options.drop_share >= 1.0) {
    fail(ErrorKind::config, "drop share must be in [0, 1)");
  }
  const PanelDataset augmented = augment_for_spec(panel, spec, adjacency);
  const int n_h = spec.horizons + 1;
  const std::string target_column =
      options.target_column.empty() ? shock_layout(spec)[0].second : options.target_column;

  // The draw universe: counties present in the impact-horizon design.
  std::vector<int> universe;
  {
    const HorizonDesign d0 = build_design(augmented, spec, 0, adjacency);
    universe = d0.row_county;
    std::sort(universe.begin(), universe.end());
    universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
  }
  const int n_counties = static_cast<int>(universe.size());
  const int n_drop =
      static_cast<int>(std::lround(options.drop_share * static_cast<double>(n_counties)));
  if (n_counties - n_drop < 2) {
    fail(ErrorKind::config, "drop share leaves fewer than two counties");
  }

  const int K = options.draws;
  JackknifeResult out;
  out.seed = options.seed;
  out.n_counties = n_counties;
  out.n_dropped_per_draw = n_drop;
  out.draw_paths.setZero(K, n_h);
  out.dropped.assign(static_cast<std::size_t>(K), {});

  std::vector<int> attempt(static_cast<std::size_t>(K), 0);
  std::vector<char> done(static_cast<std::size_t>(K), 0);
  std::vector<std::vector<int>> draw_sets(static_cast<std::size_t>(K));
  const int failure_cap =
      static_cast<int>(std::floor(options.max_failure_share * static_cast<double>(K)));

  const int max_passes = 8;
  for (int pass = 0; pass < max_passes; ++pass) {
    std::vector<int> active;
    for (int d = 0; d < K; ++d) {
      if (!done[static_cast<std::size_t>(d)]) active.push_back(d);
    }
    if (active.empty()) break;
    for (const int d : active) {
      Rng rng(mix_seed(options.seed, static_cast<std::uint64_t>(d),
                       static_cast<std::uint64_t>(attempt[static_cast<std::size_t>(d)])));
      const std::vector<int> picks = rng.sample_without_replacement(n_counties, n_drop);
      auto& set = draw_sets[static_cast<std::size_t>(d)];
      set.clear();
      for (const int i : picks) set.push_back(universe[static_cast<std::size_t>(i)]);
    }
    std::vector<char> failed(static_cast<std::size_t>(K), 0);
    for (int h = 0; h < n_h; ++h) {
      const DeletionWorkspace ws =
          build_workspace(build_design(augmented, spec, h, adjacency), target_column);
      // Panel county index -> design county position at this horizon.
      std::vector<int> position;
      {
        int max_panel_county = 0;
        for (const int c : ws.panel_county) max_panel_county = std::max(max_panel_county, c);
        position.assign(static_cast<std::size_t>(max_panel_county) + 1, -1);
        for (std::size_t i = 0; i < ws.panel_county.size(); ++i) {
          position[static_cast<std::size_t>(ws.panel_county[i])] = static_cast<int>(i);
        }
      }
      parallel_for(static_cast<int>(active.size()), options.threads, [&](int idx) {
        const int d = active[static_cast<std::size_t>(idx)];
        if (failed[static_cast<std::size_t>(d)]) return;
        std::vector<int> drop_positions;
        drop_positions.reserve(draw_sets[static_cast<std::size_t>(d)].size());
        for (const int panel_county : draw_sets[static_cast<std::size_t>(d)]) {
          if (panel_county < static_cast<int>(position.size())) {
            const int pos = position[static_cast<std::size_t>(panel_county)];
            if (pos >= 0) drop_positions.push_back(pos);
          }
        }
        double beta = kNaN;
        if (solve_without(ws, drop_positions, beta)) {
          out.draw_paths(d, h) = beta * spec.impulse_size * 100.0;
        } else {
          failed[static_cast<std::size_t>(d)] = 1;
        }
      });
    }
    for (const int d : active) {
      if (failed[static_cast<std::size_t>(d)]) {
        ++out.failures;
        if (out.failures > failure_cap) {
          fail(ErrorKind::estimation,
               "jackknife exceeded the failure budget: " + std::to_string(out.failures) +
                   " singular draws out of " + std::to_string(K));
        }
        ++attempt[static_cast<std::size_t>(d)];
      } else {
        done[static_cast<std::size_t>(d)] = 1;
        out.dropped[static_cast<std::size_t>(d)] = draw_sets[static_cast<std::size_t>(d)];
      }
    }
  }
  for (int d = 0; d < K; ++d) {
    if (!done[static_cast<std::size_t>(d)]) {
      fail(ErrorKind::estimation, "jackknife draws kept failing after repeated resampling");
    }
  }

  out.scale_factor = 1.0;
  if (options.scale == JackknifeOptions::Scale::delete_d && n_drop > 0) {
    out.scale_factor =
        static_cast<double>(n_counties - n_drop) / static_cast<double>(n_drop);
  }
  const Eigen::RowVectorXd mean = out.draw_paths.colwise().mean();
  Eigen::MatrixXd centered = out.draw_paths.rowwise() - mean;
  out.covariance = out.scale_factor / static_cast<double>(K) * centered.transpose() * centered;
  double total = 0.0;
  for (int i = 1; i < n_h; ++i) {
    for (int j = 1; j < n_h; ++j) total += out.covariance(i, j);
  }
  out.sd_cumulative = std::sqrt(std::max(total, 0.0));
  return out;
}

}  // namespace firelp
