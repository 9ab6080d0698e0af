#include "firelp/design.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace firelp {

namespace {

std::string log_name(const std::string& series) { return "__ln_" + series; }
std::string w_name(const std::string& series) { return "__w_" + series; }
std::string w2_name(const std::string& series) { return "__w2_" + series; }
constexpr const char* kStateName = "__state";

std::vector<double> log_series(const std::vector<double>& x) {
  std::vector<double> out(x.size(), kNaN);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!is_missing(x[i]) && x[i] > 0.0) out[i] = std::log(x[i]);
  }
  return out;
}

// Column recipe over a materialized base series: value(c,t) = base[t - lag].
struct Column {
  std::string name;
  const std::vector<double>* base;
  int lag;
};

}  // namespace

std::string SeriesRef::label() const {
  std::string base = transform == Transform::log ? "ln(" + series + ")" : series;
  if (lag > 0) base += "_lag" + std::to_string(lag);
  return base;
}

std::string SampleFilter::describe() const {
  switch (kind) {
    case Kind::attribute_above_median: return "attribute '" + name + "' above median";
    case Kind::attribute_below_median: return "attribute '" + name + "' at or below median";
    case Kind::region: return "region '" + value + "'";
    case Kind::clean_control:
      return "clean controls (window " + std::to_string(window) + ")";
  }
  return "filter";
}

int default_lags(Frequency freq) { return freq == Frequency::monthly ? 24 : 2; }

int ModelSpec::resolved_shock_lags(Frequency freq) const {
  return shock_lags >= 0 ? shock_lags : default_lags(freq);
}

int ModelSpec::resolved_outcome_lags(Frequency freq) const {
  return outcome_lags >= 0 ? outcome_lags : default_lags(freq);
}

std::vector<double> state_indicator(const PanelDataset& panel, const StateRule& rule) {
  const auto& x = panel.series(rule.series);
  const int N = panel.n_counties();
  const int T = panel.n_periods();
  std::vector<double> out(x.size(), kNaN);
  auto apply_threshold = [&](int c, double threshold) {
    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    for (int t = 0; t < T; ++t) {
      const double v = x[base + static_cast<std::size_t>(t)];
      if (is_missing(v)) continue;
      out[base + static_cast<std::size_t>(t)] = v > threshold ? 1.0 : 0.0;
    }
  };
  if (rule.scope == StateRule::Scope::sample) {
    std::vector<double> pool;
    pool.reserve(x.size());
    for (const double v : x) {
      if (!is_missing(v)) pool.push_back(v);
    }
    if (pool.empty()) fail(ErrorKind::data, "state series '" + rule.series + "' has no data");
    const double threshold = percentile_type7(std::move(pool), rule.percentile);
    for (int c = 0; c < N; ++c) apply_threshold(c, threshold);
    return out;
  }
  for (int c = 0; c < N; ++c) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(T));
    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    for (int t = 0; t < T; ++t) {
      const double v = x[base + static_cast<std::size_t>(t)];
      if (!is_missing(v)) values.push_back(v);
    }
    if (values.empty()) continue;  // all-missing county keeps NaN indicator
    apply_threshold(c, percentile_type7(std::move(values), rule.percentile));
  }
  return out;
}

std::vector<std::uint8_t> clean_control_mask(const PanelDataset& panel,
                                             const std::string& shock, int window) {
  if (window < 0) fail(ErrorKind::data, "clean-control window must be non-negative");
  const auto& x = panel.series(shock);
  const int N = panel.n_counties();
  const int T = panel.n_periods();
  std::vector<std::uint8_t> mask(x.size(), 0);
  std::vector<int> pos_prefix(static_cast<std::size_t>(T) + 1);
  std::vector<int> miss_prefix(static_cast<std::size_t>(T) + 1);
  for (int c = 0; c < N; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    pos_prefix[0] = 0;
    miss_prefix[0] = 0;
    for (int t = 0; t < T; ++t) {
      const double v = x[base + static_cast<std::size_t>(t)];
      pos_prefix[static_cast<std::size_t>(t) + 1] =
          pos_prefix[static_cast<std::size_t>(t)] + (!is_missing(v) && v > 0.0 ? 1 : 0);
      miss_prefix[static_cast<std::size_t>(t) + 1] =
          miss_prefix[static_cast<std::size_t>(t)] + (is_missing(v) ? 1 : 0);
    }
    for (int t = 0; t < T; ++t) {
      const double v = x[base + static_cast<std::size_t>(t)];
      const bool treated = !is_missing(v) && v > 0.0;
      const int lo = std::max(0, t - window);
      const int hi = std::min(T - 1, t + window);
      const bool clean =
          pos_prefix[static_cast<std::size_t>(hi) + 1] - pos_prefix[static_cast<std::size_t>(lo)] == 0 &&
          miss_prefix[static_cast<std::size_t>(hi) + 1] - miss_prefix[static_cast<std::size_t>(lo)] == 0;
      mask[base + static_cast<std::size_t>(t)] = treated || clean ? 1 : 0;
    }
  }
  return mask;
}

MedianSplit median_split(const PanelDataset& panel, const std::string& attribute) {
  const auto& values = panel.attribute(attribute);
  std::vector<double> present;
  for (const double v : values) {
    if (!is_missing(v)) present.push_back(v);
  }
  if (present.size() < 2) {
    fail(ErrorKind::data, "attribute '" + attribute + "' needs at least two values to split");
  }
  const double lo = *std::min_element(present.begin(), present.end());
  const double hi = *std::max_element(present.begin(), present.end());
  if (lo == hi) {
    fail(ErrorKind::data, "attribute '" + attribute + "' is constant; median split is empty");
  }
  MedianSplit split;
  split.median_value = median(present);
  for (int c = 0; c < panel.n_counties(); ++c) {
    const double v = values[static_cast<std::size_t>(c)];
    if (is_missing(v)) continue;
    if (v > split.median_value) {
      split.above.push_back(c);
    } else {
      split.below.push_back(c);
    }
  }
  if (split.above.empty() || split.below.empty()) {
    fail(ErrorKind::data, "median split of '" + attribute + "' left one side empty");
  }
  return split;
}

double herfindahl(const std::vector<double>& shares, bool* renormalized) {
  if (shares.empty()) fail(ErrorKind::data, "herfindahl of empty share vector");
  double sum = 0.0;
  for (const double s : shares) {
    if (is_missing(s) || s < 0.0) fail(ErrorKind::data, "herfindahl needs non-negative shares");
    sum += s;
  }
  if (sum <= 0.0) fail(ErrorKind::data, "herfindahl needs a positive share total");
  const bool renorm = std::abs(sum - 1.0) > 1e-9;
  if (renormalized != nullptr) *renormalized = renorm;
  double h = 0.0;
  for (const double s : shares) {
    const double w = s / sum;
    h += w * w;
  }
  return h;
}

PanelDataset augment_for_spec(const PanelDataset& panel, const ModelSpec& spec,
                              const AdjacencyMatrix* adjacency) {
  PanelDataset out = panel;
  auto ensure_log = [&out](const std::string& series) {
    const std::string name = log_name(series);
    if (!out.has_series(name)) out.add_series(name, log_series(out.series(series)));
  };
  if (spec.outcome.transform == SeriesRef::Transform::log) ensure_log(spec.outcome.series);
  for (const auto& ref : spec.controls) {
    if (ref.transform == SeriesRef::Transform::log) ensure_log(ref.series);
  }
  if (spec.spatial) {
    if (adjacency == nullptr) {
      fail(ErrorKind::config, "spatial terms require an adjacency structure");
    }
    if (!out.has_series(w_name(spec.shock))) {
      out.add_series(w_name(spec.shock), neighbor_sum(out, *adjacency, spec.shock));
    }
    if (!out.has_series(w2_name(spec.shock))) {
      out.add_series(w2_name(spec.shock),
                     neighbor_sum(out, second_order(*adjacency), spec.shock));
    }
  }
  if (spec.state.has_value() && !out.has_series(kStateName)) {
    out.add_series(kStateName, state_indicator(out, *spec.state));
  }
  return out;
}

HorizonDesign build_design(const PanelDataset& panel, const ModelSpec& spec, int horizon,
                           const AdjacencyMatrix* adjacency) {
  if (horizon < 0) fail(ErrorKind::data, "horizon must be non-negative");
  const PanelDataset data = augment_for_spec(panel, spec, adjacency);
  const int N = data.n_counties();
  const int T = data.n_periods();
  const int first = data.periods().first;

  // County-level sample filters.
  std::vector<char> keep(static_cast<std::size_t>(N), 1);
  const std::vector<std::uint8_t>* row_mask = nullptr;
  std::vector<std::uint8_t> mask_storage;
  for (const auto& filter : spec.filters) {
    switch (filter.kind) {
      case SampleFilter::Kind::attribute_above_median:
      case SampleFilter::Kind::attribute_below_median: {
        const MedianSplit split = median_split(data, filter.name);
        std::vector<char> side(static_cast<std::size_t>(N), 0);
        const auto& chosen =
            filter.kind == SampleFilter::Kind::attribute_above_median ? split.above : split.below;
        for (const int c : chosen) side[static_cast<std::size_t>(c)] = 1;
        for (int c = 0; c < N; ++c) keep[static_cast<std::size_t>(c)] &= side[static_cast<std::size_t>(c)];
        break;
      }
      case SampleFilter::Kind::region: {
        const auto& tags = data.tag(filter.name);
        for (int c = 0; c < N; ++c) {
          if (tags[static_cast<std::size_t>(c)] != filter.value) keep[static_cast<std::size_t>(c)] = 0;
        }
        break;
      }
      case SampleFilter::Kind::clean_control: {
        const std::string& shock_series = filter.name.empty() ? spec.shock : filter.name;
        mask_storage = clean_control_mask(data, shock_series, filter.window);
        row_mask = &mask_storage;
        break;
      }
    }
    if (std::count(keep.begin(), keep.end(), 1) == 0) {
      fail(ErrorKind::data, "no counties left after applying " + filter.describe());
    }
  }

  // Column recipes: shock block first, then outcome lags, then controls.
  const int shock_lag_count = spec.resolved_shock_lags(data.frequency());
  const int outcome_lag_count = spec.resolved_outcome_lags(data.frequency());
  const std::string outcome_base_name = spec.outcome.transform == SeriesRef::Transform::log
                                            ? log_name(spec.outcome.series)
                                            : spec.outcome.series;
  const std::string outcome_label =
      SeriesRef{spec.outcome.series, spec.outcome.transform, 0}.label();
  const auto& outcome_base = data.series(outcome_base_name);

  std::vector<Column> columns;
  std::vector<std::string> shock_bases{spec.shock};
  std::vector<std::string> shock_labels{spec.shock};
  if (spec.spatial) {
    shock_bases.push_back(w_name(spec.shock));
    shock_bases.push_back(w2_name(spec.shock));
    shock_labels.push_back("W." + spec.shock);
    shock_labels.push_back("W2." + spec.shock);
  }
  for (std::size_t s = 0; s < shock_bases.size(); ++s) {
    columns.push_back(Column{shock_labels[s], &data.series(shock_bases[s]), 0});
  }
  const int n_contemporaneous = static_cast<int>(columns.size());
  for (std::size_t s = 0; s < shock_bases.size(); ++s) {
    for (int j = 1; j <= shock_lag_count; ++j) {
      columns.push_back(
          Column{shock_labels[s] + "_lag" + std::to_string(j), &data.series(shock_bases[s]), j});
    }
  }
  for (int j = 1; j <= outcome_lag_count; ++j) {
    columns.push_back(Column{outcome_label + "_lag" + std::to_string(j), &outcome_base, j});
  }
  for (const auto& ref : spec.controls) {
    const std::string base_name =
        ref.transform == SeriesRef::Transform::log ? log_name(ref.series) : ref.series;
    columns.push_back(Column{ref.label(), &data.series(base_name), ref.lag});
  }

  std::unordered_set<std::string> unique_names;
  for (const auto& col : columns) {
    if (!unique_names.insert(col.name).second) {
      fail(ErrorKind::config, "duplicate design column '" + col.name + "'");
    }
  }

  // Complete-case row scan.
  const int k = static_cast<int>(columns.size());
  std::vector<std::int64_t> row_cells;  // county*T + t for selected rows
  row_cells.reserve(static_cast<std::size_t>(N) * 8);
  for (int c = 0; c < N; ++c) {
    if (!keep[static_cast<std::size_t>(c)]) continue;
    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    const int t_lo = 1;           // response needs t-1
    const int t_hi = T - 1 - horizon;  // response needs t+horizon
    for (int t = t_lo; t <= t_hi; ++t) {
      const std::size_t cell = base + static_cast<std::size_t>(t);
      if (row_mask != nullptr && (*row_mask)[cell] == 0) continue;
      const double lead = outcome_base[base + static_cast<std::size_t>(t + horizon)];
      const double lagged = outcome_base[base + static_cast<std::size_t>(t - 1)];
      if (is_missing(lead) || is_missing(lagged)) continue;
      bool complete = true;
      for (const auto& col : columns) {
        const int src = t - col.lag;
        if (src < 0 || src >= T ||
            is_missing((*col.base)[base + static_cast<std::size_t>(src)])) {
          complete = false;
          break;
        }
      }
      if (complete) row_cells.push_back(static_cast<std::int64_t>(cell));
    }
  }

  const int n = static_cast<int>(row_cells.size());
  if (n == 0) {
    std::string detail = "design for horizon " + std::to_string(horizon) + " has no rows";
    for (const auto& filter : spec.filters) detail += "; active filter: " + filter.describe();
    fail(ErrorKind::data, detail);
  }

  HorizonDesign design;
  design.horizon = horizon;
  design.county_effects = spec.county_effects;
  design.period_effects = spec.period_effects;
  design.response.resize(n);
  design.regressors.resize(n, k);
  design.row_county.resize(static_cast<std::size_t>(n));
  design.row_period.resize(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    const std::int64_t cell = row_cells[static_cast<std::size_t>(r)];
    const int c = static_cast<int>(cell / T);
    const int t = static_cast<int>(cell % T);
    design.row_county[static_cast<std::size_t>(r)] = c;
    design.row_period[static_cast<std::size_t>(r)] = first + t;
    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    design.response(r) = outcome_base[base + static_cast<std::size_t>(t + horizon)] -
                         outcome_base[base + static_cast<std::size_t>(t - 1)];
  }
  for (int j = 0; j < k; ++j) {
    const auto& col = columns[static_cast<std::size_t>(j)];
    double* dst = design.regressors.col(j).data();
    for (int r = 0; r < n; ++r) {
      const std::int64_t cell = row_cells[static_cast<std::size_t>(r)];
      dst[r] = (*col.base)[static_cast<std::size_t>(cell - col.lag)];
    }
    design.column_names.push_back(col.name);
  }
  design.n_shock_columns = n_contemporaneous;

  if (spec.state.has_value()) {
    design = interact_state(design, data, data.series(kStateName));
  }

  // Drop identically-zero columns (e.g. neighbor terms when no neighbor ever
  // burns) so they do not show up as rank failures.
  std::vector<int> keep_cols;
  for (int j = 0; j < design.n_cols(); ++j) {
    bool all_zero = true;
    const double* col = design.regressors.col(j).data();
    for (int r = 0; r < design.n_rows(); ++r) {
      if (col[r] != 0.0) {
        all_zero = false;
        break;
      }
    }
    if (all_zero) {
      design.dropped_columns.push_back(design.column_names[static_cast<std::size_t>(j)]);
    } else {
      keep_cols.push_back(j);
    }
  }
  if (static_cast<int>(keep_cols.size()) < design.n_cols()) {
    Eigen::MatrixXd pruned(design.n_rows(), static_cast<int>(keep_cols.size()));
    std::vector<std::string> pruned_names;
    int shock_survivors = 0;
    for (std::size_t out_j = 0; out_j < keep_cols.size(); ++out_j) {
      const int j = keep_cols[out_j];
      pruned.col(static_cast<int>(out_j)) = design.regressors.col(j);
      pruned_names.push_back(design.column_names[static_cast<std::size_t>(j)]);
      if (j < design.n_shock_columns) ++shock_survivors;
    }
    design.regressors = std::move(pruned);
    design.column_names = std::move(pruned_names);
    design.n_shock_columns = shock_survivors;
  }

  if (design.n_cols() == 0) {
    fail(ErrorKind::estimation,
         "design for horizon " + std::to_string(horizon) + " has no non-zero regressors");
  }
  if (design.n_rows() <= design.n_cols()) {
    fail(ErrorKind::estimation, "design for horizon " + std::to_string(horizon) + " has " +
                                    std::to_string(design.n_rows()) + " rows for " +
                                    std::to_string(design.n_cols()) + " regressors");
  }
  return design;
}

HorizonDesign interact_state(const HorizonDesign& design, const PanelDataset& panel,
                             const std::vector<double>& indicator) {
  const int T = panel.n_periods();
  const int first = panel.periods().first;
  std::vector<int> keep_rows;
  keep_rows.reserve(static_cast<std::size_t>(design.n_rows()));
  for (int r = 0; r < design.n_rows(); ++r) {
    const std::size_t cell =
        static_cast<std::size_t>(design.row_county[static_cast<std::size_t>(r)]) *
            static_cast<std::size_t>(T) +
        static_cast<std::size_t>(design.row_period[static_cast<std::size_t>(r)] - first);
    if (!is_missing(indicator[cell])) keep_rows.push_back(r);
  }
  const int n = static_cast<int>(keep_rows.size());
  if (n == 0) fail(ErrorKind::data, "state indicator is missing on every design row");

  HorizonDesign out;
  out.horizon = design.horizon;
  out.county_effects = design.county_effects;
  out.period_effects = design.period_effects;
  out.dropped_columns = design.dropped_columns;
  out.rows_dropped_missing_state = design.n_rows() - n;
  const int k = design.n_cols();
  out.response.resize(n);
  out.regressors.resize(n, k + 1);
  out.row_county.resize(static_cast<std::size_t>(n));
  out.row_period.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int r = keep_rows[static_cast<std::size_t>(i)];
    out.response(i) = design.response(r);
    out.row_county[static_cast<std::size_t>(i)] = design.row_county[static_cast<std::size_t>(r)];
    out.row_period[static_cast<std::size_t>(i)] = design.row_period[static_cast<std::size_t>(r)];
    const std::size_t cell =
        static_cast<std::size_t>(out.row_county[static_cast<std::size_t>(i)]) *
            static_cast<std::size_t>(T) +
        static_cast<std::size_t>(out.row_period[static_cast<std::size_t>(i)] - first);
    const double state = indicator[cell];
    const double shock = design.regressors(r, 0);
    out.regressors(i, 0) = state == 1.0 ? shock : 0.0;
    out.regressors(i, 1) = state == 1.0 ? 0.0 : shock;
    for (int j = 1; j < k; ++j) out.regressors(i, j + 1) = design.regressors(r, j);
  }
  out.column_names.push_back(design.column_names[0] + "_high");
  out.column_names.push_back(design.column_names[0] + "_low");
  for (int j = 1; j < k; ++j) out.column_names.push_back(design.column_names[static_cast<std::size_t>(j)]);
  out.n_shock_columns = design.n_shock_columns + 1;
  return out;
}

}  // namespace firelp
