#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "firelp/common.hpp"

namespace firelp {

enum class Frequency { monthly, annual };

// Integer period codes: monthly periods are year*12 + (month-1), annual
// periods are the year itself. Consecutive codes are consecutive periods.
int parse_period(const std::string& text, Frequency freq);
std::string format_period(int code, Frequency freq);
int month_of(int code);  // 0..11, monthly codes only

struct PeriodRange {
  int first = 0;
  int last = -1;
  int size() const { return last - first + 1; }
  bool contains(int code) const { return code >= first && code <= last; }
};

// County-by-period panel. Series are dense N*T arrays indexed by
// county*T + (period - first); missing cells hold NaN. Series payloads sit
// behind shared_ptr so copies of the dataset are cheap; transforms return new
// series rather than mutating stored ones.
class PanelDataset {
 public:
  PanelDataset() = default;
  PanelDataset(std::vector<std::string> counties, PeriodRange periods, Frequency freq);

  int n_counties() const { return static_cast<int>(counties_.size()); }
  int n_periods() const { return periods_.size(); }
  const std::vector<std::string>& counties() const { return counties_; }
  const std::string& county(int i) const { return counties_[static_cast<std::size_t>(i)]; }
  int county_index(const std::string& id) const;  // -1 when absent
  PeriodRange periods() const { return periods_; }
  Frequency frequency() const { return freq_; }

  bool has_series(const std::string& name) const;
  const std::vector<double>& series(const std::string& name) const;
  const std::vector<std::string>& series_names() const { return series_order_; }
  // Cell accessor; `period` is an absolute period code. Out-of-range reads
  // return NaN so shifted lookups need no bounds handling at call sites.
  double value(const std::vector<double>& series, int county, int period) const {
    if (!periods_.contains(period)) return kNaN;
    return series[static_cast<std::size_t>(county) * static_cast<std::size_t>(n_periods()) +
                  static_cast<std::size_t>(period - periods_.first)];
  }
  double value(const std::string& name, int county, int period) const {
    return value(series(name), county, period);
  }

  // Mutating append, for loaders and generators assembling a dataset.
  void add_series(const std::string& name, std::vector<double> values);
  // Value-semantics append: returns a copy of the panel with one more series.
  PanelDataset with_series(const std::string& name, std::vector<double> values) const;

  // Per-county scalar attributes (numeric) and tags (strings, e.g. region).
  bool has_attribute(const std::string& name) const;
  const std::vector<double>& attribute(const std::string& name) const;
  void set_attribute(const std::string& name, std::vector<double> values);
  const std::vector<std::string>& attribute_names() const { return attribute_order_; }
  bool has_tag(const std::string& name) const;
  const std::vector<std::string>& tag(const std::string& name) const;
  void set_tag(const std::string& name, std::vector<std::string> values);
  const std::vector<std::string>& tag_names() const { return tag_order_; }

 private:
  std::vector<std::string> counties_;
  std::unordered_map<std::string, int> county_lookup_;
  PeriodRange periods_{};
  Frequency freq_ = Frequency::monthly;
  std::vector<std::string> series_order_;
  std::unordered_map<std::string, std::shared_ptr<const std::vector<double>>> series_;
  std::vector<std::string> attribute_order_;
  std::unordered_map<std::string, std::shared_ptr<const std::vector<double>>> attributes_;
  std::vector<std::string> tag_order_;
  std::unordered_map<std::string, std::shared_ptr<const std::vector<std::string>>> tags_;
};

struct LoadSchema {
  std::string county_column = "county";
  std::string period_column = "period";
  // Empty means: every other column is a value series.
  std::vector<std::string> value_columns;
  char delimiter = ',';
};

// Long-format CSV (one row per county-period) -> panel. The period grid is the
// full range between the earliest and latest period seen; cells never observed
// stay missing. Duplicate (county, period) rows and malformed cells are data
// errors that name the offending row.
PanelDataset load_panel(std::istream& in, const LoadSchema& schema = {});
PanelDataset load_panel_file(const std::string& path, const LoadSchema& schema = {});

// Inverse of load_panel: one row per (county, period) including all-missing
// rows, so a written panel reloads to an identical dataset.
void write_panel(const PanelDataset& panel, std::ostream& out);
void write_panel_file(const PanelDataset& panel, const std::string& path);

// County attribute CSV keyed by county id. Numeric columns become attributes,
// non-numeric columns become tags. Counties absent from the file get NaN /
// empty-string entries; unknown counties in the file are data errors.
void load_attributes(PanelDataset& panel, std::istream& in, char delimiter = ',');
void load_attributes_file(PanelDataset& panel, const std::string& path, char delimiter = ',');
void write_attributes(const PanelDataset& panel, std::ostream& out);

struct TransformResult {
  std::vector<double> values;
  int warnings = 0;  // masked cells (non-positive under log) or skipped counties
};

// Growth between period t-1 and t+h: f(x[t+h]) - f(x[t-1]) stored at t, where
// f is log (log_scale) or identity. Missing whenever either endpoint is
// missing or out of range; non-positive endpoints under log mask the cell and
// count as warnings.
TransformResult growth(const PanelDataset& panel, const std::string& series, int horizon,
                       bool log_scale);
inline TransformResult log_growth(const PanelDataset& panel, const std::string& series,
                                  int horizon) {
  return growth(panel, series, horizon, true);
}

// Lags 1..k of a series, named "<series>_lag<j>". Values never cross county
// boundaries; the first j periods of each county are missing.
std::vector<std::pair<std::string, std::vector<double>>> make_lags(const PanelDataset& panel,
                                                                   const std::string& series,
                                                                   int k);

// Multiplicative month-of-year adjustment, computed per county: factors are
// exp(mean log deviation by calendar month), normalized so their geometric
// mean over observed months is one. Counties with fewer than 24 observations
// pass through unchanged and are counted as warnings. Requires a strictly
// positive monthly series.
TransformResult seasonal_adjust(const PanelDataset& panel, const std::string& series);

struct SeriesSummary {
  long long n = 0;          // non-missing cells
  long long n_missing = 0;
  double mean = kNaN;
  double sd = kNaN;
  double min = kNaN;
  double max = kNaN;
  double median = kNaN;
  double share_positive = kNaN;
  double mean_positive = kNaN;  // mean over strictly positive cells
};

SeriesSummary summarize(const PanelDataset& panel, const std::string& series);

}  // namespace firelp
