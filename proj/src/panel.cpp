#include "firelp/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace firelp {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool parse_number(const std::string& text, double& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_int(const std::string& text, int& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

int parse_period(const std::string& text, Frequency freq) {
  if (freq == Frequency::monthly) {
    // YYYY-MM
    const std::size_t dash = text.find('-');
    int year = 0, month = 0;
    if (dash == std::string::npos || !parse_int(text.substr(0, dash), year) ||
        !parse_int(text.substr(dash + 1), month) || month < 1 || month > 12) {
      fail(ErrorKind::data, "bad monthly period '" + text + "' (expected YYYY-MM)");
    }
    return year * 12 + (month - 1);
  }
  int year = 0;
  if (!parse_int(text, year) || text.find('-') != std::string::npos) {
    fail(ErrorKind::data, "bad annual period '" + text + "' (expected YYYY)");
  }
  return year;
}

std::string format_period(int code, Frequency freq) {
  char buf[24];
  if (freq == Frequency::monthly) {
    const int year = code >= 0 ? code / 12 : -((-code + 11) / 12);
    const int month = code - year * 12 + 1;
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
  } else {
    std::snprintf(buf, sizeof(buf), "%04d", code);
  }
  return buf;
}

int month_of(int code) { return ((code % 12) + 12) % 12; }

PanelDataset::PanelDataset(std::vector<std::string> counties, PeriodRange periods,
                           Frequency freq)
    : counties_(std::move(counties)), periods_(periods), freq_(freq) {
  if (periods_.size() <= 0) fail(ErrorKind::data, "panel needs a non-empty period range");
  if (counties_.empty()) fail(ErrorKind::data, "panel needs at least one county");
  for (int i = 0; i < n_counties(); ++i) {
    if (!county_lookup_.emplace(counties_[static_cast<std::size_t>(i)], i).second) {
      fail(ErrorKind::data, "duplicate county id '" + counties_[static_cast<std::size_t>(i)] + "'");
    }
  }
}

int PanelDataset::county_index(const std::string& id) const {
  const auto it = county_lookup_.find(id);
  return it == county_lookup_.end() ? -1 : it->second;
}

bool PanelDataset::has_series(const std::string& name) const {
  return series_.find(name) != series_.end();
}

const std::vector<double>& PanelDataset::series(const std::string& name) const {
  const auto it = series_.find(name);
  if (it == series_.end()) fail(ErrorKind::data, "unknown series '" + name + "'");
  return *it->second;
}

void PanelDataset::add_series(const std::string& name, std::vector<double> values) {
  if (name.empty()) fail(ErrorKind::data, "series name must be non-empty");
  if (values.size() != static_cast<std::size_t>(n_counties()) * static_cast<std::size_t>(n_periods())) {
    fail(ErrorKind::data, "series '" + name + "' has wrong length");
  }
  if (!series_.emplace(name, std::make_shared<const std::vector<double>>(std::move(values))).second) {
    fail(ErrorKind::data, "series '" + name + "' already exists");
  }
  series_order_.push_back(name);
}

PanelDataset PanelDataset::with_series(const std::string& name,
                                       std::vector<double> values) const {
  PanelDataset out = *this;
  out.add_series(name, std::move(values));
  return out;
}

bool PanelDataset::has_attribute(const std::string& name) const {
  return attributes_.find(name) != attributes_.end();
}

const std::vector<double>& PanelDataset::attribute(const std::string& name) const {
  const auto it = attributes_.find(name);
  if (it == attributes_.end()) fail(ErrorKind::data, "unknown attribute '" + name + "'");
  return *it->second;
}

void PanelDataset::set_attribute(const std::string& name, std::vector<double> values) {
  if (values.size() != static_cast<std::size_t>(n_counties())) {
    fail(ErrorKind::data, "attribute '" + name + "' has wrong length");
  }
  auto payload = std::make_shared<const std::vector<double>>(std::move(values));
  if (!attributes_.emplace(name, payload).second) {
    attributes_[name] = payload;
  } else {
    attribute_order_.push_back(name);
  }
}

bool PanelDataset::has_tag(const std::string& name) const {
  return tags_.find(name) != tags_.end();
}

const std::vector<std::string>& PanelDataset::tag(const std::string& name) const {
  const auto it = tags_.find(name);
  if (it == tags_.end()) fail(ErrorKind::data, "unknown tag '" + name + "'");
  return *it->second;
}

void PanelDataset::set_tag(const std::string& name, std::vector<std::string> values) {
  if (values.size() != static_cast<std::size_t>(n_counties())) {
    fail(ErrorKind::data, "tag '" + name + "' has wrong length");
  }
  auto payload = std::make_shared<const std::vector<std::string>>(std::move(values));
  if (!tags_.emplace(name, payload).second) {
    tags_[name] = payload;
  } else {
    tag_order_.push_back(name);
  }
}

PanelDataset load_panel(std::istream& in, const LoadSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::data, "panel file is empty");
  const auto header = split_line(line, schema.delimiter);
  int county_col = -1, period_col = -1;
  std::vector<int> value_cols;
  std::vector<std::string> value_names;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const auto& name = header[static_cast<std::size_t>(i)];
    if (name == schema.county_column) {
      county_col = i;
    } else if (name == schema.period_column) {
      period_col = i;
    } else if (schema.value_columns.empty() ||
               std::find(schema.value_columns.begin(), schema.value_columns.end(), name) !=
                   schema.value_columns.end()) {
      value_cols.push_back(i);
      value_names.push_back(name);
    }
  }
  if (county_col < 0) fail(ErrorKind::data, "missing county column '" + schema.county_column + "'");
  if (period_col < 0) fail(ErrorKind::data, "missing period column '" + schema.period_column + "'");
  if (value_cols.empty()) fail(ErrorKind::data, "panel file has no value columns");
  for (const auto& want : schema.value_columns) {
    if (std::find(value_names.begin(), value_names.end(), want) == value_names.end()) {
      fail(ErrorKind::data, "missing value column '" + want + "'");
    }
  }

  // First pass over rows: parse keys and cells into a row buffer, detect the
  // frequency from the first period token, and track county order and range.
  Frequency freq = Frequency::monthly;
  bool freq_known = false;
  struct Row {
    int county;
    int period;
    std::vector<double> cells;
  };
  std::vector<Row> rows;
  std::vector<std::string> counties;
  std::unordered_map<std::string, int> county_lookup;
  int min_period = 0, max_period = 0;
  long long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size()) {
      fail(ErrorKind::data, "row " + std::to_string(line_no) + " has " +
                                std::to_string(cells.size()) + " fields, expected " +
                                std::to_string(header.size()));
    }
    const std::string& id = cells[static_cast<std::size_t>(county_col)];
    if (id.empty()) fail(ErrorKind::data, "row " + std::to_string(line_no) + " has empty county id");
    const std::string& ptext = cells[static_cast<std::size_t>(period_col)];
    if (!freq_known) {
      freq = ptext.find('-') != std::string::npos ? Frequency::monthly : Frequency::annual;
      freq_known = true;
    }
    int period = 0;
    try {
      period = parse_period(ptext, freq);
    } catch (const Error& e) {
      fail(ErrorKind::data, "row " + std::to_string(line_no) + ": " + e.what());
    }
    Row row;
    auto it = county_lookup.find(id);
    if (it == county_lookup.end()) {
      it = county_lookup.emplace(id, static_cast<int>(counties.size())).first;
      counties.push_back(id);
    }
    row.county = it->second;
    row.period = period;
    row.cells.reserve(value_cols.size());
    for (const int col : value_cols) {
      const std::string& cell = cells[static_cast<std::size_t>(col)];
      if (cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN") {
        row.cells.push_back(kNaN);
        continue;
      }
      double v = 0.0;
      if (!parse_number(cell, v)) {
        fail(ErrorKind::data, "row " + std::to_string(line_no) + ": cell '" + cell +
                                  "' in column '" + header[static_cast<std::size_t>(col)] +
                                  "' is not numeric");
      }
      row.cells.push_back(v);
    }
    if (rows.empty()) {
      min_period = max_period = period;
    } else {
      min_period = std::min(min_period, period);
      max_period = std::max(max_period, period);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::data, "panel file has no data rows");

  PanelDataset panel(std::move(counties), PeriodRange{min_period, max_period}, freq);
  const int T = panel.n_periods();
  const std::size_t cells_total =
      static_cast<std::size_t>(panel.n_counties()) * static_cast<std::size_t>(T);
  std::vector<std::vector<double>> data(value_cols.size(),
                                        std::vector<double>(cells_total, kNaN));
  std::vector<bool> seen(cells_total, false);
  for (const auto& row : rows) {
    const std::size_t idx = static_cast<std::size_t>(row.county) * static_cast<std::size_t>(T) +
                            static_cast<std::size_t>(row.period - min_period);
    if (seen[idx]) {
      fail(ErrorKind::data, "duplicate row for county '" + panel.county(row.county) +
                                "', period " + format_period(row.period, freq));
    }
    seen[idx] = true;
    for (std::size_t j = 0; j < row.cells.size(); ++j) data[j][idx] = row.cells[j];
  }
  for (std::size_t j = 0; j < value_names.size(); ++j) {
    panel.add_series(value_names[j], std::move(data[j]));
  }
  return panel;
}

PanelDataset load_panel_file(const std::string& path, const LoadSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open panel file '" + path + "'");
  return load_panel(in, schema);
}

void write_panel(const PanelDataset& panel, std::ostream& out) {
  out << "county,period";
  for (const auto& name : panel.series_names()) out << ',' << name;
  out << '\n';
  const auto& names = panel.series_names();
  std::vector<const std::vector<double>*> cols;
  cols.reserve(names.size());
  for (const auto& name : names) cols.push_back(&panel.series(name));
  const int T = panel.n_periods();
  for (int c = 0; c < panel.n_counties(); ++c) {
    for (int t = 0; t < T; ++t) {
      out << panel.county(c) << ',' << format_period(panel.periods().first + t, panel.frequency());
      const std::size_t idx =
          static_cast<std::size_t>(c) * static_cast<std::size_t>(T) + static_cast<std::size_t>(t);
      for (const auto* col : cols) {
        out << ',';
        const double v = (*col)[idx];
        if (!is_missing(v)) out << format_double(v);
      }
      out << '\n';
    }
  }
}

void write_panel_file(const PanelDataset& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write panel file '" + path + "'");
  write_panel(panel, out);
  out.flush();
  if (!out) fail(ErrorKind::io, "error while writing panel file '" + path + "'");
}

void load_attributes(PanelDataset& panel, std::istream& in, char delimiter) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::data, "attribute file is empty");
  const auto header = split_line(line, delimiter);
  if (header.size() < 2) fail(ErrorKind::data, "attribute file needs a key column and data columns");
  const int n = panel.n_counties();
  const std::size_t n_cols = header.size() - 1;
  std::vector<std::vector<std::string>> raw(n_cols,
                                            std::vector<std::string>(static_cast<std::size_t>(n)));
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  long long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, delimiter);
    if (cells.size() != header.size()) {
      fail(ErrorKind::data, "attribute row " + std::to_string(line_no) + " has " +
                                std::to_string(cells.size()) + " fields, expected " +
                                std::to_string(header.size()));
    }
    const int c = panel.county_index(cells[0]);
    if (c < 0) {
      fail(ErrorKind::data, "attribute row " + std::to_string(line_no) + ": unknown county '" +
                                cells[0] + "'");
    }
    if (seen[static_cast<std::size_t>(c)]) {
      fail(ErrorKind::data, "duplicate attribute row for county '" + cells[0] + "'");
    }
    seen[static_cast<std::size_t>(c)] = true;
    for (std::size_t j = 0; j < n_cols; ++j) raw[j][static_cast<std::size_t>(c)] = cells[j + 1];
  }
  for (std::size_t j = 0; j < n_cols; ++j) {
    // Numeric column: every non-empty cell parses as a number.
    bool numeric = true;
    bool any = false;
    std::vector<double> values(static_cast<std::size_t>(n), kNaN);
    for (int c = 0; c < n; ++c) {
      const auto& cell = raw[j][static_cast<std::size_t>(c)];
      if (cell.empty()) continue;
      any = true;
      double v = 0.0;
      if (!parse_number(cell, v)) {
        numeric = false;
        break;
      }
      values[static_cast<std::size_t>(c)] = v;
    }
    if (numeric && any) {
      panel.set_attribute(header[j + 1], std::move(values));
    } else {
      panel.set_tag(header[j + 1], std::move(raw[j]));
    }
  }
}

void load_attributes_file(PanelDataset& panel, const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open attribute file '" + path + "'");
  load_attributes(panel, in, delimiter);
}

void write_attributes(const PanelDataset& panel, std::ostream& out) {
  out << "county";
  for (const auto& name : panel.attribute_names()) out << ',' << name;
  for (const auto& name : panel.tag_names()) out << ',' << name;
  out << '\n';
  for (int c = 0; c < panel.n_counties(); ++c) {
    out << panel.county(c);
    for (const auto& name : panel.attribute_names()) {
      out << ',';
      const double v = panel.attribute(name)[static_cast<std::size_t>(c)];
      if (!is_missing(v)) out << format_double(v);
    }
    for (const auto& name : panel.tag_names()) out << ',' << panel.tag(name)[static_cast<std::size_t>(c)];
    out << '\n';
  }
}

TransformResult growth(const PanelDataset& panel, const std::string& series, int horizon,
                       bool log_scale) {
  if (horizon < 0) fail(ErrorKind::data, "growth horizon must be non-negative");
  const auto& x = panel.series(series);
  const int T = panel.n_periods();
  const int N = panel.n_counties();
  TransformResult out;
  out.values.assign(static_cast<std::size_t>(N) * static_cast<std::size_t>(T), kNaN);
  for (int c = 0; c < N; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    for (int t = 0; t < T; ++t) {
      const int t_lead = t + horizon;
      const int t_base = t - 1;
      if (t_lead >= T || t_base < 0) continue;
      const double a = x[base + static_cast<std::size_t>(t_lead)];
      const double b = x[base + static_cast<std::size_t>(t_base)];
      if (is_missing(a) || is_missing(b)) continue;
      if (log_scale) {
        if (a <= 0.0 || b <= 0.0) {
          ++out.warnings;
          continue;
        }
        out.values[base + static_cast<std::size_t>(t)] = std::log(a) - std::log(b);
      } else {
        out.values[base + static_cast<std::size_t>(t)] = a - b;
      }
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<double>>> make_lags(const PanelDataset& panel,
                                                                   const std::string& series,
                                                                   int k) {
  if (k < 1) fail(ErrorKind::data, "lag count must be at least 1");
  if (k > panel.n_periods() - 1) {
    fail(ErrorKind::data, "lag count " + std::to_string(k) + " exceeds panel span");
  }
  const auto& x = panel.series(series);
  const int T = panel.n_periods();
  const int N = panel.n_counties();
  std::vector<std::pair<std::string, std::vector<double>>> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) {
    std::vector<double> lagged(static_cast<std::size_t>(N) * static_cast<std::size_t>(T), kNaN);
    for (int c = 0; c < N; ++c) {
      const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
      for (int t = j; t < T; ++t) {
        lagged[base + static_cast<std::size_t>(t)] = x[base + static_cast<std::size_t>(t - j)];
      }
    }
    out.emplace_back(series + "_lag" + std::to_string(j), std::move(lagged));
  }
  return out;
}

TransformResult seasonal_adjust(const PanelDataset& panel, const std::string& series) {
  if (panel.frequency() != Frequency::monthly) {
    fail(ErrorKind::data, "seasonal adjustment requires a monthly panel");
  }
  const auto& x = panel.series(series);
  const int T = panel.n_periods();
  const int N = panel.n_counties();
  TransformResult out;
  out.values = x;
  for (int c = 0; c < N; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    double log_sum[12] = {};
    int count[12] = {};
    int n_obs = 0;
    for (int t = 0; t < T; ++t) {
      const double v = x[base + static_cast<std::size_t>(t)];
      if (is_missing(v)) continue;
      if (v <= 0.0) {
        fail(ErrorKind::data, "seasonal adjustment needs strictly positive values; county '" +
                                  panel.county(c) + "' has " + format_double(v));
      }
      const int m = month_of(panel.periods().first + t);
      log_sum[m] += std::log(v);
      ++count[m];
      ++n_obs;
    }
    if (n_obs < 24) {
      ++out.warnings;  // too short to estimate monthly factors; passed through
      continue;
    }
    double month_mean[12];
    double grand = 0.0;
    int months_seen = 0;
    for (int m = 0; m < 12; ++m) {
      if (count[m] == 0) {
        month_mean[m] = kNaN;
        continue;
      }
      month_mean[m] = log_sum[m] / count[m];
      grand += month_mean[m];
      ++months_seen;
    }
    grand /= months_seen;
    double factor[12];
    for (int m = 0; m < 12; ++m) {
      factor[m] = count[m] == 0 ? 1.0 : std::exp(month_mean[m] - grand);
    }
    for (int t = 0; t < T; ++t) {
      const std::size_t idx = base + static_cast<std::size_t>(t);
      if (is_missing(x[idx])) continue;
      out.values[idx] = x[idx] / factor[month_of(panel.periods().first + t)];
    }
  }
  return out;
}

SeriesSummary summarize(const PanelDataset& panel, const std::string& series) {
  const auto& x = panel.series(series);
  SeriesSummary s;
  std::vector<double> present;
  present.reserve(x.size());
  double sum = 0.0;
  double pos_sum = 0.0;
  long long n_pos = 0;
  for (const double v : x) {
    if (is_missing(v)) {
      ++s.n_missing;
      continue;
    }
    present.push_back(v);
    sum += v;
    if (v > 0.0) {
      pos_sum += v;
      ++n_pos;
    }
  }
  s.n = static_cast<long long>(present.size());
  if (s.n == 0) return s;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (const double v : present) ss += (v - s.mean) * (v - s.mean);
  s.sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  s.min = *std::min_element(present.begin(), present.end());
  s.max = *std::max_element(present.begin(), present.end());
  s.median = median(present);
  s.share_positive = static_cast<double>(n_pos) / static_cast<double>(s.n);
  s.mean_positive = n_pos > 0 ? pos_sum / static_cast<double>(n_pos) : kNaN;
  return s;
}

}  // namespace firelp
