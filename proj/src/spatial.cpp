#include "firelp/spatial.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

namespace firelp {

bool AdjacencyMatrix::adjacent(int i, int j) const {
  const auto& nbr = neighbors_[static_cast<std::size_t>(i)];
  return std::binary_search(nbr.begin(), nbr.end(), j);
}

long long AdjacencyMatrix::n_edges() const {
  long long total = 0;
  for (const auto& nbr : neighbors_) total += static_cast<long long>(nbr.size());
  return total / 2;
}

void AdjacencyMatrix::add_edge(int i, int j) {
  const int n = n_counties();
  if (i < 0 || j < 0 || i >= n || j >= n) fail(ErrorKind::data, "edge index out of range");
  if (i == j) fail(ErrorKind::data, "self-loop not allowed");
  auto insert = [this](int a, int b) {
    auto& nbr = neighbors_[static_cast<std::size_t>(a)];
    const auto it = std::lower_bound(nbr.begin(), nbr.end(), b);
    if (it == nbr.end() || *it != b) nbr.insert(it, b);
  };
  insert(i, j);
  insert(j, i);
}

namespace {

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

}  // namespace

AdjacencyMatrix load_adjacency(std::istream& in, const PanelDataset& panel,
                               int* self_loops_skipped) {
  AdjacencyMatrix w(panel.n_counties());
  int skipped = 0;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      fail(ErrorKind::data, "adjacency line " + std::to_string(line_no) +
                                ": expected 'id_a,id_b', got '" + line + "'");
    }
    const std::string a = strip(line.substr(0, comma));
    const std::string b = strip(line.substr(comma + 1));
    const int i = panel.county_index(a);
    if (i < 0) {
      fail(ErrorKind::data,
           "adjacency line " + std::to_string(line_no) + ": unknown county '" + a + "'");
    }
    const int j = panel.county_index(b);
    if (j < 0) {
      fail(ErrorKind::data,
           "adjacency line " + std::to_string(line_no) + ": unknown county '" + b + "'");
    }
    if (i == j) {
      ++skipped;
      continue;
    }
    w.add_edge(i, j);
  }
  if (self_loops_skipped != nullptr) *self_loops_skipped = skipped;
  return w;
}

AdjacencyMatrix load_adjacency_file(const std::string& path, const PanelDataset& panel,
                                    int* self_loops_skipped) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open adjacency file '" + path + "'");
  return load_adjacency(in, panel, self_loops_skipped);
}

AdjacencyMatrix second_order(const AdjacencyMatrix& w) {
  const int n = w.n_counties();
  AdjacencyMatrix w2(n);
  std::vector<char> mark(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    // Union of neighbors-of-neighbors, excluding i itself.
    std::vector<int> hits;
    for (const int k : w.neighbors(i)) {
      for (const int j : w.neighbors(k)) {
        if (j == i || mark[static_cast<std::size_t>(j)]) continue;
        mark[static_cast<std::size_t>(j)] = 1;
        hits.push_back(j);
      }
    }
    for (const int j : hits) {
      mark[static_cast<std::size_t>(j)] = 0;
      if (j > i) w2.add_edge(i, j);
    }
  }
  return w2;
}

std::vector<double> neighbor_sum(const PanelDataset& panel, const AdjacencyMatrix& w,
                                 const std::string& series) {
  if (w.n_counties() != panel.n_counties()) {
    fail(ErrorKind::data, "adjacency size does not match panel county count");
  }
  const auto& x = panel.series(series);
  const int N = panel.n_counties();
  const int T = panel.n_periods();
  std::vector<double> out(static_cast<std::size_t>(N) * static_cast<std::size_t>(T), 0.0);
  for (int c = 0; c < N; ++c) {
    const std::size_t row = static_cast<std::size_t>(c) * static_cast<std::size_t>(T);
    const auto& nbrs = w.neighbors(c);
    if (nbrs.empty()) continue;  // empty sum stays zero
    for (int t = 0; t < T; ++t) {
      double sum = 0.0;
      for (const int j : nbrs) {
        const double v = x[static_cast<std::size_t>(j) * static_cast<std::size_t>(T) +
                           static_cast<std::size_t>(t)];
        if (is_missing(v)) {
          sum = kNaN;
          break;
        }
        sum += v;
      }
      out[row + static_cast<std::size_t>(t)] = sum;
    }
  }
  return out;
}

}  // namespace firelp
