#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "firelp/panel.hpp"

namespace firelp {

// Symmetric binary contiguity structure over the panel's counties, stored as
// sorted neighbor lists. No self-loops; entries are unweighted (a neighbor's
// shock enters as a plain sum, not an average).
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(int n) : neighbors_(static_cast<std::size_t>(n)) {}

  int n_counties() const { return static_cast<int>(neighbors_.size()); }
  const std::vector<int>& neighbors(int i) const {
    return neighbors_[static_cast<std::size_t>(i)];
  }
  bool adjacent(int i, int j) const;
  long long n_edges() const;  // undirected edge count

  // Inserts both directions, ignores duplicates, rejects self-loops.
  void add_edge(int i, int j);

 private:
  std::vector<std::vector<int>> neighbors_;
};

// Edge list "id_a,id_b", one pair per line, '#' starts a comment. Both ids
// must be panel counties; either orientation (or both) may appear. Self-loops
// are skipped and counted in `self_loops_skipped` when provided.
AdjacencyMatrix load_adjacency(std::istream& in, const PanelDataset& panel,
                               int* self_loops_skipped = nullptr);
AdjacencyMatrix load_adjacency_file(const std::string& path, const PanelDataset& panel,
                                    int* self_loops_skipped = nullptr);

// Boolean square of W with the diagonal removed: i and j are linked when they
// share at least one common neighbor (whether or not they are adjacent in W).
AdjacencyMatrix second_order(const AdjacencyMatrix& w);

// Sum of `series` over each county's neighbors, per period. A missing
// neighbor value makes the aggregate missing. Counties with no neighbors get
// zero (an empty sum).
std::vector<double> neighbor_sum(const PanelDataset& panel, const AdjacencyMatrix& w,
                                 const std::string& series);

}  // namespace firelp
