#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace seqdec {

// One attention-weight row per emitted token; all rows span the same
// frame count.
struct AttentionTrace {
  std::size_t frame_count = 0;
  std::vector<std::vector<double>> rows;

  void append(std::vector<double> row) {
    if (row.size() != frame_count)
      throw std::invalid_argument("attention row length mismatch");
    double sum = 0.0;
    for (double w : row) {
      if (w < 0.0 || !std::isfinite(w))
        throw std::invalid_argument("attention weights must be finite and non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("attention row must sum to 1");
    rows.push_back(std::move(row));
  }
};

// Number of frames whose cumulative attention exceeds tau.  Always
// recomputed from the full trace.
inline int coverage(const AttentionTrace& trace, double tau) {
  std::vector<double> column(trace.frame_count, 0.0);
  for (const auto& row : trace.rows) {
    if (row.size() != trace.frame_count)
      throw std::invalid_argument("ragged attention trace");
    for (std::size_t j = 0; j < row.size(); ++j) column[j] += row[j];
  }
  int covered = 0;
  for (double c : column)
    if (c > tau) ++covered;
  return covered;
}

}  // namespace seqdec
