#pragma once

#include <cstddef>
#include <span>

namespace petmood::stats {

// Pairwise (cascade) summation. Error grows as O(log n) instead of O(n), and
// the split points depend only on n, so results are reproducible.
inline double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 8;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace petmood::stats
