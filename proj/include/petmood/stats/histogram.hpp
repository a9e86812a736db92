#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "petmood/error.hpp"
#include "petmood/jsonl.hpp"

namespace petmood::stats {

inline constexpr double kScoreMax = 100.0;
inline constexpr double kDefaultBinWidth = 10.0;

// Bins [0,w), [w,2w), ... over [0, 100]; the last bin is closed at 100.
struct HappinessHistogram {
  double bin_width = kDefaultBinWidth;
  std::vector<std::size_t> counts;
  std::vector<double> proportions;  // counts / total; all zero when total == 0
  std::size_t total = 0;

  bool normalized() const noexcept { return total > 0; }
  std::size_t bins() const noexcept { return counts.size(); }
  double bin_lo(std::size_t i) const noexcept { return static_cast<double>(i) * bin_width; }
  double bin_hi(std::size_t i) const noexcept {
    return i + 1 == counts.size() ? kScoreMax : static_cast<double>(i + 1) * bin_width;
  }
};

inline std::size_t bin_count(double bin_width) {
  if (!(bin_width > 0 && bin_width <= kScoreMax)) throw ValidationError("bin width must be in (0, 100]");
  // Guard against 100 / w landing a hair above an integer.
  return static_cast<std::size_t>(std::ceil(kScoreMax / bin_width - 1e-9));
}

inline HappinessHistogram build_histogram(std::span<const double> values, double bin_width = kDefaultBinWidth) {
  HappinessHistogram h;
  h.bin_width = bin_width;
  h.counts.assign(bin_count(bin_width), 0);
  h.proportions.assign(h.counts.size(), 0.0);
  for (double v : values) {
    if (!(v >= 0 && v <= kScoreMax)) {
      throw ValidationError("happiness value out of range [0, 100]: " + ordered_json(v).dump());
    }
    auto bin = static_cast<std::size_t>(std::floor(v / bin_width));
    if (bin >= h.counts.size()) bin = h.counts.size() - 1;
    ++h.counts[bin];
  }
  h.total = values.size();
  if (h.total > 0) {
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      h.proportions[i] = static_cast<double>(h.counts[i]) / static_cast<double>(h.total);
    }
  }
  return h;
}

inline ordered_json to_json(const HappinessHistogram& h) {
  ordered_json j;
  j["n"] = h.total;
  j["bin_width"] = h.bin_width;
  j["normalized"] = h.normalized();
  j["bins"] = ordered_json::array();
  for (std::size_t i = 0; i < h.bins(); ++i) {
    j["bins"].push_back({{"lo", h.bin_lo(i)}, {"hi", h.bin_hi(i)}, {"count", h.counts[i]}, {"proportion", h.proportions[i]}});
  }
  return j;
}

}  // namespace petmood::stats
