#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "petmood/error.hpp"
#include "petmood/stats/incomplete_gamma.hpp"

namespace petmood::stats {

class DegenerateTableError : public ValidationError {
 public:
  explicit DegenerateTableError(const std::string& what) : ValidationError("degenerate contingency table: " + what) {}
};

// rows x columns of observed counts.
using ContingencyTable = std::vector<std::vector<double>>;

struct ChiSquareOptions {
  // When > 0, adjacent columns are merged until every expected count in a
  // merged column reaches this value. 0 disables pooling.
  double pool_min_expected = 0.0;
};

struct ChiSquareResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::vector<std::size_t> dropped_bins;          // all-zero columns, original indices
  std::vector<std::vector<std::size_t>> columns;  // original indices behind each tested column
};

inline constexpr double kPValueDisplayFloor = 1e-4;

// "p < 0.0001" below the floor, four decimals otherwise.
inline std::string format_p_value(double p) {
  if (p < kPValueDisplayFloor) return "p < 0.0001";
  char buf[32];
  std::snprintf(buf, sizeof buf, "p = %.4f", p);
  return buf;
}

// Pearson chi-square test of independence, no continuity correction.
inline ChiSquareResult chi_square_independence(const ContingencyTable& table, const ChiSquareOptions& options = {}) {
  if (table.size() < 2) throw DegenerateTableError("need at least two rows");
  const std::size_t n_cols = table.front().size();
  for (const auto& row : table) {
    if (row.size() != n_cols) throw ValidationError("contingency table rows differ in length");
    for (double v : row) {
      if (!(v >= 0)) throw ValidationError("contingency counts must be non-negative");
    }
  }

  ChiSquareResult result;
  // Retained columns as groups of original indices.
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t c = 0; c < n_cols; ++c) {
    double col = 0.0;
    for (const auto& row : table) col += row[c];
    if (col == 0.0) {
      result.dropped_bins.push_back(c);
    } else {
      groups.push_back({c});
    }
  }
  if (groups.size() < 2) throw DegenerateTableError("fewer than two nonzero columns");

  std::vector<double> row_totals(table.size(), 0.0);
  double grand = 0.0;
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (double v : table[r]) row_totals[r] += v;
    if (row_totals[r] == 0.0) throw DegenerateTableError("row " + std::to_string(r) + " is empty");
    grand += row_totals[r];
  }

  const auto group_count = [&](std::size_t r, const std::vector<std::size_t>& g) {
    double s = 0.0;
    for (auto c : g) s += table[r][c];
    return s;
  };
  const auto group_total = [&](const std::vector<std::size_t>& g) {
    double s = 0.0;
    for (std::size_t r = 0; r < table.size(); ++r) s += group_count(r, g);
    return s;
  };
  const auto min_expected = [&](const std::vector<std::size_t>& g) {
    const double col = group_total(g);
    double m = row_totals.front() * col / grand;
    for (double rt : row_totals) m = std::min(m, rt * col / grand);
    return m;
  };

  if (options.pool_min_expected > 0) {
    std::vector<std::vector<std::size_t>> pooled;
    std::vector<std::size_t> current;
    for (const auto& g : groups) {
      current.insert(current.end(), g.begin(), g.end());
      if (min_expected(current) >= options.pool_min_expected) {
        pooled.push_back(std::move(current));
        current.clear();
      }
    }
    if (!current.empty()) {
      if (pooled.empty()) {
        pooled.push_back(std::move(current));
      } else {
        pooled.back().insert(pooled.back().end(), current.begin(), current.end());
      }
    }
    groups = std::move(pooled);
    if (groups.size() < 2) throw DegenerateTableError("fewer than two columns left after pooling");
  }

  for (const auto& g : groups) {
    const double col = group_total(g);
    for (std::size_t r = 0; r < table.size(); ++r) {
      const double expected = row_totals[r] * col / grand;
      const double diff = group_count(r, g) - expected;
      result.statistic += diff * diff / expected;
    }
  }
  result.df = static_cast<int>((table.size() - 1) * (groups.size() - 1));
  result.p_value = chi_square_sf(result.statistic, result.df);
  result.columns = std::move(groups);
  return result;
}

}  // namespace petmood::stats
