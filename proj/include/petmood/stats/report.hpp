#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "petmood/demographics.hpp"
#include "petmood/happiness.hpp"
#include "petmood/ownership.hpp"
#include "petmood/stats/chi_square.hpp"
#include "petmood/stats/histogram.hpp"
#include "petmood/stats/partition.hpp"

namespace petmood::stats {

struct ReportOptions {
  double bin_width = kDefaultBinWidth;
  double pool_min_expected = 0.0;
  // Comparisons with a smaller cohort on either side are skipped.
  std::size_t min_cohort_size = 2;
};

struct CohortHistogram {
  std::string name;
  HappinessHistogram histogram;
  bool degenerate = false;  // empty cohort
};

struct CohortComparison {
  std::string name;
  std::string first, second;  // cohort names
  std::optional<ChiSquareResult> result;
  std::string diagnostic;  // set when the test was skipped
};

struct ReportExclusions {
  std::size_t no_happiness_index = 0;  // verdict users with no HI record
  std::size_t unknown_gender = 0;      // excluded from gendered cohorts
  std::size_t missing_demographics = 0;
  std::size_t orphan_records = 0;  // HI or demographics for users without a verdict
};

struct Report {
  ReportOptions options;
  CohortPartition partition;
  std::vector<CohortHistogram> histograms;
  std::vector<CohortComparison> comparisons;
  ReportExclusions exclusions;

  const CohortHistogram* histogram(const std::string& name) const {
    for (const auto& h : histograms) {
      if (h.name == name) return &h;
    }
    return nullptr;
  }
  const CohortComparison* comparison(const std::string& name) const {
    for (const auto& c : comparisons) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

// Cohorts in report order.
inline const std::vector<std::string>& cohort_names() {
  static const std::vector<std::string> names = {
      "all_owners",   "all_non_owners",   "male",         "female",
      "male_owners",  "male_non_owners",  "female_owners", "female_non_owners",
  };
  return names;
}

inline Report cohort_report(const CohortPartition& partition, std::span<const HappinessIndex> happiness,
                            std::span<const OwnershipVerdict> verdicts, std::span<const UserDemographics> demographics,
                            const ReportOptions& options = {}) {
  Report report;
  report.options = options;
  report.partition = partition;

  std::map<std::string, double> hi_of;
  for (const auto& h : happiness) hi_of[h.user_id] = h.value;
  std::map<std::string, GenderVerdict> gender_of;
  for (const auto& d : demographics) gender_of[d.user_id] = d.gender;
  std::map<std::string, const OwnershipVerdict*> verdict_of;
  for (const auto& v : verdicts) verdict_of[v.user_id] = &v;

  for (const auto& [user, _] : hi_of) {
    if (!verdict_of.count(user)) ++report.exclusions.orphan_records;
  }
  for (const auto& [user, _] : gender_of) {
    if (!verdict_of.count(user) && !hi_of.count(user)) ++report.exclusions.orphan_records;
  }

  std::map<std::string, std::vector<double>> members;
  for (const auto& name : cohort_names()) members[name];
  // Iterate in user_id order so cohort contents are input-order independent.
  for (const auto& [user, verdict] : verdict_of) {
    const auto hi = hi_of.find(user);
    const auto g = gender_of.find(user);
    if (g == gender_of.end()) {
      ++report.exclusions.missing_demographics;
    } else if (g->second == GenderVerdict::unknown) {
      ++report.exclusions.unknown_gender;
    }
    if (hi == hi_of.end()) {
      ++report.exclusions.no_happiness_index;
      continue;
    }
    const bool owner = verdict->is_owner();
    members[owner ? "all_owners" : "all_non_owners"].push_back(hi->second);
    if (g == gender_of.end() || g->second == GenderVerdict::unknown) continue;
    const std::string gender(to_string(g->second));
    members[gender].push_back(hi->second);
    members[gender + (owner ? "_owners" : "_non_owners")].push_back(hi->second);
  }

  for (const auto& name : cohort_names()) {
    const auto& values = members[name];
    report.histograms.push_back({name, build_histogram(values, options.bin_width), values.empty()});
  }

  const auto compare = [&](std::string name, const std::string& a, const std::string& b) {
    CohortComparison c{std::move(name), a, b, std::nullopt, {}};
    const auto& ha = report.histogram(a)->histogram;
    const auto& hb = report.histogram(b)->histogram;
    if (ha.total < options.min_cohort_size || hb.total < options.min_cohort_size) {
      c.diagnostic = "skipped: cohort sizes " + std::to_string(ha.total) + " and " + std::to_string(hb.total) +
                     " below minimum " + std::to_string(options.min_cohort_size);
    } else {
      ContingencyTable table(2);
      table[0].assign(ha.counts.begin(), ha.counts.end());
      table[1].assign(hb.counts.begin(), hb.counts.end());
      try {
        c.result = chi_square_independence(table, ChiSquareOptions{options.pool_min_expected});
      } catch (const DegenerateTableError& e) {
        c.diagnostic = std::string("skipped: ") + e.what();
      }
    }
    report.comparisons.push_back(std::move(c));
  };
  compare("owners_vs_non_owners", "all_owners", "all_non_owners");
  compare("male_owners_vs_male_non_owners", "male_owners", "male_non_owners");
  compare("female_owners_vs_female_non_owners", "female_owners", "female_non_owners");
  return report;
}

inline ordered_json to_json(const CohortComparison& c) {
  ordered_json j;
  j["name"] = c.name;
  j["cohorts"] = {c.first, c.second};
  if (c.result) {
    const auto& r = *c.result;
    j["skipped"] = false;
    j["statistic"] = r.statistic;
    j["df"] = r.df;
    j["p_value"] = r.p_value;
    j["p_display"] = format_p_value(r.p_value);
    j["dropped_bins"] = r.dropped_bins;
    j["columns"] = r.columns;
  } else {
    j["skipped"] = true;
    j["diagnostic"] = c.diagnostic;
  }
  return j;
}

inline ordered_json to_json(const Report& report) {
  ordered_json j;
  j["options"] = {{"bin_width", report.options.bin_width},
                  {"pool_min_expected", report.options.pool_min_expected},
                  {"min_cohort_size", report.options.min_cohort_size}};
  j["partition"] = report.partition.to_json();
  ordered_json hists = ordered_json::object();
  for (const auto& h : report.histograms) {
    auto hj = to_json(h.histogram);
    hj["degenerate"] = h.degenerate;
    hists[h.name] = std::move(hj);
  }
  j["histograms"] = std::move(hists);
  j["tests"] = ordered_json::array();
  for (const auto& c : report.comparisons) j["tests"].push_back(to_json(c));
  j["exclusions"] = {{"no_happiness_index", report.exclusions.no_happiness_index},
                     {"unknown_gender", report.exclusions.unknown_gender},
                     {"missing_demographics", report.exclusions.missing_demographics},
                     {"orphan_records", report.exclusions.orphan_records}};
  return j;
}

// One <cohort>.csv per histogram with columns bin_lo,bin_hi,count,proportion.
inline void write_histogram_csvs(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  for (const auto& h : report.histograms) {
    auto out = open_output((dir / (h.name + ".csv")).string());
    out << "bin_lo,bin_hi,count,proportion\n";
    const auto& hist = h.histogram;
    for (std::size_t i = 0; i < hist.bins(); ++i) {
      out << ordered_json(hist.bin_lo(i)).dump() << ',' << ordered_json(hist.bin_hi(i)).dump() << ','
          << hist.counts[i] << ',' << ordered_json(hist.proportions[i]).dump() << '\n';
    }
  }
}

}  // namespace petmood::stats
