#include <gtest/gtest.h>

#include <boost/math/distributions/binomial.hpp>
#include <filesystem>
#include <fstream>
#include <random>

#include "petmood/stats/report.hpp"
#include "petmood/synthgen.hpp"
#include "petmood/pipeline.hpp"

namespace petmood::stats {
namespace {

OwnershipVerdict verdict(const std::string& user, bool owner) {
  OwnershipVerdict v;
  v.user_id = user;
  v.status = owner ? OwnershipStatus::owner : OwnershipStatus::non_owner;
  if (owner) v.pet_type = PetClass::dog;
  return v;
}

UserDemographics demo(const std::string& user, GenderVerdict g) { return {user, g, 3, 1.0}; }

HappinessIndex hi(const std::string& user, double v) { return {user, StudyWindow(1, 2), v, 3}; }

// Users laid out to reproduce the published gender x ownership partition.
void table2_fixture(std::vector<OwnershipVerdict>& vs, std::vector<UserDemographics>& ds) {
  int id = 0;
  const auto add = [&](GenderVerdict g, bool owner, int n) {
    for (int i = 0; i < n; ++i) {
      const auto user = "u" + std::to_string(id++);
      vs.push_back(verdict(user, owner));
      ds.push_back(demo(user, g));
    }
  };
  add(GenderVerdict::male, true, 439);
  add(GenderVerdict::male, false, 909);
  add(GenderVerdict::female, true, 543);
  add(GenderVerdict::female, false, 1014);
}

TEST(PartitionUsers, ReproducesPublishedTable) {
  std::vector<OwnershipVerdict> vs;
  std::vector<UserDemographics> ds;
  table2_fixture(vs, ds);
  const auto p = partition_users(vs, ds);
  EXPECT_EQ(p.at(GenderVerdict::male, OwnershipStatus::owner), 439u);
  EXPECT_EQ(p.at(GenderVerdict::male, OwnershipStatus::non_owner), 909u);
  EXPECT_EQ(p.at(GenderVerdict::female, OwnershipStatus::owner), 543u);
  EXPECT_EQ(p.at(GenderVerdict::female, OwnershipStatus::non_owner), 1014u);
  EXPECT_EQ(p.gender_total(GenderVerdict::male), 1348u);
  EXPECT_EQ(p.gender_total(GenderVerdict::female), 1557u);
  EXPECT_EQ(p.ownership_total(OwnershipStatus::owner), 982u);
  EXPECT_EQ(p.ownership_total(OwnershipStatus::non_owner), 1923u);
  EXPECT_EQ(p.grand_total(), 2905u);
}

TEST(PartitionUsers, EmptyAndExclusions) {
  const auto empty = partition_users({}, {});
  EXPECT_EQ(empty.grand_total(), 0u);
  const std::vector<OwnershipVerdict> vs = {verdict("a", true), verdict("b", false), verdict("c", true)};
  const std::vector<UserDemographics> ds = {demo("a", GenderVerdict::unknown), demo("b", GenderVerdict::male)};
  const auto p = partition_users(vs, ds);
  EXPECT_EQ(p.grand_total(), 1u);
  EXPECT_EQ(p.unknown_gender, 1u);
  EXPECT_EQ(p.missing_demographics, 1u);
}

TEST(PartitionUsers, SyntheticOwnerTotalWithinBinomialInterval) {
  // Two-sided 95% interval of Binomial(2905, 0.338).
  const boost::math::binomial_distribution<> b(2905, 0.338);
  const double lo = boost::math::quantile(b, 0.025), hi = boost::math::quantile(b, 0.975);
  EXPECT_LE(lo, 982.0);
  EXPECT_GE(hi, 982.0);

  synth::SynthConfig config;
  config.n_users = 2905;
  config.seed = 3;
  config.pet_label_noise = synth::identity_confusion();
  const auto corpus = synth::generate_corpus(config);
  Corpus c;
  for (const auto& p : corpus.posts) c.add(p);
  PipelineConfig pc;
  const auto r = run_pipeline(c, corpus.annotations, pc);
  const double owners = static_cast<double>(r.report.partition.ownership_total(OwnershipStatus::owner));
  EXPECT_GE(owners, lo);
  EXPECT_LE(owners, hi);
}

TEST(BuildHistogram, HandBinning) {
  const std::vector<double> v = {5, 15, 15, 95};
  const auto h = build_histogram(v);
  ASSERT_EQ(h.bins(), 10u);
  EXPECT_EQ(h.counts[0], 1u);
  EXPECT_EQ(h.counts[1], 2u);
  EXPECT_EQ(h.counts[9], 1u);
  EXPECT_DOUBLE_EQ(h.proportions[0], 0.25);
  EXPECT_DOUBLE_EQ(h.proportions[1], 0.5);
  EXPECT_DOUBLE_EQ(h.proportions[9], 0.25);
}

TEST(BuildHistogram, EdgesAndErrors) {
  const std::vector<double> top = {100.0, 0.0, 10.0, 99.999};
  const auto h = build_histogram(top);
  EXPECT_EQ(h.counts[9], 2u);
  EXPECT_EQ(h.counts[0], 1u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.bin_hi(9), 100.0);

  const auto empty = build_histogram({});
  EXPECT_FALSE(empty.normalized());
  EXPECT_EQ(empty.total, 0u);
  for (double p : empty.proportions) EXPECT_EQ(p, 0.0);

  const std::vector<double> bad = {101.0};
  EXPECT_THROW(build_histogram(bad), ValidationError);
  const std::vector<double> neg = {-0.1};
  EXPECT_THROW(build_histogram(neg), ValidationError);
  EXPECT_THROW(build_histogram({}, 0.0), ValidationError);
  EXPECT_EQ(build_histogram({}, 20.0).bins(), 5u);
  EXPECT_EQ(build_histogram({}, 30.0).bins(), 4u);
}

TEST(BuildHistogram, ProportionsSumToOne) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(1 + gen() % 3000);
    for (auto& x : v) x = u(gen);
    const auto h = build_histogram(v);
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < h.bins(); ++i) {
      s += h.proportions[i];
      n += h.counts[i];
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
    EXPECT_EQ(n, v.size());
  }
}

TEST(ChiSquare, IdenticalRowsGiveZero) {
  const auto r = chi_square_independence({{10, 20, 30}, {10, 20, 30}});
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.df, 2);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(ChiSquare, HandComputedTwoByTwo) {
  // E = 15 in every cell: 4 * 25 / 15 = 20/3. Tail from scipy.stats.chi2.sf.
  const auto r = chi_square_independence({{10, 20}, {20, 10}});
  EXPECT_NEAR(r.statistic, 20.0 / 3.0, 1e-12);
  EXPECT_EQ(r.df, 1);
  EXPECT_NEAR(r.p_value, 0.009823274507519235, 1e-12);
}

TEST(ChiSquare, ZeroColumnsDroppedAndDegenerateRejected) {
  const auto r = chi_square_independence({{0, 10, 0, 20}, {0, 20, 0, 10}});
  EXPECT_EQ(r.dropped_bins, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(r.df, 1);
  EXPECT_NEAR(r.statistic, 20.0 / 3.0, 1e-12);
  EXPECT_THROW(chi_square_independence({{0, 5}, {0, 7}}), DegenerateTableError);
  EXPECT_THROW(chi_square_independence({{1, 5}, {0, 0}}), DegenerateTableError);
  EXPECT_THROW(chi_square_independence({{1, 5}}), DegenerateTableError);
  EXPECT_THROW(chi_square_independence({{1, 5}, {1}}), ValidationError);
}

TEST(ChiSquare, PoolingMergesSparseColumns) {
  const ContingencyTable t = {{1, 2, 30, 40, 1}, {0, 3, 35, 30, 2}};
  const auto plain = chi_square_independence(t);
  EXPECT_EQ(plain.df, 4);
  const auto pooled = chi_square_independence(t, {5.0});
  EXPECT_LT(pooled.df, plain.df);
  std::size_t covered = 0;
  for (const auto& g : pooled.columns) covered += g.size();
  EXPECT_EQ(covered, 5u);
  // Recompute the expected counts of the pooled table by hand.
  const double n = 144, r0 = 74, r1 = 70;
  for (const auto& g : pooled.columns) {
    double col = 0;
    for (auto c : g) col += t[0][c] + t[1][c];
    EXPECT_GE(std::min(r0, r1) * col / n, 5.0);
  }
}

TEST(ChiSquare, RowSwapAndScalingProperties) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + gen() % 9;
    ContingencyTable t(2, std::vector<double>(k));
    for (auto& row : t) {
      for (auto& v : row) v = static_cast<double>(gen() % 30);
    }
    ChiSquareResult r;
    try {
      r = chi_square_independence(t);
    } catch (const DegenerateTableError&) {
      continue;
    }
    const auto swapped = chi_square_independence({t[1], t[0]});
    EXPECT_NEAR(swapped.statistic, r.statistic, 1e-9 * std::max(1.0, r.statistic));
    const double c = 1 + static_cast<double>(gen() % 5);
    ContingencyTable scaled = t;
    for (auto& row : scaled) {
      for (auto& v : row) v *= c;
    }
    const auto rs = chi_square_independence(scaled);
    EXPECT_NEAR(rs.statistic, c * r.statistic, 1e-9 * std::max(1.0, c * r.statistic));
    EXPECT_LE(rs.p_value, r.p_value + 1e-15);
  }
}

TEST(ChiSquare, PaperStatisticTailIsFarBelowDisplayFloor) {
  EXPECT_LT(chi_square_sf(84.27, 9), 1e-13);
  EXPECT_EQ(format_p_value(chi_square_sf(84.27, 9)), "p < 0.0001");
  EXPECT_EQ(format_p_value(0.009823274507519235), "p = 0.0098");
}

TEST(CohortReport, SingleUserCohortsSkipTests) {
  const std::vector<OwnershipVerdict> vs = {verdict("a", true), verdict("b", false)};
  const std::vector<UserDemographics> ds = {demo("a", GenderVerdict::male), demo("b", GenderVerdict::female)};
  const std::vector<HappinessIndex> hs = {hi("a", 50), hi("b", 20)};
  const auto r = cohort_report(partition_users(vs, ds), hs, vs, ds);
  ASSERT_EQ(r.comparisons.size(), 3u);
  for (const auto& c : r.comparisons) {
    EXPECT_FALSE(c.result) << c.name;
    EXPECT_FALSE(c.diagnostic.empty());
  }
  EXPECT_TRUE(r.histogram("male_non_owners")->degenerate);
  EXPECT_FALSE(r.histogram("all_owners")->degenerate);
}

TEST(CohortReport, CohortsAndExclusions) {
  std::vector<OwnershipVerdict> vs;
  std::vector<UserDemographics> ds;
  std::vector<HappinessIndex> hs;
  for (int i = 0; i < 40; ++i) {
    const auto u = "u" + std::to_string(i);
    vs.push_back(verdict(u, i % 2 == 0));
    ds.push_back(demo(u, i % 4 < 2 ? GenderVerdict::male : GenderVerdict::female));
    hs.push_back(hi(u, i % 2 == 0 ? 65.0 + i % 7 : 25.0 + i % 9));
  }
  vs.push_back(verdict("nohi", true));
  ds.push_back(demo("nohi", GenderVerdict::male));
  vs.push_back(verdict("unk", false));
  ds.push_back(demo("unk", GenderVerdict::unknown));
  hs.push_back(hi("unk", 30));
  hs.push_back(hi("orphan", 30));
  const auto r = cohort_report(partition_users(vs, ds), hs, vs, ds);
  EXPECT_EQ(r.histogram("all_owners")->histogram.total, 20u);
  EXPECT_EQ(r.histogram("all_non_owners")->histogram.total, 21u);
  EXPECT_EQ(r.histogram("male")->histogram.total, 20u);
  EXPECT_EQ(r.histogram("female_owners")->histogram.total, 10u);
  EXPECT_EQ(r.exclusions.no_happiness_index, 1u);
  EXPECT_EQ(r.exclusions.unknown_gender, 1u);
  EXPECT_EQ(r.exclusions.orphan_records, 1u);
  const auto* c = r.comparison("owners_vs_non_owners");
  ASSERT_TRUE(c && c->result);
  EXPECT_LT(c->result->p_value, 1e-6);

  const auto j = to_json(r);
  EXPECT_EQ(j["partition"]["male"]["total"], 21);
  EXPECT_EQ(j["tests"].size(), 3u);
  EXPECT_EQ(j["tests"][0]["p_display"], "p < 0.0001");
}

TEST(CohortReport, CsvExport) {
  const std::vector<OwnershipVerdict> vs = {verdict("a", true), verdict("b", false)};
  const std::vector<UserDemographics> ds = {demo("a", GenderVerdict::male), demo("b", GenderVerdict::female)};
  const std::vector<HappinessIndex> hs = {hi("a", 50), hi("b", 100)};
  const auto r = cohort_report(partition_users(vs, ds), hs, vs, ds);
  const auto dir = std::filesystem::temp_directory_path() / "petmood_csv_test";
  std::filesystem::remove_all(dir);
  write_histogram_csvs(r, dir);
  std::ifstream in(dir / "all_non_owners.csv");
  std::string header, line, last;
  std::getline(in, header);
  EXPECT_EQ(header, "bin_lo,bin_hi,count,proportion");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 10);
  EXPECT_EQ(last, "90.0,100.0,1,1.0");
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator()), 8);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace petmood::stats
