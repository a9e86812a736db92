#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "petmood/digest.hpp"
#include "petmood/synthgen.hpp"

namespace petmood::synth {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthConfig small(std::uint64_t seed = 1, std::size_t users = 200) {
  SynthConfig c;
  c.seed = seed;
  c.n_users = users;
  return c;
}

TEST(SynthConfig, DefaultsMatchPublishedMixes) {
  const SynthConfig c;
  EXPECT_DOUBLE_EQ(c.owner_fraction, 0.338);
  EXPECT_DOUBLE_EQ(c.gender_mix, 1557.0 / 2905.0);
  const auto m = reference_cnn_confusion();
  EXPECT_DOUBLE_EQ(m[0][0], 0.962);
  EXPECT_DOUBLE_EQ(m[1][1], 0.977);
  EXPECT_DOUBLE_EQ(m[2][2], 0.990);
  for (const auto& row : m) EXPECT_NEAR(row[0] + row[1] + row[2], 1.0, 1e-12);
}

TEST(SynthConfig, ParsesKeyValueFile) {
  std::istringstream in(R"(# comment
seed = 42
n_users = 10
owner_fraction = 0.5   # trailing comment
smile_mean.male_owner = 60
smile_sd.female_non_owner = 3
pet_label_noise = identity
window = 2015-06-01/2016-01-01
exact_fractions = true
)");
  const auto c = parse_config(in);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.n_users, 10u);
  EXPECT_DOUBLE_EQ(c.owner_fraction, 0.5);
  EXPECT_DOUBLE_EQ(c.smile_mean[0], 60);
  EXPECT_DOUBLE_EQ(c.smile_sd[3], 3);
  EXPECT_EQ(c.pet_label_noise, identity_confusion());
  EXPECT_TRUE(c.exact_fractions);
}

TEST(SynthConfig, RejectsBadValues) {
  const auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
  };
  EXPECT_THROW(parse("owner_fraction = 1.5\n"), ValidationError);
  EXPECT_THROW(parse("colour = blue\n"), ValidationError);
  EXPECT_THROW(parse("n_users = ten\n"), ValidationError);
  EXPECT_THROW(parse("pet_label_noise = 1 0 0 0 1 0 0 0 0.5\n"), ValidationError);
  EXPECT_THROW(parse("posts_min = 5\nposts_max = 6\n"), ValidationError);  // infeasible
  EXPECT_THROW(parse("window = 2015-06-01/2015-06-20\n"), ValidationError);
  EXPECT_NO_THROW(parse("pet_label_noise = 0.9,0.05,0.05, 0,1,0, 0,0,1\n"));
}

TEST(GenerateCorpus, SameSeedSameBytes) {
  const auto dir = std::filesystem::temp_directory_path() / "petmood_synth_test";
  std::filesystem::remove_all(dir);
  const auto a = write_corpus(generate_corpus(small(9)), dir / "a");
  const auto b = write_corpus(generate_corpus(small(9)), dir / "b");
  const auto c = write_corpus(generate_corpus(small(10)), dir / "c");
  EXPECT_EQ(sha256_file(a.posts.string()).sha256, sha256_file(b.posts.string()).sha256);
  EXPECT_EQ(slurp(a.annotations), slurp(b.annotations));
  EXPECT_EQ(slurp(a.ground_truth), slurp(b.ground_truth));
  EXPECT_NE(slurp(a.posts), slurp(c.posts));
  std::filesystem::remove_all(dir);
}

TEST(GenerateCorpus, StructuralGuarantees) {
  auto config = small(5, 400);
  config.pet_label_noise = identity_confusion();
  const auto corpus = generate_corpus(config);
  ASSERT_EQ(corpus.truth.size(), 400u);
  std::map<std::string, std::vector<const PostRecord*>> by_user;
  for (const auto& p : corpus.posts) {
    by_user[p.user_id].push_back(&p);
    EXPECT_TRUE(config.window.contains(p.timestamp));
  }
  for (const auto& gt : corpus.truth) {
    const auto& posts = by_user.at(gt.user_id);
    EXPECT_GE(static_cast<int>(posts.size()), config.posts_min);
    EXPECT_LE(static_cast<int>(posts.size()), config.posts_max);
    int selfies = 0;
    std::vector<PetPost> pets;
    for (const auto* p : posts) {
      const auto* a = corpus.annotations.find(p->image_ref);
      ASSERT_NE(a, nullptr);
      if (is_selfie(*a)) {
        ++selfies;
        EXPECT_EQ(a->faces[0].gender, gt.gender);
      }
      if (a->pet.klass != PetClass::other) pets.push_back({p->post_id, p->timestamp, a->pet.klass, a->pet.confidence});
    }
    EXPECT_GE(selfies, config.selfies_min);
    std::sort(pets.begin(), pets.end(), [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
    const auto v = classify_owner(pets);
    EXPECT_EQ(v.is_owner(), gt.is_owner) << gt.user_id;
    if (gt.is_owner) {
      EXPECT_EQ(v.pet_type, gt.pet_type);
    }
  }
}

TEST(GenerateCorpus, OwnerFractionWithinBinomialBand) {
  int inside = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto config = small(seed, 2000);
    const auto corpus = generate_corpus(config);
    double owners = 0;
    for (const auto& gt : corpus.truth) owners += gt.is_owner;
    const double sd = std::sqrt(2000 * 0.338 * 0.662);
    if (std::fabs(owners - 2000 * 0.338) <= 1.96 * sd) ++inside;
  }
  EXPECT_GE(inside, 16);  // ~19 expected; 16 is far in the lower tail
}

TEST(GenerateCorpus, ExactFractions) {
  auto config = small(2, 1000);
  config.exact_fractions = true;
  config.owner_fraction = 0.5;
  const auto corpus = generate_corpus(config);
  std::size_t owners = 0;
  for (const auto& gt : corpus.truth) owners += gt.is_owner;
  EXPECT_EQ(owners, 500u);
}

TEST(GenerateCorpus, LabelNoiseMatchesConfusionMatrix) {
  auto config = small(12, 1500);
  const auto corpus = generate_corpus(config);
  std::array<std::array<double, 3>, 3> counts{};
  for (const auto& [ref, a] : corpus.annotations) {
    counts[static_cast<std::size_t>(corpus.true_pet.at(ref))][static_cast<std::size_t>(a.pet.klass)] += 1;
  }
  const auto& m = config.pet_label_noise;
  for (std::size_t actual = 0; actual < 3; ++actual) {
    const double n = counts[actual][0] + counts[actual][1] + counts[actual][2];
    for (std::size_t pred = 0; pred < 3; ++pred) {
      const double p = m[actual][pred];
      const double sigma = std::sqrt(n * p * (1 - p));
      EXPECT_LE(std::fabs(counts[actual][pred] - n * p), 3 * sigma + 1e-9)
          << "actual " << actual << " predicted " << pred << " n=" << n;
    }
  }
  const double other_labels = counts[2][0] + counts[2][1] + counts[2][2];
  EXPECT_GE(other_labels, 10000.0);
}

TEST(GenerateCorpus, InfeasibleConfigRejected) {
  auto config = small();
  config.posts_min = 4;
  config.posts_max = 4;
  EXPECT_THROW(generate_corpus(config), ValidationError);
}

TEST(Rng, PortableSequence) {
  // mt19937_64 is fully specified; its 10000th output is fixed by the standard.
  std::mt19937_64 engine;
  engine.discard(9999);
  EXPECT_EQ(engine(), 9981545732273789042ULL);
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(0, 1), b.normal(0, 1));
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double t = r.truncated_normal(95, 20, 0, 100);
    ASSERT_GE(t, 0.0);
    ASSERT_LE(t, 100.0);
  }
}

}  // namespace
}  // namespace petmood::synth
