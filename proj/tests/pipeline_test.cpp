#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "petmood/pipeline.hpp"
#include "petmood/settings.hpp"
#include "petmood/synthgen.hpp"

namespace petmood {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class PipelineFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("petmood_pipeline_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    synth::SynthConfig config;
    config.seed = 77;
    config.n_users = 300;
    config.pet_label_noise = synth::identity_confusion();
    corpus_ = synth::generate_corpus(config);
    files_ = synth::write_corpus(corpus_, dir_ / "in");
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  synth::SynthCorpus corpus_;
  synth::SynthFiles files_;
};

TEST_F(PipelineFixture, RecoversNoiselessGroundTruth) {
  Corpus c;
  for (const auto& p : corpus_.posts) c.add(p);
  const auto r = run_pipeline(c, corpus_.annotations, PipelineConfig{});
  ASSERT_EQ(r.verdicts.size(), corpus_.truth.size());
  std::map<std::string, const synth::GroundTruth*> truth;
  for (const auto& gt : corpus_.truth) truth[gt.user_id] = &gt;
  for (const auto& v : r.verdicts) {
    EXPECT_EQ(v.is_owner(), truth.at(v.user_id)->is_owner);
    if (v.is_owner()) {
      EXPECT_EQ(v.pet_type, truth.at(v.user_id)->pet_type);
    }
  }
  for (const auto& d : r.demographics) {
    EXPECT_EQ(to_string(d.gender), to_string(truth.at(d.user_id)->gender));
  }
  EXPECT_TRUE(r.happiness.undefined.empty());
}

TEST_F(PipelineFixture, EqualsCompositionOfStages) {
  PipelineConfig config;
  run_pipeline_files(config, files_.posts.string(), files_.annotations.string(), dir_ / "out");

  // The same stages, each starting from files like the CLI subcommands do.
  const auto ingest = acquire_posts(files_.posts.string(), config);
  const auto store = acquire_annotations(files_.annotations.string(), ingest.corpus, config);
  const auto prepared = prepare(ingest.corpus, store, config);
  const auto step = dir_ / "steps";
  fs::create_directories(step);
  write_jsonl_file((step / "v.jsonl").string(), compute_verdicts(prepared, store, config),
                   [](const auto& v) { return to_json(v); });
  write_jsonl_file((step / "h.jsonl").string(), compute_happiness(prepared, store, config).indices,
                   [](const auto& h) { return to_json(h); });
  write_jsonl_file((step / "d.jsonl").string(), compute_demographics(prepared, store, config),
                   [](const auto& d) { return to_json(d); });
  const auto vs = read_jsonl_file<OwnershipVerdict>((step / "v.jsonl").string(), verdict_from_json);
  const auto hs = read_jsonl_file<HappinessIndex>((step / "h.jsonl").string(), happiness_from_json);
  const auto ds = read_jsonl_file<UserDemographics>((step / "d.jsonl").string(), demographics_from_json);
  write_report_file((step / "report.json").string(), compute_report(vs, hs, ds, config));

  EXPECT_EQ(slurp(step / "v.jsonl"), slurp(dir_ / "out" / "verdicts.jsonl"));
  EXPECT_EQ(slurp(step / "h.jsonl"), slurp(dir_ / "out" / "hi.jsonl"));
  EXPECT_EQ(slurp(step / "d.jsonl"), slurp(dir_ / "out" / "demographics.jsonl"));
  EXPECT_EQ(slurp(step / "report.json"), slurp(dir_ / "out" / "report.json"));
}

TEST_F(PipelineFixture, DeterministicReportsAndManifestDigests) {
  PipelineConfig config;
  config.threads = 3;
  run_pipeline_files(config, files_.posts.string(), files_.annotations.string(), dir_ / "a");
  config.threads = 1;
  run_pipeline_files(config, files_.posts.string(), files_.annotations.string(), dir_ / "b");
  EXPECT_EQ(slurp(dir_ / "a" / "report.json"), slurp(dir_ / "b" / "report.json"));
  const auto ma = json::parse(slurp(dir_ / "a" / "manifest.json"));
  const auto mb = json::parse(slurp(dir_ / "b" / "manifest.json"));
  EXPECT_EQ(ma["inputs"], mb["inputs"]);
  EXPECT_EQ(ma["stages"].size(), 8u);

  // One changed byte in the posts changes that digest only.
  auto text = slurp(files_.posts);
  text[text.find("u0")] = 'v';
  const auto edited = dir_ / "edited_posts.jsonl";
  std::ofstream(edited, std::ios::binary) << text;
  run_pipeline_files(config, edited.string(), files_.annotations.string(), dir_ / "c");
  const auto mc = json::parse(slurp(dir_ / "c" / "manifest.json"));
  EXPECT_NE(mc["inputs"][0]["sha256"], ma["inputs"][0]["sha256"]);
  EXPECT_EQ(mc["inputs"][1]["sha256"], ma["inputs"][1]["sha256"]);
}

TEST_F(PipelineFixture, MissingAnnotationsFileNamesPath) {
  const auto missing = (dir_ / "nope.jsonl").string();
  try {
    run_pipeline_files(PipelineConfig{}, files_.posts.string(), missing, dir_ / "out");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ExitCode::io);
    EXPECT_NE(std::string(e.what()).find(missing), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("stage 'annotate'"), std::string::npos) << e.what();
  }
}

TEST_F(PipelineFixture, GranularSeries) {
  PipelineConfig config;
  config.granularity_days = 30;
  const auto r = run_pipeline_files(config, files_.posts.string(), files_.annotations.string(), dir_ / "out");
  EXPECT_GT(r.happiness.series.size(), r.happiness.indices.size());
  std::ifstream in(dir_ / "out" / "hi_series.jsonl");
  std::string first;
  std::getline(in, first);
  const auto j = json::parse(first);
  EXPECT_TRUE(j.contains("window_start"));
  EXPECT_TRUE(j.contains("window_end"));
}

TEST(PipelineConfig, RejectsOutOfRangeTunables) {
  PipelineConfig c;
  c.pet_conf = 1.2;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.bin_width = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.min_area_ratio = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  EXPECT_EQ(c.min_selfies, 3);
  EXPECT_DOUBLE_EQ(c.min_area_ratio, 0.10);
  EXPECT_DOUBLE_EQ(c.min_gap_days, 7.0);
  EXPECT_DOUBLE_EQ(c.pet_conf, 0.5);
  EXPECT_DOUBLE_EQ(c.bin_width, 10.0);
  EXPECT_EQ(c.fetch.retry.max_attempts, 3);
}

TEST(ParallelMap, OrderAndExceptions) {
  std::vector<int> v(1000);
  for (int i = 0; i < 1000; ++i) v[i] = i;
  const auto out = parallel_map(v, [](int x) { return x * 2; }, 4);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(out[i], 2 * i);
  EXPECT_THROW(parallel_map(v, [](int x) -> int { if (x == 500) throw ValidationError("boom"); return x; }, 4),
               ValidationError);
}

}  // namespace
}  // namespace petmood

namespace petmood {
namespace {

TEST(Settings, FlagsBeatEnvBeatFile) {
  std::istringstream file_text("# defaults for this site\nmin_gap_days = 14\npet_conf = 0.7\nbin_width = 5\n");
  const auto file = read_settings(file_text);
  const EnvLookup env = [](std::string_view name) -> std::optional<std::string> {
    if (name == "PETMOOD_PET_CONF") return "0.8";
    if (name == "PETMOOD_BIN_WIDTH") return "20";
    if (name == "ANNOTATOR_URL") return "http://annotator.local/v1";
    return std::nullopt;
  };
  const SettingMap flags{{"bin_width", "25"}};
  const auto c = resolve_config(flags, env, file);
  EXPECT_EQ(c.min_gap_days, 14.0);
  EXPECT_EQ(c.pet_conf, 0.8);
  EXPECT_EQ(c.bin_width, 25.0);
  EXPECT_EQ(c.annotator_url, "http://annotator.local/v1");
  EXPECT_EQ(c.min_selfies, 3);

  const auto defaults = resolve_config({}, {}, {});
  EXPECT_EQ(defaults.to_json(), PipelineConfig{}.to_json());
}

TEST(Settings, RejectsUnknownKeysAndBadValues) {
  std::istringstream unknown("min_gap = 3\n");
  EXPECT_THROW(read_settings(unknown), ValidationError);
  EXPECT_THROW(resolve_config({{"pet_conf", "1.5"}}, {}, {}), ValidationError);
  EXPECT_THROW(resolve_config({{"min_selfies", "three"}}, {}, {}), ValidationError);
  const EnvLookup env = [](std::string_view name) -> std::optional<std::string> {
    if (name == "PETMOOD_WINDOW") return "2016-01-01/2015-06-01";
    return std::nullopt;
  };
  EXPECT_THROW(resolve_config({}, env, {}), ValidationError);
}

}  // namespace
}  // namespace petmood
