#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "petmood/pipeline.hpp"
#include "petmood/settings.hpp"
#include "petmood/synthgen.hpp"
#include "petmood/version.hpp"

namespace fs = std::filesystem;
using namespace petmood;

namespace {

struct Context {
  SettingMap flags;
  std::string settings_path;

  PipelineConfig config() const {
    const SettingMap file = settings_path.empty() ? SettingMap{} : read_settings_file(settings_path);
    return resolve_config(flags, process_env, file);
  }
};

void add_setting(CLI::App* sub, Context& ctx, const std::string& flag, const std::string& key,
                 const std::string& help) {
  sub->add_option_function<std::string>(flag, [&ctx, key](const std::string& v) { ctx.flags[key] = v; }, help);
}

void add_corpus_settings(CLI::App* sub, Context& ctx) {
  sub->add_flag_callback("--strict", [&ctx] { ctx.flags["strict"] = "true"; },
                         "fail on the first malformed record instead of skipping it");
  add_setting(sub, ctx, "--window", "window", "study window as <iso8601>/<iso8601>, half-open");
  add_setting(sub, ctx, "--min-selfies", "min_selfies", "selfies a user needs to be analyzed [3]");
  add_setting(sub, ctx, "--min-area-ratio", "min_area_ratio", "face area a selfie must exceed [0.10]");
  add_setting(sub, ctx, "--threads", "threads", "worker threads, 0 for all cores");
}

void add_annotator_settings(CLI::App* sub, Context& ctx) {
  add_setting(sub, ctx, "--annotator-url", "annotator_url", "fetch annotations from this service (env ANNOTATOR_URL)");
  add_setting(sub, ctx, "--batch-size", "batch_size", "image refs per request [64]");
  add_setting(sub, ctx, "--max-attempts", "max_attempts", "attempts per batch [3]");
}

void print_log(const std::vector<std::string>& log) {
  for (const auto& line : log) std::cerr << line << '\n';
}

void print_skipped(const stats::Report& r) {
  for (const auto& c : r.comparisons) {
    if (!c.result) std::cerr << c.name << ": " << c.diagnostic << '\n';
  }
}

struct Inputs {
  IngestResult posts;
  AnnotationStore store;
  PreparedCorpus prepared;
};

Inputs load_inputs(const std::string& posts_path, const std::string& annotations_path, const PipelineConfig& config) {
  Inputs in{acquire_posts(posts_path, config), AnnotationStore(Provenance::file), {}};
  std::vector<std::string> log;
  in.store = acquire_annotations(annotations_path, in.posts.corpus, config, &log);
  print_log(log);
  in.prepared = prepare(in.posts.corpus, in.store, config);
  return in;
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
}

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::file: return "file";
    case Provenance::remote: return "remote";
    case Provenance::synthetic: return "synthetic";
  }
  return "file";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pet ownership and happiness analysis of social-media timelines"};
  app.name("petmood");
  app.set_version_flag("--version", std::string("petmood ") + std::string(kVersion));
  app.require_subcommand(1);

  Context ctx;
  app.add_option("--settings", ctx.settings_path, "key = value file with default tunables")
      ->envname("PETMOOD_SETTINGS");

  std::string posts, annotations, out, out_dir, csv_dir, verdicts, hi, demographics, config_path, failures,
      series_out;
  std::optional<std::uint64_t> seed;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a posts file and summarize it");
  ingest->add_option("--posts", posts, "posts JSONL")->required();
  ingest->add_option("--out", out, "write accepted in-window posts here, in timeline order");
  add_corpus_settings(ingest, ctx);
  ingest->callback([&] {
    const auto config = ctx.config();
    const auto r = acquire_posts(posts, config);
    const auto timelines = build_timelines(r.corpus, config.window);
    std::size_t in_window = 0;
    for (const auto& [_, tl] : timelines) in_window += tl.posts.size();
    for (const auto& d : r.report.malformed) std::cerr << posts << ":" << d.line << ": malformed: " << d.message << '\n';
    for (const auto& d : r.report.duplicates) std::cerr << posts << ":" << d.line << ": " << d.message << '\n';
    if (!out.empty()) {
      ensure_parent(out);
      auto os = open_output(out);
      for (const auto& [_, tl] : timelines) {
        for (const auto& p : tl.posts) os << post_to_json(p).dump() << '\n';
      }
    }
    auto summary = r.report.to_json();
    summary["window"] = format_window(config.window);
    summary["users"] = timelines.size();
    summary["posts_in_window"] = in_window;
    std::cout << summary.dump(2) << '\n';
  });

  // annotate
  auto* annotate = app.add_subcommand("annotate", "validate an annotation file or fetch annotations remotely");
  annotate->add_option("--annotations", annotations, "annotation JSONL to validate");
  annotate->add_option("--posts", posts, "posts whose images are fetched (remote mode)");
  annotate->add_option("--out", out, "write the validated store here");
  annotate->add_option("--failures", failures, "failure manifest path [<out>.failures.jsonl]");
  annotate->add_flag_callback("--strict", [&ctx] { ctx.flags["strict"] = "true"; }, "reject the file on any bad record");
  add_setting(annotate, ctx, "--window", "window", "only fetch images posted inside this window");
  add_annotator_settings(annotate, ctx);
  annotate->callback([&] {
    const auto config = ctx.config();
    ordered_json summary;
    int code = 0;
    if (!config.annotator_url.empty()) {
      if (posts.empty()) throw ValidationError("--posts is required when fetching from an annotator");
      const auto r = acquire_posts(posts, config);
      auto fetched = fetch_annotations(image_refs_of(r.corpus, config.window), config.annotator_url, config.fetch);
      print_log(fetched.retry_log);
      if (!out.empty()) {
        ensure_parent(out);
        auto os = open_output(out);
        write_annotations(os, fetched.store);
      }
      const std::string manifest = !failures.empty() ? failures : (!out.empty() ? out + ".failures.jsonl" : "");
      if (!manifest.empty() && !fetched.complete()) {
        write_jsonl_file(manifest, fetched.failures, [](const auto& f) { return to_json(f); });
      }
      summary["provenance"] = provenance_name(fetched.store.provenance());
      summary["annotations"] = fetched.store.size();
      summary["failures"] = fetched.failures.size();
      summary["retries"] = fetched.retries;
      if (!fetched.complete()) code = static_cast<int>(ExitCode::remote);
    } else {
      if (annotations.empty()) throw ValidationError("either --annotations or --annotator-url is required");
      if (!fs::exists(annotations)) throw IoError("annotations file not found: '" + annotations + "'");
      const auto loaded = load_annotations_file(annotations, config.ingest_mode);
      for (const auto& d : loaded.rejected) {
        std::cerr << annotations << ":" << d.line << ": rejected: " << d.message << '\n';
      }
      if (!out.empty()) {
        ensure_parent(out);
        auto os = open_output(out);
        write_annotations(os, loaded.store);
      }
      summary["provenance"] = provenance_name(loaded.store.provenance());
      summary["annotations"] = loaded.store.size();
      summary["rejected"] = loaded.rejected.size();
    }
    std::cout << summary.dump(2) << '\n';
    if (code != 0) throw RemoteError(std::to_string(summary["failures"].get<std::size_t>()) + " image(s) not annotated");
  });

  // owners
  auto* owners = app.add_subcommand("owners", "classify users as pet owners");
  owners->add_option("--posts", posts, "posts JSONL")->required();
  owners->add_option("--annotations", annotations, "annotation JSONL");
  owners->add_option("--out", out, "verdicts JSONL")->required();
  add_setting(owners, ctx, "--min-gap-days", "min_gap_days", "days a pet type must span [7]");
  add_setting(owners, ctx, "--pet-conf", "pet_conf", "minimum pet label confidence [0.5]");
  add_corpus_settings(owners, ctx);
  add_annotator_settings(owners, ctx);
  owners->callback([&] {
    const auto config = ctx.config();
    const auto in = load_inputs(posts, annotations, config);
    ensure_parent(out);
    write_jsonl_file(out, compute_verdicts(in.prepared, in.store, config), [](const auto& v) { return to_json(v); });
  });

  // happiness
  auto* happiness = app.add_subcommand("happiness", "per-user happiness index");
  happiness->add_option("--posts", posts, "posts JSONL")->required();
  happiness->add_option("--annotations", annotations, "annotation JSONL");
  happiness->add_option("--out", out, "happiness JSONL")->required();
  happiness->add_option("--series-out", series_out, "sub-window series JSONL [hi_series.jsonl beside --out]");
  add_setting(happiness, ctx, "--granularity-days", "granularity_days", "also compute per sub-window of this length");
  add_corpus_settings(happiness, ctx);
  add_annotator_settings(happiness, ctx);
  happiness->callback([&] {
    const auto config = ctx.config();
    const auto in = load_inputs(posts, annotations, config);
    const auto h = compute_happiness(in.prepared, in.store, config);
    for (const auto& u : h.undefined) std::cerr << "no face images in window: " << u << '\n';
    ensure_parent(out);
    write_jsonl_file(out, h.indices, [](const auto& x) { return to_json(x); });
    if (config.granularity_days) {
      const auto path = series_out.empty() ? (fs::path(out).parent_path() / "hi_series.jsonl").string() : series_out;
      ensure_parent(path);
      write_jsonl_file(path, h.series, [](const auto& x) { return to_json(x, true); });
    }
  });

  // demographics
  auto* demo = app.add_subcommand("demographics", "per-user gender from selfies");
  demo->add_option("--posts", posts, "posts JSONL")->required();
  demo->add_option("--annotations", annotations, "annotation JSONL");
  demo->add_option("--out", out, "demographics JSONL")->required();
  add_corpus_settings(demo, ctx);
  add_annotator_settings(demo, ctx);
  demo->callback([&] {
    const auto config = ctx.config();
    const auto in = load_inputs(posts, annotations, config);
    ensure_parent(out);
    write_jsonl_file(out, compute_demographics(in.prepared, in.store, config), [](const auto& d) { return to_json(d); });
  });

  // report
  auto* report = app.add_subcommand("report", "cohort histograms and chi-square tests");
  report->add_option("--verdicts", verdicts, "verdicts JSONL")->required();
  report->add_option("--hi", hi, "happiness JSONL")->required();
  report->add_option("--demographics", demographics, "demographics JSONL")->required();
  report->add_option("--out", out, "report JSON")->required();
  report->add_option("--csv-dir", csv_dir, "write one CSV per histogram here");
  add_setting(report, ctx, "--bin-width", "bin_width", "histogram bin width [10]");
  add_setting(report, ctx, "--pool-min-expected", "pool_min_expected", "pool sparse bins below this expected count [0]");
  report->callback([&] {
    const auto config = ctx.config();
    const auto v = read_jsonl_file<OwnershipVerdict>(verdicts, verdict_from_json);
    const auto h = read_jsonl_file<HappinessIndex>(hi, happiness_from_json);
    const auto d = read_jsonl_file<UserDemographics>(demographics, demographics_from_json);
    const auto r = compute_report(v, h, d, config);
    print_skipped(r);
    ensure_parent(out);
    write_report_file(out, r);
    if (!csv_dir.empty()) stats::write_histogram_csvs(r, csv_dir);
  });

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a labelled synthetic corpus");
  synth_cmd->add_option("--config", config_path, "key = value generator config")->required();
  synth_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  synth_cmd->add_option("--seed", seed, "override the config seed");
  synth_cmd->callback([&] {
    if (!fs::exists(config_path)) throw IoError("config file not found: '" + config_path + "'");
    auto config = synth::load_config_file(config_path);
    if (seed) config.seed = *seed;
    const auto corpus = synth::generate_corpus(config);
    const auto files = synth::write_corpus(corpus, out_dir);
    ordered_json summary;
    summary["seed"] = config.seed;
    summary["users"] = corpus.truth.size();
    summary["posts"] = corpus.posts.size();
    summary["annotations"] = corpus.annotations.size();
    summary["files"] = {files.posts.string(), files.annotations.string(), files.ground_truth.string()};
    std::cout << summary.dump(2) << '\n';
  });

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "run every stage and write a run manifest");
  pipeline->add_option("--posts", posts, "posts JSONL")->required();
  pipeline->add_option("--annotations", annotations, "annotation JSONL");
  pipeline->add_option("--out-dir", out_dir, "output directory")->required();
  pipeline->add_option("--csv-dir", csv_dir, "write one CSV per histogram here");
  add_setting(pipeline, ctx, "--min-gap-days", "min_gap_days", "days a pet type must span [7]");
  add_setting(pipeline, ctx, "--pet-conf", "pet_conf", "minimum pet label confidence [0.5]");
  add_setting(pipeline, ctx, "--granularity-days", "granularity_days", "also compute per sub-window of this length");
  add_setting(pipeline, ctx, "--bin-width", "bin_width", "histogram bin width [10]");
  add_setting(pipeline, ctx, "--pool-min-expected", "pool_min_expected", "pool sparse bins below this expected count [0]");
  add_corpus_settings(pipeline, ctx);
  add_annotator_settings(pipeline, ctx);
  pipeline->callback([&] {
    const auto config = ctx.config();
    std::vector<std::string> log;
    std::optional<fs::path> csv;
    if (!csv_dir.empty()) csv = fs::path(csv_dir);
    try {
      const auto r = run_pipeline_files(config, posts, annotations, out_dir, csv, &log);
      print_log(log);
      print_skipped(r.report);
    } catch (...) {
      print_log(log);
      throw;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::validation);
  } catch (const petmood::Error& e) {
    std::cerr << "petmood: error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "petmood: error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::validation);
  }
  return 0;
}
