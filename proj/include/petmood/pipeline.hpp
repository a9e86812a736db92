#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "petmood/annotate.hpp"
#include "petmood/corpus.hpp"
#include "petmood/demographics.hpp"
#include "petmood/digest.hpp"
#include "petmood/happiness.hpp"
#include "petmood/ownership.hpp"
#include "petmood/parallel.hpp"
#include "petmood/remote.hpp"
#include "petmood/stats/report.hpp"
#include "petmood/version.hpp"

namespace petmood {

struct PipelineConfig {
  int min_selfies = kDefaultMinSelfies;
  double min_area_ratio = kDefaultMinSelfieArea;
  double min_gap_days = kDefaultMinGapDays;
  double pet_conf = kDefaultPetConfidence;
  double bin_width = stats::kDefaultBinWidth;
  double pool_min_expected = 0.0;
  IngestMode ingest_mode = IngestMode::lenient;
  StudyWindow window = default_study_window();
  std::optional<double> granularity_days;
  std::string annotator_url;
  FetchOptions fetch;
  std::size_t threads = 0;  // 0 = hardware concurrency

  void validate() const {
    if (min_selfies < 0) throw ValidationError("min_selfies must be >= 0");
    if (!(min_area_ratio >= 0 && min_area_ratio < 1)) throw ValidationError("min_area_ratio must be in [0, 1)");
    if (!(min_gap_days >= 0)) throw ValidationError("min_gap_days must be >= 0");
    if (!(pet_conf >= 0 && pet_conf <= 1)) throw ValidationError("pet_conf must be in [0, 1]");
    stats::bin_count(bin_width);
    if (!(pool_min_expected >= 0)) throw ValidationError("pool_min_expected must be >= 0");
    if (granularity_days && !(*granularity_days > 0)) throw ValidationError("granularity must be > 0 days");
    if (fetch.retry.max_attempts < 1) throw ValidationError("retry attempts must be >= 1");
    if (fetch.batch_size == 0) throw ValidationError("batch size must be >= 1");
  }

  ordered_json to_json() const {
    ordered_json j;
    j["min_selfies"] = min_selfies;
    j["min_area_ratio"] = min_area_ratio;
    j["min_gap_days"] = min_gap_days;
    j["pet_conf"] = pet_conf;
    j["bin_width"] = bin_width;
    j["pool_min_expected"] = pool_min_expected;
    j["strict"] = ingest_mode == IngestMode::strict;
    j["window"] = format_window(window);
    j["granularity_days"] = granularity_days ? ordered_json(*granularity_days) : ordered_json(nullptr);
    j["annotator_url"] = annotator_url;
    j["retry"] = {{"max_attempts", fetch.retry.max_attempts},
                  {"initial_backoff_ms", fetch.retry.initial_backoff.count()},
                  {"multiplier", fetch.retry.multiplier},
                  {"max_backoff_ms", fetch.retry.max_backoff.count()}};
    j["batch_size"] = fetch.batch_size;
    return j;
  }
};

// Window-restricted timelines plus the users that pass the selfie minimum.
struct PreparedCorpus {
  TimelineMap timelines;
  std::vector<std::string> eligible;  // sorted
};

inline PreparedCorpus prepare(const Corpus& corpus, const AnnotationStore& store, const PipelineConfig& config) {
  PreparedCorpus p;
  p.timelines = build_timelines(corpus, config.window);
  const auto eligible = filter_eligible_users(p.timelines, store, config.min_selfies, config.min_area_ratio);
  p.eligible.assign(eligible.begin(), eligible.end());
  return p;
}

inline std::vector<OwnershipVerdict> compute_verdicts(const PreparedCorpus& prepared, const AnnotationStore& store,
                                                      const PipelineConfig& config) {
  return parallel_map(
      prepared.eligible,
      [&](const std::string& user) {
        const auto& tl = prepared.timelines.at(user);
        return classify_owner(extract_pet_posts(tl, store, config.pet_conf), config.min_gap_days, user);
      },
      config.threads);
}

struct HappinessOutput {
  std::vector<HappinessIndex> indices;     // full window, users with a defined index
  std::vector<std::string> undefined;      // eligible users without face images
  std::vector<HappinessIndex> series;      // per sub-window, only with granularity
};

inline HappinessOutput compute_happiness(const PreparedCorpus& prepared, const AnnotationStore& store,
                                         const PipelineConfig& config) {
  const auto per_user = parallel_map(
      prepared.eligible,
      [&](const std::string& user) {
        const auto& tl = prepared.timelines.at(user);
        std::pair<std::optional<HappinessIndex>, std::vector<HappinessIndex>> r;
        const auto set = collect_face_images(tl, store, config.window);
        if (!set.empty()) r.first = happiness_index(set);
        if (config.granularity_days) {
          for (const auto& sub : split_window(config.window, *config.granularity_days)) {
            const auto s = collect_face_images(tl, store, sub);
            if (!s.empty()) r.second.push_back(happiness_index(s));
          }
        }
        return r;
      },
      config.threads);
  HappinessOutput out;
  for (std::size_t i = 0; i < per_user.size(); ++i) {
    if (per_user[i].first) {
      out.indices.push_back(*per_user[i].first);
    } else {
      out.undefined.push_back(prepared.eligible[i]);
    }
    out.series.insert(out.series.end(), per_user[i].second.begin(), per_user[i].second.end());
  }
  return out;
}

inline std::vector<UserDemographics> compute_demographics(const PreparedCorpus& prepared,
                                                          const AnnotationStore& store,
                                                          const PipelineConfig& config) {
  return parallel_map(
      prepared.eligible,
      [&](const std::string& user) {
        std::vector<ImageAnnotation> selfies;
        for (const auto& p : prepared.timelines.at(user).posts) {
          const auto* a = store.find(p.image_ref);
          if (a != nullptr && is_selfie(*a, config.min_area_ratio)) selfies.push_back(*a);
        }
        return infer_gender(selfies, user);
      },
      config.threads);
}

inline stats::Report compute_report(std::span<const OwnershipVerdict> verdicts,
                                    std::span<const HappinessIndex> happiness,
                                    std::span<const UserDemographics> demographics, const PipelineConfig& config) {
  const auto partition = stats::partition_users(verdicts, demographics);
  return stats::cohort_report(partition, happiness, verdicts, demographics,
                              stats::ReportOptions{config.bin_width, config.pool_min_expected, 2});
}

struct PipelineResult {
  PreparedCorpus prepared;
  std::vector<OwnershipVerdict> verdicts;
  HappinessOutput happiness;
  std::vector<UserDemographics> demographics;
  stats::Report report;
};

struct StageTiming {
  std::string stage;
  double millis = 0.0;
};

// Runs fn, tagging any failure with the stage name and keeping its exit code.
template <typename Fn>
auto run_stage(const std::string& stage, std::vector<StageTiming>* timings, Fn&& fn) -> decltype(fn()) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto record = [&] {
    if (timings == nullptr) return;
    const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
    timings->push_back({stage, dt.count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record();
    } else {
      auto r = fn();
      record();
      return r;
    }
  } catch (const Error& e) {
    throw Error(e.code(), "stage '" + stage + "': " + e.what());
  } catch (const std::exception& e) {
    throw Error(ExitCode::validation, "stage '" + stage + "': " + e.what());
  }
}

inline PipelineResult run_pipeline(const Corpus& corpus, const AnnotationStore& store, const PipelineConfig& config,
                                   std::vector<StageTiming>* timings = nullptr) {
  config.validate();
  PipelineResult r;
  r.prepared = run_stage("timelines", timings, [&] { return prepare(corpus, store, config); });
  r.verdicts = run_stage("owners", timings, [&] { return compute_verdicts(r.prepared, store, config); });
  r.happiness = run_stage("happiness", timings, [&] { return compute_happiness(r.prepared, store, config); });
  r.demographics = run_stage("demographics", timings, [&] { return compute_demographics(r.prepared, store, config); });
  r.report = run_stage("report", timings, [&] {
    return compute_report(r.verdicts, r.happiness.indices, r.demographics, config);
  });
  return r;
}

// ---------------------------------------------------------------------------
// File-level helpers shared by the CLI subcommands.

template <typename Range, typename ToJson>
void write_jsonl_file(const std::string& path, const Range& records, ToJson&& to_json_fn) {
  auto out = open_output(path);
  for (const auto& r : records) out << to_json_fn(r).dump() << '\n';
  if (!out) throw IoError("write to '" + path + "' failed");
}

template <typename T, typename FromJson>
std::vector<T> read_jsonl_file(const std::string& path, FromJson&& from_json_fn) {
  auto in = open_input(path);
  std::vector<T> out;
  for_each_line(in, [&](std::size_t line_no, const std::string& text) {
    try {
      out.push_back(from_json_fn(json::parse(text)));
    } catch (const json::exception&) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": invalid JSON");
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return out;
}

inline void write_report_file(const std::string& path, const stats::Report& report) {
  auto out = open_output(path);
  out << stats::to_json(report).dump(2) << '\n';
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::vector<std::string> image_refs_of(const Corpus& corpus, const StudyWindow& window) {
  std::vector<std::string> refs;
  for (const auto& p : corpus.posts()) {
    if (window.contains(p.timestamp)) refs.push_back(p.image_ref);
  }
  return refs;
}

// Reads annotations from a file, or fetches them when an annotator URL is
// configured. A partial remote fetch is fatal here.
inline AnnotationStore acquire_annotations(const std::string& annotations_path, const Corpus& corpus,
                                           const PipelineConfig& config, std::vector<std::string>* log = nullptr) {
  if (!config.annotator_url.empty()) {
    auto fetched = fetch_annotations(image_refs_of(corpus, config.window), config.annotator_url, config.fetch);
    if (log != nullptr) log->insert(log->end(), fetched.retry_log.begin(), fetched.retry_log.end());
    if (!fetched.complete()) {
      throw RemoteError(std::to_string(fetched.failures.size()) + " image(s) could not be annotated by " +
                        config.annotator_url + " (first: '" + fetched.failures.front().image_ref +
                        "': " + fetched.failures.front().reason + ")");
    }
    return std::move(fetched.store);
  }
  if (annotations_path.empty()) throw ValidationError("either --annotations or --annotator-url is required");
  if (!std::filesystem::exists(annotations_path)) {
    throw IoError("annotations file not found: '" + annotations_path + "'");
  }
  auto loaded = load_annotations_file(annotations_path, config.ingest_mode);
  if (log != nullptr) {
    for (const auto& d : loaded.rejected) {
      log->push_back(annotations_path + ":" + std::to_string(d.line) + ": rejected: " + d.message);
    }
  }
  return std::move(loaded.store);
}

inline IngestResult acquire_posts(const std::string& posts_path, const PipelineConfig& config) {
  if (!std::filesystem::exists(posts_path)) throw IoError("posts file not found: '" + posts_path + "'");
  return ingest_posts_file(posts_path, config.ingest_mode);
}

struct PipelineFiles {
  std::filesystem::path verdicts, happiness, happiness_series, demographics, report, manifest;
};

inline PipelineFiles pipeline_output_paths(const std::filesystem::path& out_dir) {
  return {out_dir / "verdicts.jsonl", out_dir / "hi.jsonl",     out_dir / "hi_series.jsonl",
          out_dir / "demographics.jsonl", out_dir / "report.json", out_dir / "manifest.json"};
}

// End-to-end run from files. Writes the stage outputs, report.json and a run
// manifest (config, input digests, stage timings) into out_dir.
inline PipelineResult run_pipeline_files(const PipelineConfig& config, const std::string& posts_path,
                                         const std::string& annotations_path, const std::filesystem::path& out_dir,
                                         const std::optional<std::filesystem::path>& csv_dir = std::nullopt,
                                         std::vector<std::string>* log = nullptr) {
  config.validate();
  std::vector<StageTiming> timings;
  auto ingest = run_stage("ingest", &timings, [&] { return acquire_posts(posts_path, config); });
  if (log != nullptr) {
    for (const auto& d : ingest.report.malformed) {
      log->push_back(posts_path + ":" + std::to_string(d.line) + ": malformed: " + d.message);
    }
    for (const auto& d : ingest.report.duplicates) {
      log->push_back(posts_path + ":" + std::to_string(d.line) + ": " + d.message);
    }
  }
  const auto store = run_stage("annotate", &timings,
                               [&] { return acquire_annotations(annotations_path, ingest.corpus, config, log); });
  auto result = run_pipeline(ingest.corpus, store, config, &timings);

  const auto paths = pipeline_output_paths(out_dir);
  run_stage("write", &timings, [&] {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory '" + out_dir.string() + "': " + ec.message());
    write_jsonl_file(paths.verdicts.string(), result.verdicts, [](const auto& v) { return to_json(v); });
    write_jsonl_file(paths.happiness.string(), result.happiness.indices, [](const auto& h) { return to_json(h); });
    if (config.granularity_days) {
      write_jsonl_file(paths.happiness_series.string(), result.happiness.series,
                       [](const auto& h) { return to_json(h, true); });
    }
    write_jsonl_file(paths.demographics.string(), result.demographics, [](const auto& d) { return to_json(d); });
    write_report_file(paths.report.string(), result.report);
    if (csv_dir) stats::write_histogram_csvs(result.report, *csv_dir);
  });

  ordered_json manifest;
  manifest["tool"] = "petmood";
  manifest["version"] = kVersion;
  manifest["config"] = config.to_json();
  ordered_json inputs = ordered_json::array();
  const auto describe = [](const std::string& role, const std::string& path) {
    const auto d = sha256_file(path);
    return ordered_json{{"role", role}, {"path", path}, {"sha256", d.sha256}, {"bytes", d.bytes}};
  };
  inputs.push_back(describe("posts", posts_path));
  if (config.annotator_url.empty()) {
    inputs.push_back(describe("annotations", annotations_path));
  } else {
    inputs.push_back({{"role", "annotations"}, {"url", config.annotator_url}});
  }
  manifest["inputs"] = std::move(inputs);
  manifest["counts"] = {{"posts_accepted", ingest.report.accepted},
                        {"posts_rejected", ingest.report.rejected()},
                        {"annotations", store.size()},
                        {"timelines", result.prepared.timelines.size()},
                        {"eligible_users", result.prepared.eligible.size()},
                        {"undefined_hi", result.happiness.undefined.size()}};
  ordered_json stages = ordered_json::array();
  for (const auto& t : timings) stages.push_back({{"stage", t.stage}, {"ms", t.millis}});
  manifest["stages"] = std::move(stages);
  manifest["report_sha256"] = sha256_file(paths.report.string()).sha256;
  auto out = open_output(paths.manifest.string());
  out << manifest.dump(2) << '\n';
  return result;
}

}  // namespace petmood
