#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "petmood/annotate.hpp"
#include "petmood/error.hpp"
#include "petmood/jsonl.hpp"
#include "petmood/time.hpp"

namespace petmood {

struct PostRecord {
  std::string post_id;
  std::string user_id;
  Timestamp timestamp = 0;
  std::string image_ref;
  std::optional<std::string> caption;

  friend bool operator==(const PostRecord&, const PostRecord&) = default;
};

// Timeline order: ascending timestamp, ties by post_id.
inline bool timeline_less(const PostRecord& a, const PostRecord& b) {
  return std::tie(a.timestamp, a.post_id) < std::tie(b.timestamp, b.post_id);
}

inline PostRecord post_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  PostRecord p;
  p.post_id = require_field<std::string>(j, "post_id");
  p.user_id = require_field<std::string>(j, "user_id");
  const auto ts = j.find("timestamp");
  if (ts == j.end()) throw ValidationError("missing field 'timestamp'");
  if (!ts->is_number_integer()) throw ValidationError("field 'timestamp' must be an integer");
  p.timestamp = ts->get<Timestamp>();
  p.image_ref = require_field<std::string>(j, "image_ref");
  if (const auto c = j.find("caption"); c != j.end() && !c->is_null()) {
    if (!c->is_string()) throw ValidationError("field 'caption' has wrong type");
    p.caption = c->get<std::string>();
  }
  if (p.post_id.empty()) throw ValidationError("post_id must be nonempty");
  if (p.user_id.empty()) throw ValidationError("user_id must be nonempty");
  if (p.timestamp <= 0) throw ValidationError("timestamp must be > 0");
  return p;
}

inline ordered_json post_to_json(const PostRecord& p) {
  ordered_json j;
  j["post_id"] = p.post_id;
  j["user_id"] = p.user_id;
  j["timestamp"] = p.timestamp;
  j["image_ref"] = p.image_ref;
  if (p.caption) j["caption"] = *p.caption;
  return j;
}

struct IngestReport {
  std::size_t lines_read = 0;
  std::size_t accepted = 0;
  std::vector<LineDiagnostic> malformed;
  std::vector<LineDiagnostic> duplicates;

  std::size_t rejected() const { return malformed.size() + duplicates.size(); }

  ordered_json to_json() const {
    ordered_json j;
    j["lines_read"] = lines_read;
    j["accepted"] = accepted;
    auto diag = [](const std::vector<LineDiagnostic>& v) {
      ordered_json a = ordered_json::array();
      for (const auto& d : v) a.push_back({{"line", d.line}, {"message", d.message}});
      return a;
    };
    j["malformed"] = diag(malformed);
    j["duplicates"] = diag(duplicates);
    return j;
  }
};

// Posts in input order with unique post_ids.
class Corpus {
 public:
  Corpus() = default;

  // Returns false (and leaves the corpus unchanged) on a duplicate post_id.
  bool add(PostRecord post) {
    if (!ids_.insert(post.post_id).second) return false;
    posts_.push_back(std::move(post));
    return true;
  }

  const std::vector<PostRecord>& posts() const noexcept { return posts_; }
  std::size_t size() const noexcept { return posts_.size(); }
  bool empty() const noexcept { return posts_.empty(); }

 private:
  std::vector<PostRecord> posts_;
  std::unordered_set<std::string> ids_;
};

struct IngestResult {
  Corpus corpus;
  IngestReport report;
};

// Strict mode throws on the first malformed line; duplicates are always
// reported and skipped (the first occurrence wins).
inline IngestResult ingest_posts(std::istream& in, IngestMode mode = IngestMode::lenient) {
  IngestResult result;
  for_each_line(in, [&](std::size_t line_no, const std::string& text) {
    ++result.report.lines_read;
    PostRecord post;
    try {
      post = post_from_json(json::parse(text));
    } catch (const std::exception& e) {
      const std::string msg = dynamic_cast<const json::exception*>(&e) ? "invalid JSON" : e.what();
      if (mode == IngestMode::strict) {
        throw ValidationError("posts line " + std::to_string(line_no) + ": " + msg);
      }
      result.report.malformed.push_back({line_no, msg});
      return;
    }
    const std::string id = post.post_id;
    if (!result.corpus.add(std::move(post))) {
      result.report.duplicates.push_back({line_no, "duplicate post_id '" + id + "'"});
      return;
    }
    ++result.report.accepted;
  });
  return result;
}

inline IngestResult ingest_posts_file(const std::string& path, IngestMode mode = IngestMode::lenient) {
  auto in = open_input(path);
  return ingest_posts(in, mode);
}

struct UserTimeline {
  std::string user_id;
  std::vector<PostRecord> posts;  // sorted by timeline_less, all inside the window
};

using TimelineMap = std::map<std::string, UserTimeline>;

inline TimelineMap build_timelines(const Corpus& corpus, const StudyWindow& window) {
  TimelineMap out;
  for (const auto& p : corpus.posts()) {
    if (!window.contains(p.timestamp)) continue;
    auto& tl = out[p.user_id];
    tl.user_id = p.user_id;
    tl.posts.push_back(p);
  }
  for (auto& [_, tl] : out) std::sort(tl.posts.begin(), tl.posts.end(), timeline_less);
  return out;
}

inline constexpr int kDefaultMinSelfies = 3;

// Users with at least min_selfies selfie posts. Unannotated images count as
// faceless.
inline std::set<std::string> filter_eligible_users(const TimelineMap& timelines, const AnnotationStore& annotations,
                                                   int min_selfies = kDefaultMinSelfies,
                                                   double min_area_ratio = kDefaultMinSelfieArea) {
  std::set<std::string> eligible;
  for (const auto& [user, tl] : timelines) {
    int selfies = 0;
    for (const auto& p : tl.posts) {
      const auto* a = annotations.find(p.image_ref);
      if (a != nullptr && is_selfie(*a, min_area_ratio)) ++selfies;
    }
    if (selfies >= min_selfies) eligible.insert(user);
  }
  return eligible;
}

}  // namespace petmood
