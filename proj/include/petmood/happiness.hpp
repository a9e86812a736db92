#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "petmood/annotate.hpp"
#include "petmood/corpus.hpp"
#include "petmood/error.hpp"
#include "petmood/stats/summation.hpp"

namespace petmood {

// Raised when a happiness index is requested for a user with no face images.
class UndefinedIndexError : public ValidationError {
 public:
  explicit UndefinedIndexError(const std::string& user_id)
      : ValidationError("happiness index undefined for '" + user_id + "': no face images") {}
};

struct FaceImageEntry {
  std::string post_id;
  double smile_confidence = 0.0;
};

// Face-bearing images of one user inside one window, one entry per post.
struct FaceImageSet {
  std::string user_id;
  StudyWindow window;
  std::vector<FaceImageEntry> entries;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t size() const noexcept { return entries.size(); }
};

struct HappinessIndex {
  std::string user_id;
  StudyWindow window;
  double value = 0.0;  // [0, 100]
  std::size_t n_images = 0;
};

// Every post (not just selfies) with at least one face contributes the smile
// of its biggest face.
inline FaceImageSet collect_face_images(const UserTimeline& timeline, const AnnotationStore& store,
                                        const StudyWindow& window) {
  FaceImageSet set{timeline.user_id, window, {}};
  std::set<std::string> seen;
  for (const auto& p : timeline.posts) {
    if (!window.contains(p.timestamp)) continue;
    const auto* a = store.find(p.image_ref);
    if (a == nullptr) continue;
    const auto face = biggest_face(*a);
    if (!face) continue;
    if (!seen.insert(p.post_id).second) continue;
    set.entries.push_back({p.post_id, face->smile_confidence});
  }
  return set;
}

// Mean smile confidence over the set.
inline HappinessIndex happiness_index(const FaceImageSet& face_set) {
  if (face_set.empty()) throw UndefinedIndexError(face_set.user_id);
  std::vector<double> smiles;
  smiles.reserve(face_set.size());
  for (const auto& e : face_set.entries) smiles.push_back(e.smile_confidence);
  const double n = static_cast<double>(smiles.size());
  double value = stats::pairwise_sum(smiles) / n;
  // Rounding can push the mean a hair outside [min, max]; pin it back.
  const auto [lo, hi] = std::minmax_element(smiles.begin(), smiles.end());
  value = std::clamp(value, *lo, *hi);
  return HappinessIndex{face_set.user_id, face_set.window, value, smiles.size()};
}

// Consecutive sub-windows of `days` length; the last one is cut at window.end.
inline std::vector<StudyWindow> split_window(const StudyWindow& window, double days) {
  if (!(days > 0)) throw ValidationError("granularity must be a positive number of days");
  const auto step = static_cast<Timestamp>(days * static_cast<double>(kSecondsPerDay));
  if (step <= 0) throw ValidationError("granularity shorter than one second");
  std::vector<StudyWindow> out;
  for (Timestamp s = window.start; s < window.end; s += step) {
    out.emplace_back(s, std::min(window.end, s + step));
  }
  return out;
}

inline ordered_json to_json(const HappinessIndex& hi, bool with_window = false) {
  ordered_json j;
  j["user_id"] = hi.user_id;
  if (with_window) {
    j["window_start"] = format_iso8601(hi.window.start);
    j["window_end"] = format_iso8601(hi.window.end);
  }
  j["hi"] = hi.value;
  j["n_images"] = hi.n_images;
  return j;
}

// Only user_id / hi / n_images are read back; the window is not needed downstream.
inline HappinessIndex happiness_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("happiness record is not a JSON object");
  HappinessIndex hi;
  hi.user_id = require_field<std::string>(j, "user_id");
  hi.value = require_field<double>(j, "hi");
  hi.n_images = require_field<std::size_t>(j, "n_images");
  if (!(hi.value >= 0 && hi.value <= 100)) throw ValidationError("hi out of range for '" + hi.user_id + "'");
  if (hi.n_images < 1) throw ValidationError("n_images must be >= 1 for '" + hi.user_id + "'");
  return hi;
}

}  // namespace petmood
