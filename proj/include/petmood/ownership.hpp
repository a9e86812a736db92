#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "petmood/annotate.hpp"
#include "petmood/corpus.hpp"

namespace petmood {

inline constexpr double kDefaultPetConfidence = 0.5;
inline constexpr double kDefaultMinGapDays = 7.0;

// A post whose image was labeled cat or dog with enough confidence.
struct PetPost {
  std::string post_id;
  Timestamp timestamp = 0;
  PetClass klass = PetClass::cat;  // never PetClass::other
  double confidence = 0.0;

  friend bool operator==(const PetPost&, const PetPost&) = default;
};

enum class OwnershipStatus { owner, non_owner };

inline std::string_view to_string(OwnershipStatus s) { return s == OwnershipStatus::owner ? "owner" : "non_owner"; }

inline OwnershipStatus parse_ownership_status(std::string_view s) {
  if (s == "owner") return OwnershipStatus::owner;
  if (s == "non_owner") return OwnershipStatus::non_owner;
  throw ValidationError("unknown ownership status '" + std::string(s) + "'");
}

struct OwnershipVerdict {
  std::string user_id;
  OwnershipStatus status = OwnershipStatus::non_owner;
  std::optional<PetClass> pet_type;  // set iff owner
  // Owners: the posts of pet_type. Non-owners: every pet post seen.
  std::vector<std::string> evidence;
  // Largest same-type timestamp span, in days.
  double max_span_days = 0.0;

  bool is_owner() const noexcept { return status == OwnershipStatus::owner; }

  friend bool operator==(const OwnershipVerdict&, const OwnershipVerdict&) = default;
};

inline std::vector<PetPost> extract_pet_posts(const UserTimeline& timeline, const AnnotationStore& store,
                                              double pet_conf_threshold = kDefaultPetConfidence) {
  std::vector<PetPost> out;
  for (const auto& p : timeline.posts) {
    const auto* a = store.find(p.image_ref);
    if (a == nullptr || a->pet.klass == PetClass::other) continue;
    if (a->pet.confidence < pet_conf_threshold) continue;
    out.push_back({p.post_id, p.timestamp, a->pet.klass, a->pet.confidence});
  }
  return out;
}

// A user owns pet type T iff two posts of type T lie more than min_gap_days
// apart. Since that is an existential over pairs, it reduces to comparing the
// earliest and latest post of each type. When both types qualify the one with
// more posts wins, then the one posted first.
inline OwnershipVerdict classify_owner(const std::vector<PetPost>& pet_posts, double min_gap_days = kDefaultMinGapDays,
                                       std::string user_id = {}) {
  struct TypeSummary {
    PetClass klass;
    std::size_t count = 0;
    Timestamp first = 0, last = 0;
    std::string first_id;
  };
  TypeSummary cats{PetClass::cat, 0, 0, 0, {}}, dogs{PetClass::dog, 0, 0, 0, {}};
  for (const auto& p : pet_posts) {
    if (p.klass == PetClass::other) continue;
    auto& s = p.klass == PetClass::cat ? cats : dogs;
    if (s.count == 0 || p.timestamp < s.first || (p.timestamp == s.first && p.post_id < s.first_id)) {
      s.first = p.timestamp;
      s.first_id = p.post_id;
    }
    if (s.count == 0 || p.timestamp > s.last) s.last = p.timestamp;
    ++s.count;
  }
  const double gap_seconds = min_gap_days * static_cast<double>(kSecondsPerDay);
  const auto span = [](const TypeSummary& s) { return s.count == 0 ? 0.0 : static_cast<double>(s.last - s.first); };
  const auto qualifies = [&](const TypeSummary& s) { return s.count >= 2 && span(s) > gap_seconds; };

  OwnershipVerdict v;
  v.user_id = std::move(user_id);
  const TypeSummary* winner = nullptr;
  if (qualifies(cats) && qualifies(dogs)) {
    if (cats.count != dogs.count) {
      winner = cats.count > dogs.count ? &cats : &dogs;
    } else if (cats.first != dogs.first) {
      winner = cats.first < dogs.first ? &cats : &dogs;
    } else {
      winner = dogs.first_id < cats.first_id ? &dogs : &cats;
    }
  } else if (qualifies(cats)) {
    winner = &cats;
  } else if (qualifies(dogs)) {
    winner = &dogs;
  }

  if (winner != nullptr) {
    v.status = OwnershipStatus::owner;
    v.pet_type = winner->klass;
    v.max_span_days = span(*winner) / static_cast<double>(kSecondsPerDay);
    for (const auto& p : pet_posts) {
      if (p.klass == winner->klass) v.evidence.push_back(p.post_id);
    }
  } else {
    v.status = OwnershipStatus::non_owner;
    v.max_span_days = std::max(span(cats), span(dogs)) / static_cast<double>(kSecondsPerDay);
    for (const auto& p : pet_posts) {
      if (p.klass != PetClass::other) v.evidence.push_back(p.post_id);
    }
  }
  return v;
}

inline ordered_json to_json(const OwnershipVerdict& v) {
  ordered_json j;
  j["user_id"] = v.user_id;
  j["status"] = to_string(v.status);
  if (v.pet_type) j["pet_type"] = to_string(*v.pet_type);
  j["evidence"] = v.evidence;
  j["max_span_days"] = v.max_span_days;
  return j;
}

inline OwnershipVerdict verdict_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("verdict is not a JSON object");
  OwnershipVerdict v;
  v.user_id = require_field<std::string>(j, "user_id");
  v.status = parse_ownership_status(require_field<std::string>(j, "status"));
  if (const auto t = j.find("pet_type"); t != j.end() && !t->is_null()) {
    v.pet_type = parse_pet_class(require_field<std::string>(j, "pet_type"));
  }
  if (j.contains("evidence")) v.evidence = require_field<std::vector<std::string>>(j, "evidence");
  if (j.contains("max_span_days")) v.max_span_days = require_field<double>(j, "max_span_days");
  if (v.is_owner() != v.pet_type.has_value()) {
    throw ValidationError("verdict for '" + v.user_id + "': pet_type must be present iff status is owner");
  }
  return v;
}

}  // namespace petmood
