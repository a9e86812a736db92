#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "petmood/error.hpp"
#include "petmood/jsonl.hpp"

namespace petmood {

enum class PetClass { cat, dog, other };
enum class Gender { male, female };

inline std::string_view to_string(PetClass c) {
  switch (c) {
    case PetClass::cat: return "cat";
    case PetClass::dog: return "dog";
    case PetClass::other: return "other";
  }
  return "other";
}

inline PetClass parse_pet_class(std::string_view s) {
  if (s == "cat") return PetClass::cat;
  if (s == "dog") return PetClass::dog;
  if (s == "other") return PetClass::other;
  throw ValidationError("unknown pet class '" + std::string(s) + "'");
}

inline std::string_view to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

inline Gender parse_gender(std::string_view s) {
  if (s == "male") return Gender::male;
  if (s == "female") return Gender::female;
  throw ValidationError("unknown gender '" + std::string(s) + "'");
}

struct PetLabel {
  PetClass klass = PetClass::other;
  double confidence = 0.0;  // [0, 1]

  friend bool operator==(const PetLabel&, const PetLabel&) = default;
};

// Bounding box in fractions of the image dimensions.
struct BoundingBox {
  double x = 0, y = 0, w = 0, h = 0;

  double area() const noexcept { return w * h; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct FaceObservation {
  BoundingBox bbox;
  double smile_confidence = 0.0;  // [0, 100]
  Gender gender = Gender::female;
  double gender_confidence = 0.0;  // [0, 1]
  std::optional<double> age;
  std::optional<std::string> race;  // carried, not used by any report

  friend bool operator==(const FaceObservation&, const FaceObservation&) = default;
};

struct ImageAnnotation {
  std::string image_ref;
  PetLabel pet;
  std::vector<FaceObservation> faces;

  friend bool operator==(const ImageAnnotation&, const ImageAnnotation&) = default;
};

// Used for any image the store does not know about: no faces, not a pet.
inline ImageAnnotation missing_annotation(std::string image_ref) {
  return ImageAnnotation{std::move(image_ref), PetLabel{PetClass::other, 0.0}, {}};
}

namespace detail {

// Slack for sums of fractional coordinates such as x + w.
inline constexpr double kBoxSlack = 1e-9;

inline double require_number(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(std::string("missing field '") + key + "'");
  if (!it->is_number()) throw ValidationError(std::string("field '") + key + "' must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ValidationError(std::string("field '") + key + "' must be finite");
  return v;
}

inline void require_range(double v, double lo, double hi, const std::string& what) {
  if (!(v >= lo && v <= hi)) {
    throw ValidationError(what + " out of range [" + ordered_json(lo).dump() + ", " +
                          ordered_json(hi).dump() + "]: " + ordered_json(v).dump());
  }
}

}  // namespace detail

inline void validate(const BoundingBox& b) {
  if (!(b.x >= 0 && b.y >= 0)) throw ValidationError("bbox origin must be non-negative");
  if (!(b.w > 0 && b.h > 0)) throw ValidationError("bbox width and height must be positive");
  if (b.x + b.w > 1 + detail::kBoxSlack || b.y + b.h > 1 + detail::kBoxSlack) {
    throw ValidationError("bbox extends past the image");
  }
}

inline void validate(const FaceObservation& f) {
  validate(f.bbox);
  detail::require_range(f.smile_confidence, 0, 100, "smile");
  detail::require_range(f.gender_confidence, 0, 1, "gender_conf");
  if (f.age && !(*f.age >= 0)) throw ValidationError("age must be non-negative");
}

inline void validate(const ImageAnnotation& a) {
  if (a.image_ref.empty()) throw ValidationError("image_ref must be nonempty");
  detail::require_range(a.pet.confidence, 0, 1, "pet confidence");
  for (const auto& f : a.faces) validate(f);
}

inline FaceObservation face_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("face is not an object");
  FaceObservation f;
  const auto bb = j.find("bbox");
  if (bb == j.end()) throw ValidationError("missing field 'bbox'");
  if (!bb->is_array() || bb->size() != 4) throw ValidationError("bbox must be [x, y, w, h]");
  std::array<double, 4> v{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(*bb)[i].is_number()) throw ValidationError("bbox entries must be numbers");
    v[i] = (*bb)[i].get<double>();
  }
  f.bbox = {v[0], v[1], v[2], v[3]};
  f.smile_confidence = detail::require_number(j, "smile");
  f.gender = parse_gender(require_field<std::string>(j, "gender"));
  f.gender_confidence = detail::require_number(j, "gender_conf");
  if (const auto a = j.find("age"); a != j.end() && !a->is_null()) f.age = detail::require_number(j, "age");
  if (const auto r = j.find("race"); r != j.end() && !r->is_null()) f.race = require_field<std::string>(j, "race");
  return f;
}

inline ImageAnnotation annotation_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  ImageAnnotation a;
  a.image_ref = require_field<std::string>(j, "image_ref");
  const auto pet = j.find("pet");
  if (pet == j.end() || !pet->is_object()) throw ValidationError("missing object field 'pet'");
  a.pet.klass = parse_pet_class(require_field<std::string>(*pet, "klass"));
  a.pet.confidence = detail::require_number(*pet, "confidence");
  const auto faces = j.find("faces");
  if (faces != j.end() && !faces->is_null()) {
    if (!faces->is_array()) throw ValidationError("field 'faces' must be an array");
    for (const auto& f : *faces) a.faces.push_back(face_from_json(f));
  }
  validate(a);
  return a;
}

inline ordered_json to_json(const FaceObservation& f) {
  ordered_json j;
  j["bbox"] = {f.bbox.x, f.bbox.y, f.bbox.w, f.bbox.h};
  j["smile"] = f.smile_confidence;
  j["gender"] = to_string(f.gender);
  j["gender_conf"] = f.gender_confidence;
  if (f.age) j["age"] = *f.age;
  if (f.race) j["race"] = *f.race;
  return j;
}

inline ordered_json to_json(const ImageAnnotation& a) {
  ordered_json j;
  j["image_ref"] = a.image_ref;
  j["pet"] = {{"klass", to_string(a.pet.klass)}, {"confidence", a.pet.confidence}};
  j["faces"] = ordered_json::array();
  for (const auto& f : a.faces) j["faces"].push_back(to_json(f));
  return j;
}

enum class Provenance { file, remote, synthetic };

// image_ref -> annotation. Built once, then only read.
class AnnotationStore {
 public:
  explicit AnnotationStore(Provenance provenance = Provenance::file) : provenance_(provenance) {}

  // False when image_ref is already present.
  bool add(ImageAnnotation a) {
    auto key = a.image_ref;
    return by_ref_.emplace(std::move(key), std::move(a)).second;
  }

  const ImageAnnotation* find(const std::string& image_ref) const {
    const auto it = by_ref_.find(image_ref);
    return it == by_ref_.end() ? nullptr : &it->second;
  }

  ImageAnnotation get_or_missing(const std::string& image_ref) const {
    if (const auto* a = find(image_ref)) return *a;
    return missing_annotation(image_ref);
  }

  bool contains(const std::string& image_ref) const { return by_ref_.count(image_ref) != 0; }
  std::size_t size() const noexcept { return by_ref_.size(); }
  Provenance provenance() const noexcept { return provenance_; }

  auto begin() const { return by_ref_.begin(); }
  auto end() const { return by_ref_.end(); }

 private:
  Provenance provenance_;
  std::map<std::string, ImageAnnotation> by_ref_;
};

struct AnnotationLoadResult {
  AnnotationStore store;
  std::vector<LineDiagnostic> rejected;
};

inline AnnotationLoadResult load_annotations(std::istream& in, IngestMode mode = IngestMode::lenient) {
  AnnotationLoadResult result{AnnotationStore(Provenance::file), {}};
  for_each_line(in, [&](std::size_t line_no, const std::string& text) {
    std::string problem;
    try {
      auto a = annotation_from_json(json::parse(text));
      const auto ref = a.image_ref;
      if (!result.store.add(std::move(a))) problem = "duplicate image_ref '" + ref + "'";
    } catch (const json::exception&) {
      problem = "invalid JSON";
    } catch (const ValidationError& e) {
      problem = e.what();
    }
    if (problem.empty()) return;
    if (mode == IngestMode::strict) {
      throw ValidationError("annotations line " + std::to_string(line_no) + ": " + problem);
    }
    result.rejected.push_back({line_no, std::move(problem)});
  });
  return result;
}

inline AnnotationLoadResult load_annotations_file(const std::string& path, IngestMode mode = IngestMode::lenient) {
  auto in = open_input(path);
  return load_annotations(in, mode);
}

// Records ordered by image_ref.
inline void write_annotations(std::ostream& out, const AnnotationStore& store) {
  for (const auto& [_, a] : store) out << to_json(a).dump() << '\n';
}

// Largest bbox area; ties go to the smallest (x, y). Remaining fields break
// exact duplicates so the result never depends on list order.
inline std::optional<FaceObservation> biggest_face(const ImageAnnotation& annotation) {
  const FaceObservation* best = nullptr;
  for (const auto& f : annotation.faces) {
    if (best == nullptr) {
      best = &f;
      continue;
    }
    const double a = f.bbox.area(), b = best->bbox.area();
    const auto key = [](const FaceObservation& o) {
      return std::tie(o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h, o.smile_confidence, o.gender_confidence);
    };
    if (a > b || (a == b && key(f) < key(*best))) best = &f;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

inline constexpr double kDefaultMinSelfieArea = 0.10;

// Exactly one face, strictly larger than min_area_ratio of the image.
inline bool is_selfie(const ImageAnnotation& annotation, double min_area_ratio = kDefaultMinSelfieArea) {
  return annotation.faces.size() == 1 && annotation.faces.front().bbox.area() > min_area_ratio;
}

}  // namespace petmood
