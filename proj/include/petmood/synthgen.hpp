#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "petmood/annotate.hpp"
#include "petmood/corpus.hpp"
#include "petmood/error.hpp"
#include "petmood/keyvalue.hpp"
#include "petmood/ownership.hpp"

namespace petmood::synth {

// Rows: actual cat, dog, other. Columns: predicted cat, dog, other.
using ConfusionMatrix = std::array<std::array<double, 3>, 3>;

inline ConfusionMatrix identity_confusion() {
  return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

// Measured confusion of the reference CNN pet classifier.
inline ConfusionMatrix reference_cnn_confusion() {
  return {{{0.962, 0.019, 0.019}, {0.008, 0.977, 0.015}, {0.004, 0.006, 0.990}}};
}

enum class Cohort { male_owner, male_non_owner, female_owner, female_non_owner };

inline constexpr std::array<const char*, 4> kCohortKeys = {"male_owner", "male_non_owner", "female_owner",
                                                           "female_non_owner"};

inline std::size_t cohort_index(Gender g, bool owner) {
  return (g == Gender::male ? 0 : 2) + (owner ? 0 : 1);
}

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_users = 1000;
  double owner_fraction = 0.338;
  double gender_mix = 1557.0 / 2905.0;  // female fraction
  double cat_fraction = 0.5;             // among owners
  double pet_lover_fraction = 0.2;       // non-owners who still post pets
  // Draw cohort memberships as exact counts instead of independent coin flips.
  bool exact_fractions = false;

  int posts_min = 20;
  int posts_max = 40;
  int selfies_min = 3;
  int owner_pet_posts_min = 3;
  int owner_pet_posts_max = 8;
  double lover_burst_days = 5.0;  // must stay <= 7 so bursts never look like ownership
  double selfie_rate = 0.10;      // extra selfies among filler posts
  double group_rate = 0.15;       // multi-face photos among filler posts

  // Per-user true happiness ~ TN(mean, sd) per cohort; each face image's
  // smile ~ TN(user mean, within_user_sd). Truncation is to [0, 100].
  std::array<double, 4> smile_mean{45.0, 38.0, 52.0, 50.0};
  std::array<double, 4> smile_sd{12.0, 12.0, 12.0, 12.0};
  double within_user_sd = 10.0;

  ConfusionMatrix pet_label_noise = reference_cnn_confusion();
  StudyWindow window = default_study_window();

  void validate() const;
  ordered_json to_json() const;
};

inline void SynthConfig::validate() const {
  const auto fraction = [](double v, const char* name) {
    if (!(v >= 0 && v <= 1)) throw ValidationError(std::string(name) + " must be in [0, 1]");
  };
  fraction(owner_fraction, "owner_fraction");
  fraction(gender_mix, "gender_mix");
  fraction(cat_fraction, "cat_fraction");
  fraction(pet_lover_fraction, "pet_lover_fraction");
  fraction(selfie_rate, "selfie_rate");
  fraction(group_rate, "group_rate");
  if (selfie_rate + group_rate > 1) throw ValidationError("selfie_rate + group_rate must be <= 1");
  if (n_users == 0) throw ValidationError("n_users must be positive");
  if (posts_min < 1 || posts_max < posts_min) throw ValidationError("need 1 <= posts_min <= posts_max");
  if (selfies_min < 0) throw ValidationError("selfies_min must be >= 0");
  if (owner_pet_posts_min < 2 || owner_pet_posts_max < owner_pet_posts_min) {
    throw ValidationError("need 2 <= owner_pet_posts_min <= owner_pet_posts_max");
  }
  if (!(lover_burst_days >= 0 && lover_burst_days <= kDefaultMinGapDays)) {
    throw ValidationError("lover_burst_days must be in [0, 7]");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(smile_mean[i] >= 0 && smile_mean[i] <= 100)) throw ValidationError("smile means must be in [0, 100]");
    if (!(smile_sd[i] >= 0)) throw ValidationError("smile sds must be >= 0");
  }
  if (!(within_user_sd >= 0)) throw ValidationError("within_user_sd must be >= 0");
  for (const auto& row : pet_label_noise) {
    double s = 0.0;
    for (double v : row) {
      if (!(v >= 0)) throw ValidationError("confusion matrix entries must be >= 0");
      s += v;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw ValidationError("confusion matrix rows must sum to 1");
  }
  // Infeasible layouts: a user needs room for the selfie minimum plus the
  // largest pet sequence the generator may assign.
  constexpr int kLoverMaxPosts = 6;
  const int needed = selfies_min + std::max(owner_pet_posts_max, kLoverMaxPosts);
  if (posts_min < needed) {
    throw ValidationError("infeasible config: posts_min " + std::to_string(posts_min) + " < " +
                          std::to_string(needed) + " (selfies_min + pet posts)");
  }
  // Owners get one pet post in each outer third of the window; those must be
  // more than a week apart.
  if (window.length() / 3 <= static_cast<Timestamp>(kDefaultMinGapDays * kSecondsPerDay)) {
    throw ValidationError("infeasible config: window too short to separate owner pet posts by more than 7 days");
  }
}

inline ordered_json SynthConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["n_users"] = n_users;
  j["owner_fraction"] = owner_fraction;
  j["gender_mix"] = gender_mix;
  j["cat_fraction"] = cat_fraction;
  j["pet_lover_fraction"] = pet_lover_fraction;
  j["exact_fractions"] = exact_fractions;
  j["posts_min"] = posts_min;
  j["posts_max"] = posts_max;
  j["selfies_min"] = selfies_min;
  j["owner_pet_posts_min"] = owner_pet_posts_min;
  j["owner_pet_posts_max"] = owner_pet_posts_max;
  j["lover_burst_days"] = lover_burst_days;
  j["selfie_rate"] = selfie_rate;
  j["group_rate"] = group_rate;
  for (std::size_t i = 0; i < 4; ++i) {
    j[std::string("smile_mean.") + kCohortKeys[i]] = smile_mean[i];
    j[std::string("smile_sd.") + kCohortKeys[i]] = smile_sd[i];
  }
  j["within_user_sd"] = within_user_sd;
  j["pet_label_noise"] = pet_label_noise;
  j["window"] = format_window(window);
  return j;
}


// Key-value config: one `key = value` per line, '#' starts a comment.
// Unknown keys are an error. `pet_label_noise` takes "identity", "reference"
// or nine row-major numbers separated by commas or spaces.
inline SynthConfig parse_config(std::istream& in) {
  SynthConfig c;
  kv::for_each_pair(in, [&](std::size_t line_no, const std::string& key, const std::string& v) {
    const auto num = [&] { return kv::parse_double(key, v); };
    const auto integer = [&] { return kv::parse_int(key, v); };
    const auto positive_int = [&] {
      const auto i = integer();
      if (i < 0) throw ValidationError("config key '" + key + "' must be >= 0");
      return i;
    };

    bool matched = true;
    if (key == "seed") c.seed = static_cast<std::uint64_t>(positive_int());
    else if (key == "n_users") c.n_users = static_cast<std::size_t>(positive_int());
    else if (key == "owner_fraction") c.owner_fraction = num();
    else if (key == "gender_mix") c.gender_mix = num();
    else if (key == "cat_fraction") c.cat_fraction = num();
    else if (key == "pet_lover_fraction") c.pet_lover_fraction = num();
    else if (key == "exact_fractions") c.exact_fractions = kv::parse_bool(key, v);
    else if (key == "posts_min") c.posts_min = static_cast<int>(integer());
    else if (key == "posts_max") c.posts_max = static_cast<int>(integer());
    else if (key == "selfies_min") c.selfies_min = static_cast<int>(integer());
    else if (key == "owner_pet_posts_min") c.owner_pet_posts_min = static_cast<int>(integer());
    else if (key == "owner_pet_posts_max") c.owner_pet_posts_max = static_cast<int>(integer());
    else if (key == "lover_burst_days") c.lover_burst_days = num();
    else if (key == "selfie_rate") c.selfie_rate = num();
    else if (key == "group_rate") c.group_rate = num();
    else if (key == "within_user_sd") c.within_user_sd = num();
    else if (key == "window") c.window = parse_window(v);
    else if (key == "pet_label_noise") {
      if (v == "identity") {
        c.pet_label_noise = identity_confusion();
      } else if (v == "reference") {
        c.pet_label_noise = reference_cnn_confusion();
      } else {
        std::string cleaned = v;
        for (auto& ch : cleaned) {
          if (ch == ',') ch = ' ';
        }
        std::istringstream ss(cleaned);
        std::vector<std::string> parts;
        for (std::string p; ss >> p;) parts.push_back(p);
        if (parts.size() != 9) throw ValidationError("pet_label_noise needs 9 numbers");
        for (std::size_t i = 0; i < 9; ++i) c.pet_label_noise[i / 3][i % 3] = kv::parse_double(key, parts[i]);
      }
    } else {
      matched = false;
      for (std::size_t i = 0; i < 4; ++i) {
        if (key == std::string("smile_mean.") + kCohortKeys[i]) {
          c.smile_mean[i] = num();
          matched = true;
        } else if (key == std::string("smile_sd.") + kCohortKeys[i]) {
          c.smile_sd[i] = num();
          matched = true;
        }
      }
    }
    if (!matched) throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  });
  c.validate();
  return c;
}

inline SynthConfig load_config_file(const std::string& path) {
  auto in = open_input(path);
  return parse_config(in);
}

// Seeded source of variates. The engine is the standard-specified
// mt19937_64; every transform to doubles is done here rather than by
// <random> distributions, whose output differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }

  // Inclusive range.
  long long integer(long long lo, long long hi) {
    const auto span = static_cast<double>(hi - lo + 1);
    auto v = lo + static_cast<long long>(std::floor(uniform() * span));
    return std::min(v, hi);
  }

  // Box-Muller, one variate per call.
  double normal(double mean, double sd) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Rejection sampling; falls back to clamping if the mass inside is tiny.
  double truncated_normal(double mean, double sd, double lo, double hi) {
    if (sd <= 0) return std::clamp(mean, lo, hi);
    for (int i = 0; i < 1000; ++i) {
      const double v = normal(mean, sd);
      if (v >= lo && v <= hi) return v;
    }
    return std::clamp(mean, lo, hi);
  }

  std::size_t categorical(const std::array<double, 3>& probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    // Rounding slack: last class with positive mass.
    for (std::size_t i = probs.size(); i-- > 0;) {
      if (probs[i] > 0) return i;
    }
    return probs.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(integer(0, static_cast<long long>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

struct GroundTruth {
  std::string user_id;
  bool is_owner = false;
  std::optional<PetClass> pet_type;
  Gender gender = Gender::female;
  double true_hi_mean = 0.0;
  bool pet_lover = false;
};

struct SynthCorpus {
  SynthConfig config;
  std::vector<PostRecord> posts;
  AnnotationStore annotations{Provenance::synthetic};
  std::vector<GroundTruth> truth;
  std::map<std::string, PetClass> true_pet;  // image_ref -> actual class before label noise
};

namespace detail {

inline std::string zero_pad(std::size_t v, std::size_t width) {
  std::string s = std::to_string(v);
  if (s.size() < width) s.insert(0, width - s.size(), '0');
  return s;
}

inline FaceObservation make_face(Rng& rng, double side_lo, double side_hi, double smile, Gender gender) {
  FaceObservation f;
  f.bbox.w = rng.uniform(side_lo, side_hi);
  f.bbox.h = rng.uniform(side_lo, side_hi);
  f.bbox.x = rng.uniform(0.0, 1.0 - f.bbox.w);
  f.bbox.y = rng.uniform(0.0, 1.0 - f.bbox.h);
  f.smile_confidence = smile;
  f.gender = gender;
  f.gender_confidence = rng.uniform(0.7, 1.0);
  f.age = std::round(rng.uniform(16.0, 65.0));
  return f;
}

enum class PostKind { plain, selfie, group, pet };

}  // namespace detail

// Users are generated one at a time from a single seeded stream, so the
// output is a pure function of the config.
inline SynthCorpus generate_corpus(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  SynthCorpus out;
  out.config = config;

  const std::size_t n = config.n_users;
  std::vector<char> owner_flags(n), female_flags(n);
  if (config.exact_fractions) {
    const auto n_owners = static_cast<std::size_t>(std::llround(config.owner_fraction * static_cast<double>(n)));
    const auto n_female = static_cast<std::size_t>(std::llround(config.gender_mix * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      owner_flags[i] = i < n_owners;
      female_flags[i] = i < n_female;
    }
    rng.shuffle(owner_flags);
    rng.shuffle(female_flags);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      owner_flags[i] = rng.bernoulli(config.owner_fraction);
      female_flags[i] = rng.bernoulli(config.gender_mix);
    }
  }

  const std::size_t width = std::max<std::size_t>(5, std::to_string(n).size());
  const StudyWindow& w = config.window;
  const auto any_time = [&] { return static_cast<Timestamp>(rng.integer(w.start, w.end - 1)); };
  const Timestamp third = w.length() / 3;

  for (std::size_t u = 0; u < n; ++u) {
    GroundTruth gt;
    gt.user_id = "u" + detail::zero_pad(u + 1, width);
    gt.is_owner = owner_flags[u] != 0;
    gt.gender = female_flags[u] ? Gender::female : Gender::male;
    const std::size_t cohort = cohort_index(gt.gender, gt.is_owner);
    gt.true_hi_mean = rng.truncated_normal(config.smile_mean[cohort], config.smile_sd[cohort], 0.0, 100.0);

    const auto n_posts = static_cast<int>(rng.integer(config.posts_min, config.posts_max));
    std::vector<std::pair<Timestamp, PetClass>> pet_posts;
    if (gt.is_owner) {
      gt.pet_type = rng.bernoulli(config.cat_fraction) ? PetClass::cat : PetClass::dog;
      const auto k = static_cast<int>(rng.integer(config.owner_pet_posts_min, config.owner_pet_posts_max));
      // One post early and one late guarantee a gap far beyond a week.
      pet_posts.emplace_back(static_cast<Timestamp>(rng.integer(w.start, w.start + third - 1)), *gt.pet_type);
      pet_posts.emplace_back(static_cast<Timestamp>(rng.integer(w.end - third, w.end - 1)), *gt.pet_type);
      for (int i = 2; i < k; ++i) pet_posts.emplace_back(any_time(), *gt.pet_type);
    } else if (rng.bernoulli(config.pet_lover_fraction)) {
      gt.pet_lover = true;
      if (rng.bernoulli(0.7)) {
        // One burst of a single pet type, all within lover_burst_days.
        const auto burst = static_cast<Timestamp>(config.lover_burst_days * kSecondsPerDay);
        const Timestamp s = rng.integer(w.start, std::max(w.start, w.end - 1 - burst));
        const PetClass klass = rng.bernoulli(0.5) ? PetClass::cat : PetClass::dog;
        const auto k = rng.integer(1, 6);
        for (long long i = 0; i < k; ++i) pet_posts.emplace_back(rng.integer(s, s + burst), klass);
      } else {
        // A single cat and a single dog: no same-type recurrence.
        pet_posts.emplace_back(any_time(), PetClass::cat);
        pet_posts.emplace_back(any_time(), PetClass::dog);
      }
    }

    std::vector<detail::PostKind> kinds(static_cast<std::size_t>(config.selfies_min), detail::PostKind::selfie);
    kinds.insert(kinds.end(), pet_posts.size(), detail::PostKind::pet);
    while (static_cast<int>(kinds.size()) < n_posts) {
      const double r = rng.uniform();
      kinds.push_back(r < config.selfie_rate                       ? detail::PostKind::selfie
                      : r < config.selfie_rate + config.group_rate ? detail::PostKind::group
                                                                   : detail::PostKind::plain);
    }

    std::vector<double> smiles;
    std::size_t pet_i = 0;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      const std::string suffix = detail::zero_pad(i + 1, 4);
      PostRecord post;
      post.post_id = gt.user_id + "-p" + suffix;
      post.user_id = gt.user_id;
      post.image_ref = "img-" + gt.user_id + "-" + suffix;
      ImageAnnotation ann;
      ann.image_ref = post.image_ref;
      PetClass actual = PetClass::other;
      const auto user_smile = [&] {
        return rng.truncated_normal(gt.true_hi_mean, config.within_user_sd, 0.0, 100.0);
      };

      switch (kinds[i]) {
        case detail::PostKind::pet:
          post.timestamp = pet_posts[pet_i].first;
          actual = pet_posts[pet_i].second;
          ++pet_i;
          break;
        case detail::PostKind::selfie:
          post.timestamp = any_time();
          // Sides of at least 0.33 keep the area above 0.1089.
          ann.faces.push_back(detail::make_face(rng, 0.33, 0.6, user_smile(), gt.gender));
          break;
        case detail::PostKind::group: {
          post.timestamp = any_time();
          // The account owner is the biggest face; companions are strictly smaller.
          ann.faces.push_back(detail::make_face(rng, 0.15, 0.25, user_smile(), gt.gender));
          const auto companions = rng.integer(1, 3);
          for (long long c = 0; c < companions; ++c) {
            const Gender g = rng.bernoulli(0.5) ? Gender::female : Gender::male;
            ann.faces.push_back(detail::make_face(rng, 0.05, 0.14, rng.uniform(0.0, 100.0), g));
          }
          // Listing order should carry no information.
          rng.shuffle(ann.faces);
          break;
        }
        case detail::PostKind::plain:
          post.timestamp = any_time();
          break;
      }
      if (!ann.faces.empty()) smiles.push_back(biggest_face(ann)->smile_confidence);

      const auto observed = rng.categorical(config.pet_label_noise[static_cast<std::size_t>(actual)]);
      ann.pet.klass = static_cast<PetClass>(observed);
      ann.pet.confidence = rng.uniform(0.6, 1.0);

      out.true_pet[ann.image_ref] = actual;
      out.annotations.add(std::move(ann));
      out.posts.push_back(std::move(post));
    }
    out.truth.push_back(std::move(gt));
  }
  return out;
}

inline ordered_json to_json(const GroundTruth& gt, std::uint64_t seed) {
  ordered_json j;
  j["user_id"] = gt.user_id;
  j["is_owner"] = gt.is_owner;
  j["pet_type"] = gt.pet_type ? ordered_json(to_string(*gt.pet_type)) : ordered_json(nullptr);
  j["gender"] = to_string(gt.gender);
  j["true_hi_mean"] = gt.true_hi_mean;
  j["pet_lover"] = gt.pet_lover;
  j["seed"] = seed;
  return j;
}

inline GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth gt;
  gt.user_id = require_field<std::string>(j, "user_id");
  gt.is_owner = require_field<bool>(j, "is_owner");
  if (const auto t = j.find("pet_type"); t != j.end() && !t->is_null()) {
    gt.pet_type = parse_pet_class(t->get<std::string>());
  }
  gt.gender = parse_gender(require_field<std::string>(j, "gender"));
  gt.true_hi_mean = require_field<double>(j, "true_hi_mean");
  gt.pet_lover = j.value("pet_lover", false);
  return gt;
}

struct SynthFiles {
  std::filesystem::path posts, annotations, ground_truth;
};

// posts.jsonl, annotations.jsonl and ground_truth.jsonl under dir.
inline SynthFiles write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  SynthFiles files{dir / "posts.jsonl", dir / "annotations.jsonl", dir / "ground_truth.jsonl"};
  {
    auto out = open_output(files.posts.string());
    for (const auto& p : corpus.posts) out << post_to_json(p).dump() << '\n';
  }
  {
    auto out = open_output(files.annotations.string());
    write_annotations(out, corpus.annotations);
  }
  {
    auto out = open_output(files.ground_truth.string());
    for (const auto& gt : corpus.truth) out << to_json(gt, corpus.config.seed).dump() << '\n';
  }
  return files;
}

}  // namespace petmood::synth
