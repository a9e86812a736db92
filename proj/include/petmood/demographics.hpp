#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "petmood/annotate.hpp"
#include "petmood/error.hpp"
#include "petmood/stats/summation.hpp"

namespace petmood {

enum class GenderVerdict { male, female, unknown };

inline std::string_view to_string(GenderVerdict g) {
  switch (g) {
    case GenderVerdict::male: return "male";
    case GenderVerdict::female: return "female";
    case GenderVerdict::unknown: return "unknown";
  }
  return "unknown";
}

inline GenderVerdict parse_gender_verdict(std::string_view s) {
  if (s == "male") return GenderVerdict::male;
  if (s == "female") return GenderVerdict::female;
  if (s == "unknown") return GenderVerdict::unknown;
  throw ValidationError("unknown gender verdict '" + std::string(s) + "'");
}

struct UserDemographics {
  std::string user_id;
  GenderVerdict gender = GenderVerdict::unknown;
  std::size_t support = 0;  // selfies that voted
  double agreement = 0.0;   // plurality fraction of the votes
};

// Majority vote of the selfies' faces; a split vote goes to the larger summed
// gender confidence, and an exact tie stays unknown.
inline UserDemographics infer_gender(std::span<const ImageAnnotation> selfies, std::string user_id = {}) {
  UserDemographics d;
  d.user_id = std::move(user_id);
  std::size_t male = 0, female = 0;
  std::vector<double> male_conf, female_conf;
  for (const auto& a : selfies) {
    if (a.faces.size() != 1) {
      throw ValidationError("gender inference expects selfies with exactly one face ('" + a.image_ref + "')");
    }
    const auto& f = a.faces.front();
    if (f.gender == Gender::male) {
      ++male;
      male_conf.push_back(f.gender_confidence);
    } else {
      ++female;
      female_conf.push_back(f.gender_confidence);
    }
  }
  d.support = male + female;
  if (d.support == 0) return d;
  d.agreement = static_cast<double>(std::max(male, female)) / static_cast<double>(d.support);
  if (male != female) {
    d.gender = male > female ? GenderVerdict::male : GenderVerdict::female;
  } else {
    // sorted before summing so the tie-break ignores input order
    std::sort(male_conf.begin(), male_conf.end());
    std::sort(female_conf.begin(), female_conf.end());
    const double m = stats::pairwise_sum(male_conf), fm = stats::pairwise_sum(female_conf);
    if (m != fm) d.gender = m > fm ? GenderVerdict::male : GenderVerdict::female;
  }
  return d;
}

inline ordered_json to_json(const UserDemographics& d) {
  ordered_json j;
  j["user_id"] = d.user_id;
  j["gender"] = to_string(d.gender);
  j["support"] = d.support;
  j["agreement"] = d.agreement;
  return j;
}

inline UserDemographics demographics_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("demographics record is not a JSON object");
  UserDemographics d;
  d.user_id = require_field<std::string>(j, "user_id");
  d.gender = parse_gender_verdict(require_field<std::string>(j, "gender"));
  if (j.contains("support")) d.support = require_field<std::size_t>(j, "support");
  if (j.contains("agreement")) d.agreement = require_field<double>(j, "agreement");
  return d;
}

}  // namespace petmood
