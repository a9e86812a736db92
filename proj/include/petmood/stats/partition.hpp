#pragma once

#include <array>
#include <map>
#include <span>
#include <string>

#include "petmood/demographics.hpp"
#include "petmood/ownership.hpp"

namespace petmood::stats {

// Gender x ownership user counts.
struct CohortPartition {
  // [male, female][owner, non_owner]
  std::array<std::array<std::size_t, 2>, 2> counts{};
  std::size_t unknown_gender = 0;        // excluded
  std::size_t missing_demographics = 0;  // excluded

  static std::size_t gender_index(GenderVerdict g) { return g == GenderVerdict::male ? 0 : 1; }
  static std::size_t ownership_index(OwnershipStatus s) { return s == OwnershipStatus::owner ? 0 : 1; }

  std::size_t at(GenderVerdict g, OwnershipStatus s) const { return counts[gender_index(g)][ownership_index(s)]; }
  std::size_t gender_total(GenderVerdict g) const {
    const auto& row = counts[gender_index(g)];
    return row[0] + row[1];
  }
  std::size_t ownership_total(OwnershipStatus s) const {
    return counts[0][ownership_index(s)] + counts[1][ownership_index(s)];
  }
  std::size_t grand_total() const { return gender_total(GenderVerdict::male) + gender_total(GenderVerdict::female); }

  ordered_json to_json() const {
    const auto row = [&](GenderVerdict g) {
      return ordered_json{{"owner", at(g, OwnershipStatus::owner)},
                          {"non_owner", at(g, OwnershipStatus::non_owner)},
                          {"total", gender_total(g)}};
    };
    ordered_json j;
    j["male"] = row(GenderVerdict::male);
    j["female"] = row(GenderVerdict::female);
    j["total"] = {{"owner", ownership_total(OwnershipStatus::owner)},
                  {"non_owner", ownership_total(OwnershipStatus::non_owner)},
                  {"total", grand_total()}};
    j["excluded"] = {{"unknown_gender", unknown_gender}, {"missing_demographics", missing_demographics}};
    return j;
  }
};

inline CohortPartition partition_users(std::span<const OwnershipVerdict> verdicts,
                                       std::span<const UserDemographics> demographics) {
  std::map<std::string, GenderVerdict> gender_of;
  for (const auto& d : demographics) gender_of[d.user_id] = d.gender;
  CohortPartition p;
  for (const auto& v : verdicts) {
    const auto it = gender_of.find(v.user_id);
    if (it == gender_of.end()) {
      ++p.missing_demographics;
    } else if (it->second == GenderVerdict::unknown) {
      ++p.unknown_gender;
    } else {
      ++p.counts[CohortPartition::gender_index(it->second)][CohortPartition::ownership_index(v.status)];
    }
  }
  return p;
}

}  // namespace petmood::stats
