#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "petmood/error.hpp"

namespace petmood {

using Timestamp = std::int64_t;  // UTC seconds since epoch

inline constexpr Timestamp kSecondsPerDay = 86400;

// Half-open interval [start, end).
struct StudyWindow {
  Timestamp start = 0;
  Timestamp end = 0;

  StudyWindow() = default;
  StudyWindow(Timestamp s, Timestamp e) : start(s), end(e) {
    if (!(s < e)) throw ValidationError("study window requires start < end");
  }

  bool contains(Timestamp t) const noexcept { return t >= start && t < end; }
  Timestamp length() const noexcept { return end - start; }

  friend bool operator==(const StudyWindow&, const StudyWindow&) = default;
};

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS][Z]". Everything is UTC.
inline Timestamp parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  std::string s(text);
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.pop_back();
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  int consumed = 0;
  bool ok = false;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec, &consumed) == 6 ||
      std::sscanf(s.c_str(), "%4d-%2d-%2d %2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec, &consumed) == 6) {
    ok = consumed == static_cast<int>(s.size());
  } else if (sec = 0, std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d%n", &y, &mo, &d, &h, &mi, &consumed) == 5) {
    ok = consumed == static_cast<int>(s.size());
  } else if (h = mi = 0, std::sscanf(s.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) == 3) {
    ok = consumed == static_cast<int>(s.size());
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ok || !ymd.ok() || h > 23 || mi > 59 || sec > 60 || h < 0 || mi < 0 || sec < 0) {
    throw ValidationError("invalid ISO-8601 timestamp: '" + std::string(text) + "'");
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * kSecondsPerDay + h * 3600 + mi * 60 + sec;
}

inline std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{t}};
  const auto dp = floor<days>(tp);
  const year_month_day ymd{dp};
  const hh_mm_ss hms{tp - dp};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

// "<iso>/<iso>"
inline StudyWindow parse_window(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw ValidationError("window must be '<start>/<end>', got '" + std::string(text) + "'");
  }
  return StudyWindow(parse_iso8601(text.substr(0, slash)), parse_iso8601(text.substr(slash + 1)));
}

inline std::string format_window(const StudyWindow& w) {
  return format_iso8601(w.start) + "/" + format_iso8601(w.end);
}

// June through December 2015.
inline StudyWindow default_study_window() {
  return StudyWindow(parse_iso8601("2015-06-01"), parse_iso8601("2016-01-01"));
}

}  // namespace petmood
