#pragma once

#include <array>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "petmood/error.hpp"
#include "petmood/jsonl.hpp"
#include "petmood/keyvalue.hpp"
#include "petmood/pipeline.hpp"

// Pipeline tunables resolved from four layers, highest first: command-line
// flags, environment variables, a settings file, built-in defaults.
namespace petmood {

struct SettingKey {
  std::string_view key;
  std::string_view env;
};

inline constexpr std::array<SettingKey, 16> kSettingKeys{{
    {"min_selfies", "PETMOOD_MIN_SELFIES"},
    {"min_area_ratio", "PETMOOD_MIN_AREA_RATIO"},
    {"min_gap_days", "PETMOOD_MIN_GAP_DAYS"},
    {"pet_conf", "PETMOOD_PET_CONF"},
    {"bin_width", "PETMOOD_BIN_WIDTH"},
    {"pool_min_expected", "PETMOOD_POOL_MIN_EXPECTED"},
    {"strict", "PETMOOD_STRICT"},
    {"window", "PETMOOD_WINDOW"},
    {"granularity_days", "PETMOOD_GRANULARITY_DAYS"},
    {"annotator_url", "ANNOTATOR_URL"},
    {"batch_size", "PETMOOD_BATCH_SIZE"},
    {"max_parallel", "PETMOOD_MAX_PARALLEL"},
    {"max_attempts", "PETMOOD_MAX_ATTEMPTS"},
    {"initial_backoff_ms", "PETMOOD_INITIAL_BACKOFF_MS"},
    {"timeout_s", "PETMOOD_TIMEOUT_S"},
    {"threads", "PETMOOD_THREADS"},
}};

using SettingMap = std::map<std::string, std::string, std::less<>>;
using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;

inline bool is_setting_key(std::string_view key) {
  for (const auto& k : kSettingKeys) {
    if (k.key == key) return true;
  }
  return false;
}

inline std::optional<std::string> process_env(std::string_view name) {
  if (const char* v = std::getenv(std::string(name).c_str()); v != nullptr && *v != '\0') return std::string(v);
  return std::nullopt;
}

inline SettingMap read_settings(std::istream& in, const std::string& source = "settings") {
  SettingMap out;
  kv::for_each_pair(in, [&](std::size_t line_no, const std::string& key, const std::string& value) {
    if (!is_setting_key(key)) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": unknown setting '" + key + "'");
    }
    out[key] = value;
  });
  return out;
}

inline SettingMap read_settings_file(const std::string& path) {
  auto in = open_input(path);
  return read_settings(in, path);
}

inline void apply_setting(PipelineConfig& c, std::string_view key_view, const std::string& v) {
  const std::string key(key_view);
  const auto non_negative = [&] {
    const auto i = kv::parse_int(key, v);
    if (i < 0) throw ValidationError("setting '" + key + "' must be >= 0");
    return i;
  };
  if (key == "min_selfies") c.min_selfies = static_cast<int>(non_negative());
  else if (key == "min_area_ratio") c.min_area_ratio = kv::parse_double(key, v);
  else if (key == "min_gap_days") c.min_gap_days = kv::parse_double(key, v);
  else if (key == "pet_conf") c.pet_conf = kv::parse_double(key, v);
  else if (key == "bin_width") c.bin_width = kv::parse_double(key, v);
  else if (key == "pool_min_expected") c.pool_min_expected = kv::parse_double(key, v);
  else if (key == "strict") c.ingest_mode = kv::parse_bool(key, v) ? IngestMode::strict : IngestMode::lenient;
  else if (key == "window") c.window = parse_window(v);
  else if (key == "granularity_days") c.granularity_days = kv::parse_double(key, v);
  else if (key == "annotator_url") c.annotator_url = v;
  else if (key == "batch_size") c.fetch.batch_size = static_cast<std::size_t>(non_negative());
  else if (key == "max_parallel") c.fetch.max_parallel = static_cast<std::size_t>(non_negative());
  else if (key == "max_attempts") c.fetch.retry.max_attempts = static_cast<int>(non_negative());
  else if (key == "initial_backoff_ms") c.fetch.retry.initial_backoff = std::chrono::milliseconds(non_negative());
  else if (key == "timeout_s") c.fetch.timeout = std::chrono::seconds(non_negative());
  else if (key == "threads") c.threads = static_cast<std::size_t>(non_negative());
  else throw ValidationError("unknown setting '" + key + "'");
}

// Picks each key from the highest layer that sets it, then validates.
inline PipelineConfig resolve_config(const SettingMap& flags, const EnvLookup& env, const SettingMap& file) {
  PipelineConfig c;
  for (const auto& k : kSettingKeys) {
    if (auto it = flags.find(k.key); it != flags.end()) {
      apply_setting(c, k.key, it->second);
    } else if (auto e = env ? env(k.env) : std::nullopt) {
      try {
        apply_setting(c, k.key, *e);
      } catch (const ValidationError& err) {
        throw ValidationError(std::string(k.env) + ": " + err.what());
      }
    } else if (auto f = file.find(k.key); f != file.end()) {
      apply_setting(c, k.key, f->second);
    }
  }
  c.validate();
  return c;
}

}  // namespace petmood
