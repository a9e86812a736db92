#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "petmood/error.hpp"

namespace petmood {

using json = nlohmann::json;
// Output records keep the documented field order.
using ordered_json = nlohmann::ordered_json;

// A rejected input line.
struct LineDiagnostic {
  std::size_t line = 0;  // 1-based
  std::string message;

  friend bool operator==(const LineDiagnostic&, const LineDiagnostic&) = default;
};

enum class IngestMode { lenient, strict };

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

// Calls fn(line_number, text) for each non-blank line. Trailing '\r' is stripped.
template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    fn(line_no, text);
  }
}

template <typename Range>
void write_jsonl(std::ostream& out, const Range& records) {
  for (const auto& r : records) out << r.dump() << '\n';
}

// Reads a required field with a readable diagnostic on absence or wrong type.
template <typename T>
T require_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has wrong type");
  }
}

}  // namespace petmood
