#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ocacnn/error.hpp"

namespace ocacnn::detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view text) {
  text = trim(text);
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

inline double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  std::string owned(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(owned, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (owned.empty() || used != owned.size()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + owned + "'");
  }
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(std::string(key) + ": expected true/false, got '" + std::string(text) + "'");
}

inline std::vector<std::size_t> parse_size_list(std::string_view key, std::string_view text, char sep) {
  std::vector<std::size_t> out;
  for (auto part : split(trim(text), sep)) out.push_back(parse_int<std::size_t>(key, part));
  return out;
}

template <typename Range>
std::string join(const Range& values, char sep) {
  std::string out;
  bool first = true;
  for (const auto& v : values) {
    if (!first) out += sep;
    out += std::to_string(v);
    first = false;
  }
  return out;
}

}  // namespace ocacnn::detail
