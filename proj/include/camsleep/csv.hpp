#pragma once

#include <charconv>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "camsleep/common.hpp"

namespace camsleep::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Splits on commas. Quoting is not supported; none of the formats need it.
inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(pos)));
      break;
    }
    out.push_back(trim(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("bad number '" + std::string(s) + "'");
  return v;
}

inline long long parse_int(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("bad integer '" + std::string(s) + "'");
  return v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

/// Fixed-point formatting used by every CSV writer so outputs are byte-stable.
inline std::string fixed(double v, int places = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

/// Reads a header line and checks it matches `expected` exactly (after trimming).
inline void expect_header(std::istream& in, std::string_view expected, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) return;  // empty file
  if (trim(line) != expected) {
    throw Error(path + ": expected header '" + std::string(expected) + "', got '" + std::string(trim(line)) + "'");
  }
}

}  // namespace camsleep::csv
