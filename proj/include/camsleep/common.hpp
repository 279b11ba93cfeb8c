#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace camsleep {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMinutesPerHour = 60;
inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kMinutesPerWeek = 7 * kMinutesPerDay;

/// Wall-clock instant at minute precision, counted from 1970-01-01T00:00.
/// Timestamps carry no zone; the dataset's local time is used throughout.
struct Timestamp {
  std::int64_t minutes = 0;

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
  constexpr Timestamp operator+(std::int64_t m) const { return {minutes + m}; }
  constexpr Timestamp operator-(std::int64_t m) const { return {minutes - m}; }
  constexpr std::int64_t operator-(const Timestamp& o) const { return minutes - o.minutes; }
};

/// Half-open range [begin, end).
struct TimeRange {
  Timestamp begin;
  Timestamp end;

  constexpr std::int64_t length() const { return end - begin; }
  constexpr bool contains(Timestamp t) const { return begin <= t && t < end; }
  friend constexpr bool operator==(const TimeRange&, const TimeRange&) = default;
};

namespace detail {

inline constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline constexpr std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
  return a - floor_div(a, b) * b;
}

}  // namespace detail

inline Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw Error("invalid calendar date");
  const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
  return {static_cast<std::int64_t>(days_since_epoch) * kMinutesPerDay + hour * kMinutesPerHour + minute};
}

inline int minute_of_day(Timestamp t) {
  return static_cast<int>(detail::floor_mod(t.minutes, kMinutesPerDay));
}

inline std::int64_t day_index(Timestamp t) { return detail::floor_div(t.minutes, kMinutesPerDay); }

/// Monday = 0 ... Sunday = 6. 1970-01-01 was a Thursday.
inline int day_of_week(Timestamp t) {
  return static_cast<int>(detail::floor_mod(day_index(t) + 3, 7));
}

/// Accepts `YYYY-MM-DDTHH:MM`, optionally with `:SS` (seconds are dropped) and
/// with a space instead of `T`.
inline Timestamp parse_timestamp(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  const std::string buf(text);
  const int n = std::sscanf(buf.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &h, &mi, &s);
  if (n < 6 || (sep != 'T' && sep != ' ') || h < 0 || h > 23 || mi < 0 || mi > 59 || mo < 1 || d < 1) {
    throw Error("bad timestamp '" + buf + "'");
  }
  return make_timestamp(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi);
}

inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const sys_days day{std::chrono::days{day_index(t)}};
  const year_month_day ymd{day};
  const int mod = minute_of_day(t);
  char out[32];
  std::snprintf(out, sizeof(out), "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), mod / 60, mod % 60);
  return out;
}

using Rng = std::mt19937_64;

/// Derives an independent generator for a named purpose ("data", "init",
/// "exploration", "noise", ...) from one top-level seed.
inline Rng substream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (h | 1ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return Rng{z};
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Box-Muller; one draw per call (the sine branch is discarded).
inline double standard_normal(Rng& rng) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace camsleep
