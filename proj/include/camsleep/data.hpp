#pragma once

// Parking event ingestion, minute-resolution occupancy series, occupancy
// categories, dataset statistics, chronological splits and the synthetic
// street generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "camsleep/common.hpp"
#include "camsleep/csv.hpp"

namespace camsleep {

struct ParkingEvent {
  std::string street_id;
  Timestamp arrival;
  Timestamp departure;

  std::int64_t duration_minutes() const { return departure - arrival; }
};

struct OccupancyThresholds {
  double high = 0.8;
  double medium = 0.6;

  void validate() const {
    if (!(0.0 < medium && medium < high && high <= 1.0)) {
      throw Error("occupancy thresholds must satisfy 0 < medium < high <= 1");
    }
  }
};

enum class OccupancyCategory { Low = 0, Medium = 1, High = 2 };

inline const char* to_string(OccupancyCategory c) {
  switch (c) {
    case OccupancyCategory::Low: return "Low";
    case OccupancyCategory::Medium: return "Medium";
    case OccupancyCategory::High: return "High";
  }
  return "?";
}

inline OccupancyCategory categorize(double value, const OccupancyThresholds& thresholds = {}) {
  if (!(value >= 0.0 && value <= 1.0)) throw Error("occupancy value outside [0,1]");
  if (value >= thresholds.high) return OccupancyCategory::High;
  if (value >= thresholds.medium) return OccupancyCategory::Medium;
  return OccupancyCategory::Low;
}

inline bool is_high(double value, const OccupancyThresholds& thresholds) { return value >= thresholds.high; }

/// Fraction of bays occupied, one value per minute starting at `start`.
struct OccupancySeries {
  std::string street_id;
  Timestamp start;
  int bay_count = 0;  // 0 when unknown (series loaded from an occupancy CSV)
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  Timestamp time_at(std::size_t i) const { return start + static_cast<std::int64_t>(i); }
  TimeRange range() const { return {start, start + static_cast<std::int64_t>(values.size())}; }

  /// Copy of the minutes in `r`, which must lie inside this series.
  OccupancySeries slice(TimeRange r) const {
    if (r.begin < start || r.end > range().end || r.end < r.begin) {
      throw Error("slice [" + format_timestamp(r.begin) + ", " + format_timestamp(r.end) + ") outside series " +
                  street_id);
    }
    OccupancySeries out{street_id, r.begin, bay_count, {}};
    const auto first = values.begin() + (r.begin - start);
    out.values.assign(first, first + r.length());
    return out;
  }
};

// ---------------------------------------------------------------------------
// Ingestion

struct IngestResult {
  std::vector<ParkingEvent> events;
  std::size_t rejected = 0;  // rows with departure < arrival
  std::size_t dropped = 0;   // rows entirely outside the requested range
};

/// Reads an event CSV (`street_id,arrival,departure`). Events that do not
/// overlap `range` are dropped; the returned events are sorted by arrival.
inline IngestResult ingest_events(std::istream& in, std::optional<TimeRange> range = std::nullopt,
                                  const std::string& source = "<stream>") {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    if (line_no == 1 && trimmed.starts_with("street_id")) continue;
    const auto fields = csv::split(trimmed);
    if (fields.size() != 3 || fields[0].empty()) {
      throw Error(source + ":" + std::to_string(line_no) + ": expected 3 fields street_id,arrival,departure");
    }
    ParkingEvent ev;
    try {
      ev = {std::string(fields[0]), parse_timestamp(fields[1]), parse_timestamp(fields[2])};
    } catch (const Error& e) {
      throw Error(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (ev.departure < ev.arrival) {
      ++result.rejected;
      continue;
    }
    if (range && !(ev.arrival < range->end && ev.departure > range->begin)) {
      ++result.dropped;
      continue;
    }
    result.events.push_back(std::move(ev));
  }
  std::stable_sort(result.events.begin(), result.events.end(),
                   [](const ParkingEvent& a, const ParkingEvent& b) { return a.arrival < b.arrival; });
  return result;
}

inline IngestResult ingest_events(const std::string& path, std::optional<TimeRange> range = std::nullopt) {
  auto in = csv::open_input(path);
  return ingest_events(in, range, path);
}

/// Bay inventory CSV: `street_id,bay_count`.
inline std::map<std::string, int> read_bay_counts(const std::string& path) {
  auto in = csv::open_input(path);
  std::map<std::string, int> bays;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty() || (line_no == 1 && trimmed.starts_with("street_id"))) continue;
    const auto fields = csv::split(trimmed);
    if (fields.size() != 2) throw Error(path + ":" + std::to_string(line_no) + ": expected street_id,bay_count");
    bays[std::string(fields[0])] = static_cast<int>(csv::parse_int(fields[1]));
  }
  return bays;
}

/// Each vehicle occupies the half-open interval [arrival, departure). Counts
/// above `bay_count` are clipped to full occupancy; minutes without events
/// are zero.
inline OccupancySeries build_occupancy(const std::vector<ParkingEvent>& events, int bay_count, TimeRange range,
                                       std::string street_id = {}) {
  if (bay_count < 1) throw Error("bay_count must be >= 1");
  if (range.length() < 0) throw Error("empty range");
  const auto n = static_cast<std::size_t>(range.length());
  std::vector<std::int64_t> delta(n + 1, 0);
  for (const auto& ev : events) {
    const auto lo = std::max(ev.arrival, range.begin) - range.begin;
    const auto hi = std::min(ev.departure, range.end) - range.begin;
    if (lo >= hi) continue;
    ++delta[static_cast<std::size_t>(lo)];
    --delta[static_cast<std::size_t>(hi)];
  }
  if (street_id.empty() && !events.empty()) street_id = events.front().street_id;
  OccupancySeries out{std::move(street_id), range.begin, bay_count, std::vector<double>(n)};
  std::int64_t running = 0;
  for (std::size_t t = 0; t < n; ++t) {
    running += delta[t];
    out.values[t] = std::min(1.0, static_cast<double>(running) / bay_count);
  }
  return out;
}

/// Groups events by street and builds one series per street with a known bay
/// count of at least `min_bays`. All blocks of a street share one series.
inline std::vector<OccupancySeries> build_streets(const std::vector<ParkingEvent>& events,
                                                  const std::map<std::string, int>& bays, TimeRange range,
                                                  int min_bays = 10) {
  std::map<std::string, std::vector<ParkingEvent>> by_street;
  for (const auto& ev : events) by_street[ev.street_id].push_back(ev);
  std::vector<OccupancySeries> out;
  for (const auto& [street, evs] : by_street) {
    const auto it = bays.find(street);
    if (it == bays.end() || it->second < min_bays) continue;
    out.push_back(build_occupancy(evs, it->second, range, street));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Occupancy CSV: street_id,timestamp,occupancy

inline constexpr const char* kOccupancyHeader = "street_id,timestamp,occupancy";

inline void write_occupancy_csv(std::ostream& out, const std::vector<OccupancySeries>& streets) {
  out << kOccupancyHeader << '\n';
  for (const auto& s : streets) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << s.street_id << ',' << format_timestamp(s.time_at(i)) << ',' << csv::fixed(s.values[i]) << '\n';
    }
  }
}

inline void write_occupancy_csv(const std::string& path, const std::vector<OccupancySeries>& streets) {
  auto out = csv::open_output(path);
  write_occupancy_csv(out, streets);
}

/// Streets are returned in first-appearance order. Gaps between the first
/// and last timestamp of a street are filled with zero occupancy.
inline std::vector<OccupancySeries> read_occupancy_csv(std::istream& in, const std::string& source = "<stream>") {
  std::vector<OccupancySeries> streets;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::vector<std::pair<Timestamp, double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = csv::trim(line);
    if (trimmed.empty() || (line_no == 1 && trimmed.starts_with("street_id"))) continue;
    const auto fields = csv::split(trimmed);
    if (fields.size() != 3) throw Error(source + ":" + std::to_string(line_no) + ": expected 3 fields");
    try {
      std::string id(fields[0]);
      const double v = csv::parse_double(fields[2]);
      if (!(v >= 0.0 && v <= 1.0)) throw Error("occupancy outside [0,1]");
      if (!index.contains(id)) {
        index[id] = streets.size();
        streets.push_back({id, {}, 0, {}});
      }
      rows[id].emplace_back(parse_timestamp(fields[1]), v);
    } catch (const Error& e) {
      throw Error(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (auto& s : streets) {
    auto& r = rows[s.street_id];
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    s.start = r.front().first;
    s.values.assign(static_cast<std::size_t>(r.back().first - s.start + 1), 0.0);
    for (const auto& [t, v] : r) s.values[static_cast<std::size_t>(t - s.start)] = v;
  }
  return streets;
}

inline std::vector<OccupancySeries> read_occupancy_csv(const std::string& path) {
  auto in = csv::open_input(path);
  return read_occupancy_csv(in, path);
}

// ---------------------------------------------------------------------------
// Statistics

struct CategoryCounts {
  std::size_t high = 0;
  std::size_t medium = 0;
  std::size_t low = 0;
};

inline CategoryCounts count_categories(const std::vector<double>& values, const OccupancyThresholds& th) {
  CategoryCounts c;
  for (double v : values) {
    switch (categorize(v, th)) {
      case OccupancyCategory::High: ++c.high; break;
      case OccupancyCategory::Medium: ++c.medium; break;
      case OccupancyCategory::Low: ++c.low; break;
    }
  }
  return c;
}

struct StreetStatistics {
  std::string street_id;
  int bay_count = 0;
  std::size_t total_minutes = 0;
  std::size_t high_minutes = 0;
  double high_pct = 0.0;
};

struct DatasetStatistics {
  std::vector<StreetStatistics> streets;
  std::size_t total_bays = 0;
  double avg_bays = 0.0;
  std::size_t min_high = 0;
  std::size_t max_high = 0;
  double avg_high = 0.0;
  double avg_total_minutes = 0.0;
  double avg_high_pct = 0.0;
};

inline DatasetStatistics dataset_statistics(const std::vector<OccupancySeries>& series,
                                            const OccupancyThresholds& th = {}) {
  if (series.empty()) throw Error("dataset_statistics needs at least one street");
  DatasetStatistics out;
  out.min_high = static_cast<std::size_t>(-1);
  for (const auto& s : series) {
    const auto counts = count_categories(s.values, th);
    StreetStatistics st{s.street_id, s.bay_count, s.size(), counts.high,
                        s.empty() ? 0.0 : 100.0 * static_cast<double>(counts.high) / static_cast<double>(s.size())};
    out.total_bays += static_cast<std::size_t>(std::max(0, s.bay_count));
    out.min_high = std::min(out.min_high, st.high_minutes);
    out.max_high = std::max(out.max_high, st.high_minutes);
    out.avg_high += static_cast<double>(st.high_minutes);
    out.avg_total_minutes += static_cast<double>(st.total_minutes);
    out.avg_high_pct += st.high_pct;
    out.streets.push_back(std::move(st));
  }
  const auto n = static_cast<double>(series.size());
  out.avg_bays = static_cast<double>(out.total_bays) / n;
  out.avg_high /= n;
  out.avg_total_minutes /= n;
  out.avg_high_pct /= n;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic streets

enum class ProfileCluster { BimodalNoon, Bimodal7pm, Weekday, Weekend, Uniform };

inline constexpr std::array<ProfileCluster, 5> kAllClusters = {ProfileCluster::BimodalNoon, ProfileCluster::Bimodal7pm,
                                                               ProfileCluster::Weekday, ProfileCluster::Weekend,
                                                               ProfileCluster::Uniform};

inline const char* to_string(ProfileCluster c) {
  switch (c) {
    case ProfileCluster::BimodalNoon: return "bimodal-noon";
    case ProfileCluster::Bimodal7pm: return "bimodal-7pm";
    case ProfileCluster::Weekday: return "weekday";
    case ProfileCluster::Weekend: return "weekend";
    case ProfileCluster::Uniform: return "uniform";
  }
  return "?";
}

inline ProfileCluster parse_cluster(std::string_view tag) {
  for (auto c : kAllClusters) {
    if (tag == to_string(c)) return c;
  }
  throw Error("unknown profile cluster '" + std::string(tag) + "'");
}

struct SyntheticProfile {
  ProfileCluster cluster = ProfileCluster::Uniform;
  double peak_occupancy = 0.9;
  double noise_scale = 0.03;
  std::uint64_t seed = 0;
  /// Same bump timing and height every day; only the noise varies.
  bool stationary = false;
};

/// Monday 2019-01-07, the default first day of generated streets.
inline Timestamp default_synthetic_start() { return make_timestamp(2019, 1, 7); }

namespace detail {

struct Bump {
  double center_hour;
  double amplitude;  // relative to the main peak
  double sigma_minutes;
};

struct ClusterShape {
  std::vector<Bump> bumps;
  std::array<double, 7> day_activity;  // Monday first
};

inline ClusterShape cluster_shape(ProfileCluster c) {
  constexpr std::array<double, 7> kFlat = {1, 1, 1, 1, 1, 1, 1};
  switch (c) {
    case ProfileCluster::BimodalNoon:
      return {{{11.5, 1.0, 55.0}, {14.5, 0.92, 50.0}}, kFlat};
    case ProfileCluster::Bimodal7pm:
      return {{{13.0, 0.72, 50.0}, {19.0, 1.0, 60.0}}, kFlat};
    case ProfileCluster::Weekday:
      return {{{12.5, 1.0, 80.0}}, {1, 1, 1, 1, 1, 0.7, 0.7}};
    case ProfileCluster::Weekend:
      return {{{12.5, 1.0, 80.0}}, {0.7, 0.7, 0.7, 0.7, 0.7, 1, 1}};
    case ProfileCluster::Uniform:
      return {{{12.5, 1.0, 80.0}}, kFlat};
  }
  throw Error("unknown profile cluster");
}

/// Night floor 0.1 rising to a 0.3 daytime level between roughly 07:00 and 22:00.
inline double base_load(double minute) {
  const auto logistic = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double rise = logistic((minute - 7.0 * 60) / 30.0);
  const double fall = logistic((22.0 * 60 - minute) / 30.0);
  return 0.1 + 0.2 * rise * fall;
}

}  // namespace detail

/// Base load plus per-day Gaussian bumps (with day-to-day jitter in timing
/// and height) plus bounded autocorrelated noise. Deterministic in the seed.
inline OccupancySeries generate_synthetic(const SyntheticProfile& profile, int days, std::string street_id = {},
                                          Timestamp start = default_synthetic_start()) {
  if (days < 1) throw Error("generate_synthetic needs days >= 1");
  const auto shape = detail::cluster_shape(profile.cluster);
  if (street_id.empty()) street_id = std::string(to_string(profile.cluster)) + "-" + std::to_string(profile.seed);
  Rng rng = substream(profile.seed, "data");
  constexpr double kDaytimeLevel = 0.3;
  const double lift = std::max(0.0, profile.peak_occupancy - kDaytimeLevel);

  OccupancySeries out{std::move(street_id), start, 100, std::vector<double>(static_cast<std::size_t>(days) * kMinutesPerDay)};
  double noise = 0.0;
  for (int d = 0; d < days; ++d) {
    const Timestamp day_start = start + static_cast<std::int64_t>(d) * kMinutesPerDay;
    const double activity = shape.day_activity[static_cast<std::size_t>(day_of_week(day_start))];
    const double jitter_scale = profile.stationary ? 0.0 : 1.0;
    const double height = activity * (1.0 + jitter_scale * 0.04 * standard_normal(rng));
    std::vector<std::pair<double, double>> centers;  // (center minute, amplitude)
    for (const auto& b : shape.bumps) {
      const double jitter = jitter_scale * std::clamp(20.0 * standard_normal(rng), -60.0, 60.0);
      centers.emplace_back(b.center_hour * 60.0 + jitter, b.amplitude);
    }
    for (int m = 0; m < kMinutesPerDay; ++m) {
      double bump = 0.0;
      for (std::size_t i = 0; i < centers.size(); ++i) {
        const double z = (m - centers[i].first) / shape.bumps[i].sigma_minutes;
        bump = std::max(bump, centers[i].second * std::exp(-0.5 * z * z));
      }
      const double eta = profile.noise_scale > 0.0 ? 0.25 * profile.noise_scale * standard_normal(rng) : 0.0;
      noise = std::clamp(0.95 * noise + eta, -profile.noise_scale, profile.noise_scale);
      const double v = detail::base_load(m) + lift * height * bump + noise;
      out.values[static_cast<std::size_t>(d) * kMinutesPerDay + static_cast<std::size_t>(m)] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

/// o ← clamp(o·(1 + x/100), 0, 1) with x ~ U[−δ, δ] drawn per value.
inline void apply_multiplicative_noise(std::vector<double>& values, double delta, Rng& rng) {
  for (auto& v : values) {
    const double x = uniform(rng, -delta, delta);
    v = std::clamp(v * (1.0 + x / 100.0), 0.0, 1.0);
  }
}

// ---------------------------------------------------------------------------
// Splits

struct StreetRange {
  std::string street_id;
  TimeRange range;
};

struct DatasetSplit {
  std::vector<StreetRange> train;
  std::vector<StreetRange> validation;
  std::vector<StreetRange> test;
  std::vector<std::string> cityscale;
};

struct SplitRatios {
  double train = 0.5;
  double validation = 0.25;
  double test = 0.25;
};

/// Chronological split on whole days: train first, then validation, then
/// test, which also receives any leftover partial day. Streets listed in
/// `cityscale` are held out entirely and only recorded by id.
inline DatasetSplit split_dataset(const std::vector<OccupancySeries>& streets, SplitRatios ratios = {},
                                  std::vector<std::string> cityscale = {}) {
  if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw Error("split ratios must be positive and sum to 1");
  }
  DatasetSplit out;
  out.cityscale = std::move(cityscale);
  for (const auto& s : streets) {
    if (std::find(out.cityscale.begin(), out.cityscale.end(), s.street_id) != out.cityscale.end()) continue;
    const auto days = static_cast<std::int64_t>(s.size()) / kMinutesPerDay;
    if (days < 4) throw Error("street " + s.street_id + " is shorter than 4 days and cannot be split");
    const auto train_days = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(days * ratios.train)));
    const auto val_days = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(days * ratios.validation)));
    const Timestamp a = s.start;
    const Timestamp b = a + train_days * kMinutesPerDay;
    const Timestamp c = b + val_days * kMinutesPerDay;
    const Timestamp d = s.range().end;
    out.train.push_back({s.street_id, {a, b}});
    out.validation.push_back({s.street_id, {b, c}});
    out.test.push_back({s.street_id, {c, d}});
  }
  return out;
}

inline const OccupancySeries& find_street(const std::vector<OccupancySeries>& streets, const std::string& id) {
  for (const auto& s : streets) {
    if (s.street_id == id) return s;
  }
  throw Error("unknown street '" + id + "'");
}

/// Materializes the series slices named by a split partition.
inline std::vector<OccupancySeries> slices(const std::vector<OccupancySeries>& streets,
                                           const std::vector<StreetRange>& part) {
  std::vector<OccupancySeries> out;
  out.reserve(part.size());
  for (const auto& sr : part) out.push_back(find_street(streets, sr.street_id).slice(sr.range));
  return out;
}

}  // namespace camsleep
