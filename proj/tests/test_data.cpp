#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "camsleep/data.hpp"
#include "camsleep/profiles.hpp"

using namespace camsleep;

namespace {

Timestamp at(const char* s) { return parse_timestamp(s); }

// Independent oracle: count covering intervals minute by minute.
std::vector<double> brute_force_occupancy(const std::vector<ParkingEvent>& events, int bays, TimeRange range) {
  std::vector<double> out;
  for (Timestamp t = range.begin; t < range.end; t = t + 1) {
    int n = 0;
    for (const auto& e : events) n += (e.arrival <= t && t < e.departure) ? 1 : 0;
    out.push_back(std::min(1.0, static_cast<double>(n) / bays));
  }
  return out;
}

}  // namespace

TEST(Ingest, SingleRow) {
  std::istringstream in("street_id,arrival,departure\nS1,2014-03-01T08:00,2014-03-01T09:30\n");
  const auto r = ingest_events(in);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].street_id, "S1");
  EXPECT_EQ(r.events[0].duration_minutes(), 90);
}

TEST(Ingest, EmptyFile) {
  std::istringstream in("");
  EXPECT_TRUE(ingest_events(in).events.empty());
}

TEST(Ingest, RejectsBackwardsStay) {
  std::istringstream in("S1,2014-03-01T09:00,2014-03-01T08:00\nS1,2014-03-01T08:00,2014-03-01T08:30\n");
  const auto r = ingest_events(in);
  EXPECT_EQ(r.rejected, 1u);
  EXPECT_EQ(r.events.size(), 1u);
}

TEST(Ingest, MalformedRowNamesLine) {
  std::istringstream in("street_id,arrival,departure\nS1,2014-03-01T08:00\n");
  try {
    ingest_events(in, std::nullopt, "events.csv");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("events.csv:2"), std::string::npos) << e.what();
  }
}

TEST(Ingest, SortsAndDropsOutOfRange) {
  std::istringstream in(
      "S1,2014-03-02T08:00,2014-03-02T09:00\n"
      "S1,2014-03-01T08:00,2014-03-01T09:00\n"
      "S1,2014-02-01T08:00,2014-02-01T09:00\n");
  const auto r = ingest_events(in, TimeRange{at("2014-03-01T00:00"), at("2014-03-03T00:00")});
  ASSERT_EQ(r.events.size(), 2u);
  EXPECT_EQ(r.dropped, 1u);
  EXPECT_LT(r.events[0].arrival, r.events[1].arrival);
}

TEST(BuildOccupancy, SingleVehicle) {
  const TimeRange day{at("2014-03-01T00:00"), at("2014-03-02T00:00")};
  const auto s = build_occupancy({{"S1", at("2014-03-01T08:00"), at("2014-03-01T09:30")}}, 10, day);
  ASSERT_EQ(s.size(), 1440u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool inside = i >= 480 && i < 570;
    ASSERT_DOUBLE_EQ(s.values[i], inside ? 0.1 : 0.0) << "minute " << i;
  }
}

TEST(BuildOccupancy, NoEventsIsZero) {
  const TimeRange r{at("2014-03-01T00:00"), at("2014-03-01T02:00")};
  const auto s = build_occupancy({}, 10, r, "S");
  EXPECT_EQ(s.size(), 120u);
  EXPECT_TRUE(std::all_of(s.values.begin(), s.values.end(), [](double v) { return v == 0.0; }));
}

TEST(BuildOccupancy, ClipsOverfullStreet) {
  const Timestamp t = at("2014-03-01T10:00");
  std::vector<ParkingEvent> evs(12, ParkingEvent{"S", t, t + 1});
  const auto s = build_occupancy(evs, 10, {t, t + 2});
  EXPECT_DOUBLE_EQ(s.values[0], 1.0);
  EXPECT_DOUBLE_EQ(s.values[1], 0.0);
}

TEST(BuildOccupancy, ZeroBaysIsError) {
  EXPECT_THROW(build_occupancy({}, 0, {Timestamp{0}, Timestamp{10}}), Error);
}

TEST(BuildOccupancy, MatchesBruteForceOnRandomEvents) {
  Rng rng = substream(11, "events");
  const TimeRange range{Timestamp{1000}, Timestamp{1600}};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<ParkingEvent> evs;
    const int n = 1 + static_cast<int>(uniform_index(rng, 40));
    for (int i = 0; i < n; ++i) {
      // Some events straddle the range edges.
      const Timestamp a{900 + static_cast<std::int64_t>(uniform_index(rng, 800))};
      evs.push_back({"S", a, a + static_cast<std::int64_t>(uniform_index(rng, 200))});
    }
    const int bays = 1 + static_cast<int>(uniform_index(rng, 12));
    const auto got = build_occupancy(evs, bays, range);
    ASSERT_EQ(got.values, brute_force_occupancy(evs, bays, range)) << "trial " << trial;
  }
}

TEST(BuildStreets, FiltersSmallStreets) {
  const Timestamp t = at("2014-03-01T10:00");
  const std::vector<ParkingEvent> evs = {{"big", t, t + 5}, {"small", t, t + 5}, {"unknown", t, t + 5}};
  const auto streets = build_streets(evs, {{"big", 20}, {"small", 4}}, {t, t + 10});
  ASSERT_EQ(streets.size(), 1u);
  EXPECT_EQ(streets[0].street_id, "big");
  EXPECT_EQ(build_streets(evs, {{"big", 20}, {"small", 4}}, {t, t + 10}, 1).size(), 2u);
}

TEST(Categorize, TableBoundaries) {
  EXPECT_EQ(categorize(0.80), OccupancyCategory::High);
  EXPECT_EQ(categorize(0.60), OccupancyCategory::Medium);
  EXPECT_EQ(categorize(0.599), OccupancyCategory::Low);
  EXPECT_EQ(categorize(0.0), OccupancyCategory::Low);
  EXPECT_EQ(categorize(1.0), OccupancyCategory::High);
  EXPECT_THROW(categorize(1.01), Error);
  EXPECT_THROW(categorize(-0.01), Error);
}

TEST(Categorize, MonotoneAndTotal) {
  int previous = 0;
  for (int i = 0; i <= 1000; ++i) {
    const int c = static_cast<int>(categorize(i / 1000.0));
    ASSERT_GE(c, previous);
    previous = c;
  }
}

TEST(Categorize, CountsPartitionSeries) {
  const auto s = generate_synthetic({ProfileCluster::BimodalNoon, 0.9, 0.03, 5}, 3);
  const auto c = count_categories(s.values, {});
  EXPECT_EQ(c.high + c.medium + c.low, s.size());
}

TEST(Thresholds, Validate) {
  EXPECT_NO_THROW((OccupancyThresholds{0.8, 0.6}.validate()));
  EXPECT_THROW((OccupancyThresholds{0.6, 0.8}.validate()), Error);
  EXPECT_THROW((OccupancyThresholds{1.2, 0.6}.validate()), Error);
}

TEST(Statistics, FullYearMinuteCount) {
  OccupancySeries year{"S", make_timestamp(2019, 1, 1), 10, std::vector<double>(365 * 1440, 0.0)};
  const auto st = dataset_statistics({year});
  EXPECT_EQ(st.streets[0].total_minutes, 525600u);
  EXPECT_EQ(st.streets[0].high_minutes, 0u);
}

TEST(Statistics, Aggregates) {
  OccupancySeries a{"a", Timestamp{0}, 10, {0.9, 0.9, 0.1, 0.1}};
  OccupancySeries b{"b", Timestamp{0}, 30, {0.1, 0.1, 0.1, 0.1}};
  const auto st = dataset_statistics({a, b});
  EXPECT_EQ(st.min_high, 0u);
  EXPECT_EQ(st.max_high, 2u);
  EXPECT_DOUBLE_EQ(st.avg_high_pct, 25.0);
  EXPECT_DOUBLE_EQ(st.avg_bays, 20.0);
}

TEST(OccupancyCsv, RoundTrip) {
  const auto s = generate_synthetic({ProfileCluster::Weekday, 0.9, 0.03, 1}, 2, "w");
  std::stringstream buf;
  write_occupancy_csv(buf, {s});
  const auto back = read_occupancy_csv(buf);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].start, s.start);
  ASSERT_EQ(back[0].size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) ASSERT_NEAR(back[0].values[i], s.values[i], 5e-7);
}

TEST(OccupancyCsv, GapsAreZero) {
  std::istringstream in("street_id,timestamp,occupancy\nS,2014-03-01T00:00,0.5\nS,2014-03-01T00:03,0.25\n");
  const auto s = read_occupancy_csv(in);
  ASSERT_EQ(s[0].values, (std::vector<double>{0.5, 0.0, 0.0, 0.25}));
}

TEST(OccupancyCsv, RejectsOutOfRangeValue) {
  std::istringstream in("street_id,timestamp,occupancy\nS,2014-03-01T00:00,1.5\n");
  EXPECT_THROW(read_occupancy_csv(in), Error);
}

TEST(Synthetic, Deterministic) {
  const SyntheticProfile p{ProfileCluster::Uniform, 0.9, 0.03, 7};
  EXPECT_EQ(generate_synthetic(p, 14).values, generate_synthetic(p, 14).values);
  const SyntheticProfile q{ProfileCluster::Uniform, 0.9, 0.03, 8};
  EXPECT_NE(generate_synthetic(p, 14).values, generate_synthetic(q, 14).values);
}

TEST(Synthetic, ValuesInUnitInterval) {
  for (auto c : kAllClusters) {
    const auto s = generate_synthetic({c, 1.0, 0.2, 3}, 7);
    for (double v : s.values) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(Synthetic, WeekdayConcentratesOnWeekdays) {
  const auto s = generate_synthetic({ProfileCluster::Weekday, 0.95, 0.03, 2}, 28);
  std::array<double, 7> high{};
  for (std::size_t i = 0; i < s.size(); ++i) high[day_of_week(s.time_at(i))] += s.values[i] >= 0.8;
  const double weekday = (high[0] + high[1] + high[2] + high[3] + high[4]) / 5.0;
  const double weekend = (high[5] + high[6]) / 2.0;
  EXPECT_LT(weekend, weekday);
}

TEST(Synthetic, WeekendConcentratesOnWeekends) {
  const auto s = generate_synthetic({ProfileCluster::Weekend, 0.95, 0.03, 2}, 28);
  const auto h = high_occupancy_histogram(s, HistogramAxis::DayOfWeek);
  EXPECT_GT(std::min(h.weights[5], h.weights[6]), std::max({h.weights[0], h.weights[1], h.weights[2], h.weights[3], h.weights[4]}));
}

TEST(Synthetic, BimodalNoonPeaksAroundMidday) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = generate_synthetic({ProfileCluster::BimodalNoon, 0.9, 0.03, seed}, 28);
    const auto& w = high_occupancy_histogram(s, HistogramAxis::HourOfDay).weights;
    const auto peak = std::max_element(w.begin(), w.end()) - w.begin();
    EXPECT_GE(peak, 11);
    EXPECT_LE(peak, 13);
    // Second mode in the early afternoon, with a dip between the two.
    EXPECT_GT(w[14], 0.5);
    EXPECT_LT(w[13], w[14]);
  }
}

TEST(Synthetic, Bimodal7pmPeaksInEvening) {
  const auto s = generate_synthetic({ProfileCluster::Bimodal7pm, 0.9, 0.03, 4}, 28);
  const auto h = high_occupancy_histogram(s, HistogramAxis::HourOfDay);
  const auto peak = std::max_element(h.weights.begin(), h.weights.end()) - h.weights.begin();
  EXPECT_EQ(peak, 19);
}

TEST(Synthetic, StationaryDaysDifferOnlyByNoise) {
  SyntheticProfile p{ProfileCluster::BimodalNoon, 0.9, 0.03, 4, true};
  const auto s = generate_synthetic(p, 10);
  for (int d = 1; d < 10; ++d) {
    for (int m = 0; m < kMinutesPerDay; ++m) {
      const double a = s.values[static_cast<std::size_t>(m)];
      const double b = s.values[static_cast<std::size_t>(d * kMinutesPerDay + m)];
      ASSERT_LE(std::abs(a - b), 2 * 0.03 + 1e-12) << "day " << d << " minute " << m;
    }
  }
  p.noise_scale = 0.0;
  const auto clean = generate_synthetic(p, 3);
  for (int m = 0; m < kMinutesPerDay; ++m) {
    ASSERT_EQ(clean.values[static_cast<std::size_t>(m)], clean.values[static_cast<std::size_t>(2 * kMinutesPerDay + m)]);
  }
}

TEST(Synthetic, RejectsBadInput) {
  EXPECT_THROW(generate_synthetic({}, 0), Error);
  EXPECT_THROW(parse_cluster("bimodal-3am"), Error);
  EXPECT_EQ(parse_cluster("weekend"), ProfileCluster::Weekend);
}

TEST(Split, ProportionsForYear) {
  OccupancySeries s{"S", make_timestamp(2019, 1, 1), 10, std::vector<double>(365 * 1440, 0.0)};
  const auto sp = split_dataset({s});
  EXPECT_EQ(sp.train[0].range.length() / 1440, 182);
  EXPECT_EQ(sp.validation[0].range.length() / 1440, 91);
  EXPECT_EQ(sp.test[0].range.length() / 1440, 92);
}

TEST(Split, DisjointOrderedAndCovering) {
  std::vector<OccupancySeries> streets;
  for (int days : {4, 9, 30, 101}) {
    streets.push_back({"S" + std::to_string(days), make_timestamp(2019, 1, 1), 10,
                       std::vector<double>(static_cast<std::size_t>(days) * 1440 + 17, 0.0)});
  }
  const auto sp = split_dataset(streets);
  for (std::size_t i = 0; i < streets.size(); ++i) {
    const auto& tr = sp.train[i].range;
    const auto& va = sp.validation[i].range;
    const auto& te = sp.test[i].range;
    EXPECT_EQ(tr.begin, streets[i].start);
    EXPECT_EQ(tr.end, va.begin);
    EXPECT_EQ(va.end, te.begin);
    EXPECT_EQ(te.end, streets[i].range().end);
    EXPECT_GT(tr.length(), 0);
    EXPECT_GT(va.length(), 0);
    EXPECT_GT(te.length(), 0);
  }
}

TEST(Split, ShortSeriesIsError) {
  OccupancySeries s{"S", Timestamp{0}, 10, std::vector<double>(3 * 1440, 0.0)};
  EXPECT_THROW(split_dataset({s}), Error);
}

TEST(Split, CityscaleStreetsHeldOut) {
  OccupancySeries a{"a", Timestamp{0}, 10, std::vector<double>(8 * 1440, 0.0)};
  OccupancySeries b{"b", Timestamp{0}, 10, std::vector<double>(8 * 1440, 0.0)};
  const auto sp = split_dataset({a, b}, {}, {"b"});
  ASSERT_EQ(sp.train.size(), 1u);
  EXPECT_EQ(sp.train[0].street_id, "a");
  EXPECT_EQ(sp.validation.size(), 1u);
  EXPECT_EQ(sp.cityscale, std::vector<std::string>{"b"});
}

TEST(Series, SliceBounds) {
  OccupancySeries s{"S", Timestamp{100}, 10, {0.1, 0.2, 0.3, 0.4}};
  const auto mid = s.slice({Timestamp{101}, Timestamp{103}});
  EXPECT_EQ(mid.values, (std::vector<double>{0.2, 0.3}));
  EXPECT_EQ(mid.start, Timestamp{101});
  EXPECT_THROW(s.slice({Timestamp{99}, Timestamp{101}}), Error);
  EXPECT_THROW(s.slice({Timestamp{102}, Timestamp{105}}), Error);
}
