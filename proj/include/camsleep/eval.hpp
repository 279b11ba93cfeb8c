#pragma once

// Metrics, series transforms and batch evaluation reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "camsleep/agent.hpp"
#include "camsleep/baselines.hpp"
#include "camsleep/common.hpp"
#include "camsleep/csv.hpp"
#include "camsleep/data.hpp"
#include "camsleep/env.hpp"

namespace camsleep {

// ---------------------------------------------------------------------------
// Metrics

inline std::size_t high_minutes(const OccupancySeries& series, const OccupancyThresholds& th = {}) {
  return static_cast<std::size_t>(
      std::count_if(series.values.begin(), series.values.end(), [&](double v) { return is_high(v, th); }));
}

/// Percentage of High minutes with the camera On; 100 when there are none.
inline double accuracy(const std::vector<Action>& actions, const OccupancySeries& series,
                       const OccupancyThresholds& th = {}) {
  if (actions.size() != series.size()) {
    throw Error("accuracy: " + std::to_string(actions.size()) + " actions for " + std::to_string(series.size()) +
                " minutes");
  }
  std::size_t high = 0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (!is_high(series.values[i], th)) continue;
    ++high;
    if (actions[i] == Action::TurnOn) ++covered;
  }
  if (high == 0) return 100.0;
  return 100.0 * static_cast<double>(covered) / static_cast<double>(high);
}

/// Percentage of minutes spent in standby.
inline double energy_savings(const std::vector<Action>& actions) {
  if (actions.empty()) throw Error("energy_savings: empty action sequence");
  const auto standby = std::count(actions.begin(), actions.end(), Action::Standby);
  return 100.0 * static_cast<double>(standby) / static_cast<double>(actions.size());
}

// ---------------------------------------------------------------------------
// Transforms

/// Rotates the values forward by `hours`; timestamps stay put.
inline OccupancySeries transform_shift(const OccupancySeries& series, int hours) {
  const auto n = static_cast<std::int64_t>(series.size());
  const std::int64_t k = static_cast<std::int64_t>(hours) * kMinutesPerHour;
  if (std::abs(k) > n) throw Error("shift of " + std::to_string(hours) + " h exceeds the series span");
  OccupancySeries out = series;
  if (n == 0) return out;
  for (std::int64_t i = 0; i < n; ++i) {
    out.values[static_cast<std::size_t>(detail::floor_mod(i + k, n))] = series.values[static_cast<std::size_t>(i)];
  }
  return out;
}

inline constexpr int kActivityStart = 5 * kMinutesPerHour;
inline constexpr int kActivityEnd = 23 * kMinutesPerHour;

/// Mean occupancy over minutes outside 05:00–23:00.
inline double nightly_baseline(const OccupancySeries& series) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const int m = minute_of_day(series.time_at(i));
    if (m >= kActivityStart && m < kActivityEnd) continue;
    sum += series.values[i];
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Per day, morning values move two hours earlier and afternoon values two
/// hours later. The 10:00–14:00 gap repeats the 11:59 value. Minutes outside
/// 05:00–23:00 take the nightly baseline.
inline OccupancySeries transform_extend(const OccupancySeries& series) {
  if (minute_of_day(series.start) != 0 || series.size() % kMinutesPerDay != 0) {
    throw Error("extend transform needs whole days starting at midnight");
  }
  constexpr int kShift = 2 * kMinutesPerHour;
  constexpr int kNoon = 12 * kMinutesPerHour;
  const double night = nightly_baseline(series);
  OccupancySeries out = series;
  for (std::size_t day = 0; day < series.size() / kMinutesPerDay; ++day) {
    const double* in = series.values.data() + day * kMinutesPerDay;
    double* o = out.values.data() + day * kMinutesPerDay;
    for (int m = 0; m < kMinutesPerDay; ++m) {
      if (m < kActivityStart || m >= kActivityEnd) {
        o[m] = night;
      } else if (m + kShift < kNoon) {
        o[m] = in[m + kShift];
      } else if (m - kShift >= kNoon) {
        o[m] = in[m - kShift];
      } else {
        o[m] = in[kNoon - 1];
      }
    }
  }
  return out;
}

struct NoiseSpec {
  double delta = 0.0;  // percent
  std::uint64_t seed = 0;
};

/// o ← clamp(o·(1 + x/100), 0, 1) with x ~ U[−δ, δ] drawn per minute.
inline OccupancySeries perturb_noise(const OccupancySeries& series, const NoiseSpec& spec) {
  if (!(spec.delta >= 0)) throw Error("noise delta must be >= 0");
  OccupancySeries out = series;
  if (spec.delta == 0) return out;
  Rng rng = substream(spec.seed, "noise");
  apply_multiplicative_noise(out.values, spec.delta, rng);
  return out;
}

struct ShiftSpec {
  enum class Mode { Shift, Extend };
  Mode mode = Mode::Shift;
  int hours = 0;

  static ShiftSpec shift(int h) { return {Mode::Shift, h}; }
  static ShiftSpec extend() { return {Mode::Extend, 2}; }

  std::string label() const {
    if (mode == Mode::Extend) return "extend";
    return (hours >= 0 ? "shift+" : "shift") + std::to_string(hours);
  }

  OccupancySeries apply(const OccupancySeries& s) const {
    return mode == Mode::Extend ? transform_extend(s) : transform_shift(s, hours);
  }
};

// ---------------------------------------------------------------------------
// Reports

struct EvalRecord {
  std::string street_id;
  std::string policy;
  double accuracy_pct = 0.0;
  double savings_pct = 0.0;
  std::size_t high_minutes = 0;
  std::size_t total_minutes = 0;
};

struct Summary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
  return s;
}

enum class ZeroHighMode { Vacuous, Exclude };

struct EvalReport {
  std::vector<EvalRecord> records;
  Summary accuracy;
  Summary savings;
};

/// Recomputes the aggregates from `records`. In Exclude mode streets without
/// High minutes do not enter the accuracy summary.
inline void aggregate(EvalReport& report, ZeroHighMode mode = ZeroHighMode::Vacuous) {
  std::vector<double> acc;
  std::vector<double> sav;
  for (const auto& r : report.records) {
    if (mode == ZeroHighMode::Vacuous || r.high_minutes > 0) acc.push_back(r.accuracy_pct);
    sav.push_back(r.savings_pct);
  }
  report.accuracy = summarize(acc);
  report.savings = summarize(sav);
}

using PolicyFn = std::function<std::vector<Action>(const OccupancySeries&)>;

inline PolicyFn as_policy_fn(Policy policy) {
  return [p = std::move(policy)](const OccupancySeries& s) { return run_policy(p, s); };
}

struct EvalOptions {
  std::optional<ShiftSpec> transform;
  std::optional<NoiseSpec> noise;
  OccupancyThresholds thresholds;
  ZeroHighMode zero_high = ZeroHighMode::Vacuous;
  int threads = 1;
};

/// Transform, then noise, then run the policy on each street. Records come
/// back sorted by street id whatever the thread count.
inline EvalRecord evaluate_street(const PolicyFn& policy, const std::string& name, const OccupancySeries& street,
                                  const EvalOptions& opt) {
  OccupancySeries s = opt.transform ? opt.transform->apply(street) : street;
  if (opt.noise) s = perturb_noise(s, *opt.noise);
  const auto actions = policy(s);
  return {street.street_id, name, accuracy(actions, s, opt.thresholds), energy_savings(actions),
          high_minutes(s, opt.thresholds), s.size()};
}

inline EvalReport evaluate(const PolicyFn& policy, const std::string& name, const std::vector<OccupancySeries>& streets,
                           const EvalOptions& opt = {}) {
  EvalReport report;
  report.records.resize(streets.size());
  const auto workers = static_cast<std::size_t>(std::max(1, opt.threads));
  if (workers == 1 || streets.size() < 2) {
    for (std::size_t i = 0; i < streets.size(); ++i) report.records[i] = evaluate_street(policy, name, streets[i], opt);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < streets.size(); i += workers) {
            report.records[i] = evaluate_street(policy, name, streets[i], opt);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::stable_sort(report.records.begin(), report.records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) { return a.street_id < b.street_id; });
  aggregate(report, opt.zero_high);
  return report;
}

inline constexpr const char* kReportHeader = "street_id,policy,accuracy_pct,savings_pct,high_minutes,total_minutes";
inline constexpr const char* kAggregateHeader =
    "policy,streets,accuracy_avg,accuracy_min,accuracy_max,accuracy_std,savings_avg,savings_min,savings_max,"
    "savings_std";

inline void write_report_csv(std::ostream& out, const std::vector<EvalRecord>& records, bool header = true) {
  if (header) out << kReportHeader << '\n';
  for (const auto& r : records) {
    out << r.street_id << ',' << r.policy << ',' << csv::fixed(r.accuracy_pct) << ',' << csv::fixed(r.savings_pct)
        << ',' << r.high_minutes << ',' << r.total_minutes << '\n';
  }
}

inline std::vector<EvalRecord> read_report_csv(std::istream& in, const std::string& source = "<stream>") {
  csv::expect_header(in, kReportHeader, source);
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 6) throw Error(source + ": report row needs 6 fields");
    out.push_back({std::string(f[0]), std::string(f[1]), csv::parse_double(f[2]), csv::parse_double(f[3]),
                   static_cast<std::size_t>(csv::parse_int(f[4])), static_cast<std::size_t>(csv::parse_int(f[5]))});
  }
  return out;
}

inline void write_aggregate_csv(std::ostream& out, const std::vector<std::pair<std::string, EvalReport>>& reports) {
  out << kAggregateHeader << '\n';
  for (const auto& [policy, r] : reports) {
    out << policy << ',' << r.records.size() << ',' << csv::fixed(r.accuracy.mean) << ',' << csv::fixed(r.accuracy.min)
        << ',' << csv::fixed(r.accuracy.max) << ',' << csv::fixed(r.accuracy.stddev) << ','
        << csv::fixed(r.savings.mean) << ',' << csv::fixed(r.savings.min) << ',' << csv::fixed(r.savings.max) << ','
        << csv::fixed(r.savings.stddev) << '\n';
  }
}

// ---------------------------------------------------------------------------
// ŵ sensitivity

struct SweepPoint {
  double w = 0.0;             // raw miss cost
  double w_hat = 0.0;         // after normalization
  double w_hat_scaled = 0.0;  // ŵ / max ŵ over the sweep
  double accuracy_pct = 0.0;
  double savings_pct = 0.0;
};

inline constexpr const char* kSweepHeader = "w,w_hat,w_hat_scaled,accuracy_pct,savings_pct";

struct SweepSetup {
  std::vector<OccupancySeries> train;
  std::vector<OccupancySeries> validation;
  std::vector<OccupancySeries> test;
  AgentConfig agent;
  double e1 = 1.0;
  double e2 = 1.0;
  OccupancyThresholds thresholds;
};

/// One agent per w with the same seed; metrics are averaged over the test streets.
inline std::vector<SweepPoint> sweep_w(const SweepSetup& setup, const std::vector<double>& ws,
                                       const std::function<void(const SweepPoint&)>& on_point = {}) {
  std::vector<double> distinct = ws;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw Error("sweep needs at least two distinct w values");
  if (setup.test.empty()) throw Error("sweep needs test streets");
  std::vector<SweepPoint> points;
  double max_hat = 0.0;
  for (double w : ws) {
    const auto reward = normalize_reward_params(setup.e1, setup.e2, w);
    const auto ck = train(setup.train, setup.validation, setup.agent, reward, setup.thresholds);
    EvalOptions opt;
    opt.thresholds = setup.thresholds;
    const auto report = evaluate(as_policy_fn(ck), "rl", setup.test, opt);
    points.push_back({w, reward.w_hat, 0.0, report.accuracy.mean, report.savings.mean});
    max_hat = std::max(max_hat, reward.w_hat);
    if (on_point) on_point(points.back());
  }
  for (auto& p : points) p.w_hat_scaled = max_hat > 0 ? p.w_hat / max_hat : 0.0;
  return points;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << kSweepHeader << '\n';
  for (const auto& p : points) {
    out << csv::fixed(p.w) << ',' << csv::fixed(p.w_hat) << ',' << csv::fixed(p.w_hat_scaled) << ','
        << csv::fixed(p.accuracy_pct) << ',' << csv::fixed(p.savings_pct) << '\n';
  }
}

}  // namespace camsleep
