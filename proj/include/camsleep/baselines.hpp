#pragma once

// Comparison policies: the hindsight-optimal oracle, the fixed daily schedule,
// a linear SVM over cyclical time features, and trained RL checkpoints.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "camsleep/agent.hpp"
#include "camsleep/common.hpp"
#include "camsleep/data.hpp"
#include "camsleep/env.hpp"
#include "camsleep/profiles.hpp"

namespace camsleep {

/// On exactly at High minutes.
inline std::vector<Action> optimal_policy(const OccupancySeries& series, const OccupancyThresholds& th = {}) {
  std::vector<Action> actions;
  actions.reserve(series.size());
  for (double v : series.values) actions.push_back(is_high(v, th) ? Action::TurnOn : Action::Standby);
  return actions;
}

/// Daily On window [daily_start, daily_end] in minutes of the day, inclusive.
/// An inactive schedule keeps the camera in standby all day.
struct Schedule {
  int daily_start = 0;
  int daily_end = kMinutesPerDay - 1;
  bool active = true;

  bool on_at(int minute) const { return active && minute >= daily_start && minute <= daily_end; }

  static Schedule always_standby() { return {0, 0, false}; }
};

/// Separate windows per day of the week (Monday = 0).
struct WeeklySchedule {
  std::array<Schedule, 7> days{};

  bool on_at(Timestamp t) const { return days[static_cast<std::size_t>(day_of_week(t))].on_at(minute_of_day(t)); }
};

namespace detail {

inline void widen(Schedule& s, int minute) {
  if (!s.active) {
    s = {minute, minute, true};
  } else {
    s.daily_start = std::min(s.daily_start, minute);
    s.daily_end = std::max(s.daily_end, minute);
  }
}

inline void require_full_day(std::span<const OccupancySeries> train) {
  std::size_t total = 0;
  for (const auto& s : train) total += s.size();
  if (total < static_cast<std::size_t>(kMinutesPerDay)) throw Error("naive schedule needs at least one day of data");
}

}  // namespace detail

/// Earliest and latest High minute of the day over all training days.
inline Schedule fit_naive(std::span<const OccupancySeries> train, const OccupancyThresholds& th = {}) {
  detail::require_full_day(train);
  Schedule s = Schedule::always_standby();
  for (const auto& series : train) {
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (is_high(series.values[i], th)) detail::widen(s, minute_of_day(series.time_at(i)));
    }
  }
  return s;
}

inline Schedule fit_naive(const OccupancySeries& train, const OccupancyThresholds& th = {}) {
  return fit_naive(std::span<const OccupancySeries>(&train, 1), th);
}

/// Same rule applied separately to each day of the week.
inline WeeklySchedule fit_naive_weekly(std::span<const OccupancySeries> train, const OccupancyThresholds& th = {}) {
  detail::require_full_day(train);
  WeeklySchedule w;
  w.days.fill(Schedule::always_standby());
  for (const auto& series : train) {
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (!is_high(series.values[i], th)) continue;
      const Timestamp t = series.time_at(i);
      detail::widen(w.days[static_cast<std::size_t>(day_of_week(t))], minute_of_day(t));
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Linear SVM

struct SvmConfig {
  double lambda = 1e-4;
  int epochs = 10;
  std::uint64_t seed = 0;
  bool class_weighted = true;  // inverse class frequency weights
};

inline constexpr std::size_t kSvmFeatures = 5;  // 4 cyclical values + constant 1

inline std::array<double, kSvmFeatures> svm_features(Timestamp t) {
  const auto f = cyclical_encode(t);
  return {f.hour_sin, f.hour_cos, f.day_sin, f.day_cos, 1.0};
}

struct LinearClassifier {
  std::array<double, kSvmFeatures> weights{};  // last entry multiplies the constant feature (bias)
  double lambda = 0.0;
  double positive_weight = 1.0;
  double negative_weight = 1.0;
  /// Set when training data had a single class; the decision is then constant.
  std::optional<Action> constant;
  std::string warning;

  double decision(const std::array<double, kSvmFeatures>& x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < kSvmFeatures; ++i) s += weights[i] * x[i];
    return s;
  }

  Action predict(Timestamp t) const {
    if (constant) return *constant;
    return decision(svm_features(t)) > 0.0 ? Action::TurnOn : Action::Standby;
  }
};

struct LabeledPoint {
  std::array<double, kSvmFeatures> x{};
  int y = -1;  // +1 = TurnOn
};

/// Pegasos stochastic subgradient descent on the class-weighted hinge loss,
/// with the projection step; the averaged iterate is returned.
inline LinearClassifier fit_svm_points(const std::vector<LabeledPoint>& data, const SvmConfig& cfg) {
  if (data.empty()) throw Error("svm: empty training data");
  if (!(cfg.lambda > 0) || cfg.epochs < 1) throw Error("svm: lambda must be > 0 and epochs >= 1");
  std::size_t pos = 0;
  for (const auto& p : data) pos += p.y > 0 ? 1 : 0;
  const std::size_t neg = data.size() - pos;

  LinearClassifier clf;
  clf.lambda = cfg.lambda;
  if (pos == 0 || neg == 0) {
    clf.constant = pos > 0 ? Action::TurnOn : Action::Standby;
    clf.warning = std::string("svm: training data has a single class; using constant ") + to_string(*clf.constant);
    return clf;
  }
  if (cfg.class_weighted) {
    const double n = static_cast<double>(data.size());
    clf.positive_weight = n / (2.0 * static_cast<double>(pos));
    clf.negative_weight = n / (2.0 * static_cast<double>(neg));
  }

  Rng rng = substream(cfg.seed, "svm");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::array<double, kSvmFeatures> w{};
  std::array<double, kSvmFeatures> avg{};
  const double radius = std::max(clf.positive_weight, clf.negative_weight) / std::sqrt(cfg.lambda);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t idx : order) {
      ++t;
      const auto& p = data[idx];
      const double eta = 1.0 / (cfg.lambda * static_cast<double>(t));
      double margin = 0.0;
      for (std::size_t k = 0; k < kSvmFeatures; ++k) margin += w[k] * p.x[k];
      margin *= p.y;
      for (auto& v : w) v *= 1.0 - eta * cfg.lambda;
      if (margin < 1.0) {
        const double c = (p.y > 0 ? clf.positive_weight : clf.negative_weight) * eta * p.y;
        for (std::size_t k = 0; k < kSvmFeatures; ++k) w[k] += c * p.x[k];
      }
      double norm = 0.0;
      for (double v : w) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > radius) {
        for (auto& v : w) v *= radius / norm;
      }
      const double a = 1.0 / static_cast<double>(t);
      for (std::size_t k = 0; k < kSvmFeatures; ++k) avg[k] += a * (w[k] - avg[k]);
    }
  }
  clf.weights = avg;
  return clf;
}

/// Labels each training minute High (+1) or not (−1) from its timestamp alone.
inline LinearClassifier fit_svm(std::span<const OccupancySeries> train, const OccupancyThresholds& th = {},
                                const SvmConfig& cfg = {}) {
  std::vector<LabeledPoint> data;
  for (const auto& s : train) {
    for (std::size_t i = 0; i < s.size(); ++i) data.push_back({svm_features(s.time_at(i)), is_high(s.values[i], th) ? 1 : -1});
  }
  return fit_svm_points(data, cfg);
}

// ---------------------------------------------------------------------------
// Uniform adapter

struct OptimalOracle {
  OccupancyThresholds thresholds;
};

using Policy = std::variant<OptimalOracle, Schedule, WeeklySchedule, LinearClassifier, Checkpoint>;

/// One action per minute of `series`.
inline std::vector<Action> run_policy(const Policy& policy, const OccupancySeries& series) {
  if (series.size() == 0) throw Error("run_policy: empty series");
  struct Visitor {
    const OccupancySeries& s;
    std::vector<Action> operator()(const OptimalOracle& p) const { return optimal_policy(s, p.thresholds); }
    std::vector<Action> operator()(const Schedule& p) const {
      std::vector<Action> a;
      a.reserve(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) a.push_back(p.on_at(minute_of_day(s.time_at(i))) ? Action::TurnOn : Action::Standby);
      return a;
    }
    std::vector<Action> operator()(const WeeklySchedule& p) const {
      std::vector<Action> a;
      a.reserve(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) a.push_back(p.on_at(s.time_at(i)) ? Action::TurnOn : Action::Standby);
      return a;
    }
    std::vector<Action> operator()(const LinearClassifier& p) const {
      std::vector<Action> a;
      a.reserve(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) a.push_back(p.predict(s.time_at(i)));
      return a;
    }
    std::vector<Action> operator()(const Checkpoint& p) const { return p.act_greedy(s); }
  };
  return std::visit(Visitor{series}, policy);
}

/// Trace rows for a precomputed action sequence, with the reward and masked
/// observation the environment would have produced.
inline std::vector<TraceRow> trace_for(const OccupancySeries& series, const std::vector<Action>& actions,
                                       const RewardParams& reward, const OccupancyThresholds& th = {}) {
  if (actions.size() != series.size()) throw Error("trace_for: action count differs from series length");
  std::vector<TraceRow> rows;
  rows.reserve(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const double occ = series.values[i];
    const bool on = actions[i] == Action::TurnOn;
    rows.push_back({static_cast<std::int64_t>(i), series.time_at(i), actions[i], occ, on ? occ : 0.0,
                    reward_fn(actions[i], occ, reward, th)});
  }
  return rows;
}

}  // namespace camsleep
