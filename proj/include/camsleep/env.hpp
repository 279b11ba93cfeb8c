#pragma once

// Minute-stepped camera standby environment over one street's occupancy
// series.
//
// Timing: step k decides the camera state for minute `start + k`. The state
// the agent sees before that decision holds the observations of the n + 1
// preceding minutes and the cyclical encoding of minute `start + k`. Acting
// reveals the minute's occupancy only if the camera is On; Standby observes 0.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "camsleep/common.hpp"
#include "camsleep/csv.hpp"
#include "camsleep/data.hpp"
#include "camsleep/profiles.hpp"

namespace camsleep {

/// Index order matches the Q-value vector: 0 = TurnOn, 1 = Standby.
enum class Action : int { TurnOn = 0, Standby = 1 };
inline constexpr int kNumActions = 2;

enum class CameraState : int { Standby = 0, On = 1 };

inline CameraState camera_for(Action a) { return a == Action::TurnOn ? CameraState::On : CameraState::Standby; }
inline const char* to_string(Action a) { return a == Action::TurnOn ? "on" : "standby"; }

struct Observation {
  CameraState camera = CameraState::Standby;
  double occupancy = 0.0;
};

struct RewardParams {
  double e1_hat = 0.5;
  double e2_hat = 0.5;
  double d = 1.0;
  double w_hat = 0.0;
  /// Charge the energy term on every step regardless of the action (the
  /// literal form of the reward; kept for ablation).
  bool unconditional_energy = false;
  /// Fraction of the On energy still drawn while in standby.
  double standby_floor = 0.0;

  void validate() const {
    if (e1_hat < 0 || e2_hat < 0 || w_hat < 0 || d <= 0 || standby_floor < 0 || standby_floor > 1) {
      throw Error("reward params must be nonnegative (d > 0, standby_floor in [0,1])");
    }
  }
};

/// Scales the raw costs by their sum, so ê₁ + ê₂ + ŵ = 1. With a positive
/// `ceiling` the three values are then rescaled so the largest equals it.
inline RewardParams normalize_reward_params(double e1, double e2, double w, double ceiling = 0.0) {
  if (e1 < 0 || e2 < 0 || w < 0) throw Error("energy and miss costs must be nonnegative");
  if (e1 + e2 <= 0) throw Error("at least one energy cost must be positive");
  const double total = e1 + e2 + w;
  RewardParams p;
  p.e1_hat = e1 / total;
  p.e2_hat = e2 / total;
  p.w_hat = w / total;
  if (ceiling > 0) {
    const double scale = ceiling / std::max({p.e1_hat, p.e2_hat, p.w_hat});
    p.e1_hat *= scale;
    p.e2_hat *= scale;
    p.w_hat *= scale;
  }
  return p;
}

/// r = −[(ê₁ + ê₂)·d + ŵ·M] with the energy term charged only while On and M
/// the indicator of a High minute missed in standby.
inline double reward_fn(Action action, double true_occupancy, const RewardParams& params,
                        const OccupancyThresholds& thresholds = {}) {
  const double energy = (params.e1_hat + params.e2_hat) * params.d;
  const bool on = action == Action::TurnOn;
  double r = 0.0;
  if (on || params.unconditional_energy) {
    r -= energy;
  } else {
    r -= params.standby_floor * energy;
  }
  if (!on && is_high(true_occupancy, thresholds)) r -= params.w_hat;
  return r;
}

struct EpisodeConfig {
  Timestamp start;
  std::int64_t length = 20160;  // two weeks of minutes
  OccupancyThresholds thresholds;
  RewardParams reward;
  int history = 9;  // n: the state keeps n + 1 observations
};

inline std::size_t state_size(int history) { return static_cast<std::size_t>(2 * (history + 1) + 4); }

/// Feature names in flattened order, oldest observation first.
inline std::vector<std::string> feature_names(int history) {
  std::vector<std::string> names;
  for (int lag = history; lag >= 0; --lag) {
    names.push_back("camera[t-" + std::to_string(lag) + "]");
    names.push_back("occupancy[t-" + std::to_string(lag) + "]");
  }
  for (const char* n : {"hour_sin", "hour_cos", "day_sin", "day_cos"}) names.emplace_back(n);
  return names;
}

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  bool done = false;
  double true_occupancy = 0.0;
  Observation observation;
};

class ParkingEnv {
 public:
  /// The series must outlive the environment.
  explicit ParkingEnv(const OccupancySeries& series) : series_(&series) {}

  const OccupancySeries& series() const { return *series_; }
  const EpisodeConfig& config() const { return config_; }
  std::int64_t steps_taken() const { return steps_; }
  bool done() const { return steps_ >= config_.length; }
  Timestamp clock() const { return config_.start + steps_; }

  std::vector<double> reset(const EpisodeConfig& config) {
    const auto r = series_->range();
    if (config.length < 1 || config.history < 0 || config.start < r.begin || config.start + config.length > r.end) {
      throw Error("episode [" + format_timestamp(config.start) + ", +" + std::to_string(config.length) +
                  " min) does not fit series " + series_->street_id);
    }
    config.thresholds.validate();
    config.reward.validate();
    config_ = config;
    steps_ = 0;
    history_.assign(static_cast<std::size_t>(config.history), Observation{});
    const double previous = config.start > r.begin ? occupancy_at(config.start - 1) : 0.0;
    history_.push_back({CameraState::On, previous});
    return state();
  }

  StepResult step(Action action) {
    if (done()) throw Error("step() called after the episode finished");
    const Timestamp now = clock();
    const double occ = occupancy_at(now);
    const CameraState cam = camera_for(action);
    const Observation obs{cam, cam == CameraState::On ? occ : 0.0};
    history_.pop_front();
    history_.push_back(obs);
    ++steps_;
    StepResult out;
    out.reward = reward_fn(action, occ, config_.reward, config_.thresholds);
    out.done = done();
    out.true_occupancy = occ;
    out.observation = obs;
    out.state = state();
    return out;
  }

  /// Flattened state: (camera, occupancy) pairs oldest first, then the
  /// cyclical encoding of the minute about to be decided.
  std::vector<double> state() const {
    std::vector<double> s;
    s.reserve(state_size(config_.history));
    for (const auto& o : history_) {
      s.push_back(static_cast<double>(o.camera));
      s.push_back(o.occupancy);
    }
    const auto tf = cyclical_encode(clock());
    s.insert(s.end(), {tf.hour_sin, tf.hour_cos, tf.day_sin, tf.day_cos});
    return s;
  }

 private:
  double occupancy_at(Timestamp t) const { return series_->values[static_cast<std::size_t>(t - series_->start)]; }

  const OccupancySeries* series_;
  EpisodeConfig config_;
  std::deque<Observation> history_;
  std::int64_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Episode traces

struct TraceRow {
  std::int64_t step = 0;
  Timestamp timestamp;
  Action action = Action::Standby;
  double true_occupancy = 0.0;
  double observed_occupancy = 0.0;
  double reward = 0.0;
};

inline constexpr const char* kTraceHeader =
    "step,timestamp,action,camera,true_occupancy,observed_occupancy,reward";

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << kTraceHeader << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << format_timestamp(r.timestamp) << ',' << to_string(r.action) << ','
        << static_cast<int>(camera_for(r.action)) << ',' << csv::fixed(r.true_occupancy) << ','
        << csv::fixed(r.observed_occupancy) << ',' << csv::fixed(r.reward) << '\n';
  }
}

inline std::vector<TraceRow> read_trace_csv(std::istream& in, const std::string& source = "<stream>") {
  csv::expect_header(in, kTraceHeader, source);
  std::vector<TraceRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 7) throw Error(source + ": trace row needs 7 fields");
    TraceRow r;
    r.step = csv::parse_int(f[0]);
    r.timestamp = parse_timestamp(f[1]);
    r.action = f[2] == "on" ? Action::TurnOn : Action::Standby;
    r.true_occupancy = csv::parse_double(f[4]);
    r.observed_occupancy = csv::parse_double(f[5]);
    r.reward = csv::parse_double(f[6]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace camsleep
