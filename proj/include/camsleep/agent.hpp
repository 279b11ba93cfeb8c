#pragma once

// Dueling double DQN agent with prioritized replay: action selection, double-Q
// targets, the episodic training loop with validation-based model selection,
// and the greedy controller used at evaluation time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camsleep/common.hpp"
#include "camsleep/data.hpp"
#include "camsleep/env.hpp"
#include "camsleep/nn.hpp"
#include "camsleep/replay.hpp"

namespace camsleep {

struct AgentConfig {
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::int64_t epsilon_decay_steps = 200000;
  std::size_t batch_size = 64;
  std::int64_t target_sync_interval = 1000;
  std::size_t replay_capacity = 100000;
  std::int64_t warmup_steps = 5000;
  int train_episodes = 300;
  std::int64_t episode_minutes = 2 * kMinutesPerDay;
  int train_every = 1;  // gradient steps once every this many env steps
  double learning_rate = 1e-3;
  double per_alpha = 0.6;
  double per_beta_start = 0.4;
  double per_beta_end = 1.0;
  double priority_epsilon = 1e-3;
  std::vector<int> hidden = {32, 16};
  int history = 9;
  int validation_interval = 10;  // episodes between validation runs
  int validation_days = 0;       // 0 = whole validation range
  /// When positive, each training episode runs on a copy of its street
  /// rotated by a whole number of hours drawn from [-h, h].
  int augment_shift_hours = 12;
  /// When positive, each training episode's street gets multiplicative
  /// noise with a level drawn from [0, pct] percent.
  double augment_noise_pct = 15.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(gamma >= 0 && gamma < 1)) throw Error("gamma must be in [0,1)");
    if (!(epsilon_start >= 0 && epsilon_start <= 1 && epsilon_end >= 0 && epsilon_end <= 1)) {
      throw Error("epsilon must be in [0,1]");
    }
    if (epsilon_decay_steps < 0 || batch_size < 1 || target_sync_interval < 1 || replay_capacity < batch_size ||
        warmup_steps < 0 || train_episodes < 0 || episode_minutes < 1 || train_every < 1 || learning_rate <= 0 ||
        history < 0 || validation_interval < 1 || validation_days < 0 || augment_shift_hours < 0 || !(augment_noise_pct >= 0) ||
        hidden.empty()) {
      throw Error("agent config has a non-positive size, interval or rate");
    }
  }
};

/// Linear decay from `start` to `end`, reaching `end` exactly at `decay_steps`.
inline double epsilon_at(std::int64_t step, const AgentConfig& c) {
  if (c.epsilon_decay_steps <= 0 || step >= c.epsilon_decay_steps) return c.epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(c.epsilon_decay_steps);
  return c.epsilon_start + frac * (c.epsilon_end - c.epsilon_start);
}

inline Action select_action(const DuelingQNetwork& net, std::span<const double> state, double epsilon, Rng& rng,
                            DuelingQNetwork::Activations& scratch) {
  if (epsilon > 0.0 && uniform01(rng) < epsilon) return static_cast<Action>(uniform_index(rng, kNumActions));
  return static_cast<Action>(argmax_action(net.q_values(state, scratch)));
}

inline Action select_action(const DuelingQNetwork& net, std::span<const double> state, double epsilon, Rng& rng) {
  DuelingQNetwork::Activations scratch;
  return select_action(net, state, epsilon, rng, scratch);
}

struct Transition {
  std::span<const double> state;
  int action = 0;
  double reward = 0.0;
  std::span<const double> next_state;
  bool terminal = false;
};

/// y = r for terminal transitions, else r + γ·Q_target(s′, argmax_a Q_online(s′, a)).
inline double double_q_target(const DuelingQNetwork& online, const DuelingQNetwork& target, const Transition& t,
                              double gamma, DuelingQNetwork::Activations& scratch) {
  if (t.terminal) return t.reward;
  const auto best = static_cast<std::size_t>(argmax_action(online.q_values(t.next_state, scratch)));
  return t.reward + gamma * target.q_values(t.next_state, scratch)[best];
}

inline double double_q_target(const DuelingQNetwork& online, const DuelingQNetwork& target, const Transition& t,
                              double gamma) {
  DuelingQNetwork::Activations scratch;
  return double_q_target(online, target, t, gamma, scratch);
}

inline std::vector<double> double_q_targets(const DuelingQNetwork& online, const DuelingQNetwork& target,
                                            std::span<const Transition> batch, double gamma) {
  if (batch.empty()) throw Error("double_q_targets: empty batch");
  std::vector<double> y;
  y.reserve(batch.size());
  DuelingQNetwork::Activations scratch;
  for (const auto& t : batch) y.push_back(double_q_target(online, target, t, gamma, scratch));
  return y;
}

// ---------------------------------------------------------------------------
// Greedy controller

/// Runs the camera controller loop with ε = 0 over `length` minutes from
/// `start`: observe (masked) occupancy, query the network, actuate.
inline std::vector<Action> act_greedy(const DuelingQNetwork& net, const OccupancySeries& series, EpisodeConfig config,
                                      std::vector<TraceRow>* trace = nullptr, double* episode_return = nullptr) {
  if (net.shape().input_dim != static_cast<int>(state_size(config.history))) {
    throw Error("network expects " + std::to_string(net.shape().input_dim) + " features, environment provides " +
                std::to_string(state_size(config.history)));
  }
  ParkingEnv env(series);
  auto state = env.reset(config);
  std::vector<Action> actions;
  actions.reserve(static_cast<std::size_t>(config.length));
  double total = 0.0;
  DuelingQNetwork::Activations act;
  while (!env.done()) {
    net.forward(state, act);
    const auto a = static_cast<Action>(argmax_action(act.q));
    const Timestamp now = env.clock();
    auto r = env.step(a);
    total += r.reward;
    if (trace) {
      trace->push_back({env.steps_taken() - 1, now, a, r.true_occupancy, r.observation.occupancy, r.reward});
    }
    actions.push_back(a);
    state = std::move(r.state);
  }
  if (episode_return) *episode_return = total;
  return actions;
}

/// Whole-series episode configuration used for evaluation.
inline EpisodeConfig full_series_episode(const OccupancySeries& series, const OccupancyThresholds& th,
                                         const RewardParams& reward, int history) {
  EpisodeConfig c;
  c.start = series.start;
  c.length = static_cast<std::int64_t>(series.size());
  c.thresholds = th;
  c.reward = reward;
  c.history = history;
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoint

struct TrainingMetadata {
  int episodes = 0;
  std::int64_t steps = 0;
  double wall_seconds = 0.0;
  std::optional<double> best_validation_return;
  int best_episode = -1;
};

struct Checkpoint {
  DuelingQNetwork online;
  DuelingQNetwork target;
  AgentConfig config;
  RewardParams reward;
  OccupancyThresholds thresholds;
  TrainingMetadata meta;

  std::vector<Action> act_greedy(const OccupancySeries& series, std::vector<TraceRow>* trace = nullptr) const {
    return camsleep::act_greedy(online, series, full_series_episode(series, thresholds, reward, config.history),
                                trace);
  }
};

inline NetworkShape network_shape_for(const AgentConfig& c) {
  return {static_cast<int>(state_size(c.history)), c.hidden, kNumActions};
}

// ---------------------------------------------------------------------------
// Training

struct EpisodeMetrics {
  int episode = 0;
  std::int64_t steps = 0;  // cumulative environment steps
  double epsilon = 0.0;
  double train_return = 0.0;
  std::optional<double> validation_return;
};

inline constexpr const char* kMetricsHeader = "episode,steps,epsilon,train_return,validation_return";

inline void write_metrics_row(std::ostream& out, const EpisodeMetrics& m) {
  out << m.episode << ',' << m.steps << ',' << csv::fixed(m.epsilon) << ',' << csv::fixed(m.train_return) << ','
      << (m.validation_return ? csv::fixed(*m.validation_return) : std::string()) << '\n';
}

/// Mean greedy return over the validation slices (each optionally truncated
/// to `validation_days`).
inline double validation_return(const DuelingQNetwork& net, const std::vector<OccupancySeries>& validation,
                                const AgentConfig& cfg, const RewardParams& reward, const OccupancyThresholds& th) {
  double sum = 0.0;
  for (const auto& s : validation) {
    auto ec = full_series_episode(s, th, reward, cfg.history);
    if (cfg.validation_days > 0) {
      ec.length = std::min<std::int64_t>(ec.length, static_cast<std::int64_t>(cfg.validation_days) * kMinutesPerDay);
    }
    double ret = 0.0;
    act_greedy(net, s, ec, nullptr, &ret);
    sum += ret;
  }
  return sum / static_cast<double>(validation.size());
}

class Trainer {
 public:
  using Callback = std::function<void(const EpisodeMetrics&)>;

  Trainer(std::vector<OccupancySeries> train, std::vector<OccupancySeries> validation, AgentConfig config,
          RewardParams reward, OccupancyThresholds thresholds = {})
      : train_(std::move(train)),
        validation_(std::move(validation)),
        config_(std::move(config)),
        reward_(reward),
        thresholds_(thresholds),
        online_(network_shape_for(config_)),
        target_(network_shape_for(config_)),
        optimizer_(online_.num_parameters(), AdamConfig{config_.learning_rate}),
        replay_(state_size(config_.history), PerConfig{config_.replay_capacity, config_.per_alpha,
                                                       config_.priority_epsilon}),
        explore_rng_(substream(config_.seed, "exploration")),
        episode_rng_(substream(config_.seed, "episodes")),
        replay_rng_(substream(config_.seed, "replay")) {
    config_.validate();
    reward_.validate();
    thresholds_.validate();
    if (train_.empty()) throw Error("training set is empty");
    for (const auto& s : train_) {
      if (static_cast<std::int64_t>(s.size()) < config_.episode_minutes) {
        throw Error("training street " + s.street_id + " is shorter than one episode");
      }
    }
    Rng init = substream(config_.seed, "init");
    online_.initialize(init);
    target_ = online_;
  }

  const DuelingQNetwork& online() const { return online_; }
  const DuelingQNetwork& target() const { return target_; }
  const PerBuffer& replay() const { return replay_; }
  std::int64_t total_steps() const { return steps_; }
  std::int64_t target_syncs() const { return syncs_; }

  double beta_at(std::int64_t step) const {
    const double planned = static_cast<double>(config_.train_episodes) * static_cast<double>(config_.episode_minutes);
    const double frac = planned > 0 ? std::min(1.0, static_cast<double>(step) / planned) : 1.0;
    return config_.per_beta_start + frac * (config_.per_beta_end - config_.per_beta_start);
  }

  /// Runs one training episode and returns its metrics (without validation).
  EpisodeMetrics run_episode(int episode) {
    const OccupancySeries* picked = &train_[uniform_index(episode_rng_, train_.size())];
    if (config_.augment_shift_hours > 0 || config_.augment_noise_pct > 0) {
      augmented_ = *picked;
      picked = &augmented_;
    }
    if (config_.augment_shift_hours > 0) {
      const auto span = static_cast<std::uint64_t>(2 * config_.augment_shift_hours + 1);
      const auto hours = static_cast<std::int64_t>(uniform_index(episode_rng_, span)) - config_.augment_shift_hours;
      const auto n = static_cast<std::int64_t>(augmented_.size());
      const auto k = detail::floor_mod(hours * kMinutesPerHour, n);
      std::rotate(augmented_.values.begin(), augmented_.values.end() - k, augmented_.values.end());
    }
    if (config_.augment_noise_pct > 0) {
      const double delta = uniform(episode_rng_, 0.0, config_.augment_noise_pct);
      apply_multiplicative_noise(augmented_.values, delta, episode_rng_);
    }
    const auto& street = *picked;
    const auto slack = static_cast<std::uint64_t>(static_cast<std::int64_t>(street.size()) - config_.episode_minutes);
    EpisodeConfig ec;
    ec.start = street.start + static_cast<std::int64_t>(uniform_index(episode_rng_, slack + 1));
    ec.length = config_.episode_minutes;
    ec.thresholds = thresholds_;
    ec.reward = reward_;
    ec.history = config_.history;

    ParkingEnv env(street);
    auto state = env.reset(ec);
    EpisodeMetrics m;
    m.episode = episode;
    m.epsilon = epsilon_at(steps_, config_);
    while (!env.done()) {
      const double eps = epsilon_at(steps_, config_);
      const Action a = select_action(online_, state, eps, explore_rng_, scratch_);
      auto r = env.step(a);
      m.train_return += r.reward;
      replay_.add(state, static_cast<int>(a), r.reward, r.state, r.done);
      state = std::move(r.state);
      ++steps_;
      if (steps_ >= config_.warmup_steps && replay_.size() >= config_.batch_size && steps_ % config_.train_every == 0) {
        learn();
      }
      if (steps_ % config_.target_sync_interval == 0) {
        target_ = online_;
        ++syncs_;
      }
    }
    m.steps = steps_;
    return m;
  }

  Checkpoint train(const Callback& on_episode = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    Checkpoint best{online_, target_, config_, reward_, thresholds_, {}};
    for (int ep = 0; ep < config_.train_episodes; ++ep) {
      auto m = run_episode(ep);
      const bool validate_now = !validation_.empty() &&
                                ((ep + 1) % config_.validation_interval == 0 || ep + 1 == config_.train_episodes);
      if (validate_now) {
        m.validation_return = validation_return(online_, validation_, config_, reward_, thresholds_);
        if (!best.meta.best_validation_return || *m.validation_return > *best.meta.best_validation_return) {
          best.online = online_;
          best.target = target_;
          best.meta.best_validation_return = m.validation_return;
          best.meta.best_episode = ep;
        }
      } else if (validation_.empty()) {
        best.online = online_;
        best.target = target_;
        best.meta.best_episode = ep;
      }
      if (on_episode) on_episode(m);
    }
    best.meta.episodes = config_.train_episodes;
    best.meta.steps = steps_;
    best.meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return best;
  }

 private:
  void learn() {
    const auto batch = replay_.sample(config_.batch_size, beta_at(steps_), replay_rng_);
    std::vector<TrainingSample> samples;
    samples.reserve(batch.indices.size());
    for (std::size_t k = 0; k < batch.indices.size(); ++k) {
      const auto& e = batch.experiences[k];
      const double y = double_q_target(online_, target_, {e.state, e.action, e.reward, e.next_state, e.terminal},
                                       config_.gamma, scratch_);
      samples.push_back({e.state, e.action, y, batch.weights[k]});
    }
    const auto lg = online_.loss_and_gradient(samples);
    optimizer_.step(online_.parameters(), lg.gradient);
    replay_.update(batch.indices, lg.td_errors);
  }

  std::vector<OccupancySeries> train_;
  std::vector<OccupancySeries> validation_;
  AgentConfig config_;
  RewardParams reward_;
  OccupancyThresholds thresholds_;
  DuelingQNetwork online_;
  DuelingQNetwork target_;
  Adam optimizer_;
  PerBuffer replay_;
  Rng explore_rng_;
  Rng episode_rng_;
  Rng replay_rng_;
  DuelingQNetwork::Activations scratch_;
  OccupancySeries augmented_;
  std::int64_t steps_ = 0;
  std::int64_t syncs_ = 0;
};

inline Checkpoint train(std::vector<OccupancySeries> train_streets, std::vector<OccupancySeries> validation_streets,
                        const AgentConfig& config, const RewardParams& reward, const OccupancyThresholds& th = {},
                        const Trainer::Callback& on_episode = {}) {
  Trainer trainer(std::move(train_streets), std::move(validation_streets), config, reward, th);
  return trainer.train(on_episode);
}

}  // namespace camsleep
