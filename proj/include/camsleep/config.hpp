#pragma once

// Flat `key = value` experiment configuration. Lines starting with '#' are
// comments; lists are comma separated. Keys are documented in
// docs/config.md and listed by `camsleep config --defaults`.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "camsleep/agent.hpp"
#include "camsleep/baselines.hpp"
#include "camsleep/common.hpp"
#include "camsleep/csv.hpp"
#include "camsleep/data.hpp"
#include "camsleep/env.hpp"
#include "camsleep/eval.hpp"

namespace camsleep {

struct ExperimentConfig {
  // Data source: an events CSV (with a bays CSV), an occupancy CSV, or
  // synthetic profiles (used when neither path is set).
  std::string events_path;
  std::string bays_path;
  std::string occupancy_path;
  std::string range_begin;  // optional ingest window, ISO timestamps
  std::string range_end;
  int min_bays = 10;
  std::vector<std::string> synthetic = {"bimodal-noon"};
  int synthetic_days = 120;
  double synthetic_peak = 0.9;
  double synthetic_noise = 0.03;
  bool synthetic_stationary = false;
  std::vector<std::string> cityscale;

  OccupancyThresholds thresholds;
  double e1 = 1.0;
  double e2 = 1.0;
  double w = 40.0;
  double reward_ceiling = 0.0;
  bool unconditional_energy = false;
  double standby_floor = 0.0;

  AgentConfig agent;
  SplitRatios split;
  int test_days = 14;  // 0 = whole test range

  SvmConfig svm;
  bool naive_per_day_of_week = false;
  ZeroHighMode zero_high = ZeroHighMode::Vacuous;
  std::vector<double> sweep_w = {1.0, 4.0, 10.0, 20.0, 40.0};
  std::vector<double> noise_deltas = {0.0, 10.0, 20.0, 30.0};

  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int threads = 1;

  RewardParams reward() const {
    auto r = normalize_reward_params(e1, e2, w, reward_ceiling);
    r.unconditional_energy = unconditional_energy;
    r.standby_floor = standby_floor;
    return r;
  }

  /// Agent settings with the top-level seed applied.
  AgentConfig agent_config() const {
    AgentConfig a = agent;
    a.seed = seed;
    return a;
  }
};

namespace detail {

inline bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("expected true/false, got '" + std::string(v) + "'");
}

inline std::vector<std::string> parse_list(std::string_view v) {
  std::vector<std::string> out;
  if (csv::trim(v).empty()) return out;
  for (auto f : csv::split(v)) out.emplace_back(csv::trim(f));
  return out;
}

inline std::vector<double> parse_double_list(std::string_view v) {
  std::vector<double> out;
  for (const auto& s : parse_list(v)) out.push_back(csv::parse_double(s));
  return out;
}

inline std::vector<int> parse_int_list(std::string_view v) {
  std::vector<int> out;
  for (const auto& s : parse_list(v)) out.push_back(static_cast<int>(csv::parse_int(s)));
  return out;
}

// Shortest text that reads back to the same double.
inline std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ',';
    if constexpr (std::is_floating_point_v<T>) {
      os << num(xs[i]);
    } else {
      os << xs[i];
    }
  }
  return os.str();
}

struct ConfigField {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define CAMSLEEP_FIELD(key, expr, assign)                                                  \
  ConfigField {                                                                            \
    key, [](const ExperimentConfig& c) -> std::string { return expr; },                    \
        [](ExperimentConfig& c, std::string_view v) { assign; }                            \
  }

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      CAMSLEEP_FIELD("data.events", c.events_path, c.events_path = std::string(v)),
      CAMSLEEP_FIELD("data.bays", c.bays_path, c.bays_path = std::string(v)),
      CAMSLEEP_FIELD("data.occupancy", c.occupancy_path, c.occupancy_path = std::string(v)),
      CAMSLEEP_FIELD("data.range_begin", c.range_begin, c.range_begin = std::string(v)),
      CAMSLEEP_FIELD("data.range_end", c.range_end, c.range_end = std::string(v)),
      CAMSLEEP_FIELD("data.min_bays", std::to_string(c.min_bays), c.min_bays = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("data.synthetic", join(c.synthetic), c.synthetic = parse_list(v)),
      CAMSLEEP_FIELD("data.synthetic_days", std::to_string(c.synthetic_days),
                     c.synthetic_days = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("data.synthetic_peak", num(c.synthetic_peak), c.synthetic_peak = csv::parse_double(v)),
      CAMSLEEP_FIELD("data.synthetic_noise", num(c.synthetic_noise), c.synthetic_noise = csv::parse_double(v)),
      CAMSLEEP_FIELD("data.synthetic_stationary", c.synthetic_stationary ? "true" : "false",
                     c.synthetic_stationary = parse_bool(v)),
      CAMSLEEP_FIELD("data.cityscale", join(c.cityscale), c.cityscale = parse_list(v)),
      CAMSLEEP_FIELD("thresholds.high", num(c.thresholds.high), c.thresholds.high = csv::parse_double(v)),
      CAMSLEEP_FIELD("thresholds.medium", num(c.thresholds.medium), c.thresholds.medium = csv::parse_double(v)),
      CAMSLEEP_FIELD("reward.e1", num(c.e1), c.e1 = csv::parse_double(v)),
      CAMSLEEP_FIELD("reward.e2", num(c.e2), c.e2 = csv::parse_double(v)),
      CAMSLEEP_FIELD("reward.w", num(c.w), c.w = csv::parse_double(v)),
      CAMSLEEP_FIELD("reward.ceiling", num(c.reward_ceiling), c.reward_ceiling = csv::parse_double(v)),
      CAMSLEEP_FIELD("reward.unconditional_energy", c.unconditional_energy ? "true" : "false",
                     c.unconditional_energy = parse_bool(v)),
      CAMSLEEP_FIELD("reward.standby_floor", num(c.standby_floor), c.standby_floor = csv::parse_double(v)),
      CAMSLEEP_FIELD("agent.gamma", num(c.agent.gamma), c.agent.gamma = csv::parse_double(v)),
      CAMSLEEP_FIELD("agent.epsilon_start", num(c.agent.epsilon_start), c.agent.epsilon_start = csv::parse_double(v)),
      CAMSLEEP_FIELD("agent.epsilon_end", num(c.agent.epsilon_end), c.agent.epsilon_end = csv::parse_double(v)),
      CAMSLEEP_FIELD("agent.epsilon_decay_steps", std::to_string(c.agent.epsilon_decay_steps),
                     c.agent.epsilon_decay_steps = csv::parse_int(v)),
      CAMSLEEP_FIELD("agent.batch_size", std::to_string(c.agent.batch_size),
                     c.agent.batch_size = static_cast<std::size_t>(csv::parse_int(v))),
      CAMSLEEP_FIELD("agent.target_sync_interval", std::to_string(c.agent.target_sync_interval),
                     c.agent.target_sync_interval = csv::parse_int(v)),
      CAMSLEEP_FIELD("agent.replay_capacity", std::to_string(c.agent.replay_capacity),
                     c.agent.replay_capacity = static_cast<std::size_t>(csv::parse_int(v))),
      CAMSLEEP_FIELD("agent.warmup_steps", std::to_string(c.agent.warmup_steps),
                     c.agent.warmup_steps = csv::parse_int(v)),
      CAMSLEEP_FIELD("agent.train_episodes", std::to_string(c.agent.train_episodes),
                     c.agent.train_episodes = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("agent.episode_minutes", std::to_string(c.agent.episode_minutes),
                     c.agent.episode_minutes = csv::parse_int(v)),
      CAMSLEEP_FIELD("agent.train_every", std::to_string(c.agent.train_every),
                     c.agent.train_every = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("agent.learning_rate", num(c.agent.learning_rate), c.agent.learning_rate = csv::parse_double(v)),
      CAMSLEEP_FIELD("agent.per_alpha", num(c.agent.per_alpha), c.agent.per_alpha = csv::parse_double(v)),
      CAMSLEEP_FIELD("agent.per_beta_start", num(c.agent.per_beta_start),
                     c.agent.per_beta_start = csv::parse_double(v)),
      CAMSLEEP_FIELD("agent.per_beta_end", num(c.agent.per_beta_end), c.agent.per_beta_end = csv::parse_double(v)),
      CAMSLEEP_FIELD("agent.priority_epsilon", num(c.agent.priority_epsilon),
                     c.agent.priority_epsilon = csv::parse_double(v)),
      CAMSLEEP_FIELD("agent.hidden", join(c.agent.hidden), c.agent.hidden = parse_int_list(v)),
      CAMSLEEP_FIELD("agent.history", std::to_string(c.agent.history),
                     c.agent.history = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("agent.validation_interval", std::to_string(c.agent.validation_interval),
                     c.agent.validation_interval = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("agent.validation_days", std::to_string(c.agent.validation_days),
                     c.agent.validation_days = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("agent.augment_shift_hours", std::to_string(c.agent.augment_shift_hours),
                     c.agent.augment_shift_hours = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("agent.augment_noise_pct", num(c.agent.augment_noise_pct),
                     c.agent.augment_noise_pct = csv::parse_double(v)),
      CAMSLEEP_FIELD("split.train", num(c.split.train), c.split.train = csv::parse_double(v)),
      CAMSLEEP_FIELD("split.validation", num(c.split.validation), c.split.validation = csv::parse_double(v)),
      CAMSLEEP_FIELD("split.test", num(c.split.test), c.split.test = csv::parse_double(v)),
      CAMSLEEP_FIELD("eval.test_days", std::to_string(c.test_days), c.test_days = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("eval.zero_high", c.zero_high == ZeroHighMode::Vacuous ? "vacuous" : "exclude",
                     if (v == "vacuous") c.zero_high = ZeroHighMode::Vacuous;
                     else if (v == "exclude") c.zero_high = ZeroHighMode::Exclude;
                     else throw Error("expected vacuous or exclude")),
      CAMSLEEP_FIELD("eval.sweep_w", join(c.sweep_w), c.sweep_w = parse_double_list(v)),
      CAMSLEEP_FIELD("eval.noise_deltas", join(c.noise_deltas), c.noise_deltas = parse_double_list(v)),
      CAMSLEEP_FIELD("baseline.svm_lambda", num(c.svm.lambda), c.svm.lambda = csv::parse_double(v)),
      CAMSLEEP_FIELD("baseline.svm_epochs", std::to_string(c.svm.epochs),
                     c.svm.epochs = static_cast<int>(csv::parse_int(v))),
      CAMSLEEP_FIELD("baseline.svm_class_weighted", c.svm.class_weighted ? "true" : "false",
                     c.svm.class_weighted = parse_bool(v)),
      CAMSLEEP_FIELD("baseline.naive_per_day_of_week", c.naive_per_day_of_week ? "true" : "false",
                     c.naive_per_day_of_week = parse_bool(v)),
      CAMSLEEP_FIELD("seed", std::to_string(c.seed), c.seed = static_cast<std::uint64_t>(csv::parse_int(v))),
      CAMSLEEP_FIELD("output_dir", c.output_dir, c.output_dir = std::string(v)),
      CAMSLEEP_FIELD("threads", std::to_string(c.threads), c.threads = static_cast<int>(csv::parse_int(v))),
  };
  return fields;
}

#undef CAMSLEEP_FIELD

}  // namespace detail

/// Sets one key; unknown keys and malformed values raise errors naming the key.
inline void set_config_value(ExperimentConfig& c, std::string_view key, std::string_view value) {
  for (const auto& f : detail::config_fields()) {
    if (key != f.key) continue;
    try {
      f.set(c, csv::trim(value));
    } catch (const std::exception& e) {
      throw Error("config key '" + std::string(key) + "': " + e.what());
    }
    return;
  }
  throw Error("unknown config key '" + std::string(key) + "'");
}

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : detail::config_fields()) keys.emplace_back(f.key);
  return keys;
}

inline void parse_config(std::istream& in, ExperimentConfig& c, const std::string& source = "<stream>") {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw Error(source + ":" + std::to_string(lineno) + ": expected key = value");
    const auto key = csv::trim(t.substr(0, eq));
    try {
      set_config_value(c, key, t.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  ExperimentConfig c;
  parse_config(in, c, path);
  return c;
}

inline void write_config(std::ostream& out, const ExperimentConfig& c) {
  for (const auto& f : detail::config_fields()) out << f.key << " = " << f.get(c) << '\n';
}

}  // namespace camsleep
