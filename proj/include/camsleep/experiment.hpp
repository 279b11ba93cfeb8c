#pragma once

// Glue between an ExperimentConfig and the modules: loading streets,
// splitting them and fitting named policies.

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "camsleep/agent.hpp"
#include "camsleep/baselines.hpp"
#include "camsleep/config.hpp"
#include "camsleep/data.hpp"
#include "camsleep/eval.hpp"

namespace camsleep {

/// Street id for the i-th configured synthetic profile.
inline std::string synthetic_street_id(std::size_t i, const std::string& tag) { return "s" + std::to_string(i) + "-" + tag; }

inline std::vector<OccupancySeries> load_streets(const ExperimentConfig& cfg) {
  if (!cfg.occupancy_path.empty()) return read_occupancy_csv(cfg.occupancy_path);
  if (!cfg.events_path.empty()) {
    if (cfg.bays_path.empty()) throw Error("data.events requires data.bays");
    std::optional<TimeRange> range;
    if (!cfg.range_begin.empty() || !cfg.range_end.empty()) {
      if (cfg.range_begin.empty() || cfg.range_end.empty()) throw Error("set both data.range_begin and data.range_end");
      range = TimeRange{parse_timestamp(cfg.range_begin), parse_timestamp(cfg.range_end)};
    }
    const auto ingest = ingest_events(cfg.events_path, range);
    if (!range) {
      if (ingest.events.empty()) throw Error(cfg.events_path + ": no events");
      Timestamp lo = ingest.events.front().arrival;
      Timestamp hi = lo;
      for (const auto& e : ingest.events) hi = std::max(hi, e.departure);
      const auto first_day = day_index(lo) * kMinutesPerDay;
      const auto last_day = (day_index(hi - 1) + 1) * kMinutesPerDay;
      range = TimeRange{Timestamp{first_day}, Timestamp{last_day}};
    }
    return build_streets(ingest.events, read_bay_counts(cfg.bays_path), *range, cfg.min_bays);
  }
  if (cfg.synthetic.empty()) throw Error("no data source: set data.occupancy, data.events or data.synthetic");
  std::vector<OccupancySeries> out;
  Rng seeds = substream(cfg.seed, "data");
  for (std::size_t i = 0; i < cfg.synthetic.size(); ++i) {
    const SyntheticProfile p{parse_cluster(cfg.synthetic[i]), cfg.synthetic_peak, cfg.synthetic_noise, seeds(),
                            cfg.synthetic_stationary};
    out.push_back(generate_synthetic(p, cfg.synthetic_days, synthetic_street_id(i, cfg.synthetic[i])));
  }
  return out;
}

struct ExperimentData {
  std::vector<OccupancySeries> streets;
  DatasetSplit split;
  std::vector<OccupancySeries> train;
  std::vector<OccupancySeries> validation;
  std::vector<OccupancySeries> test;       // truncated to eval.test_days
  std::vector<OccupancySeries> cityscale;  // whole series of held-out streets
};

inline ExperimentData prepare_experiment(const ExperimentConfig& cfg) {
  ExperimentData d;
  d.streets = load_streets(cfg);
  d.split = split_dataset(d.streets, cfg.split, cfg.cityscale);
  d.train = slices(d.streets, d.split.train);
  d.validation = slices(d.streets, d.split.validation);
  d.test = slices(d.streets, d.split.test);
  if (cfg.test_days > 0) {
    for (auto& t : d.test) {
      const auto len = std::min<std::int64_t>(static_cast<std::int64_t>(t.size()),
                                              static_cast<std::int64_t>(cfg.test_days) * kMinutesPerDay);
      t = t.slice({t.start, t.start + len});
    }
  }
  for (const auto& id : d.split.cityscale) d.cityscale.push_back(find_street(d.streets, id));
  return d;
}

inline Checkpoint train_agent(const std::vector<OccupancySeries>& train_streets,
                              const std::vector<OccupancySeries>& validation_streets, const ExperimentConfig& cfg,
                              const Trainer::Callback& on_episode = {}) {
  return train(train_streets, validation_streets, cfg.agent_config(), cfg.reward(), cfg.thresholds, on_episode);
}

inline constexpr std::array<const char*, 5> kPolicyNames = {"optimal", "naive", "svm", "rl", "rl-individual"};

/// Fits the named policy on the training slices. `street` restricts the
/// training data to one street (always the case for rl-individual).
inline Policy fit_policy(const std::string& name, const ExperimentData& data, const ExperimentConfig& cfg,
                         const Checkpoint* checkpoint = nullptr, const std::string& street = {}) {
  std::vector<OccupancySeries> train = data.train;
  std::vector<OccupancySeries> validation = data.validation;
  if (!street.empty()) {
    const auto keep = [&](std::vector<OccupancySeries>& v) {
      std::erase_if(v, [&](const OccupancySeries& s) { return s.street_id != street; });
    };
    keep(train);
    keep(validation);
    if (train.empty()) throw Error("street '" + street + "' has no training data");
  }
  if (name == "optimal") return OptimalOracle{cfg.thresholds};
  if (name == "naive") {
    if (cfg.naive_per_day_of_week) return fit_naive_weekly(train, cfg.thresholds);
    return fit_naive(train, cfg.thresholds);
  }
  if (name == "svm") return fit_svm(train, cfg.thresholds, cfg.svm);
  if (name == "rl") {
    if (!checkpoint) throw Error("policy rl needs a checkpoint (--checkpoint)");
    return *checkpoint;
  }
  if (name == "rl-individual") {
    if (street.empty()) throw Error("rl-individual is fitted per street");
    return train_agent(train, validation, cfg);
  }
  throw Error("unknown policy '" + name + "'");
}

}  // namespace camsleep
