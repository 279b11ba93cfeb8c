#include <gtest/gtest.h>

#include <sstream>

#include "camsleep/env.hpp"

using namespace camsleep;

namespace {

OccupancySeries flat_series(double v, std::size_t minutes) {
  return {"S", make_timestamp(2019, 1, 7), 10, std::vector<double>(minutes, v)};
}

RewardParams half_half(double w_hat) {
  RewardParams p;
  p.e1_hat = 0.5;
  p.e2_hat = 0.5;
  p.w_hat = w_hat;
  return p;
}

EpisodeConfig episode_at(const OccupancySeries& s, std::int64_t offset, std::int64_t length) {
  EpisodeConfig c;
  c.start = s.start + offset;
  c.length = length;
  return c;
}

}  // namespace

TEST(Reward, StandbyAtLowMinuteIsFree) {
  EXPECT_DOUBLE_EQ(reward_fn(Action::Standby, 0.3, half_half(10.0)), 0.0);
  EXPECT_DOUBLE_EQ(reward_fn(Action::Standby, 0.5, half_half(123.0)), 0.0);
}

TEST(Reward, TurnOnCostsEnergyOnly) {
  for (double occ : {0.0, 0.5, 0.95}) EXPECT_DOUBLE_EQ(reward_fn(Action::TurnOn, occ, half_half(10.0)), -1.0);
  RewardParams p;
  p.e1_hat = 0.4;
  p.e2_hat = 0.4;
  EXPECT_DOUBLE_EQ(reward_fn(Action::TurnOn, 0.95, p), -0.8);
}

TEST(Reward, MissedHighMinute) {
  EXPECT_DOUBLE_EQ(reward_fn(Action::Standby, 0.85, half_half(10.0)), -10.0);
  EXPECT_DOUBLE_EQ(reward_fn(Action::Standby, 0.85, half_half(5.0)), -5.0);
  EXPECT_DOUBLE_EQ(reward_fn(Action::Standby, 0.8, half_half(5.0)), -5.0);
  // Medium minutes are not misses.
  EXPECT_DOUBLE_EQ(reward_fn(Action::Standby, 0.7, half_half(5.0)), 0.0);
}

TEST(Reward, UnconditionalEnergyAblation) {
  auto p = half_half(2.0);
  p.unconditional_energy = true;
  EXPECT_DOUBLE_EQ(reward_fn(Action::Standby, 0.1, p), -1.0);
  EXPECT_DOUBLE_EQ(reward_fn(Action::Standby, 0.9, p), -3.0);
}

TEST(Reward, StandbyFloor) {
  auto p = half_half(0.0);
  p.standby_floor = 0.1;
  EXPECT_DOUBLE_EQ(reward_fn(Action::Standby, 0.1, p), -0.1);
}

TEST(Reward, NeverPositive) {
  Rng rng = substream(1, "reward");
  for (int i = 0; i < 1000; ++i) {
    const auto p = normalize_reward_params(uniform01(rng), 0.01 + uniform01(rng), 50 * uniform01(rng));
    const auto a = static_cast<Action>(uniform_index(rng, 2));
    ASSERT_LE(reward_fn(a, uniform01(rng), p), 0.0);
  }
}

TEST(Normalize, Examples) {
  auto p = normalize_reward_params(1, 1, 0);
  EXPECT_DOUBLE_EQ(p.e1_hat, 0.5);
  EXPECT_DOUBLE_EQ(p.e2_hat, 0.5);
  EXPECT_DOUBLE_EQ(p.w_hat, 0.0);
  p = normalize_reward_params(2, 1, 7);
  EXPECT_DOUBLE_EQ(p.e1_hat, 0.2);
  EXPECT_DOUBLE_EQ(p.e2_hat, 0.1);
  EXPECT_DOUBLE_EQ(p.w_hat, 0.7);
  EXPECT_THROW(normalize_reward_params(0, 0, 1), Error);
  EXPECT_THROW(normalize_reward_params(0, 0, 0), Error);
  EXPECT_THROW(normalize_reward_params(-1, 1, 1), Error);
}

TEST(Normalize, CeilingRescalesLargest) {
  const auto p = normalize_reward_params(1, 1, 8, 1.0);
  EXPECT_DOUBLE_EQ(p.w_hat, 1.0);
  EXPECT_DOUBLE_EQ(p.e1_hat, 0.125);
}

TEST(Env, StateLayout) {
  EXPECT_EQ(state_size(9), 24u);
  EXPECT_EQ(feature_names(9).size(), 24u);
  EXPECT_EQ(feature_names(9).front(), "camera[t-9]");
  EXPECT_EQ(feature_names(9)[19], "occupancy[t-0]");
  const auto s = flat_series(0.4, 100);
  ParkingEnv env(s);
  const auto st = env.reset(episode_at(s, 0, 10));
  ASSERT_EQ(st.size(), 24u);
  // Midnight Monday: hour (0,1), day (0,1).
  EXPECT_NEAR(st[20], 0.0, 1e-12);
  EXPECT_NEAR(st[21], 1.0, 1e-12);
  EXPECT_NEAR(st[22], 0.0, 1e-12);
  EXPECT_NEAR(st[23], 1.0, 1e-12);
}

TEST(Env, ResetIsDeterministic) {
  const auto s = flat_series(0.4, 100);
  ParkingEnv a(s), b(s);
  EXPECT_EQ(a.reset(episode_at(s, 20, 30)), b.reset(episode_at(s, 20, 30)));
  a.step(Action::TurnOn);
  EXPECT_EQ(a.reset(episode_at(s, 20, 30)), b.reset(episode_at(s, 20, 30)));
}

TEST(Env, OneStepEpisodeAtSeriesEnd) {
  const auto s = flat_series(0.9, 50);
  ParkingEnv env(s);
  env.reset(episode_at(s, 49, 1));
  const auto r = env.step(Action::TurnOn);
  EXPECT_TRUE(r.done);
  EXPECT_THROW(env.step(Action::TurnOn), Error);
}

TEST(Env, RejectsEpisodeOutsideSeries) {
  const auto s = flat_series(0.1, 50);
  ParkingEnv env(s);
  EXPECT_THROW(env.reset(episode_at(s, 45, 6)), Error);
  EXPECT_THROW(env.reset(episode_at(s, -1, 2)), Error);
  EXPECT_THROW(env.reset(episode_at(s, 0, 0)), Error);
}

TEST(Env, StandbyMasksOccupancy) {
  auto s = flat_series(0.0, 20);
  for (std::size_t i = 0; i < s.size(); ++i) s.values[i] = 0.05 * static_cast<double>(i);
  ParkingEnv env(s);
  env.reset(episode_at(s, 1, 10));
  auto r = env.step(Action::TurnOn);
  EXPECT_EQ(r.observation.camera, CameraState::On);
  EXPECT_DOUBLE_EQ(r.observation.occupancy, 0.05);
  EXPECT_DOUBLE_EQ(r.state[18], 1.0);
  EXPECT_DOUBLE_EQ(r.state[19], 0.05);
  r = env.step(Action::Standby);
  EXPECT_DOUBLE_EQ(r.true_occupancy, 0.10);
  EXPECT_EQ(r.observation.camera, CameraState::Standby);
  EXPECT_DOUBLE_EQ(r.observation.occupancy, 0.0);
  EXPECT_DOUBLE_EQ(r.state[18], 0.0);
  EXPECT_DOUBLE_EQ(r.state[19], 0.0);
  // The On observation moved one slot back.
  EXPECT_DOUBLE_EQ(r.state[16], 1.0);
  EXPECT_DOUBLE_EQ(r.state[17], 0.05);
}

TEST(Env, StateNeverLeaksUnobservedOccupancy) {
  const auto s = flat_series(0.7, 200);
  ParkingEnv env(s);
  env.reset(episode_at(s, 10, 150));
  Rng rng = substream(2, "actions");
  while (!env.done()) {
    const auto r = env.step(static_cast<Action>(uniform_index(rng, 2)));
    for (std::size_t k = 0; k + 1 < 20; k += 2) {
      if (r.state[k] == 0.0) ASSERT_EQ(r.state[k + 1], 0.0);
    }
  }
}

TEST(Env, RewardsSumOverEpisode) {
  auto s = flat_series(0.1, 60);
  for (std::size_t i = 30; i < 40; ++i) s.values[i] = 0.9;
  ParkingEnv env(s);
  auto cfg = episode_at(s, 0, 60);
  cfg.reward = half_half(3.0);
  env.reset(cfg);
  double total = 0.0;
  while (!env.done()) total += env.step(Action::Standby).reward;
  EXPECT_DOUBLE_EQ(total, -30.0);
}

TEST(Trace, CsvRoundTrip) {
  const std::vector<TraceRow> rows = {{0, make_timestamp(2019, 1, 7), Action::TurnOn, 0.9, 0.9, -0.5},
                                      {1, make_timestamp(2019, 1, 7, 0, 1), Action::Standby, 0.2, 0.0, 0.0}};
  std::stringstream buf;
  write_trace_csv(buf, rows);
  const auto back = read_trace_csv(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].action, Action::TurnOn);
  EXPECT_EQ(back[1].action, Action::Standby);
  EXPECT_EQ(back[1].timestamp, rows[1].timestamp);
  EXPECT_DOUBLE_EQ(back[0].reward, -0.5);
}
