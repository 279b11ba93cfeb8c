#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "camsleep/config.hpp"

using namespace camsleep;

TEST(Config, Defaults) {
  const ExperimentConfig c;
  EXPECT_EQ(c.thresholds.high, 0.8);
  EXPECT_EQ(c.thresholds.medium, 0.6);
  EXPECT_EQ(c.agent.gamma, 0.99);
  EXPECT_EQ(c.agent.batch_size, 64u);
  EXPECT_EQ(c.agent.target_sync_interval, 1000);
  EXPECT_EQ(c.agent.replay_capacity, 100000u);
  EXPECT_EQ(c.agent.warmup_steps, 5000);
  EXPECT_EQ(c.agent.epsilon_decay_steps, 200000);
  EXPECT_EQ(c.agent.per_alpha, 0.6);
  EXPECT_EQ(c.agent.priority_epsilon, 1e-3);
  EXPECT_EQ(c.agent.history, 9);
  EXPECT_EQ(c.agent.hidden, (std::vector<int>{32, 16}));
  EXPECT_EQ(c.agent.augment_shift_hours, 12);
  EXPECT_EQ(c.agent.augment_noise_pct, 15.0);
  const auto r = c.reward();
  EXPECT_DOUBLE_EQ(r.e1_hat + r.e2_hat + r.w_hat, 1.0);
}

TEST(Config, SetValues) {
  ExperimentConfig c;
  set_config_value(c, "reward.w", "10");
  set_config_value(c, "agent.hidden", "64, 32, 8");
  set_config_value(c, "data.synthetic", "weekday,weekend");
  set_config_value(c, "eval.zero_high", "exclude");
  set_config_value(c, "baseline.svm_class_weighted", "false");
  set_config_value(c, "seed", "  42 ");
  EXPECT_EQ(c.w, 10.0);
  EXPECT_EQ(c.agent.hidden, (std::vector<int>{64, 32, 8}));
  EXPECT_EQ(c.synthetic, (std::vector<std::string>{"weekday", "weekend"}));
  EXPECT_EQ(c.zero_high, ZeroHighMode::Exclude);
  EXPECT_FALSE(c.svm.class_weighted);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.agent_config().seed, 42u);
}

TEST(Config, UnknownKeyNamesTheKey) {
  ExperimentConfig c;
  try {
    set_config_value(c, "agent.gama", "0.9");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("agent.gama"), std::string::npos);
  }
}

TEST(Config, BadValueNamesTheKey) {
  ExperimentConfig c;
  try {
    set_config_value(c, "agent.batch_size", "many");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("agent.batch_size"), std::string::npos);
  }
  EXPECT_THROW(set_config_value(c, "eval.zero_high", "sometimes"), Error);
  EXPECT_THROW(set_config_value(c, "reward.unconditional_energy", "perhaps"), Error);
}

TEST(Config, ParseFileWithCommentsAndLineNumbers) {
  std::istringstream in("# experiment\n\nreward.w = 4\n  seed=3\n");
  ExperimentConfig c;
  parse_config(in, c, "exp.cfg");
  EXPECT_EQ(c.w, 4.0);
  EXPECT_EQ(c.seed, 3u);
  std::istringstream bad("seed = 1\nnot a pair\n");
  try {
    parse_config(bad, c, "exp.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("exp.cfg:2"), std::string::npos) << e.what();
  }
}

TEST(Config, WriteThenParseRoundTrips) {
  ExperimentConfig c;
  c.w = 7.5;
  c.agent.learning_rate = 3e-4;
  c.agent.hidden = {16};
  c.cityscale = {"s3-uniform"};
  c.noise_deltas = {0, 5};
  c.zero_high = ZeroHighMode::Exclude;
  c.naive_per_day_of_week = true;
  c.output_dir = "results/run1";
  std::stringstream buf;
  write_config(buf, c);
  ExperimentConfig back;
  parse_config(buf, back);
  std::stringstream again;
  write_config(again, back);
  std::stringstream first;
  write_config(first, c);
  EXPECT_EQ(first.str(), again.str());
  EXPECT_EQ(back.agent.learning_rate, 3e-4);
  EXPECT_EQ(back.cityscale, c.cityscale);
  EXPECT_EQ(back.output_dir, "results/run1");
}

TEST(Config, KeysAreUnique) {
  const auto keys = config_keys();
  const std::set<std::string> unique(keys.begin(), keys.end());
  EXPECT_EQ(unique.size(), keys.size());
  EXPECT_TRUE(unique.contains("reward.w"));
  EXPECT_TRUE(unique.contains("agent.augment_shift_hours"));
  EXPECT_TRUE(unique.contains("agent.augment_noise_pct"));
}

TEST(Config, MissingFileIsError) {
  EXPECT_THROW(load_config("/nonexistent/exp.cfg"), Error);
}
