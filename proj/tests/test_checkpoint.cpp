#include <gtest/gtest.h>

#include <sstream>

#include "camsleep/checkpoint.hpp"

using namespace camsleep;

namespace {

Checkpoint sample_checkpoint() {
  AgentConfig cfg;
  cfg.hidden = {8, 4};
  cfg.history = 3;
  cfg.seed = 12;
  cfg.augment_shift_hours = 2;
  cfg.augment_noise_pct = 12.5;
  Checkpoint ck{DuelingQNetwork(network_shape_for(cfg)), DuelingQNetwork(network_shape_for(cfg)), cfg,
                normalize_reward_params(1, 1, 40), {0.75, 0.5}, {}};
  Rng rng = substream(1, "init");
  ck.online.initialize(rng);
  ck.target.initialize(rng);
  ck.meta.episodes = 7;
  ck.meta.steps = 1234;
  ck.meta.best_episode = 5;
  ck.meta.best_validation_return = -17.25;
  return ck;
}

std::string serialize(const Checkpoint& ck) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, ck);
  return out.str();
}

Checkpoint deserialize(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return load_checkpoint(in);
}

}  // namespace

TEST(Checkpoint, RoundTripPreservesEverything) {
  const auto ck = sample_checkpoint();
  const auto back = deserialize(serialize(ck));
  const auto a = ck.online.parameters(), b = back.online.parameters();
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  const auto c = ck.target.parameters(), d = back.target.parameters();
  EXPECT_TRUE(std::equal(c.begin(), c.end(), d.begin(), d.end()));
  EXPECT_EQ(back.config.hidden, ck.config.hidden);
  EXPECT_EQ(back.config.history, 3);
  EXPECT_EQ(back.config.seed, 12u);
  EXPECT_EQ(back.config.augment_shift_hours, 2);
  EXPECT_EQ(back.config.augment_noise_pct, 12.5);
  EXPECT_EQ(back.reward.w_hat, ck.reward.w_hat);
  EXPECT_EQ(back.thresholds.high, 0.75);
  EXPECT_EQ(back.meta.steps, 1234);
  EXPECT_EQ(back.meta.best_validation_return, -17.25);
  // Serializing the loaded checkpoint gives the same bytes.
  EXPECT_EQ(serialize(back), serialize(ck));
}

TEST(Checkpoint, RoundTripGivesIdenticalActions) {
  const auto ck = sample_checkpoint();
  const auto back = deserialize(serialize(ck));
  const auto s = generate_synthetic({ProfileCluster::Bimodal7pm, 0.9, 0.03, 2}, 2);
  EXPECT_EQ(ck.act_greedy(s), back.act_greedy(s));
}

TEST(Checkpoint, NullValidationReturn) {
  auto ck = sample_checkpoint();
  ck.meta.best_validation_return.reset();
  EXPECT_FALSE(deserialize(serialize(ck)).meta.best_validation_return.has_value());
}

TEST(Checkpoint, LayoutIsDocumented) {
  const auto ck = sample_checkpoint();
  const auto bytes = serialize(ck);
  ASSERT_EQ(bytes.substr(0, 8), "CAMSLEEP");
  const auto u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[at + static_cast<std::size_t>(i)]);
    return v;
  };
  EXPECT_EQ(u32(8), 1u);
  const std::size_t header_len = u32(12);
  const auto header = nlohmann::json::parse(bytes.substr(16, header_len));
  EXPECT_EQ(header["network"]["parameter_count"], ck.online.num_parameters());
  EXPECT_EQ(header["features"].size(), state_size(3));
  EXPECT_EQ(header["blocks"], nlohmann::json({"online", "target"}));
  const std::size_t n = ck.online.num_parameters();
  EXPECT_EQ(bytes.size(), 16 + header_len + 2 * (8 + 8 * n));
}

TEST(Checkpoint, RejectsBadInput) {
  const auto bytes = serialize(sample_checkpoint());
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize(bad_magic), Error);
  std::string bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(deserialize(bad_version), Error);
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 5)), Error);
  EXPECT_THROW(deserialize(bytes.substr(0, 30)), Error);
  EXPECT_THROW(deserialize(""), Error);
}

TEST(Checkpoint, RejectsShapeMismatch) {
  const auto ck = sample_checkpoint();
  auto header = checkpoint_header(ck);
  header["network"]["input_dim"] = 24;
  const std::string h = header.dump();
  std::ostringstream out(std::ios::binary);
  out.write("CAMSLEEP", 8);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(h.size()));
  out << h;
  EXPECT_THROW(deserialize(out.str()), Error);
}

TEST(Checkpoint, MissingFileIsError) {
  EXPECT_THROW(load_checkpoint(std::string("/nonexistent/model.ckpt")), Error);
}
