#pragma once

// Checkpoint file, format version 1 (see docs/checkpoint_format.md):
//
//   offset 0   8 bytes   magic "CAMSLEEP"
//   offset 8   u32 LE    format version
//   offset 12  u32 LE    header length L
//   offset 16  L bytes   UTF-8 JSON header
//   then, for each name in header["blocks"]:
//              u64 LE    parameter count N
//              N x f64   IEEE-754 binary64, little-endian

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "camsleep/agent.hpp"

namespace camsleep {

inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'M', 'S', 'L', 'E', 'E', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw Error("checkpoint truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

inline void put_block(std::ostream& out, std::span<const double> values) {
  put_u64(out, values.size());
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::vector<double> get_block(std::istream& in, std::size_t expected) {
  const auto n = get_le(in, 8);
  if (n != expected) throw Error("checkpoint block has " + std::to_string(n) + " values, expected " +
                                 std::to_string(expected));
  std::vector<double> values(n);
  for (auto& v : values) v = std::bit_cast<double>(get_le(in, 8));
  return values;
}

}  // namespace detail

inline nlohmann::json agent_config_to_json(const AgentConfig& c) {
  return {{"gamma", c.gamma},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_end", c.epsilon_end},
          {"epsilon_decay_steps", c.epsilon_decay_steps},
          {"batch_size", c.batch_size},
          {"target_sync_interval", c.target_sync_interval},
          {"replay_capacity", c.replay_capacity},
          {"warmup_steps", c.warmup_steps},
          {"train_episodes", c.train_episodes},
          {"episode_minutes", c.episode_minutes},
          {"train_every", c.train_every},
          {"learning_rate", c.learning_rate},
          {"per_alpha", c.per_alpha},
          {"per_beta_start", c.per_beta_start},
          {"per_beta_end", c.per_beta_end},
          {"priority_epsilon", c.priority_epsilon},
          {"hidden", c.hidden},
          {"history", c.history},
          {"validation_interval", c.validation_interval},
          {"validation_days", c.validation_days},
          {"augment_shift_hours", c.augment_shift_hours},
          {"augment_noise_pct", c.augment_noise_pct},
          {"seed", c.seed}};
}

inline AgentConfig agent_config_from_json(const nlohmann::json& j) {
  AgentConfig c;
  c.gamma = j.at("gamma");
  c.epsilon_start = j.at("epsilon_start");
  c.epsilon_end = j.at("epsilon_end");
  c.epsilon_decay_steps = j.at("epsilon_decay_steps");
  c.batch_size = j.at("batch_size");
  c.target_sync_interval = j.at("target_sync_interval");
  c.replay_capacity = j.at("replay_capacity");
  c.warmup_steps = j.at("warmup_steps");
  c.train_episodes = j.at("train_episodes");
  c.episode_minutes = j.at("episode_minutes");
  c.train_every = j.at("train_every");
  c.learning_rate = j.at("learning_rate");
  c.per_alpha = j.at("per_alpha");
  c.per_beta_start = j.at("per_beta_start");
  c.per_beta_end = j.at("per_beta_end");
  c.priority_epsilon = j.at("priority_epsilon");
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.history = j.at("history");
  c.validation_interval = j.at("validation_interval");
  c.validation_days = j.at("validation_days");
  c.augment_shift_hours = j.value("augment_shift_hours", 0);
  c.augment_noise_pct = j.value("augment_noise_pct", 0.0);
  c.seed = j.at("seed");
  return c;
}

inline nlohmann::json checkpoint_header(const Checkpoint& ck) {
  const auto& shape = ck.online.shape();
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["network"] = {{"input_dim", shape.input_dim},
                  {"hidden", shape.hidden},
                  {"num_actions", shape.num_actions},
                  {"activation", "relu"},
                  {"aggregation", "mean"},
                  {"parameter_count", ck.online.num_parameters()},
                  {"parameter_order", "per layer: weight[out][in] row-major, then bias[out]; trunk layers, value, "
                                      "advantage"}};
  j["features"] = feature_names(ck.config.history);
  j["feature_scale"] = std::vector<double>(static_cast<std::size_t>(shape.input_dim), 1.0);
  j["actions"] = {"on", "standby"};
  j["thresholds"] = {{"high", ck.thresholds.high}, {"medium", ck.thresholds.medium}};
  j["reward"] = {{"e1_hat", ck.reward.e1_hat},
                 {"e2_hat", ck.reward.e2_hat},
                 {"d", ck.reward.d},
                 {"w_hat", ck.reward.w_hat},
                 {"unconditional_energy", ck.reward.unconditional_energy},
                 {"standby_floor", ck.reward.standby_floor}};
  j["agent"] = agent_config_to_json(ck.config);
  j["training"] = {{"episodes", ck.meta.episodes},
                   {"steps", ck.meta.steps},
                   {"wall_seconds", ck.meta.wall_seconds},
                   {"best_episode", ck.meta.best_episode}};
  j["training"]["best_validation_return"] =
      ck.meta.best_validation_return ? nlohmann::json(*ck.meta.best_validation_return) : nlohmann::json(nullptr);
  j["blocks"] = {"online", "target"};
  return j;
}

inline void save_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const std::string header = checkpoint_header(ck).dump();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put_block(out, ck.online.parameters());
  detail::put_block(out, ck.target.parameters());
  if (!out) throw Error("failed writing checkpoint");
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  save_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error("not a checkpoint file (bad magic)");
  }
  const auto version = static_cast<std::uint32_t>(detail::get_le(in, 4));
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto len = static_cast<std::size_t>(detail::get_le(in, 4));
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len))) throw Error("checkpoint truncated");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  try {
    Checkpoint ck;
    ck.config = agent_config_from_json(j.at("agent"));
    NetworkShape shape{j.at("network").at("input_dim"), j.at("network").at("hidden").get<std::vector<int>>(),
                       j.at("network").at("num_actions")};
    if (shape != network_shape_for(ck.config)) throw Error("checkpoint network shape disagrees with agent config");
    ck.online = DuelingQNetwork(shape);
    ck.target = DuelingQNetwork(shape);
    const auto& r = j.at("reward");
    ck.reward = {r.at("e1_hat"), r.at("e2_hat"), r.at("d"), r.at("w_hat"), r.at("unconditional_energy"),
                 r.at("standby_floor")};
    ck.thresholds = {j.at("thresholds").at("high"), j.at("thresholds").at("medium")};
    const auto& t = j.at("training");
    ck.meta.episodes = t.at("episodes");
    ck.meta.steps = t.at("steps");
    ck.meta.wall_seconds = t.at("wall_seconds");
    ck.meta.best_episode = t.at("best_episode");
    if (!t.at("best_validation_return").is_null()) ck.meta.best_validation_return = t.at("best_validation_return");
    for (const auto& name : j.at("blocks")) {
      auto& net = name == "online" ? ck.online : ck.target;
      net.set_parameters(detail::get_block(in, net.num_parameters()));
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint header is missing a field: ") + e.what());
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace camsleep
