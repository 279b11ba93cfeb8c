#pragma once

// Prioritized experience replay over a sum-tree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "camsleep/common.hpp"

namespace camsleep {

/// Complete binary tree over `capacity` leaves (padded to a power of two)
/// holding subtree sums and maxima. Internal nodes are always recomputed
/// from their children, so the root stays the exact tree-ordered leaf sum.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error("sum tree needs capacity >= 1");
    while (leaves_ < capacity) leaves_ <<= 1;
    sum_.assign(2 * leaves_, 0.0);
    max_.assign(2 * leaves_, 0.0);
  }

  std::size_t capacity() const { return capacity_; }
  double total() const { return sum_[1]; }
  double max_leaf() const { return max_[1]; }
  double leaf(std::size_t i) const { return sum_[leaves_ + i]; }

  void set(std::size_t i, double value) {
    if (i >= capacity_) throw Error("sum tree index out of range");
    if (!(value >= 0.0) || !std::isfinite(value)) throw Error("sum tree values must be finite and >= 0");
    std::size_t node = leaves_ + i;
    sum_[node] = value;
    max_[node] = value;
    for (node >>= 1; node >= 1; node >>= 1) {
      sum_[node] = sum_[2 * node] + sum_[2 * node + 1];
      max_[node] = std::max(max_[2 * node], max_[2 * node + 1]);
    }
  }

  /// Leaf whose cumulative interval [c_{i-1}, c_i) contains `q`. Queries at
  /// or beyond the total resolve to the last positive leaf.
  std::size_t find(double q) const {
    if (total() <= 0.0) throw Error("sum tree is empty");
    q = std::clamp(q, 0.0, std::nextafter(total(), 0.0));
    std::size_t node = 1;
    while (node < leaves_) {
      const std::size_t left = 2 * node;
      if (q < sum_[left] || sum_[left + 1] <= 0.0) {
        node = left;
      } else {
        q -= sum_[left];
        node = left + 1;
      }
    }
    return node - leaves_;
  }

 private:
  std::size_t capacity_;
  std::size_t leaves_ = 1;
  std::vector<double> sum_;
  std::vector<double> max_;
};

struct PerConfig {
  std::size_t capacity = 100000;
  double alpha = 0.6;             // priority exponent
  double priority_epsilon = 1e-3; // floor added to |td error|
};

/// A stored transition, viewed in place.
struct ExperienceView {
  std::span<const double> state;
  int action = 0;
  double reward = 0.0;
  std::span<const double> next_state;
  bool terminal = false;
};

struct PerSample {
  std::vector<std::size_t> indices;
  std::vector<double> weights;  // importance-sampling weights, max-normalized within the batch
  std::vector<ExperienceView> experiences;
};

class PerBuffer {
 public:
  PerBuffer(std::size_t state_dim, PerConfig config)
      : config_(config), state_dim_(state_dim), tree_(config.capacity) {
    if (state_dim == 0) throw Error("replay needs state_dim >= 1");
    if (config.alpha < 0 || config.priority_epsilon <= 0) throw Error("replay needs alpha >= 0, epsilon > 0");
    states_.resize(config.capacity * state_dim);
    next_states_.resize(config.capacity * state_dim);
    actions_.resize(config.capacity);
    rewards_.resize(config.capacity);
    terminals_.resize(config.capacity);
    priorities_.resize(config.capacity);
  }

  const PerConfig& config() const { return config_; }
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return config_.capacity; }
  const SumTree& tree() const { return tree_; }
  /// Raw priority |δ| + ε of slot i (before the α exponent).
  double priority(std::size_t i) const { return priorities_[i]; }

  /// Stores at the newest slot with the current maximum priority (1 when
  /// empty), evicting the oldest entry once full. Returns the slot.
  std::size_t add(std::span<const double> state, int action, double reward, std::span<const double> next_state,
                  bool terminal) {
    if (state.size() != state_dim_ || next_state.size() != state_dim_) throw Error("replay: state size mismatch");
    double p = 1.0;
    if (size_ > 0) {
      // The tree holds p^α; with α = 0 every leaf is 1 and the raw values are scanned.
      p = config_.alpha > 0 ? std::pow(tree_.max_leaf(), 1.0 / config_.alpha) : max_live_priority();
    }
    const std::size_t slot = head_;
    std::copy(state.begin(), state.end(), states_.begin() + static_cast<std::ptrdiff_t>(slot * state_dim_));
    std::copy(next_state.begin(), next_state.end(),
              next_states_.begin() + static_cast<std::ptrdiff_t>(slot * state_dim_));
    actions_[slot] = action;
    rewards_[slot] = reward;
    terminals_[slot] = terminal;
    set_priority(slot, p);
    head_ = (head_ + 1) % config_.capacity;
    size_ = std::min(size_ + 1, config_.capacity);
    return slot;
  }

  ExperienceView at(std::size_t i) const {
    if (i >= size_) throw Error("replay index out of range");
    return {std::span<const double>(states_.data() + i * state_dim_, state_dim_), actions_[i], rewards_[i],
            std::span<const double>(next_states_.data() + i * state_dim_, state_dim_), terminals_[i] != 0};
  }

  /// P(i) = p_i^α / Σ_j p_j^α.
  double probability(std::size_t i) const { return tree_.leaf(i) / tree_.total(); }

  /// Unnormalized importance weight (N·P(i))^(−β).
  double importance_weight(std::size_t i, double beta) const {
    return std::pow(static_cast<double>(size_) * probability(i), -beta);
  }

  /// Stratified proportional sampling: the total mass is cut into
  /// `batch_size` equal segments and one point is drawn in each.
  PerSample sample(std::size_t batch_size, double beta, Rng& rng) const {
    if (batch_size == 0) throw Error("batch size must be >= 1");
    if (size_ < batch_size) {
      throw Error("replay holds " + std::to_string(size_) + " items, cannot sample " + std::to_string(batch_size));
    }
    PerSample out;
    out.indices.reserve(batch_size);
    out.weights.reserve(batch_size);
    out.experiences.reserve(batch_size);
    const double segment = tree_.total() / static_cast<double>(batch_size);
    double max_w = 0.0;
    for (std::size_t b = 0; b < batch_size; ++b) {
      const double q = (static_cast<double>(b) + uniform01(rng)) * segment;
      const std::size_t i = tree_.find(q);
      out.indices.push_back(i);
      const double w = importance_weight(i, beta);
      out.weights.push_back(w);
      max_w = std::max(max_w, w);
      out.experiences.push_back(at(i));
    }
    for (auto& w : out.weights) w /= max_w;
    return out;
  }

  /// p_i = |δ_i| + ε.
  void update(std::span<const std::size_t> indices, std::span<const double> td_errors) {
    if (indices.size() != td_errors.size()) throw Error("replay update: size mismatch");
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] >= size_) throw Error("replay update index out of range");
      if (!std::isfinite(td_errors[k])) throw Error("replay update: non-finite td error");
      set_priority(indices[k], std::abs(td_errors[k]) + config_.priority_epsilon);
    }
  }

 private:
  void set_priority(std::size_t i, double p) {
    priorities_[i] = p;
    tree_.set(i, std::pow(p, config_.alpha));
  }

  double max_live_priority() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size_; ++i) m = std::max(m, priorities_[i]);
    return m;
  }

  PerConfig config_;
  std::size_t state_dim_;
  SumTree tree_;
  std::vector<double> states_;
  std::vector<double> next_states_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
  std::vector<unsigned char> terminals_;
  std::vector<double> priorities_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

}  // namespace camsleep
