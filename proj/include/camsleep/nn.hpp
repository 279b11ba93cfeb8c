#pragma once

// Dueling Q-network on a fully connected ReLU trunk, with exact backprop for
// the importance-weighted squared Bellman loss, an Adam optimizer and a
// central-difference gradient checker. Everything is float64.
//
// All parameters live in one flat vector: for each trunk layer the weight
// matrix (row-major, out x in) followed by its bias, then the value head
// (1 x last hidden, bias) and the advantage head (actions x last hidden, bias).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "camsleep/common.hpp"

namespace camsleep {

struct NetworkShape {
  int input_dim = 24;
  std::vector<int> hidden = {32, 16};
  int num_actions = 2;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

struct TrainingSample {
  std::span<const double> state;
  int action = 0;
  double target = 0.0;
  double weight = 1.0;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
  std::vector<double> td_errors;  // Q(s,a) - target, per sample
};

class DuelingQNetwork {
 public:
  struct LayerView {
    int in = 0;
    int out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };

  DuelingQNetwork() : DuelingQNetwork(NetworkShape{}) {}

  /// All parameters start at zero; call `initialize` for a trainable net.
  explicit DuelingQNetwork(NetworkShape shape) : shape_(std::move(shape)) {
    if (shape_.input_dim < 1 || shape_.num_actions < 1 || shape_.hidden.empty()) throw Error("bad network shape");
    std::size_t offset = 0;
    int in = shape_.input_dim;
    const auto add = [&](int out) {
      if (out < 1) throw Error("bad network shape");
      LayerView v{in, out, offset, offset + static_cast<std::size_t>(in) * static_cast<std::size_t>(out)};
      offset = v.bias_offset + static_cast<std::size_t>(out);
      return v;
    };
    for (int h : shape_.hidden) {
      trunk_.push_back(add(h));
      in = h;
    }
    value_ = add(1);
    advantage_ = add(shape_.num_actions);
    params_.assign(offset, 0.0);
  }

  const NetworkShape& shape() const { return shape_; }
  std::size_t num_parameters() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  const std::vector<LayerView>& trunk_layers() const { return trunk_; }
  const LayerView& value_layer() const { return value_; }
  const LayerView& advantage_layer() const { return advantage_; }

  void set_parameters(std::span<const double> p) {
    if (p.size() != params_.size()) throw Error("parameter count mismatch");
    std::copy(p.begin(), p.end(), params_.begin());
  }

  /// He-style uniform fan-in initialization, zero biases.
  void initialize(Rng& rng) {
    const auto init = [&](const LayerView& l) {
      const double limit = std::sqrt(6.0 / l.in);
      for (std::size_t i = 0; i < static_cast<std::size_t>(l.in * l.out); ++i) {
        params_[l.weight_offset + i] = uniform(rng, -limit, limit);
      }
      std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(l.bias_offset), l.out, 0.0);
    };
    for (const auto& l : trunk_) init(l);
    init(value_);
    init(advantage_);
  }

  /// Intermediate values of one forward pass, kept for backprop.
  struct Activations {
    std::vector<std::vector<double>> hidden;  // post-ReLU output of each trunk layer
    double value = 0.0;
    std::vector<double> advantage;
    std::vector<double> q;
  };

  void forward(std::span<const double> state, Activations& act) const {
    if (state.size() != static_cast<std::size_t>(shape_.input_dim)) {
      throw Error("state has " + std::to_string(state.size()) + " features, network expects " +
                  std::to_string(shape_.input_dim));
    }
    act.hidden.resize(trunk_.size());
    std::span<const double> x = state;
    for (std::size_t l = 0; l < trunk_.size(); ++l) {
      auto& h = act.hidden[l];
      h.resize(static_cast<std::size_t>(trunk_[l].out));
      dense(trunk_[l], x, h);
      for (auto& v : h) v = v > 0.0 ? v : 0.0;
      x = h;
    }
    double v = 0.0;
    dense(value_, x, std::span<double>(&v, 1));
    act.value = v;
    act.advantage.resize(static_cast<std::size_t>(shape_.num_actions));
    dense(advantage_, x, act.advantage);
    double mean = 0.0;
    for (double a : act.advantage) mean += a;
    mean /= shape_.num_actions;
    act.q.resize(act.advantage.size());
    for (std::size_t a = 0; a < act.q.size(); ++a) act.q[a] = act.value + act.advantage[a] - mean;
  }

  /// Q-values computed into `scratch`; the returned span aliases it.
  std::span<const double> q_values(std::span<const double> state, Activations& scratch) const {
    forward(state, scratch);
    return scratch.q;
  }

  /// Q(s, ·) = V(s) + A(s, ·) − mean A(s, ·).
  std::vector<double> forward(std::span<const double> state) const {
    Activations act;
    forward(state, act);
    return std::move(act.q);
  }

  /// loss = mean_i w_i (Q(s_i, a_i) − y_i)².
  double loss(std::span<const TrainingSample> batch) const {
    if (batch.empty()) throw Error("empty batch");
    Activations act;
    double total = 0.0;
    for (const auto& s : batch) {
      forward(s.state, act);
      const double e = act.q[static_cast<std::size_t>(s.action)] - s.target;
      total += s.weight * e * e;
    }
    return total / static_cast<double>(batch.size());
  }

  LossAndGradient loss_and_gradient(std::span<const TrainingSample> batch) const {
    if (batch.empty()) throw Error("empty batch");
    LossAndGradient out;
    out.gradient.assign(params_.size(), 0.0);
    out.td_errors.reserve(batch.size());
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const auto actions = static_cast<std::size_t>(shape_.num_actions);
    Activations act;
    std::vector<double> d_adv(actions);
    std::vector<std::vector<double>> d_hidden(trunk_.size());
    for (std::size_t l = 0; l < trunk_.size(); ++l) d_hidden[l].resize(static_cast<std::size_t>(trunk_[l].out));

    for (const auto& s : batch) {
      check_finite(s);
      if (s.action < 0 || s.action >= shape_.num_actions) throw Error("action index out of range");
      forward(s.state, act);
      const auto a = static_cast<std::size_t>(s.action);
      const double err = act.q[a] - s.target;
      out.td_errors.push_back(err);
      out.loss += s.weight * err * err * inv_n;
      const double dq = 2.0 * s.weight * err * inv_n;

      // dQ_a/dV = 1; dQ_a/dA_j = [j == a] − 1/|A|.
      const double d_value = dq;
      for (std::size_t j = 0; j < actions; ++j) d_adv[j] = dq * ((j == a ? 1.0 : 0.0) - 1.0 / shape_.num_actions);

      const auto& last = act.hidden.back();
      auto& d_last = d_hidden.back();
      std::fill(d_last.begin(), d_last.end(), 0.0);
      dense_backward(value_, last, std::span<const double>(&d_value, 1), d_last, out.gradient);
      dense_backward(advantage_, last, d_adv, d_last, out.gradient);

      for (std::size_t l = trunk_.size(); l-- > 0;) {
        auto& dz = d_hidden[l];
        for (std::size_t i = 0; i < dz.size(); ++i) {
          if (act.hidden[l][i] <= 0.0) dz[i] = 0.0;
        }
        if (l == 0) {
          dense_backward(trunk_[0], s.state, dz, std::span<double>{}, out.gradient);
        } else {
          auto& d_prev = d_hidden[l - 1];
          std::fill(d_prev.begin(), d_prev.end(), 0.0);
          dense_backward(trunk_[l], act.hidden[l - 1], dz, d_prev, out.gradient);
        }
      }
    }
    return out;
  }

 private:
  void dense(const LayerView& l, std::span<const double> x, std::span<double> y) const {
    const double* w = params_.data() + l.weight_offset;
    const double* b = params_.data() + l.bias_offset;
    for (int o = 0; o < l.out; ++o) {
      double acc = 0.0;
      const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
      const double* xp = x.data();
#pragma omp simd reduction(+ : acc)
      for (int i = 0; i < l.in; ++i) acc += row[i] * xp[i];
      acc += b[o];
      y[static_cast<std::size_t>(o)] = acc;
    }
  }

  /// Accumulates parameter gradients for y = Wx + b given dL/dy, and adds
  /// dL/dx into `dx` unless it is empty.
  void dense_backward(const LayerView& l, std::span<const double> x, std::span<const double> dy,
                      std::span<double> dx, std::vector<double>& grad) const {
    const double* w = params_.data() + l.weight_offset;
    double* gw = grad.data() + l.weight_offset;
    double* gb = grad.data() + l.bias_offset;
    for (int o = 0; o < l.out; ++o) {
      const double g = dy[static_cast<std::size_t>(o)];
      if (g == 0.0) continue;
      gb[o] += g;
      const std::size_t row = static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
      const double* xp = x.data();
      double* gwr = gw + row;
      for (int i = 0; i < l.in; ++i) gwr[i] += g * xp[i];
      if (!dx.empty()) {
        const double* wr = w + row;
        double* dxp = dx.data();
        for (int i = 0; i < l.in; ++i) dxp[i] += g * wr[i];
      }
    }
  }

  static void check_finite(const TrainingSample& s) {
    if (!std::isfinite(s.target) || !std::isfinite(s.weight)) throw Error("non-finite target or weight in batch");
    for (double v : s.state) {
      if (!std::isfinite(v)) throw Error("non-finite state feature in batch");
    }
  }

  NetworkShape shape_;
  std::vector<LayerView> trunk_;
  LayerView value_;
  LayerView advantage_;
  std::vector<double> params_;
};

inline int argmax_action(std::span<const double> q) {
  // Ties go to the lowest index, which is TurnOn.
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t num_parameters, AdamConfig config)
      : config_(config), m_(num_parameters, 0.0), v_(num_parameters, 0.0) {}

  const AdamConfig& config() const { return config_; }
  std::int64_t steps() const { return t_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

  void step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) throw Error("Adam: shape mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
      const double m_hat = m_[i] / c1;
      const double v_hat = v_[i] / c2;
      params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Gradient check

/// |a − n| / max(|a|, |n|, floor); the floor keeps parameters whose true
/// gradient is ~0 (dead ReLUs) from dominating through round-off.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares `analytic` against central differences of `net.loss(batch)`.
/// With `max_params` > 0 only a seeded random subset of that size is probed.
inline GradientCheckResult gradient_check(const DuelingQNetwork& net, std::span<const TrainingSample> batch,
                                          std::span<const double> analytic, double h = 1e-5,
                                          std::size_t max_params = 0, std::uint64_t seed = 0) {
  if (h <= 0) throw Error("gradient_check needs h > 0");
  if (analytic.size() != net.num_parameters()) throw Error("gradient size mismatch");
  std::vector<std::size_t> idx(net.num_parameters());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (max_params > 0 && max_params < idx.size()) {
    Rng rng = substream(seed, "gradcheck");
    for (std::size_t i = 0; i < max_params; ++i) std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
    idx.resize(max_params);
  }
  DuelingQNetwork probe = net;
  GradientCheckResult out;
  for (std::size_t i : idx) {
    const double orig = probe.parameters()[i];
    probe.parameters()[i] = orig + h;
    const double up = probe.loss(batch);
    probe.parameters()[i] = orig - h;
    const double down = probe.loss(batch);
    probe.parameters()[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double err = relative_error(analytic[i], numeric);
    if (err > out.max_relative_error || out.checked == 0) {
      out.max_relative_error = std::max(out.max_relative_error, err);
      if (err >= out.max_relative_error) out.worst_index = i;
    }
    ++out.checked;
  }
  return out;
}

inline GradientCheckResult gradient_check(const DuelingQNetwork& net, std::span<const TrainingSample> batch,
                                          double h = 1e-5, std::size_t max_params = 0, std::uint64_t seed = 0) {
  const auto analytic = net.loss_and_gradient(batch).gradient;
  return gradient_check(net, batch, analytic, h, max_params, seed);
}

}  // namespace camsleep
