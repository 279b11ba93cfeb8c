#include <gtest/gtest.h>

#include <cmath>

#include "camsleep/nn.hpp"

using namespace camsleep;

namespace {

DuelingQNetwork random_net(NetworkShape shape, std::uint64_t seed) {
  DuelingQNetwork net(std::move(shape));
  Rng rng = substream(seed, "init");
  net.initialize(rng);
  // Nonzero biases so every parameter takes part in the check.
  for (auto& p : net.parameters()) p += 0.05 * standard_normal(rng);
  return net;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return v;
}

// Straight-line forward pass written against the documented parameter
// order: per layer, weights row-major (out x in) then biases; trunk layers,
// then the value head, then the advantage head.
std::vector<double> reference_forward(const DuelingQNetwork& net, const std::vector<double>& state) {
  const auto& shape = net.shape();
  const auto p = net.parameters();
  std::size_t k = 0;
  const auto layer = [&](const std::vector<double>& x, int out) {
    std::vector<double> y(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double s = 0.0;
      for (double xi : x) s += p[k++] * xi;
      y[static_cast<std::size_t>(o)] = s;
    }
    for (int o = 0; o < out; ++o) y[static_cast<std::size_t>(o)] += p[k++];
    return y;
  };
  std::vector<double> x = state;
  for (int h : shape.hidden) {
    x = layer(x, h);
    for (auto& v : x) v = std::max(0.0, v);
  }
  const double value = layer(x, 1)[0];
  const auto adv = layer(x, shape.num_actions);
  EXPECT_EQ(k, p.size());
  double mean = 0.0;
  for (double a : adv) mean += a / shape.num_actions;
  std::vector<double> q;
  for (double a : adv) q.push_back(value + a - mean);
  return q;
}

struct Batch {
  std::vector<std::vector<double>> states;
  std::vector<TrainingSample> samples;
};

Batch random_batch(int input_dim, std::size_t n, Rng& rng) {
  Batch b;
  b.states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) b.states.push_back(random_vector(static_cast<std::size_t>(input_dim), rng));
  for (std::size_t i = 0; i < n; ++i) {
    b.samples.push_back({b.states[i], static_cast<int>(uniform_index(rng, 2)), uniform(rng, -2.0, 1.0),
                         uniform(rng, 0.2, 1.0)});
  }
  return b;
}

}  // namespace

TEST(Network, DefaultShape) {
  DuelingQNetwork net;
  EXPECT_EQ(net.shape().input_dim, 24);
  // 24*32+32 + 32*16+16 + 16+1 + 16*2+2
  EXPECT_EQ(net.num_parameters(), 800u + 528u + 17u + 34u);
}

TEST(Network, ZeroWeightsGiveZeroQ) {
  DuelingQNetwork net;
  const auto q = net.forward(std::vector<double>(24, 0.7));
  EXPECT_EQ(q, (std::vector<double>{0.0, 0.0}));
}

TEST(Network, EqualAdvantagesCancel) {
  auto net = random_net({}, 3);
  // Make both advantage rows and biases identical.
  const auto& adv = net.advantage_layer();
  auto p = net.parameters();
  for (int i = 0; i < adv.in; ++i) p[adv.weight_offset + static_cast<std::size_t>(adv.in + i)] = p[adv.weight_offset + static_cast<std::size_t>(i)];
  p[adv.bias_offset + 1] = p[adv.bias_offset];
  DuelingQNetwork::Activations act;
  Rng rng = substream(3, "state");
  net.forward(random_vector(24, rng), act);
  EXPECT_DOUBLE_EQ(act.q[0] - act.value, 0.0);
  EXPECT_DOUBLE_EQ(act.q[1] - act.value, 0.0);
}

TEST(Network, MatchesReferenceForward) {
  Rng rng = substream(4, "state");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = random_net({5, {7, 6, 4}, 2}, seed);
    const auto s = random_vector(5, rng);
    const auto q = net.forward(s);
    const auto ref = reference_forward(net, s);
    ASSERT_EQ(q.size(), ref.size());
    for (std::size_t a = 0; a < q.size(); ++a) EXPECT_NEAR(q[a], ref[a], 1e-12);
  }
}

TEST(Network, DimensionMismatchIsError) {
  DuelingQNetwork net;
  EXPECT_THROW(net.forward(std::vector<double>(23, 0.0)), Error);
  EXPECT_THROW(net.set_parameters(std::vector<double>(3, 0.0)), Error);
  EXPECT_THROW(DuelingQNetwork(NetworkShape{24, {}, 2}), Error);
}

TEST(Network, ArgmaxTieGoesToFirstAction) {
  EXPECT_EQ(argmax_action(std::vector<double>{-1.0, -2.0}), 0);
  EXPECT_EQ(argmax_action(std::vector<double>{-1.0, -1.0}), 0);
  EXPECT_EQ(argmax_action(std::vector<double>{-3.0, -1.0}), 1);
}

TEST(Loss, FixedPointHasZeroGradient) {
  const auto net = random_net({}, 5);
  Rng rng = substream(5, "batch");
  auto b = random_batch(24, 8, rng);
  for (auto& s : b.samples) s.target = net.forward(s.state)[static_cast<std::size_t>(s.action)];
  const auto lg = net.loss_and_gradient(b.samples);
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.gradient) ASSERT_EQ(g, 0.0);
}

TEST(Loss, HandDerivedSingleSample) {
  // 1 -> 1 -> dueling(2). Parameters: W1, b1, wv, bv, wa0, wa1, ba0, ba1.
  DuelingQNetwork net(NetworkShape{1, {1}, 2});
  const double W1 = 1.5, b1 = 0.25, wv = 0.5, bv = -0.1, wa0 = 0.3, wa1 = -0.7, ba0 = 0.05, ba1 = 0.2;
  net.set_parameters(std::vector<double>{W1, b1, wv, bv, wa0, wa1, ba0, ba1});
  const double x = 2.0, y = -1.0, weight = 0.8;
  const int a = 1;
  const double h = W1 * x + b1;  // positive, ReLU passes it
  const double A0 = wa0 * h + ba0, A1 = wa1 * h + ba1;
  const double q1 = wv * h + bv + A1 - 0.5 * (A0 + A1);
  const double e = q1 - y;
  const double dq = 2.0 * weight * e;
  const std::vector<double> expected = {
      dq * (wv + 0.5 * wa1 - 0.5 * wa0) * x,
      dq * (wv + 0.5 * wa1 - 0.5 * wa0),
      dq * h,
      dq,
      dq * -0.5 * h,
      dq * 0.5 * h,
      dq * -0.5,
      dq * 0.5,
  };
  const std::vector<double> state = {x};
  const TrainingSample sample{state, a, y, weight};
  const auto lg = net.loss_and_gradient(std::span(&sample, 1));
  EXPECT_NEAR(lg.loss, weight * e * e, 1e-15);
  ASSERT_EQ(lg.gradient.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(lg.gradient[i], expected[i], 1e-14) << i;
  EXPECT_NEAR(lg.td_errors[0], e, 1e-15);
}

TEST(Loss, NonFiniteInputIsError) {
  DuelingQNetwork net;
  std::vector<double> s(24, 0.0);
  s[3] = std::nan("");
  const TrainingSample bad{s, 0, 0.0, 1.0};
  EXPECT_THROW(net.loss_and_gradient(std::span(&bad, 1)), Error);
  std::vector<double> ok(24, 0.0);
  const TrainingSample bad_target{ok, 0, std::numeric_limits<double>::infinity(), 1.0};
  EXPECT_THROW(net.loss_and_gradient(std::span(&bad_target, 1)), Error);
  EXPECT_THROW(net.loss_and_gradient({}), Error);
}

TEST(GradientCheck, DefaultNetworkTwentyRandomCases) {
  Rng rng = substream(6, "batch");
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = random_net({}, 100 + seed);
    const auto b = random_batch(24, 16, rng);
    const auto r = gradient_check(net, b.samples);
    EXPECT_EQ(r.checked, net.num_parameters());
    worst = std::max(worst, r.max_relative_error);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(GradientCheck, LinearRegionIsMachinePrecision) {
  // Positive inputs and weights keep every ReLU active, so the loss is an
  // exact quadratic in each parameter and central differences are exact up
  // to rounding.
  DuelingQNetwork net(NetworkShape{3, {4}, 2});
  Rng rng = substream(7, "linear");
  for (auto& p : net.parameters()) p = uniform(rng, 0.1, 1.0);
  std::vector<std::vector<double>> states = {{0.2, 0.5, 0.9}, {0.7, 0.1, 0.3}};
  const std::vector<TrainingSample> batch = {{states[0], 0, 1.0, 1.0}, {states[1], 1, -0.5, 0.5}};
  EXPECT_LT(gradient_check(net, batch, 1e-4).max_relative_error, 1e-8);
}

TEST(GradientCheck, DetectsCorruptedGradient) {
  const auto net = random_net({}, 8);
  Rng rng = substream(8, "batch");
  const auto b = random_batch(24, 16, rng);
  auto g = net.loss_and_gradient(b.samples).gradient;
  std::size_t i = 0;
  while (std::abs(g[i]) < 1e-3) ++i;
  g[i] *= 2.0;
  const auto r = gradient_check(net, b.samples, g);
  EXPECT_GT(r.max_relative_error, 0.1);
  EXPECT_EQ(r.worst_index, i);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p = {1.0, -2.0, 3.0};
  Adam opt(3, {});
  for (int i = 0; i < 5; ++i) opt.step(p, std::vector<double>(3, 0.0));
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepMatchesHandFormula) {
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  std::vector<double> p = {0.0, 1.0, -1.0};
  const std::vector<double> g = {0.5, -2.0, 1e-3};
  Adam opt(3, cfg);
  opt.step(p, g);
  // Bias-corrected moments equal g and g^2 after one step.
  const std::vector<double> start = {0.0, 1.0, -1.0};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(p[i], start[i] - cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.epsilon), 1e-15);
  }
}

TEST(Adam, ConstantGradientDescends) {
  std::vector<double> p = {0.0, 0.0};
  Adam opt(2, {});
  for (int i = 0; i < 100; ++i) opt.step(p, std::vector<double>{1.0, -1.0});
  EXPECT_LT(p[0], 0.0);
  EXPECT_GT(p[1], 0.0);
  EXPECT_EQ(opt.steps(), 100);
  EXPECT_THROW(opt.step(p, std::vector<double>{1.0}), Error);
}

TEST(Adam, TrainsTowardTargets) {
  auto net = random_net({3, {8}, 2}, 9);
  Rng rng = substream(9, "batch");
  auto b = random_batch(3, 32, rng);
  Adam opt(net.num_parameters(), {});
  const double before = net.loss(b.samples);
  for (int i = 0; i < 500; ++i) opt.step(net.parameters(), net.loss_and_gradient(b.samples).gradient);
  EXPECT_LT(net.loss(b.samples), 0.5 * before);
}
