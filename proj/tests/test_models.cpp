// Copyright 2026 The symflows Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "symflows/dense_net.hpp"
#include "symflows/eval.hpp"
#include "symflows/graph_env.hpp"
#include "symflows/hypergrid.hpp"
#include "symflows/tabular.hpp"

namespace symflows {
namespace {

std::vector<double> random_vector(Rng& rng, int n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

TEST(DenseNet, ZeroParametersGiveZeroOutput) {
  DenseNet net({4, 5, 3});
  for (double v : net.forward(std::vector<double>{1, -2, 3, 0.5})) EXPECT_EQ(v, 0.0);
}

TEST(DenseNet, IdentityLayerPassesInputThrough) {
  DenseNet net({3, 3}, Activation::tanh);
  for (int i = 0; i < 3; ++i) net.weights(0)[i * 3 + i] = 1.0;
  const std::vector<double> x{0.7, -4.0, 12.0};
  EXPECT_EQ(net.forward(x), x);
}

TEST(DenseNet, RejectsBadShapes) {
  EXPECT_THROW(DenseNet({3}), Error);
  EXPECT_THROW(DenseNet({3, 0, 2}), Error);
  DenseNet net({3, 2});
  EXPECT_THROW(net.forward(std::vector<double>{1.0}), Error);
}

// Independent affine + tanh chain over the documented parameter layout.
std::vector<double> reference_forward(const std::vector<int>& sizes, std::span<const double> p,
                                      std::vector<double> x) {
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    std::vector<double> y(out);
    for (int o = 0; o < out; ++o) {
      double s = p[off + static_cast<std::size_t>(out) * in + o];
      for (int i = 0; i < in; ++i) s += p[off + static_cast<std::size_t>(o) * in + i] * x[i];
      y[o] = l + 2 < sizes.size() ? std::tanh(s) : s;
    }
    off += static_cast<std::size_t>(out) * in + out;
    x = std::move(y);
  }
  return x;
}

TEST(DenseNet, ForwardMatchesIndependentEvaluation) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> sizes{1 + rng.below(6)};
    const int depth = 1 + rng.below(3);
    for (int l = 0; l < depth; ++l) sizes.push_back(1 + rng.below(7));
    DenseNet net(sizes);
    net.initialize(rng);
    const auto x = random_vector(rng, sizes[0], 2.0);
    const auto got = net.forward(x);
    const auto want = reference_forward(sizes, net.parameters(), x);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(DenseNet, ZeroOutputGradientGivesZeroGradient) {
  Rng rng(2);
  DenseNet net({3, 4, 2});
  net.initialize(rng);
  DenseNet::Tape tape;
  net.forward(std::vector<double>{0.1, 0.2, 0.3}, tape);
  std::vector<double> grad(net.parameters().size(), 0.0);
  net.backward(tape, std::vector<double>{0.0, 0.0}, grad);
  for (double g : grad) EXPECT_EQ(g, 0.0);
}

TEST(DenseNet, LinearLayerWeightGradientIsTheInput) {
  Rng rng(4);
  DenseNet net({3, 2});
  net.initialize(rng);
  const std::vector<double> x{0.5, -1.5, 2.0};
  DenseNet::Tape tape;
  net.forward(x, tape);
  std::vector<double> grad(net.parameters().size(), 0.0);
  net.backward(tape, std::vector<double>{1.0, 0.0}, grad);
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(grad[i], x[i]);      // row for output 0
    EXPECT_DOUBLE_EQ(grad[3 + i], 0.0);   // row for output 1
  }
  EXPECT_DOUBLE_EQ(grad[6], 1.0);
  EXPECT_DOUBLE_EQ(grad[7], 0.0);
}

// Max relative error between backward() and central differences of <w, f(x)>.
double gradient_error(DenseNet& net, const std::vector<double>& x, const std::vector<double>& w) {
  DenseNet::Tape tape;
  net.forward(x, tape);
  std::vector<double> grad(net.parameters().size(), 0.0);
  net.backward(tape, w, grad);
  auto objective = [&] {
    const auto y = net.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
    return s;
  };
  double worst = 0.0;
  const double h = 1e-6;
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = objective();
    params[i] = keep - h;
    const double down = objective();
    params[i] = keep;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(numeric - grad[i]) / std::max(1.0, std::abs(numeric) + std::abs(grad[i])));
  }
  return worst;
}

TEST(DenseNet, BackwardMatchesFiniteDifferencesOnTwoLayerNet) {
  Rng rng(8);
  DenseNet net({5, 7, 3});
  net.initialize(rng);
  EXPECT_LT(gradient_error(net, random_vector(rng, 5), random_vector(rng, 3)), 1e-4);
}

TEST(DenseNet, BackwardMatchesFiniteDifferencesOnRandomShapes) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> sizes{1 + rng.below(8)};
    const int depth = 1 + rng.below(4);
    for (int l = 0; l < depth; ++l) sizes.push_back(1 + rng.below(9));
    DenseNet net(sizes, trial % 3 == 0 ? Activation::identity : Activation::tanh);
    net.initialize(rng);
    EXPECT_LT(gradient_error(net, random_vector(rng, sizes[0], 2.0), random_vector(rng, sizes.back())), 1e-4)
        << "trial " << trial;
  }
}

TEST(DenseNet, IsNotPermutationInvariant) {
  Rng rng(13);
  DenseFlowModel model(8 * 2, {16}, 3, 2);
  model.initialize(rng);
  hypergrid::OneHotEncoder enc{8, 2};
  const auto a = model.evaluate(enc(hypergrid::GridState{{2, 5}}));
  const auto b = model.evaluate(enc(hypergrid::GridState{{5, 2}}));
  EXPECT_GT(std::abs(a.log_flow - b.log_flow), 1e-9);
}

TEST(DenseFlowModel, AccumulatedGradientDrivesTheFirstAdamStep) {
  Rng rng(19);
  OptimizerConfig opt;
  opt.adam.learning_rate = 1e-3;
  DenseFlowModel model(6, {5, 4}, 3, 2, opt);
  model.initialize(rng);
  ModelInput x;
  x.features = random_vector(rng, 6);
  x.forward_size = 3;
  x.backward_size = 2;
  const Heads w{random_vector(rng, 3), random_vector(rng, 2), rng.uniform(-1, 1)};

  std::vector<double> out_grad = w.forward;
  out_grad.insert(out_grad.end(), w.backward.begin(), w.backward.end());
  out_grad.push_back(w.log_flow);
  EXPECT_LT(gradient_error(model.net(), x.features, out_grad), 1e-4);
  DenseNet::Tape tape;
  model.net().forward(x.features, tape);
  std::vector<double> expected(model.net().parameters().size(), 0.0);
  model.net().backward(tape, out_grad, expected);

  const std::vector<double> before(model.net().parameters().begin(), model.net().parameters().end());
  model.zero_gradients();
  model.accumulate(x, w);
  model.apply_gradients();
  const auto after = model.net().parameters();
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (std::abs(expected[i]) < 1e-6) continue;
    EXPECT_NEAR(after[i] - before[i], expected[i] > 0 ? -1e-3 : 1e-3, 1e-5) << "parameter " << i;
  }
}

TEST(DenseFlowModel, CheckpointRoundTrip) {
  Rng rng(23);
  DenseFlowModel a(4, {6}, 2, 1);
  a.initialize(rng);
  ModelInput x;
  x.features = {0.1, 0.2, -0.3, 0.4};
  x.forward_size = 2;
  x.backward_size = 1;
  a.zero_gradients();
  a.accumulate(x, Heads{{1.0, -1.0}, {0.5}, 2.0});
  a.accumulate_log_z(0.7);
  a.apply_gradients();
  std::stringstream buf;
  a.save(buf);
  EXPECT_EQ(buf.str().rfind("SYMFLOWS1", 0), 0u);
  DenseFlowModel b(4, {6}, 2, 1);
  b.load(buf);
  const auto ha = a.evaluate(x), hb = b.evaluate(x);
  EXPECT_EQ(ha.forward, hb.forward);
  EXPECT_EQ(ha.backward, hb.backward);
  EXPECT_EQ(ha.log_flow, hb.log_flow);
  EXPECT_EQ(a.log_z(), b.log_z());
  std::stringstream again;
  b.save(again);
  std::stringstream first;
  a.save(first);
  EXPECT_EQ(first.str(), again.str());
}

TEST(TabularModel, CheckpointRoundTripAndTagCheck) {
  TabularModel a;
  ModelInput x{"k1", {}, 2, 1};
  a.accumulate(x, Heads{{0.3, -0.1}, {1.0}, -2.0});
  a.accumulate_log_z(-1.0);
  a.apply_gradients();
  std::stringstream buf;
  a.save(buf);
  TabularModel b;
  b.load(buf);
  EXPECT_EQ(a.evaluate(x).forward, b.evaluate(x).forward);
  EXPECT_EQ(a.evaluate(x).log_flow, b.evaluate(x).log_flow);
  EXPECT_EQ(a.log_z(), b.log_z());

  std::stringstream dense;
  DenseFlowModel(2, {2}, 1, 1).save(dense);
  TabularModel c;
  EXPECT_THROW(c.load(dense), Error);
  std::stringstream junk("NOTMAGIC tabular");
  EXPECT_THROW(c.load(junk), Error);
}

TEST(TabularModel, UnseenStatesReadAsUniform) {
  TabularModel m;
  const auto h = m.evaluate(ModelInput{"fresh", {}, 3, 2});
  EXPECT_EQ(h.forward, std::vector<double>(3, 0.0));
  EXPECT_EQ(h.backward, std::vector<double>(2, 0.0));
  EXPECT_EQ(h.log_flow, 0.0);
  EXPECT_EQ(m.size(), 0u);
}

TEST(TabularModel, ExhaustiveDetailedBalanceRecoversTarget) {
  graph::GraphEnvConfig cfg;
  cfg.n_max = 3;
  cfg.reward = graph::RewardKind::neighbors;
  const graph::GraphEnv env(cfg);
  const auto index = enumerate_states(env);
  ASSERT_LE(index.size(), 50u);
  OptimizerConfig opt;
  opt.adam.learning_rate = 0.05;
  TabularModel base(opt);
  EncodedModel<graph::ColoredGraph, graph::GraphTabularEncoder> model(base, {&env});
  double loss = 1.0;
  for (int it = 0; it < 20000 && loss > 1e-12; ++it) {
    model.zero_gradients();
    loss = exhaustive_db_loss(index, env, model, false, true);
    model.apply_gradients();
  }
  EXPECT_LT(loss, 1e-10);
  EXPECT_LT(l1_distance(model_distribution(index, env, model), ground_truth(index, env)), 1e-6);
}

}  // namespace
}  // namespace symflows
