// Copyright 2026 The privex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "privex/nn.hpp"

namespace privex {
namespace {

MlpModel tiny_net() {
  MlpModel m;
  m.input_dim = 2;
  DenseLayer h;
  h.weights.resize(2, 2);
  h.weights << 0.5, -0.4, 0.2, 0.7;
  h.bias.resize(2);
  h.bias << 0.1, -0.2;
  h.activation = Activation::kTanh;
  DenseLayer o;
  o.weights.resize(2, 1);
  o.weights << 1.5, -0.8;
  o.bias = Vec::Constant(1, 0.05);
  m.layers = {h, o};
  return m;
}

Dataset blobs(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.num_classes = 2;
  d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    d.labels.push_back(label);
    for (std::size_t c = 0; c < dim; ++c)
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = (label ? 1.0 : -1.0) + rng.normal();
  }
  return d;
}

TEST(Forward, MatchesHandComputedTinyNet) {
  // numpy: sigmoid(tanh(x @ W1 + b1) @ W2 + b2) for x = (0.3, -1.2).
  const Vec p = forward(tiny_net(), Vec{{0.3, -1.2}});
  EXPECT_NEAR(p(1), 0.6730101773966046, 1e-15);
  EXPECT_NEAR(p(0) + p(1), 1.0, 1e-15);
}

TEST(Forward, SoftmaxRowsSumToOne) {
  const MlpModel m = init_model({{8, Activation::kRelu}, {5, Activation::kIdentity}}, 4, 11);
  Rng r(1);
  Mat x(6, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = r.normal();
  const Mat p = forward_batch(m, x);
  for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
}

TEST(Forward, RejectsWrongWidth) { EXPECT_THROW(forward(tiny_net(), Vec::Zero(3)), std::invalid_argument); }

TEST(Init, DeterministicAndBounded) {
  const auto a = init_model({{16, Activation::kTanh}, {3, Activation::kIdentity}}, 9, 5, 1.0);
  const auto b = init_model({{16, Activation::kTanh}, {3, Activation::kIdentity}}, 9, 5, 1.0);
  EXPECT_EQ(a.layers[0].weights, b.layers[0].weights);
  EXPECT_LE(a.layers[0].weights.cwiseAbs().maxCoeff(), 1.0 / 3.0);
  EXPECT_TRUE(a.layers[1].bias.isZero());
}

class GradInputFd : public ::testing::TestWithParam<Activation> {};

TEST_P(GradInputFd, MatchesCentralDifferences) {
  const Activation act = GetParam();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto m = init_model({{7, act}, {5, act}, {3, Activation::kIdentity}}, 4, seed, 2.0);
    Rng r(seed + 100);
    Vec x(4);
    for (Eigen::Index i = 0; i < 4; ++i) x(i) = r.normal();
    for (std::size_t cls = 0; cls < 3; ++cls) {
      const Vec g = grad_input(m, x, cls);
      for (Eigen::Index i = 0; i < 4; ++i) {
        const double h = 1e-6;
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        const double fd = (forward(m, xp)(cls) - forward(m, xm)(cls)) / (2 * h);
        EXPECT_NEAR(g(i), fd, 1e-7 + 1e-5 * std::fabs(fd));
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Activations, GradInputFd,
                         ::testing::Values(Activation::kTanh, Activation::kSigmoid, Activation::kRelu));

TEST(GradParams, MatchesFiniteDifferenceOfMeanLoss) {
  auto m = init_model({{4, Activation::kTanh}, {3, Activation::kIdentity}}, 3, 8, 1.5);
  Mat batch(5, 3);
  Rng r(2);
  for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = r.normal();
  const std::vector<int> labels{0, 2, 1, 1, 0};
  const Gradients g = grad_params(m, batch, labels);
  auto mean_ce = [&](const MlpModel& mm) {
    const Mat p = forward_batch(mm, batch);
    double s = 0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) s -= std::log(p(i, labels[static_cast<std::size_t>(i)]));
    return s / static_cast<double>(p.rows());
  };
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (Eigen::Index k = 0; k < m.layers[l].weights.size(); ++k) {
      MlpModel p = m, q = m;
      p.layers[l].weights.data()[k] += 1e-6;
      q.layers[l].weights.data()[k] -= 1e-6;
      EXPECT_NEAR(g.weights[l].data()[k], (mean_ce(p) - mean_ce(q)) / 2e-6, 1e-7);
    }
    for (Eigen::Index k = 0; k < m.layers[l].bias.size(); ++k) {
      MlpModel p = m, q = m;
      p.layers[l].bias(k) += 1e-6;
      q.layers[l].bias(k) -= 1e-6;
      EXPECT_NEAR(g.biases[l](k), (mean_ce(p) - mean_ce(q)) / 2e-6, 1e-7);
    }
  }
}

TEST(GradParams, SingleLogitMatchesFiniteDifference) {
  auto m = tiny_net();
  Mat batch(2, 2);
  batch << 0.3, -1.2, 1.0, 0.4;
  const std::vector<int> labels{1, 0};
  const Gradients g = grad_params(m, batch, labels);
  auto mean_ce = [&](const MlpModel& mm) {
    return 0.5 * (loss(mm, Vec{{0.3, -1.2}}, 1) + loss(mm, Vec{{1.0, 0.4}}, 0));
  };
  MlpModel p = m, q = m;
  p.layers[1].bias(0) += 1e-6;
  q.layers[1].bias(0) -= 1e-6;
  EXPECT_NEAR(g.biases[1](0), (mean_ce(p) - mean_ce(q)) / 2e-6, 1e-8);
}

TEST(Train, ReducesLossAndIsDeterministic) {
  const Dataset d = blobs(200, 5, 1);
  const auto m0 = init_model({{10, Activation::kTanh}, {1, Activation::kIdentity}}, 5, 3);
  TrainConfig tc;
  tc.optimizer = Optimizer::kAdam;
  tc.lr = 0.01;
  tc.epochs = 20;
  tc.batch_size = 16;
  tc.seed = 4;
  const auto a = train(m0, d, tc);
  const auto b = train(m0, d, tc);
  EXPECT_LT(mean_loss(a, d), mean_loss(m0, d));
  EXPECT_GT(accuracy(a, d), 0.9);
  EXPECT_EQ(a.layers[0].weights, b.layers[0].weights);
}

TEST(Train, EveryOptimizerLearns) {
  const Dataset d = blobs(100, 3, 2);
  for (Optimizer o : {Optimizer::kAdagrad, Optimizer::kAdam, Optimizer::kGradientAscent}) {
    TrainConfig tc;
    tc.optimizer = o;
    tc.lr = o == Optimizer::kGradientAscent ? 0.5 : 0.05;
    tc.epochs = 30;
    tc.batch_size = 10;
    const auto m = train(init_model({{6, Activation::kTanh}, {2, Activation::kIdentity}}, 3, 1), d, tc);
    EXPECT_GT(accuracy(m, d), 0.85) << to_string(o);
  }
}

TEST(Train, DivergenceRaisesTrainingError) {
  const Dataset d = blobs(20, 3, 3);
  TrainConfig tc;
  tc.optimizer = Optimizer::kGradientAscent;
  tc.lr = 1e308;
  tc.epochs = 5;
  EXPECT_THROW(train(init_model({{4, Activation::kRelu}, {1, Activation::kIdentity}}, 3, 1), d, tc), TrainingError);
}

TEST(Train, RejectsInvalidConfig) {
  TrainConfig tc;
  tc.epochs = 0;
  EXPECT_THROW(tc.validate(), std::invalid_argument);
}

TEST(CrossEntropy, ClampsZeroProbability) {
  EXPECT_NEAR(cross_entropy(Vec{{1.0, 0.0}}, 1), -std::log(1e-12), 1e-9);
}

TEST(ModelJson, RoundTripsExactly) {
  const auto m = init_model({{6, Activation::kSigmoid}, {3, Activation::kIdentity}}, 4, 17);
  const auto r = model_from_json(nlohmann::json::parse(model_to_json(m).dump()));
  ASSERT_EQ(r.layers.size(), m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    EXPECT_EQ(r.layers[l].weights, m.layers[l].weights);
    EXPECT_EQ(r.layers[l].activation, m.layers[l].activation);
  }
}

TEST(Activation, NamesRoundTrip) {
  for (Activation a : {Activation::kTanh, Activation::kRelu, Activation::kSigmoid, Activation::kIdentity})
    EXPECT_EQ(activation_from_string(to_string(a)), a);
  EXPECT_THROW(activation_from_string("swish"), std::invalid_argument);
}

}  // namespace
}  // namespace privex
