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

#include "privex/explain.hpp"
#include "privex/logistic.hpp"

namespace privex {
namespace {

Vec random_vec(Eigen::Index n, Rng& r, double scale = 1.0) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * r.normal();
  return v;
}

TEST(Gradient, LinearModelGradientIsWeightVector) {
  const LinearScoreModel m{Vec{{1.5, -2.0, 0.25}}, 0.7};
  EXPECT_EQ(explain_gradient(m, Vec{{3.0, 1.0, -1.0}}).values, m.w);
}

TEST(Gradient, LogisticClosedForm) {
  const LogisticModel m{Vec{{0.7, -1.1, 0.4}}, 0.3};
  const Vec x{{0.5, 0.2, -1.0}};
  const double f = m.probability(x);
  const Vec g = explain_gradient(m, x).values;
  const double sign = predicted_class(m, x) == 1 ? 1.0 : -1.0;
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(g(i), sign * f * (1 - f) * m.w(i), 1e-15);
}

TEST(GradTimesInput, MultipliesElementwise) {
  const LinearScoreModel m{Vec{{2.0, -3.0}}, 0.0};
  EXPECT_EQ(explain_grad_times_input(m, Vec{{0.5, 4.0}}).values, (Vec{{1.0, -12.0}}));
}

TEST(IntegratedGradients, ExactForLinearModelAtOneStep) {
  const LinearScoreModel m{Vec{{1.0, 2.0, -1.0}}, 0.5};
  const Vec x{{1.0, -2.0, 3.0}};
  IgConfig cfg;
  cfg.baseline = Vec{{0.5, 0.5, 0.5}};
  cfg.steps = 1;
  const Vec phi = explain_integrated_gradients(m, x, cfg).values;
  EXPECT_NEAR(phi.sum(), class_score(m, x, 0) - class_score(m, cfg.baseline, 0), 1e-14);
}

TEST(IntegratedGradients, CompletenessOnNetworks) {
  Rng r(4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = init_model({{8, Activation::kTanh}, {4, Activation::kSigmoid}, {3, Activation::kIdentity}}, 5, seed, 2.0);
    const Vec x = random_vec(5, r);
    IgConfig cfg;
    cfg.steps = 200;
    const Vec phi = explain_integrated_gradients(m, x, cfg).values;
    const std::size_t cls = predicted_class(m, x);
    EXPECT_LT(std::fabs(phi.sum() - (class_score(m, x, cls) - class_score(m, Vec::Zero(5), cls))), 1e-3);
  }
}

TEST(IntegratedGradients, ErrorRoughlyHalvesWhenStepsDouble) {
  const auto m = init_model({{6, Activation::kTanh}, {2, Activation::kIdentity}}, 3, 21, 2.0);
  const Vec x{{1.0, -0.5, 2.0}};
  const std::size_t cls = predicted_class(m, x);
  const double target = class_score(m, x, cls) - class_score(m, Vec::Zero(3), cls);
  auto err = [&](int steps) {
    IgConfig c;
    c.steps = steps;
    return std::fabs(explain_integrated_gradients(m, x, c).values.sum() - target);
  };
  const double ratio = err(50) / err(100);
  EXPECT_NEAR(ratio, 2.0, 0.4);
}

TEST(IntegratedGradients, RejectsBadConfig) {
  const LinearScoreModel m{Vec{{1.0}}, 0.0};
  IgConfig c;
  c.steps = 0;
  EXPECT_THROW(explain_integrated_gradients(m, Vec{{1.0}}, c), std::invalid_argument);
  c.steps = 5;
  c.baseline = Vec::Zero(2);
  EXPECT_THROW(explain_integrated_gradients(m, Vec{{1.0}}, c), std::invalid_argument);
}

TEST(SmoothGrad, ZeroNoiseIsBitIdenticalToGradient) {
  Rng r(6);
  const auto m = init_model({{7, Activation::kRelu}, {3, Activation::kIdentity}}, 4, 2);
  SmoothGradConfig cfg;
  cfg.sigma = 0.0;
  cfg.samples = 13;
  for (int i = 0; i < 5; ++i) {
    const Vec x = random_vec(4, r);
    const Vec a = explain_smoothgrad(m, x, cfg).values;
    const Vec b = explain_gradient(m, x).values;
    for (Eigen::Index k = 0; k < 4; ++k) EXPECT_EQ(a(k), b(k));
  }
}

TEST(SmoothGrad, LinearModelIsNoiseInvariant) {
  const LinearScoreModel m{Vec{{0.3, -0.6}}, 1.0};
  SmoothGradConfig cfg;
  cfg.sigma = 5.0;
  EXPECT_TRUE(explain_smoothgrad(m, Vec{{1.0, 2.0}}, cfg).values.isApprox(m.w, 1e-14));
}

TEST(SmoothGrad, SeededAndPerFeatureNoise) {
  const auto m = init_model({{7, Activation::kTanh}, {2, Activation::kIdentity}}, 3, 3);
  const Vec x{{0.2, 0.1, -0.3}};
  SmoothGradConfig cfg;
  cfg.seed = 8;
  EXPECT_EQ(explain_smoothgrad(m, x, cfg).values, explain_smoothgrad(m, x, cfg).values);
  cfg.sigma_per_feature = Vec::Zero(3);
  cfg.sigma = 10.0;
  EXPECT_EQ(explain_smoothgrad(m, x, cfg).values, explain_gradient(m, x).values);
  cfg.sigma_per_feature = Vec::Zero(2);
  EXPECT_THROW(explain_smoothgrad(m, x, cfg), std::invalid_argument);
}

TEST(SmoothGrad, DefaultsUseTenPercentOfFeatureStd) {
  Mat ref(4, 2);
  ref << 0, 10, 2, 10, 4, 10, 6, 10;
  const auto cfg = smoothgrad_defaults(ref);
  // Sample std of {0, 2, 4, 6} is sqrt(20 / 3).
  EXPECT_NEAR(cfg.sigma_per_feature(0), 0.1 * std::sqrt(20.0 / 3.0), 1e-15);
  EXPECT_EQ(cfg.sigma_per_feature(1), 0.0);
}

TEST(LocalSurrogate, RecoversLinearModel) {
  const LinearScoreModel m{Vec{{0.8, -1.3, 0.1, 2.0}}, -0.4};
  SurrogateConfig cfg;
  cfg.ridge_lambda = 0.0;
  cfg.num_samples = 200;
  const Vec coef = explain_local_surrogate(m, Vec{{1.0, 0.0, -1.0, 0.5}}, cfg).values;
  EXPECT_TRUE(coef.isApprox(m.w, 1e-5)) << coef.transpose();
}

TEST(LocalSurrogate, ApproximatesGradientOfSmoothNet) {
  const auto m = init_model({{6, Activation::kTanh}, {2, Activation::kIdentity}}, 3, 12);
  const Vec x{{0.1, -0.2, 0.3}};
  SurrogateConfig cfg;
  cfg.perturb_scale = 1e-3;
  cfg.ridge_lambda = 0.0;
  const Vec coef = explain_local_surrogate(m, x, cfg).values;
  EXPECT_TRUE(coef.isApprox(explain_gradient(m, x).values, 1e-2));
}

TEST(LocalSurrogate, RejectsBadConfig) {
  const LinearScoreModel m{Vec{{1.0}}, 0.0};
  SurrogateConfig cfg;
  cfg.kernel_width = 0.0;
  EXPECT_THROW(explain_local_surrogate(m, Vec{{1.0}}, cfg), std::invalid_argument);
}

TEST(GuidedBackprop, EqualsGradientWhenNothingIsNegative) {
  MlpModel m = init_model({{5, Activation::kRelu}, {4, Activation::kRelu}, {1, Activation::kIdentity}}, 3, 1);
  for (auto& l : m.layers) l.weights = l.weights.cwiseAbs();
  const Vec x{{0.5, 1.0, 0.2}};
  EXPECT_TRUE(explain_guided_backprop(m, x).values.isApprox(explain_gradient(m, x).values, 1e-14));
}

TEST(GuidedBackprop, FiniteOnMixedSignNet) {
  const auto m = init_model({{9, Activation::kRelu}, {6, Activation::kRelu}, {2, Activation::kIdentity}}, 4, 5);
  const Vec x{{0.5, -1.0, 0.2, 0.8}};
  const Vec gb = explain_guided_backprop(m, x).values;
  EXPECT_EQ(gb.size(), 4);
  EXPECT_TRUE(gb.allFinite());
}

TEST(GuidedBackprop, NonReluNetsUseOrdinaryGradient) {
  const auto m = init_model({{5, Activation::kTanh}, {2, Activation::kIdentity}}, 3, 7);
  const Vec x{{0.4, -0.1, 0.9}};
  EXPECT_TRUE(explain_guided_backprop(m, x).values.isApprox(explain_gradient(m, x).values, 1e-14));
}

TEST(Lrp, ConservesLogitOnBiasFreeNet) {
  MlpModel m = init_model({{6, Activation::kRelu}, {4, Activation::kRelu}, {1, Activation::kIdentity}}, 3, 9);
  const Vec x{{1.0, 0.5, -0.25}};
  const Vec r = explain_lrp(m, x).values;
  const ForwardTrace t = trace_forward(m, x.transpose());
  const double z = t.acts.back()(0, 0);
  const double start = predicted_class(m, x) == 1 ? z : -z;
  EXPECT_NEAR(r.sum(), start, 1e-6 * std::max(1.0, std::fabs(start)));
}

TEST(Lrp, LinearNetGivesGradTimesInputOfLogit) {
  MlpModel m;
  m.input_dim = 2;
  DenseLayer o;
  o.weights.resize(2, 1);
  o.weights << 2.0, -1.0;
  o.bias = Vec::Zero(1);
  m.layers = {o};
  const Vec x{{1.0, 0.5}};  // logit 1.5, class 1
  const Vec r = explain_lrp(m, x).values;
  EXPECT_NEAR(r(0), 2.0, 1e-6);
  EXPECT_NEAR(r(1), -0.5, 1e-6);
}

TEST(Dispatch, RoutesEveryMethod) {
  const auto m = init_model({{5, Activation::kRelu}, {2, Activation::kIdentity}}, 3, 2);
  const Vec x{{0.3, 0.3, -0.6}};
  for (auto method : {ExplanationMethod::kGradient, ExplanationMethod::kGradTimesInput,
                      ExplanationMethod::kIntegratedGradients, ExplanationMethod::kGuidedBackprop,
                      ExplanationMethod::kLrp, ExplanationMethod::kSmoothGrad, ExplanationMethod::kLocalSurrogate}) {
    const Explanation e = explain(m, x, method, {}, 3);
    EXPECT_EQ(e.method, method);
    EXPECT_EQ(e.values.size(), 3);
    EXPECT_EQ(explanation_method_from_string(to_string(method)), method);
  }
  EXPECT_EQ(explanation_method_from_string("lime"), ExplanationMethod::kLocalSurrogate);
  EXPECT_THROW(explanation_method_from_string("shap"), std::invalid_argument);
}

TEST(Dispatch, RejectsWrongDimension) {
  const LinearScoreModel m{Vec{{1.0, 2.0}}, 0.0};
  EXPECT_THROW(explain_gradient(m, Vec::Zero(3)), std::invalid_argument);
}

TEST(Explanation, JsonCarriesMethodAndValues) {
  const LinearScoreModel m{Vec{{1.0, 2.0}}, 0.0};
  const auto j = to_json(explain_gradient(m, Vec::Zero(2)));
  EXPECT_EQ(j.at("method"), "gradient");
  EXPECT_EQ(j.at("values").size(), 2u);
}

}  // namespace
}  // namespace privex
