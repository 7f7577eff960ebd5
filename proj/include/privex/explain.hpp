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

// Feature-attribution methods. Each is a pure function from (model, point)
// to one attribution per input feature, always explaining the class the
// model predicts at the point.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include <Eigen/Dense>

#include "json.hpp"
#include "privex/nn.hpp"
#include "privex/rng.hpp"
#include "privex/score_model.hpp"

namespace privex {

enum class ExplanationMethod {
  kGradient,
  kGradTimesInput,
  kIntegratedGradients,
  kGuidedBackprop,
  kLrp,
  kSmoothGrad,
  kLocalSurrogate,
};

inline std::string_view to_string(ExplanationMethod m) {
  switch (m) {
    case ExplanationMethod::kGradient: return "gradient";
    case ExplanationMethod::kGradTimesInput: return "grad_x_input";
    case ExplanationMethod::kIntegratedGradients: return "integrated_gradients";
    case ExplanationMethod::kGuidedBackprop: return "guided_backprop";
    case ExplanationMethod::kLrp: return "lrp";
    case ExplanationMethod::kSmoothGrad: return "smoothgrad";
    case ExplanationMethod::kLocalSurrogate: return "local_surrogate";
  }
  return "gradient";
}

inline ExplanationMethod explanation_method_from_string(std::string_view s) {
  for (auto m : {ExplanationMethod::kGradient, ExplanationMethod::kGradTimesInput,
                 ExplanationMethod::kIntegratedGradients, ExplanationMethod::kGuidedBackprop,
                 ExplanationMethod::kLrp, ExplanationMethod::kSmoothGrad,
                 ExplanationMethod::kLocalSurrogate})
    if (to_string(m) == s) return m;
  if (s == "lime") return ExplanationMethod::kLocalSurrogate;
  throw std::invalid_argument("unknown explanation method '" + std::string(s) + "'");
}

struct Explanation {
  Vec values;
  ExplanationMethod method = ExplanationMethod::kGradient;
  nlohmann::json params = nlohmann::json::object();
};

inline nlohmann::json to_json(const Explanation& e) {
  return {{"method", std::string(to_string(e.method))},
          {"params", e.params},
          {"values", std::vector<double>(e.values.data(), e.values.data() + e.values.size())}};
}

struct IgConfig {
  Vec baseline;  // empty means all zeros
  int steps = 50;
};

struct SmoothGradConfig {
  double sigma = 0.1;
  // Optional per-feature noise scale; when non-empty it replaces `sigma`.
  Vec sigma_per_feature;
  int samples = 50;
  std::uint64_t seed = 0;
};

struct SurrogateConfig {
  int num_samples = 500;
  double kernel_width = 1.0;
  double ridge_lambda = 1e-3;
  double perturb_scale = 0.1;
  std::uint64_t seed = 0;
};

// Default SmoothGrad noise: 10% of each feature's standard deviation.
inline SmoothGradConfig smoothgrad_defaults(const Mat& reference, std::uint64_t seed = 0) {
  SmoothGradConfig cfg;
  cfg.seed = seed;
  const Vec mean = reference.colwise().mean().transpose();
  cfg.sigma_per_feature.resize(reference.cols());
  const double denom = std::max<double>(1.0, static_cast<double>(reference.rows() - 1));
  for (Eigen::Index c = 0; c < reference.cols(); ++c)
    cfg.sigma_per_feature(c) =
        0.1 * std::sqrt((reference.col(c).array() - mean(c)).square().sum() / denom);
  return cfg;
}

namespace detail {
inline void check_point(std::size_t dim, const Vec& x) {
  if (static_cast<std::size_t>(x.size()) != dim)
    throw std::invalid_argument("explain: point has " + std::to_string(x.size()) +
                                " features, model expects " + std::to_string(dim));
}
}  // namespace detail

template <ScoreModel M>
Explanation explain_gradient(const M& model, const Vec& x) {
  detail::check_point(input_dim(model), x);
  return {score_gradient(model, x, predicted_class(model, x)), ExplanationMethod::kGradient, {}};
}

template <ScoreModel M>
Explanation explain_grad_times_input(const M& model, const Vec& x) {
  Explanation e = explain_gradient(model, x);
  e.values = e.values.cwiseProduct(x);
  e.method = ExplanationMethod::kGradTimesInput;
  return e;
}

// Riemann sum of the gradient along the straight path from the baseline to
// x, sampled at the right end of each of `steps` equal segments, scaled by
// (x - baseline). The explained class is fixed by the prediction at x.
template <ScoreModel M>
Explanation explain_integrated_gradients(const M& model, const Vec& x, const IgConfig& cfg = {}) {
  detail::check_point(input_dim(model), x);
  if (cfg.steps < 1) throw std::invalid_argument("integrated gradients: steps must be >= 1");
  const Vec baseline = cfg.baseline.size() == 0 ? Vec::Zero(x.size()) : cfg.baseline;
  if (baseline.size() != x.size()) throw std::invalid_argument("integrated gradients: baseline length mismatch");
  const std::size_t cls = predicted_class(model, x);
  const Vec delta = x - baseline;
  Vec total = Vec::Zero(x.size());
  for (int s = 1; s <= cfg.steps; ++s) {
    const double alpha = static_cast<double>(s) / cfg.steps;
    total += score_gradient(model, Vec(baseline + alpha * delta), cls);
  }
  Explanation e;
  e.values = (total / cfg.steps).cwiseProduct(delta);
  e.method = ExplanationMethod::kIntegratedGradients;
  e.params = {{"steps", cfg.steps}};
  return e;
}

// Gradient backpropagated with ReLU gates closed both where the forward
// activation is not positive and where the incoming gradient is negative.
// Non-ReLU activations use their ordinary derivative.
inline Explanation explain_guided_backprop(const MlpModel& model, const Vec& x) {
  detail::check_point(model.input_dim, x);
  const ForwardTrace t = trace_forward(model, x.transpose());
  const Vec probs = t.probs.row(0).transpose();
  const std::size_t cls = argmax(probs);
  auto gate = [&model](std::size_t l, const Vec&, Vec& upstream) {
    if (model.layers[l].activation == Activation::kRelu) upstream = upstream.cwiseMax(0.0);
  };
  return {backprop_to_input(model, t, probability_output_gradient(model, probs, cls), gate),
          ExplanationMethod::kGuidedBackprop, {}};
}

inline constexpr double kLrpEpsilon = 1e-7;

// Epsilon-rule relevance propagation. The relevance of the predicted class's
// output unit starts at that unit's score (its logit, or minus the logit for
// class 0 of a single-logit model); every other output unit starts at zero.
inline Explanation explain_lrp(const MlpModel& model, const Vec& x) {
  detail::check_point(model.input_dim, x);
  const ForwardTrace t = trace_forward(model, x.transpose());
  const std::size_t cls = argmax(Vec(t.probs.row(0).transpose()));
  Vec relevance = Vec::Zero(static_cast<Eigen::Index>(model.output_width()));
  if (model.single_logit()) {
    const double z = t.acts.back()(0, 0);
    relevance(0) = cls == 1 ? z : -z;
  } else {
    relevance(static_cast<Eigen::Index>(cls)) = t.acts.back()(0, static_cast<Eigen::Index>(cls));
  }
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Vec a = t.acts[l].row(0).transpose();
    const Vec z = t.pre[l].row(0).transpose();
    Vec s(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
      s(i) = relevance(i) / (z(i) + kLrpEpsilon * (z(i) >= 0.0 ? 1.0 : -1.0));
    relevance = a.cwiseProduct(model.layers[l].weights * s);
  }
  Explanation e{relevance, ExplanationMethod::kLrp, {{"epsilon", kLrpEpsilon}}};
  return e;
}

// Mean gradient over Gaussian perturbations of x. The running mean keeps a
// noise-free configuration bit-identical to the plain gradient.
template <ScoreModel M>
Explanation explain_smoothgrad(const M& model, const Vec& x, const SmoothGradConfig& cfg) {
  detail::check_point(input_dim(model), x);
  if (cfg.samples < 1) throw std::invalid_argument("smoothgrad: samples must be >= 1");
  if (cfg.sigma_per_feature.size() != 0 && cfg.sigma_per_feature.size() != x.size())
    throw std::invalid_argument("smoothgrad: per-feature sigma length mismatch");
  Rng rng(cfg.seed);
  Vec mean = Vec::Zero(x.size());
  Vec noisy(x.size());
  for (int s = 0; s < cfg.samples; ++s) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double sd = cfg.sigma_per_feature.size() ? cfg.sigma_per_feature(i) : cfg.sigma;
      noisy(i) = x(i) + sd * rng.normal();
    }
    const Vec g = explain_gradient(model, noisy).values;
    mean += (g - mean) / static_cast<double>(s + 1);
  }
  return {mean, ExplanationMethod::kSmoothGrad, {{"sigma", cfg.sigma}, {"samples", cfg.samples}}};
}

// Weighted ridge regression of the predicted-class score on Gaussian
// perturbations around x. Returns the slope coefficients; the intercept is
// fitted but not penalized.
template <ScoreModel M>
Explanation explain_local_surrogate(const M& model, const Vec& x, const SurrogateConfig& cfg) {
  detail::check_point(input_dim(model), x);
  if (cfg.num_samples < 1) throw std::invalid_argument("local surrogate: num_samples must be >= 1");
  if (!(cfg.kernel_width > 0.0) || !(cfg.perturb_scale > 0.0))
    throw std::invalid_argument("local surrogate: kernel_width and perturb_scale must be positive");
  const std::size_t cls = predicted_class(model, x);
  const Eigen::Index n = x.size();
  Rng rng(cfg.seed);
  // Design matrix columns: intercept, then offsets z - x.
  Mat design(cfg.num_samples, n + 1);
  Vec target(cfg.num_samples);
  Vec weight(cfg.num_samples);
  Mat samples(cfg.num_samples, n);
  for (int j = 0; j < cfg.num_samples; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) samples(j, i) = x(i) + cfg.perturb_scale * rng.normal();
    const Vec offset = samples.row(j).transpose() - x;
    design(j, 0) = 1.0;
    design.row(j).tail(n) = offset.transpose();
    weight(j) = std::exp(-offset.squaredNorm() / (cfg.kernel_width * cfg.kernel_width));
  }
  if constexpr (std::is_same_v<M, MlpModel>) {
    target = forward_batch(model, samples).col(static_cast<Eigen::Index>(cls));
  } else {
    for (int j = 0; j < cfg.num_samples; ++j) target(j) = class_score(model, Vec(samples.row(j).transpose()), cls);
  }
  const double lambda = std::max(cfg.ridge_lambda, 1e-8);
  const Mat weighted = design.transpose() * weight.asDiagonal();
  Mat normal = weighted * design;
  normal.diagonal().tail(n).array() += lambda;
  const Vec rhs = weighted * target;
  const Vec coef = normal.ldlt().solve(rhs);
  Explanation e;
  e.values = coef.tail(n);
  e.method = ExplanationMethod::kLocalSurrogate;
  e.params = {{"num_samples", cfg.num_samples},
              {"kernel_width", cfg.kernel_width},
              {"ridge_lambda", lambda},
              {"perturb_scale", cfg.perturb_scale}};
  return e;
}

struct ExplainOptions {
  IgConfig ig;
  SmoothGradConfig smoothgrad;
  SurrogateConfig surrogate;
};

// Dispatches on the method tag. Perturbation methods draw their noise from
// `seed`, which callers derive per point.
inline Explanation explain(const MlpModel& model, const Vec& x, ExplanationMethod method,
                           const ExplainOptions& opts = {}, std::uint64_t seed = 0) {
  switch (method) {
    case ExplanationMethod::kGradient: return explain_gradient(model, x);
    case ExplanationMethod::kGradTimesInput: return explain_grad_times_input(model, x);
    case ExplanationMethod::kIntegratedGradients: return explain_integrated_gradients(model, x, opts.ig);
    case ExplanationMethod::kGuidedBackprop: return explain_guided_backprop(model, x);
    case ExplanationMethod::kLrp: return explain_lrp(model, x);
    case ExplanationMethod::kSmoothGrad: {
      SmoothGradConfig c = opts.smoothgrad;
      c.seed = seed;
      return explain_smoothgrad(model, x, c);
    }
    case ExplanationMethod::kLocalSurrogate: {
      SurrogateConfig c = opts.surrogate;
      c.seed = seed;
      return explain_local_surrogate(model, x, c);
    }
  }
  throw std::invalid_argument("explain: unknown method");
}

}  // namespace privex
