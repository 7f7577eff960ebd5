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

// A differentiable classifier seen through one class score. Explanation
// methods that only need scores and input gradients are written against the
// ScoreModel concept; the customization points are free functions found by
// argument-dependent lookup.

#pragma once

#include <concepts>
#include <cstddef>
#include <optional>
#include <stdexcept>

#include "privex/logistic.hpp"
#include "privex/nn.hpp"

namespace privex {

template <class M>
concept ScoreModel = requires(const M& m, const Vec& x, std::size_t c) {
  { input_dim(m) } -> std::convertible_to<std::size_t>;
  { predicted_class(m, x) } -> std::convertible_to<std::size_t>;
  { class_score(m, x, c) } -> std::convertible_to<double>;
  { score_gradient(m, x, c) } -> std::convertible_to<Vec>;
};

// MlpModel: scores are post-softmax probabilities.
inline std::size_t input_dim(const MlpModel& m) { return m.input_dim; }
inline std::size_t predicted_class(const MlpModel& m, const Vec& x) { return argmax(forward(m, x)); }
inline double class_score(const MlpModel& m, const Vec& x, std::size_t c) {
  return forward(m, x)(static_cast<Eigen::Index>(c));
}
inline Vec score_gradient(const MlpModel& m, const Vec& x, std::size_t c) { return grad_input(m, x, c); }

// LogisticModel: class 1 scores f(x), class 0 scores 1 - f(x).
inline std::size_t input_dim(const LogisticModel& m) { return static_cast<std::size_t>(m.w.size()); }
inline std::size_t predicted_class(const LogisticModel& m, const Vec& x) {
  return m.logit(x) > 0.0 ? 1 : 0;
}
inline double class_score(const LogisticModel& m, const Vec& x, std::size_t c) {
  if (c > 1) throw std::invalid_argument("logistic model: class out of range");
  const double f = m.probability(x);
  return c == 1 ? f : 1.0 - f;
}
inline Vec score_gradient(const LogisticModel& m, const Vec& x, std::size_t c) {
  if (c > 1) throw std::invalid_argument("logistic model: class out of range");
  const double f = m.probability(x);
  const double s = f * (1.0 - f);
  return (c == 1 ? s : -s) * m.w;
}

// Scalar affine score c(x) = w.x + b, identical for every class. Useful as a
// model whose explanations have closed forms.
struct LinearScoreModel {
  Vec w;
  double b = 0.0;
};

inline std::size_t input_dim(const LinearScoreModel& m) { return static_cast<std::size_t>(m.w.size()); }
inline std::size_t predicted_class(const LinearScoreModel&, const Vec&) { return 0; }
inline double class_score(const LinearScoreModel& m, const Vec& x, std::size_t) { return m.w.dot(x) + m.b; }
inline Vec score_gradient(const LinearScoreModel& m, const Vec&, std::size_t) { return m.w; }

static_assert(ScoreModel<MlpModel>);
static_assert(ScoreModel<LogisticModel>);
static_assert(ScoreModel<LinearScoreModel>);

}  // namespace privex
