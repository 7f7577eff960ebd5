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

#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "json.hpp"
#include "privex/dataset.hpp"
#include "privex/nn.hpp"

namespace privex {

// Binary logistic regression f(x) = 1 / (1 + exp(-(w.x - b))). The bias
// enters with a negative sign so that the tangent-line constructions and
// the zero-influence constraints read (w - w') . y = b - b'.
struct LogisticModel {
  Vec w;
  double b = 0.0;

  double logit(const Vec& x) const { return w.dot(x) - b; }
  double probability(const Vec& x) const { return detail::sigmoid(logit(x)); }
  Vec probabilities(const Mat& x) const {
    Vec z = x * w;
    z.array() -= b;
    return z.unaryExpr([](double v) { return detail::sigmoid(v); });
  }
  bool operator==(const LogisticModel&) const = default;
};

// The likelihood-form loss (1 - f)^l * f^(1 - l) for f = P(label 1) and a
// binary label l. For l = 0 this is f; for l = 1 it is 1 - f.
inline double likelihood_form(double f, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("likelihood_form: label must be 0 or 1");
  return label == 1 ? 1.0 - f : f;
}

inline double loss(const LogisticModel& m, const Vec& x, int label) {
  return likelihood_form(m.probability(x), label);
}

// Mean negative log-likelihood over `data`.
inline double negative_log_likelihood(const LogisticModel& m, const Dataset& data) {
  const Vec p = m.probabilities(data.features);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double q = data.labels[i] == 1 ? p(static_cast<Eigen::Index>(i))
                                         : 1.0 - p(static_cast<Eigen::Index>(i));
    total -= std::log(std::max(q, 1e-300));
  }
  return total / static_cast<double>(data.size());
}

// Full-batch gradient ascent on the mean log-likelihood from w = 0, b = 0,
// for cfg.epochs steps at a constant step cfg.lr (decayed if lr_decay > 0).
// This is the fixed training regime used for every leave-one-out retrain.
inline LogisticModel train_logistic(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  for (int l : data.labels)
    if (l != 0 && l != 1) throw std::invalid_argument("train_logistic: labels must be binary");
  const auto n = static_cast<Eigen::Index>(data.size());
  Vec targets(n);
  for (Eigen::Index i = 0; i < n; ++i) targets(i) = data.labels[static_cast<std::size_t>(i)];
  LogisticModel m{Vec::Zero(data.features.cols()), 0.0};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int step = 0; step < cfg.epochs; ++step) {
    const Vec residual = targets - m.probabilities(data.features);
    const double lr_t = cfg.lr / (1.0 + cfg.lr_decay * step);
    m.w.noalias() += (lr_t * inv_n) * (data.features.transpose() * residual);
    m.b -= lr_t * inv_n * residual.sum();
    if (!m.w.allFinite() || !std::isfinite(m.b))
      throw TrainingError("train_logistic: parameters diverged at step " + std::to_string(step));
  }
  return m;
}

inline double accuracy(const LogisticModel& m, const Dataset& data) {
  const Vec p = m.probabilities(data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if ((p(static_cast<Eigen::Index>(i)) > 0.5 ? 1 : 0) == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

inline nlohmann::json to_json(const LogisticModel& m) {
  return {{"w", std::vector<double>(m.w.data(), m.w.data() + m.w.size())}, {"b", m.b}};
}

}  // namespace privex
