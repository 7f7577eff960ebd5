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

// Exact example-based explanations for logistic regression. Influence of a
// training point x on a query y is the change of the likelihood-form loss at
// y when x is removed and the model retrained under the same regime:
//
//   I_y(x) = L(y, theta) - L(y, theta_x)
//
// so for l(y) = 0 it is f_theta(y) - f_theta_x(y). Rankings use |I|.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "privex/dataset.hpp"
#include "privex/logistic.hpp"
#include "privex/parallel.hpp"

namespace privex {

struct InfluenceExplainer {
  Dataset training;
  TrainConfig config;
  LogisticModel base;
  std::vector<LogisticModel> loo;  // loo[i] trained without row i
  std::size_t k = 5;

  std::size_t size() const { return training.size(); }
  std::size_t dim() const { return training.dim(); }
};

// N + 1 trainings under `cfg`: the full set and every leave-one-out set.
// Retrainings are independent and may run on `threads` workers; entry i is
// always the model for row i.
inline InfluenceExplainer build_loo_cache(const Dataset& data, const TrainConfig& cfg, std::size_t k = 5,
                                          std::size_t threads = 1) {
  data.validate();
  if (data.size() < 2) throw std::invalid_argument("build_loo_cache: need at least two training points");
  if (k < 1) throw std::invalid_argument("build_loo_cache: k must be >= 1");
  InfluenceExplainer e;
  e.training = data;
  e.config = cfg;
  e.k = std::min(k, data.size());
  e.base = train_logistic(data, cfg);
  e.loo.resize(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    try {
      e.loo[i] = train_logistic(data.without(i), cfg);
    } catch (const std::exception& ex) {
      throw TrainingError("leave-one-out retraining for index " + std::to_string(i) + " failed: " + ex.what());
    }
  });
  return e;
}

// Signed influence of every training point on the query (y, label).
inline std::vector<double> influence(const InfluenceExplainer& e, const Vec& y, int label = 0) {
  if (static_cast<std::size_t>(y.size()) != e.dim())
    throw std::invalid_argument("influence: query has " + std::to_string(y.size()) + " features, expected " +
                                std::to_string(e.dim()));
  const double base = likelihood_form(e.base.probability(y), label);
  std::vector<double> out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = base - likelihood_form(e.loo[i].probability(y), label);
  return out;
}

struct RevealResult {
  std::vector<std::size_t> indices;
  std::vector<double> influences;
};

// The k largest entries by magnitude, descending; equal magnitudes are
// ordered by ascending index.
inline RevealResult top_k(const std::vector<double>& influences, std::size_t k) {
  if (k > influences.size()) throw std::invalid_argument("top_k: k exceeds the number of training points");
  std::vector<std::size_t> order(influences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto cmp = [&](std::size_t a, std::size_t b) {
    const double fa = std::fabs(influences[a]), fb = std::fabs(influences[b]);
    return fa != fb ? fa > fb : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), cmp);
  RevealResult r;
  for (std::size_t i = 0; i < k; ++i) {
    r.indices.push_back(order[i]);
    r.influences.push_back(influences[order[i]]);
  }
  return r;
}

inline RevealResult topk_explain(const InfluenceExplainer& e, const Vec& y, int label = 0,
                                 std::optional<std::size_t> k = std::nullopt) {
  return top_k(influence(e, y, label), k.value_or(e.k));
}

// Fraction of training points that appear in their own top-k explanation.
// Rankings depend on |I| only, which does not depend on the query label, so
// every reveal query uses the l(y) = 0 orientation.
inline double self_reveal_rate(const InfluenceExplainer& e, std::size_t k) {
  std::size_t revealed = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto r = topk_explain(e, e.training.point(i), 0, k);
    if (std::find(r.indices.begin(), r.indices.end(), i) != r.indices.end()) ++revealed;
  }
  return static_cast<double>(revealed) / static_cast<double>(e.size());
}

// Per-point self-reveal flags, in training order.
inline std::vector<std::uint8_t> self_reveal_flags(const InfluenceExplainer& e, std::size_t k) {
  std::vector<std::uint8_t> flags(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto r = topk_explain(e, e.training.point(i), 0, k);
    flags[i] = std::find(r.indices.begin(), r.indices.end(), i) != r.indices.end();
  }
  return flags;
}

struct GroupRevealRate {
  std::size_t count = 0;
  std::size_t revealed = 0;
  double rate = 0.0;
};

inline constexpr const char* kOtherGroup = "<other>";

// Self-reveal rate within each group tag. When `known_groups` is given,
// tags outside it are pooled under kOtherGroup. Groups with no points are
// absent from the result.
inline std::map<std::string, GroupRevealRate> group_reveal_rates(
    const InfluenceExplainer& e, std::size_t k, const std::vector<std::string>& known_groups = {}) {
  if (e.training.groups.size() != e.size())
    throw std::invalid_argument("group_reveal_rates: training set has no group tags");
  const std::set<std::string> known(known_groups.begin(), known_groups.end());
  const auto flags = self_reveal_flags(e, k);
  std::map<std::string, GroupRevealRate> out;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const std::string& tag = e.training.groups[i];
    auto& g = out[known.empty() || known.count(tag) ? tag : std::string(kOtherGroup)];
    ++g.count;
    g.revealed += flags[i];
  }
  for (auto& [tag, g] : out) g.rate = static_cast<double>(g.revealed) / static_cast<double>(g.count);
  return out;
}

}  // namespace privex
