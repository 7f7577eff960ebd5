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

// Threshold membership-inference attacks on per-point statistics (loss,
// prediction variance, explanation variance), their calibration, and the
// learned attack network over whole explanation vectors.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "privex/dataset.hpp"
#include "privex/explain.hpp"
#include "privex/nn.hpp"
#include "privex/rng.hpp"

namespace privex {

// Sum of squared deviations from the mean, without the 1/n factor.
inline double variance(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("variance: empty vector");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double total = 0.0;
  for (double x : v) total += (x - mean) * (x - mean);
  return total;
}

inline double variance(const Vec& v) { return variance(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))); }

enum class StatisticKind { kLoss, kPredVar, kExplVar };
// How an explanation vector is reduced to one number. kL1 is the 1-norm
// alternative to the variance.
enum class Reduction { kVariance, kL1 };
enum class MemberIf { kLeq, kGeq };

struct AttackStatistic {
  StatisticKind kind = StatisticKind::kExplVar;
  ExplanationMethod method = ExplanationMethod::kGradient;
  Reduction reduction = Reduction::kVariance;

  // Low loss and low explanation variance indicate members; high prediction
  // variance (a confident prediction) does.
  MemberIf member_if() const { return kind == StatisticKind::kPredVar ? MemberIf::kGeq : MemberIf::kLeq; }

  std::string name() const {
    switch (kind) {
      case StatisticKind::kLoss: return "loss";
      case StatisticKind::kPredVar: return "pred_var";
      case StatisticKind::kExplVar:
        return std::string(reduction == Reduction::kL1 ? "expl_l1:" : "expl_var:") +
               std::string(to_string(method));
    }
    return "unknown";
  }

  static AttackStatistic loss() { return {StatisticKind::kLoss, ExplanationMethod::kGradient, Reduction::kVariance}; }
  static AttackStatistic pred_var() { return {StatisticKind::kPredVar, ExplanationMethod::kGradient, Reduction::kVariance}; }
  static AttackStatistic expl_var(ExplanationMethod m) { return {StatisticKind::kExplVar, m, Reduction::kVariance}; }

  static AttackStatistic parse(std::string_view s) {
    if (s == "loss") return loss();
    if (s == "pred_var" || s == "prediction") return pred_var();
    for (std::string_view prefix : {"expl_var:", "expl_l1:"}) {
      if (s.starts_with(prefix)) {
        AttackStatistic a = expl_var(explanation_method_from_string(s.substr(prefix.size())));
        if (prefix == "expl_l1:") a.reduction = Reduction::kL1;
        return a;
      }
    }
    throw std::invalid_argument("unknown attack statistic '" + std::string(s) + "'");
  }
};

struct ThresholdRule {
  AttackStatistic statistic;
  double tau = 0.0;
  MemberIf member_if = MemberIf::kLeq;

  bool is_member(double value) const { return member_if == MemberIf::kLeq ? value <= tau : value >= tau; }
};

struct AttackResult {
  double accuracy = 0.0;
  double tau_used = 0.0;
  std::vector<std::uint8_t> decisions;
  std::vector<double> values;
  std::string warning;
};

// Statistic of one point. `seed` feeds the perturbation-based explanations.
inline double compute_statistic(const AttackStatistic& stat, const MlpModel& model, const Vec& x,
                                std::optional<int> true_label, const ExplainOptions& opts = {},
                                std::uint64_t seed = 0) {
  switch (stat.kind) {
    case StatisticKind::kLoss:
      if (!true_label) throw std::invalid_argument("loss statistic requires the true label");
      return loss(model, x, *true_label);
    case StatisticKind::kPredVar:
      return variance(forward(model, x));
    case StatisticKind::kExplVar: {
      const Vec v = explain(model, x, stat.method, opts, seed).values;
      return stat.reduction == Reduction::kL1 ? v.lpNorm<1>() : variance(v);
    }
  }
  throw std::invalid_argument("compute_statistic: unknown statistic");
}

// Statistic for every row of `data`; point i uses derive_seed(seed, {i}).
inline std::vector<double> compute_statistics(const AttackStatistic& stat, const MlpModel& model,
                                              const Dataset& data, const ExplainOptions& opts = {},
                                              std::uint64_t seed = 0) {
  std::vector<double> out(data.size());
  if (stat.kind == StatisticKind::kLoss || stat.kind == StatisticKind::kPredVar) {
    const Mat p = forward_batch(model, data.features);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Vec row = p.row(static_cast<Eigen::Index>(i)).transpose();
      out[i] = stat.kind == StatisticKind::kLoss ? cross_entropy(row, data.labels[i]) : variance(row);
    }
    return out;
  }
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = compute_statistic(stat, model, data.point(i), data.labels[i], opts, derive_seed(seed, {i}));
  return out;
}

namespace detail {
// Accuracy on a population with `m` members and `n` non-members. Balanced
// populations use the plain fraction correct so results agree bit-for-bit
// with evaluate_rule.
inline double balanced_accuracy(std::size_t tp, std::size_t m, std::size_t tn, std::size_t n) {
  if (m == n) return static_cast<double>(tp + tn) / static_cast<double>(m + n);
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(m) +
                static_cast<double>(tn) / static_cast<double>(n));
}
}  // namespace detail

struct ThresholdFit {
  double tau = 0.0;
  double accuracy = 0.0;
};

// Scans every cut between consecutive distinct pooled values plus both
// infinities and returns the one with the highest balanced accuracy; ties go
// to the smallest tau.
inline ThresholdFit optimal_threshold(std::span<const double> members,
                                      std::span<const double> nonmembers, MemberIf member_if) {
  if (members.empty() || nonmembers.empty())
    throw std::invalid_argument("optimal_threshold: both populations must be non-empty");
  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(members.size() + nonmembers.size());
  for (double v : members) pooled.emplace_back(v, true);
  for (double v : nonmembers) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const std::size_t m = members.size();
  const std::size_t n = nonmembers.size();
  // below_m / below_n: members / non-members with value <= current cut.
  auto score = [&](std::size_t below_m, std::size_t below_n) {
    return member_if == MemberIf::kLeq ? detail::balanced_accuracy(below_m, m, n - below_n, n)
                                       : detail::balanced_accuracy(m - below_m, m, below_n, n);
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  ThresholdFit best{-kInf, score(0, 0)};
  std::size_t below_m = 0, below_n = 0;
  for (std::size_t i = 0; i < pooled.size();) {
    const double v = pooled[i].first;
    while (i < pooled.size() && pooled[i].first == v) {
      (pooled[i].second ? below_m : below_n) += 1;
      ++i;
    }
    const double cut = i < pooled.size() ? v + (pooled[i].first - v) / 2.0 : kInf;
    const double acc = score(below_m, below_n);
    if (acc > best.accuracy) best = {cut, acc};
  }
  return best;
}

inline ThresholdFit optimal_threshold(std::span<const double> values,
                                      std::span<const std::uint8_t> membership, MemberIf member_if) {
  if (values.size() != membership.size())
    throw std::invalid_argument("optimal_threshold: values and flags differ in length");
  std::vector<double> mem, non;
  for (std::size_t i = 0; i < values.size(); ++i) (membership[i] ? mem : non).push_back(values[i]);
  return optimal_threshold(mem, non, member_if);
}

// Applies the rule to precomputed statistics.
inline AttackResult evaluate_rule(const ThresholdRule& rule, std::span<const double> values,
                                  std::span<const std::uint8_t> membership) {
  if (values.size() != membership.size())
    throw std::invalid_argument("evaluate_rule: values and flags differ in length");
  AttackResult r;
  r.tau_used = rule.tau;
  r.values.assign(values.begin(), values.end());
  std::size_t correct = 0, members = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool d = rule.is_member(values[i]);
    r.decisions.push_back(d ? 1 : 0);
    if (d == (membership[i] != 0)) ++correct;
    members += membership[i] ? 1 : 0;
  }
  if (2 * members != values.size())
    r.warning = "evaluation set is not membership-balanced (" + std::to_string(members) + " of " +
                std::to_string(values.size()) + " are members)";
  r.accuracy = values.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(values.size());
  return r;
}

inline AttackResult evaluate_attack(const ThresholdRule& rule, const MlpModel& model,
                                    const Dataset& eval_set, const ExplainOptions& opts = {},
                                    std::uint64_t seed = 0) {
  if (eval_set.membership.size() != eval_set.size())
    throw std::invalid_argument("evaluate_attack: evaluation set lacks membership flags");
  const auto values = compute_statistics(rule.statistic, model, eval_set, opts, seed);
  return evaluate_rule(rule, values, eval_set.membership);
}

// Per-shadow member/non-member statistics.
struct ShadowStats {
  std::vector<double> members;
  std::vector<double> nonmembers;
};

// Mean of the first `s` shadows' optimal thresholds.
inline double shadow_threshold(std::span<const ShadowStats> shadows, MemberIf member_if, std::size_t s) {
  if (s == 0) throw std::invalid_argument("shadow_threshold: s must be >= 1");
  if (s > shadows.size())
    throw std::invalid_argument("shadow_threshold: requested " + std::to_string(s) + " shadows, " +
                                std::to_string(shadows.size()) + " available");
  double total = 0.0;
  for (std::size_t i = 0; i < s; ++i)
    total += optimal_threshold(shadows[i].members, shadows[i].nonmembers, member_if).tau;
  return total / static_cast<double>(s);
}

// Model-level form: shadow i is trained on the members of shadow_sets[i].
inline double shadow_threshold(std::span<const MlpModel> shadow_models, std::span<const Dataset> shadow_sets,
                               const AttackStatistic& stat, std::size_t s, const ExplainOptions& opts = {},
                               std::uint64_t seed = 0) {
  if (shadow_models.size() != shadow_sets.size())
    throw std::invalid_argument("shadow_threshold: models and datasets differ in count");
  if (s > shadow_models.size())
    throw std::invalid_argument("shadow_threshold: not enough shadow models");
  std::vector<ShadowStats> stats;
  for (std::size_t i = 0; i < s; ++i) {
    const auto values = compute_statistics(stat, shadow_models[i], shadow_sets[i], opts, derive_seed(seed, {i}));
    ShadowStats ss;
    for (std::size_t j = 0; j < values.size(); ++j)
      (shadow_sets[i].membership.at(j) ? ss.members : ss.nonmembers).push_back(values[j]);
    stats.push_back(std::move(ss));
  }
  return shadow_threshold(stats, stat.member_if(), s);
}

// Concatenates per-point feature blocks column-wise, in the given order.
inline Mat combine_sources(std::span<const Mat> parts) {
  if (parts.empty()) throw std::invalid_argument("combine_sources: no sources");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("combine_sources: sources differ in point count");
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p;
    c += p.cols();
  }
  return out;
}

struct AttackNetworkConfig {
  // Layer widths are the reference widths divided by this factor (min 1).
  std::size_t width_divisor = 16;
  int epochs = 15;
  double lr = 0.01;
  double lr_decay = 1e-7;
  std::size_t batch_size = 32;
  double train_fraction = 0.7;
};

struct AttackNetwork {
  MlpModel model;
  Vec feature_mean;
  Vec feature_scale;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<std::size_t> test_rows;

  double member_probability(const Vec& features) const {
    const Vec z = (features - feature_mean).cwiseQuotient(feature_scale);
    return forward(model, z)(1);
  }
};

// Reference attack architecture: r -> 1024 -> 512 -> 64 -> 256 -> 64 -> 1, ReLU.
inline std::vector<LayerSpec> attack_architecture(std::size_t divisor) {
  std::vector<LayerSpec> arch;
  for (std::size_t w : {1024u, 512u, 64u, 256u, 64u})
    arch.push_back({std::max<std::size_t>(1, w / std::max<std::size_t>(1, divisor)), Activation::kRelu});
  arch.push_back({1, Activation::kIdentity});
  return arch;
}

// Trains a binary member/non-member classifier on a seeded 70/30 split.
// Features are standardized with training-split statistics.
inline AttackNetwork train_attack_network(const Mat& features, std::span<const std::uint8_t> membership,
                                          std::uint64_t seed, const AttackNetworkConfig& cfg = {}) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n != membership.size()) throw std::invalid_argument("train_attack_network: row/flag count mismatch");
  std::size_t members = 0;
  for (auto f : membership) members += f ? 1 : 0;
  if (members == 0 || members == n)
    throw std::invalid_argument("train_attack_network: membership flags contain a single class");
  Rng rng(derive_seed(seed, {0}));
  const auto order = rng.permutation(n);
  const std::size_t n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_rows(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  AttackNetwork net;
  Dataset train_set;
  train_set.num_classes = 2;
  train_set.features.resize(static_cast<Eigen::Index>(n_train), features.cols());
  for (std::size_t i = 0; i < n_train; ++i) {
    train_set.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(train_rows[i]));
    train_set.labels.push_back(membership[train_rows[i]] ? 1 : 0);
  }
  net.feature_mean = train_set.features.colwise().mean().transpose();
  net.feature_scale.resize(features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double sd = std::sqrt((train_set.features.col(c).array() - net.feature_mean(c)).square().mean());
    net.feature_scale(c) = sd > 0.0 ? sd : 1.0;
  }
  auto standardize = [&](const Mat& m) {
    Mat z = m.rowwise() - net.feature_mean.transpose();
    return Mat(z.array().rowwise() / net.feature_scale.transpose().array());
  };
  train_set.features = standardize(train_set.features);

  TrainConfig tc;
  tc.optimizer = Optimizer::kAdagrad;
  tc.lr = cfg.lr;
  tc.lr_decay = cfg.lr_decay;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = derive_seed(seed, {1});
  net.model = train(init_model(attack_architecture(cfg.width_divisor), static_cast<std::size_t>(features.cols()),
                               derive_seed(seed, {2})),
                    train_set, tc);
  net.train_accuracy = accuracy(net.model, train_set);

  Dataset test_set;
  test_set.num_classes = 2;
  test_set.features.resize(static_cast<Eigen::Index>(test_rows.size()), features.cols());
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    test_set.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(test_rows[i]));
    test_set.labels.push_back(membership[test_rows[i]] ? 1 : 0);
  }
  test_set.features = standardize(test_set.features);
  net.test_accuracy = accuracy(net.model, test_set);
  net.test_rows = std::move(test_rows);
  return net;
}

// CSV row: run_id, statistic, calibration, tau, accuracy.
inline void write_attack_result_csv_row(std::ostream& os, const std::string& run_id, const AttackStatistic& stat,
                                        const std::string& calibration, const AttackResult& r) {
  os << run_id << ',' << stat.name() << ',' << calibration << ',';
  os.precision(17);
  os << r.tau_used << ',' << r.accuracy << '\n';
}

}  // namespace privex
