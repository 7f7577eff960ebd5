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

#include <algorithm>

#include "privex/influence.hpp"
#include "privex/synth.hpp"

namespace privex {
namespace {

TrainConfig logistic_regime() {
  TrainConfig tc;
  tc.optimizer = Optimizer::kGradientAscent;
  tc.lr = 1.0;
  tc.epochs = 100;
  return tc;
}

Dataset small_task(std::size_t n, std::size_t dim, std::uint64_t seed) {
  SynthConfig c;
  c.n_features = dim;
  c.n_samples = n;
  c.seed = seed;
  return generate_synthetic(c);
}

TEST(LogisticTraining, GradientAscentFitsSeparableData) {
  const Dataset d = small_task(60, 4, 1);
  const auto m = train_logistic(d, logistic_regime());
  EXPECT_GT(accuracy(m, d), 0.8);
  EXPECT_LT(negative_log_likelihood(m, d), std::log(2.0));
}

TEST(LogisticTraining, RejectsNonBinaryLabels) {
  Dataset d = small_task(10, 2, 1);
  d.num_classes = 3;
  d.labels[0] = 2;
  EXPECT_THROW(train_logistic(d, logistic_regime()), std::invalid_argument);
}

TEST(LikelihoodForm, OrientsByLabel) {
  EXPECT_EQ(likelihood_form(0.3, 0), 0.3);
  EXPECT_DOUBLE_EQ(likelihood_form(0.3, 1), 0.7);
}

TEST(Influence, CachedEqualsFreshRetrainBitExactly) {
  const Dataset d = small_task(15, 3, 2);
  const auto e = build_loo_cache(d, logistic_regime());
  Rng r(4);
  for (int probe = 0; probe < 10; ++probe) {
    Vec y(3);
    for (Eigen::Index i = 0; i < 3; ++i) y(i) = r.normal();
    const std::size_t idx = r.below(d.size());
    const auto fresh = train_logistic(d.without(idx), logistic_regime());
    const double expect = likelihood_form(e.base.probability(y), 0) - likelihood_form(fresh.probability(y), 0);
    EXPECT_EQ(influence(e, y, 0)[idx], expect);
  }
}

TEST(Influence, MagnitudeIgnoresQueryLabel) {
  const auto e = build_loo_cache(small_task(12, 3, 3), logistic_regime());
  const Vec y{{0.2, -0.4, 1.0}};
  const auto a = influence(e, y, 0), b = influence(e, y, 1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::fabs(a[i]), std::fabs(b[i]), 1e-15);
}

TEST(Influence, ThreadedCacheMatchesSerial) {
  const Dataset d = small_task(20, 3, 5);
  const auto a = build_loo_cache(d, logistic_regime(), 5, 1);
  const auto b = build_loo_cache(d, logistic_regime(), 5, 3);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(a.loo[i].w, b.loo[i].w);
}

TEST(Influence, RejectsWrongDimension) {
  const auto e = build_loo_cache(small_task(8, 3, 1), logistic_regime());
  EXPECT_THROW(influence(e, Vec::Zero(2)), std::invalid_argument);
}

TEST(TopK, OrdersByMagnitudeThenIndex) {
  const auto r = top_k({0.1, -0.5, 0.5, 0.2, -0.05}, 3);
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(r.influences[0], -0.5);
  EXPECT_THROW(top_k({0.1}, 2), std::invalid_argument);
}

TEST(SelfReveal, IsolatedOutlierRevealsItselfAtK1) {
  // Two tight clusters plus one far point carrying the minority label of its
  // neighbourhood.
  Rng r(7);
  Dataset d;
  d.num_classes = 2;
  d.features.resize(41, 2);
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2;
    d.labels.push_back(label);
    d.features(i, 0) = (label ? 3.0 : -3.0) + 0.3 * r.normal();
    d.features(i, 1) = 0.3 * r.normal();
  }
  d.features(40, 0) = 0.0;
  d.features(40, 1) = 6.0;
  d.labels.push_back(1);
  const auto e = build_loo_cache(d, logistic_regime(), 1);
  EXPECT_TRUE(self_reveal_flags(e, 1)[40]);
  const double rate = self_reveal_rate(e, 1);
  EXPECT_GT(rate, 0.0);
  EXPECT_LE(rate, 1.0);
}

TEST(SelfReveal, KEqualNRevealsEverything) {
  const auto e = build_loo_cache(small_task(10, 3, 9), logistic_regime());
  EXPECT_EQ(self_reveal_rate(e, 10), 1.0);
}

TEST(GroupReveal, PoolsUnknownTagsAndCountsEachGroup) {
  Dataset d = small_task(12, 3, 4);
  d.groups = {"a", "a", "b", "b", "c", "c", "a", "a", "b", "b", "c", "c"};
  const auto e = build_loo_cache(d, logistic_regime());
  const auto rates = group_reveal_rates(e, 3, {"a", "b"});
  ASSERT_EQ(rates.size(), 3u);
  EXPECT_EQ(rates.at("a").count, 4u);
  EXPECT_EQ(rates.at(kOtherGroup).count, 4u);
  const auto flags = self_reveal_flags(e, 3);
  std::size_t total = 0;
  for (const auto& [tag, g] : rates) total += g.revealed;
  EXPECT_EQ(total, static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1)));
}

TEST(GroupReveal, RequiresTags) {
  const auto e = build_loo_cache(small_task(6, 2, 1), logistic_regime());
  EXPECT_THROW(group_reveal_rates(e, 2), std::invalid_argument);
}

}  // namespace
}  // namespace privex
