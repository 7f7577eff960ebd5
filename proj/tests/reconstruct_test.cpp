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
#include <numeric>
#include <set>

#include "privex/reconstruct.hpp"
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

InfluenceExplainer small_explainer(std::size_t n_points, std::size_t dim, std::uint64_t seed) {
  SynthConfig c;
  c.n_features = dim;
  c.n_samples = n_points;
  c.seed = seed;
  return build_loo_cache(generate_synthetic(c), logistic_regime());
}

TEST(QueryBudget, ClosedForm) {
  EXPECT_EQ(subspace_query_budget(50, 20), 830u);
  EXPECT_EQ(subspace_query_budget(3, 1), 4u);
  EXPECT_EQ(subspace_query_budget(10, 5), 45u);
  EXPECT_EQ(subspace_query_budget(1, 0), 0u);
}

TEST(ModelSetOracle, MatchesExplainerTop1) {
  const auto e = small_explainer(12, 3, 2);
  const auto o = ModelSetOracle::from(e);
  const Vec y{{0.4, -1.0, 0.7}};
  const auto a = o.query(y);
  const auto r = topk_explain(e, y, 0, 1);
  EXPECT_EQ(a.revealed, r.indices[0]);
  EXPECT_EQ(a.influence, r.influences[0]);
  EXPECT_EQ(a.prediction, e.base.probability(y));
}

class TangentLines : public ::testing::TestWithParam<std::size_t> {};

TEST_P(TangentLines, EachDesignatedQueryRevealsItsPoint) {
  const std::size_t m = GetParam();
  const auto f = tangent_fixture(m);
  ModelSetOracle o{f.base, f.loo};
  for (std::size_t k = 0; k < m; ++k) EXPECT_EQ(o.query(f.queries[k]).revealed, k) << "query " << k + 1;
}

INSTANTIATE_TEST_SUITE_P(Sizes, TangentLines, ::testing::Values(1u, 2u, 3u, 10u));

TEST(TangentLines, FlatZeroBaseBreaksMagnitudeRanking) {
  auto f = tangent_fixture(3, 1.0);
  f.base = {Vec::Zero(1), 0.0};
  ModelSetOracle o{f.base, f.loo};
  EXPECT_EQ(o.query(f.queries[0]).revealed, 2u);
}

TEST(ShiftFixture, ExhaustiveSearchFindsOnePoint) {
  const auto o = same_direction_shift_fixture({0.5, 1.0, 2.0, 0.25});
  EXPECT_EQ(exhaustive_reveal_search(o, -20.0, 20.0, 4000), (std::vector<std::size_t>{2}));
}

TEST(ShiftFixture, AlgorithmStopsOnDependence) {
  const auto o = same_direction_shift_fixture({0.5, 1.0, 2.0});
  const auto st = algorithm1_reconstruct(o);
  EXPECT_EQ(st.revealed, (std::vector<std::size_t>{2}));
  EXPECT_EQ(st.stop, StopReason::kLinearDependence);
}

TEST(ExhaustiveSearch, RejectsMultiDimensionalOracles) {
  const auto e = small_explainer(6, 2, 1);
  EXPECT_THROW(exhaustive_reveal_search(ModelSetOracle::from(e), 0, 1, 10), std::invalid_argument);
}

TEST(Algorithm1, OneDimensionalTwoPointsExhaustsSubspace) {
  Dataset d;
  d.num_classes = 2;
  d.features = Mat{{-1.0}, {1.5}};
  d.labels = {0, 1};
  const auto e = build_loo_cache(d, logistic_regime(), 1);
  const auto st = algorithm1_reconstruct(ModelSetOracle::from(e));
  std::vector<std::size_t> got = st.revealed;
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(st.stop, StopReason::kSubspaceExhausted);
}

TEST(Algorithm1, RecoversEveryPointWhenDimensionExceedsTrainingSize) {
  const auto e = small_explainer(5, 10, 11);
  Algorithm1Config cfg;
  cfg.seed = 3;
  const auto st = algorithm1_reconstruct(ModelSetOracle::from(e), cfg, cache_verifier(e.loo));
  EXPECT_EQ(std::set<std::size_t>(st.revealed.begin(), st.revealed.end()).size(), 5u);
  for (const auto& s : st.steps) {
    ASSERT_TRUE(s.verified.has_value());
    EXPECT_TRUE(*s.verified);
    EXPECT_TRUE(s.constraint_added);
  }
  EXPECT_EQ(st.reveal_query_count, subspace_query_budget(10, 5));
  EXPECT_EQ(st.query_count, st.reveal_query_count + 1);
  EXPECT_EQ(st.subspace_dims, (std::vector<std::size_t>{9, 8, 7, 6, 5}));
  EXPECT_EQ(st.stop, StopReason::kNoInfluentialPoint);
  EXPECT_LT((st.recovered_base.w - e.base.w).norm(), 1e-4 * std::max(1.0, e.base.w.norm()));
  EXPECT_NEAR(st.recovered_base.b, e.base.b, 1e-4 * std::max(1.0, std::fabs(e.base.b)));
}

TEST(Algorithm1, ConstraintSetZeroesRevealedInfluence) {
  const auto e = small_explainer(4, 6, 5);
  const auto st = algorithm1_reconstruct(ModelSetOracle::from(e));
  ASSERT_EQ(static_cast<std::size_t>(st.constraints.rows()), st.revealed.size());
  // Any point meeting every constraint leaves the revealed models' logits
  // equal to the base logit.
  const Vec y = st.constraints.completeOrthogonalDecomposition().solve(st.constraint_rhs);
  for (std::size_t idx : st.revealed) EXPECT_NEAR(e.loo[idx].logit(y), e.base.logit(y), 1e-6) << idx;
  const Vec d0 = e.loo[st.revealed[0]].w - e.base.w;
  EXPECT_NEAR(std::fabs(d0.normalized().dot(st.constraints.row(0).transpose().normalized())), 1.0, 1e-6);
}

TEST(Algorithm1, MaxPointsStopsEarly) {
  const auto e = small_explainer(5, 10, 11);
  Algorithm1Config cfg;
  cfg.max_points = 2;
  const auto st = algorithm1_reconstruct(ModelSetOracle::from(e), cfg);
  EXPECT_EQ(st.revealed.size(), 2u);
  EXPECT_EQ(st.stop, StopReason::kMaxPoints);
}

TEST(Algorithm1, JsonReport) {
  const auto e = small_explainer(3, 4, 2);
  const auto j = to_json(algorithm1_reconstruct(ModelSetOracle::from(e)));
  for (const char* key : {"recovered_count", "query_count", "reveal_query_count", "stop_reason", "steps"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["steps"].size(), j["recovered_count"].get<std::size_t>());
}

TEST(Baselines, CurvesAreMonotoneAndBounded) {
  SynthConfig c;
  c.n_features = 4;
  c.n_samples = 80;
  c.seed = 6;
  const Dataset all = generate_synthetic(c);
  std::vector<std::size_t> tr(30), pool(50);
  std::iota(tr.begin(), tr.end(), 0);
  std::iota(pool.begin(), pool.end(), 30);
  const auto e = build_loo_cache(all.subset(tr), logistic_regime());
  const Mat held = all.subset(pool).features;
  const std::vector<QuerySampler> samplers = {
      UniformSampler{held.colwise().minCoeff().transpose(), held.colwise().maxCoeff().transpose()},
      MarginalSampler{held}, TrueDistributionSampler{held}};
  for (const auto& s : samplers) {
    const auto curve = baseline_attack(e, s, 40, 3, 9);
    ASSERT_EQ(curve.size(), 40u) << sampler_name(s);
    EXPECT_GE(curve.front(), 1u);
    EXPECT_TRUE(std::is_sorted(curve.begin(), curve.end()));
    EXPECT_LE(curve.back(), 30u);
    EXPECT_EQ(curve, baseline_attack(e, s, 40, 3, 9));
  }
  EXPECT_THROW(baseline_attack(e, TrueDistributionSampler{held}, 51, 3, 9), std::invalid_argument);
}

TEST(Baselines, SamplerNames) {
  EXPECT_EQ(sampler_name(UniformSampler{}), "uniform");
  EXPECT_EQ(sampler_name(MarginalSampler{}), "marginal");
  EXPECT_EQ(sampler_name(TrueDistributionSampler{}), "true_distribution");
}

}  // namespace
}  // namespace privex
