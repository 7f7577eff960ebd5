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

// Training-set reconstruction against logistic models that publish
// example-based explanations.
//
// The subspace-reduction attack keeps an affine query region R_q in which
// every point recovered so far has zero influence. Each round samples a
// query in R_q, probes around it until all probes reveal the same training
// point, fits that point's leave-one-out logit on R_q from the probe
// answers, and intersects R_q with the hyperplane where the fitted logit
// equals the model's own logit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "privex/influence.hpp"
#include "privex/logistic.hpp"
#include "privex/rng.hpp"

namespace privex {

// What one explanation query returns: the model's probability at y, the
// most influential training point, and its signed influence (l(y) = 0).
struct OracleAnswer {
  double prediction = 0.0;
  std::size_t revealed = 0;
  double influence = 0.0;
};

template <class O>
concept RevealOracle = requires(const O& o, const Vec& y) {
  { o.query(y) } -> std::convertible_to<OracleAnswer>;
  { o.dim() } -> std::convertible_to<std::size_t>;
};

// Oracle over an explicit base model and leave-one-out models.
struct ModelSetOracle {
  LogisticModel base;
  std::vector<LogisticModel> loo;

  static ModelSetOracle from(const InfluenceExplainer& e) { return {e.base, e.loo}; }

  std::size_t dim() const { return static_cast<std::size_t>(base.w.size()); }

  OracleAnswer query(const Vec& y) const {
    OracleAnswer a;
    a.prediction = base.probability(y);
    double best = -1.0;
    for (std::size_t i = 0; i < loo.size(); ++i) {
      const double inf = a.prediction - loo[i].probability(y);
      if (std::fabs(inf) > best) {
        best = std::fabs(inf);
        a.revealed = i;
        a.influence = inf;
      }
    }
    return a;
  }
};
static_assert(RevealOracle<ModelSetOracle>);

struct Algorithm1Config {
  // Queries are drawn as y0 + B t with t ~ N(0, sample_scale^2 I).
  double sample_scale = 1.0;
  // First probe step as a fraction of sample_scale; halved on disagreement.
  double eps0_fraction = 1e-4;
  double eps_min = 1e-8;
  double zero_influence_tol = 1e-8;
  // Relative size below which the fitted logit difference has no slope left
  // in R_q, i.e. the revealed point's direction is dependent.
  double dependence_tol = 1e-9;
  std::size_t max_points = std::numeric_limits<std::size_t>::max();
  std::uint64_t seed = 0;
};

enum class StopReason {
  kRunning,
  kNoInfluentialPoint,  // every training point has zero influence in R_q
  kLinearDependence,    // revealed point adds no new constraint
  kSubspaceExhausted,   // R_q is a single point
  kRepeatedReveal,
  kOracleInconsistent,  // probes kept disagreeing below eps_min
  kMaxPoints,
};

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::kRunning: return "running";
    case StopReason::kNoInfluentialPoint: return "no_influential_point";
    case StopReason::kLinearDependence: return "linear_dependence";
    case StopReason::kSubspaceExhausted: return "subspace_exhausted";
    case StopReason::kRepeatedReveal: return "repeated_reveal";
    case StopReason::kOracleInconsistent: return "oracle_inconsistent";
    case StopReason::kMaxPoints: return "max_points";
  }
  return "running";
}

struct ReconstructionStep {
  Vec query;
  std::size_t revealed = 0;
  std::size_t queries = 0;        // queries spent on this step
  std::size_t subspace_dim = 0;   // dim R_q when the point was revealed
  bool constraint_added = false;
  // Fitted leave-one-out model, exact on R_q (attacker-visible output).
  Vec fitted_w;
  double fitted_b = 0.0;
  bool rank_deficient = false;
  std::optional<bool> verified;
};

struct ReconstructionState {
  std::vector<std::size_t> revealed;
  std::vector<ReconstructionStep> steps;
  Mat constraints;        // rows a_j with a_j . y = c_j
  Vec constraint_rhs;
  std::vector<std::size_t> subspace_dims;  // dim R_q after each accepted constraint
  LogisticModel recovered_base;
  std::size_t query_count = 0;
  // Queries spent up to and including the last step that revealed a point.
  std::size_t reveal_query_count = 0;
  StopReason stop = StopReason::kRunning;
};

// Called with (revealed index, points of R_q, fitted logits at those points);
// returns whether the fit matches the ground truth.
using FitVerifier = std::function<bool(std::size_t, const Mat&, const Vec&)>;

namespace detail {

inline double logit_of(double p) { return std::log(p) - std::log1p(-p); }

struct AffineFit {
  double intercept = 0.0;
  Vec slope;
  bool rank_deficient = false;
};

// Least-squares fit of v ~ intercept + slope . t over the rows of `coords`.
inline AffineFit fit_affine(const Mat& coords, const Vec& values) {
  Mat design(coords.rows(), coords.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(coords.cols()) = coords;
  Eigen::ColPivHouseholderQR<Mat> qr(design);
  qr.setThreshold(1e-12);
  AffineFit f;
  f.rank_deficient = qr.rank() < design.cols();
  const Vec sol = qr.solve(values);
  f.intercept = sol(0);
  f.slope = sol.tail(coords.cols());
  return f;
}

}  // namespace detail

template <RevealOracle O>
ReconstructionState algorithm1_reconstruct(const O& oracle, const Algorithm1Config& cfg = {},
                                           const FitVerifier& verify = {}) {
  const auto n = static_cast<Eigen::Index>(oracle.dim());
  ReconstructionState st;
  st.constraints.resize(0, n);
  st.constraint_rhs.resize(0);
  Rng rng(cfg.seed);
  Vec origin = Vec::Zero(n);            // particular point of R_q
  Mat basis = Mat::Identity(n, n);      // orthonormal basis of R_q's direction
  bool base_known = false;
  Vec base_w;
  double base_b = 0.0;

  auto ask = [&](const Vec& y) {
    ++st.query_count;
    return oracle.query(y);
  };

  while (st.stop == StopReason::kRunning) {
    if (st.revealed.size() >= cfg.max_points) {
      st.stop = StopReason::kMaxPoints;
      break;
    }
    const Eigen::Index d = basis.cols();
    const std::size_t before = st.query_count;
    Vec t(d);
    for (Eigen::Index i = 0; i < d; ++i) t(i) = cfg.sample_scale * rng.normal();
    const Vec y = origin + basis * t;
    const OracleAnswer first = ask(y);
    if (std::fabs(first.influence) < cfg.zero_influence_tol) {
      st.stop = StopReason::kNoInfluentialPoint;
      break;
    }
    const std::size_t x = first.revealed;
    if (std::find(st.revealed.begin(), st.revealed.end(), x) != st.revealed.end()) {
      st.stop = StopReason::kRepeatedReveal;
      break;
    }
    st.revealed.push_back(x);
    st.reveal_query_count = st.query_count;
    ReconstructionStep step;
    step.query = y;
    step.revealed = x;
    step.subspace_dim = static_cast<std::size_t>(d);
    if (d == 0) {
      step.queries = st.query_count - before;
      st.steps.push_back(std::move(step));
      st.stop = StopReason::kSubspaceExhausted;
      break;
    }

    // Probe along each basis direction until every probe reveals x.
    Mat coords(d + 1, d);
    Vec predictions(d + 1), influences(d + 1);
    coords.row(0) = t.transpose();
    predictions(0) = first.prediction;
    influences(0) = first.influence;
    std::vector<Eigen::Index> pending(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) pending[static_cast<std::size_t>(j)] = j;
    double eps = cfg.eps0_fraction * cfg.sample_scale;
    while (!pending.empty()) {
      if (eps < cfg.eps_min) break;
      std::vector<Eigen::Index> still;
      for (Eigen::Index j : pending) {
        Vec tj = t;
        tj(j) += eps;
        const OracleAnswer a = ask(origin + basis * tj);
        if (a.revealed == x) {
          coords.row(j + 1) = tj.transpose();
          predictions(j + 1) = a.prediction;
          influences(j + 1) = a.influence;
        } else {
          still.push_back(j);
        }
      }
      pending = std::move(still);
      eps /= 2.0;
    }
    step.queries = st.query_count - before;
    st.reveal_query_count = st.query_count;
    if (!pending.empty()) {
      st.steps.push_back(std::move(step));
      st.stop = StopReason::kOracleInconsistent;
      break;
    }

    // Model logits are affine in y; the first round (R_0 = R^n) also pins
    // down the base model from the predictions alone.
    Vec base_logits(d + 1), loo_logits(d + 1);
    for (Eigen::Index r = 0; r <= d; ++r) {
      base_logits(r) = detail::logit_of(predictions(r));
      loo_logits(r) = detail::logit_of(predictions(r) - influences(r));
    }
    if (!base_known) {
      const detail::AffineFit bf = detail::fit_affine(coords, base_logits);
      base_w = basis * bf.slope;
      base_b = base_w.dot(origin) - bf.intercept;
      base_known = true;
      st.recovered_base = {base_w, base_b};
    }
    const detail::AffineFit fit = detail::fit_affine(coords, loo_logits);
    step.rank_deficient = fit.rank_deficient;
    // Lift the fit to R^n: exact on R_q, equal to the base model across it.
    const Vec base_slope = basis.transpose() * base_w;
    step.fitted_w = base_w + basis * (fit.slope - base_slope);
    step.fitted_b = step.fitted_w.dot(origin) - fit.intercept;
    if (verify) {
      Mat points(d + 1, n);
      for (Eigen::Index r = 0; r <= d; ++r) points.row(r) = (origin + basis * coords.row(r).transpose()).transpose();
      step.verified = verify(x, points, loo_logits);
    }

    // Zero-influence set inside R_q: gap(t) = offset + slope . t = 0.
    const Vec slope = fit.slope - base_slope;
    const double offset = fit.intercept - (base_w.dot(origin) - base_b);
    const double scale = std::max({1.0, fit.slope.norm(), base_slope.norm()});
    if (slope.norm() <= cfg.dependence_tol * scale) {
      st.steps.push_back(std::move(step));
      st.stop = StopReason::kLinearDependence;
      break;
    }
    const Vec a = basis * slope;
    const double c = a.dot(origin) - offset;
    st.constraints.conservativeResize(st.constraints.rows() + 1, n);
    st.constraints.row(st.constraints.rows() - 1) = a.transpose();
    st.constraint_rhs.conservativeResize(st.constraint_rhs.size() + 1);
    st.constraint_rhs(st.constraint_rhs.size() - 1) = c;
    // Move the origin onto the hyperplane and drop the slope direction.
    origin += basis * (-offset / slope.squaredNorm() * slope);
    Eigen::HouseholderQR<Mat> qr(slope);
    const Mat q = qr.householderQ() * Mat::Identity(d, d);
    basis = (basis * q.rightCols(d - 1)).eval();
    step.constraint_added = true;
    st.subspace_dims.push_back(static_cast<std::size_t>(basis.cols()));
    st.steps.push_back(std::move(step));
  }
  return st;
}

// Sum over i = 0..l-1 of (n - i + 1): queries to reveal l points in R^n
// with single-step probing.
inline std::size_t subspace_query_budget(std::size_t n, std::size_t l) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < l; ++i) total += n + 1 - std::min(i, n + 1);
  return total;
}

inline nlohmann::json to_json(const ReconstructionState& st) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : st.steps) {
    nlohmann::json j = {{"query", std::vector<double>(s.query.data(), s.query.data() + s.query.size())},
                        {"revealed_index", s.revealed},
                        {"queries", s.queries},
                        {"subspace_dim", s.subspace_dim},
                        {"constraint_added", s.constraint_added},
                        {"rank_deficient", s.rank_deficient}};
    if (s.verified) j["verified"] = *s.verified;
    steps.push_back(std::move(j));
  }
  return {{"recovered_count", st.revealed.size()},
          {"query_count", st.query_count},
          {"reveal_query_count", st.reveal_query_count},
          {"stop_reason", std::string(to_string(st.stop))},
          {"steps", steps}};
}

// Verifier backed by the true leave-one-out models: the fitted logits must
// match within `rel_tol` relative to max(1, |true logit|).
inline FitVerifier cache_verifier(const std::vector<LogisticModel>& loo, double rel_tol = 1e-4) {
  return [&loo, rel_tol](std::size_t idx, const Mat& points, const Vec& logits) {
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
      const double truth = loo.at(idx).logit(points.row(r).transpose());
      if (std::fabs(truth - logits(r)) > rel_tol * std::max(1.0, std::fabs(truth))) return false;
    }
    return true;
  };
}

// Tangent lines of y^2: model k has w_k = 2k, b_k = k^2 (times `scale`), so
// its logit at y = k is the strict maximum over all tangents. The base model
// is a flat logit below every tangent on [1, m], which makes |I| order the
// points by their own probability. The default scale 1/m^2 keeps logits in
// [-1, 1] where neighbouring sigmoids stay distinguishable in double.
struct TangentFixture {
  LogisticModel base;
  std::vector<LogisticModel> loo;
  std::vector<Vec> queries;
};

inline TangentFixture tangent_fixture(std::size_t m, std::optional<double> scale = std::nullopt) {
  if (m < 1) throw std::invalid_argument("tangent_fixture: m must be >= 1");
  TangentFixture f;
  const double md = static_cast<double>(m);
  const double s = scale.value_or(1.0 / (md * md));
  if (!(s > 0.0)) throw std::invalid_argument("tangent_fixture: scale must be positive");
  f.base = {Vec::Zero(1), s * (md * md + 1.0)};
  for (std::size_t k = 1; k <= m; ++k) {
    const double kd = static_cast<double>(k);
    f.loo.push_back({Vec::Constant(1, s * 2.0 * kd), s * kd * kd});
    f.queries.push_back(Vec::Constant(1, kd));
  }
  return f;
}

// Every leave-one-out model is the base model shifted the same way: w_x = w
// and b_x < b for all x. The largest shift dominates every query.
inline ModelSetOracle same_direction_shift_fixture(std::vector<double> shifts, double w = 1.0, double b = 0.0) {
  ModelSetOracle o;
  o.base = {Vec::Constant(1, w), b};
  for (double s : shifts) o.loo.push_back({Vec::Constant(1, w), b - std::fabs(s)});
  return o;
}

// Distinct points revealed by querying every grid point, counting only
// queries where some point has influence at least `tol`.
template <RevealOracle O>
std::vector<std::size_t> exhaustive_reveal_search(const O& oracle, double lo, double hi, std::size_t steps,
                                                  double tol = 1e-8) {
  if (oracle.dim() != 1) throw std::invalid_argument("exhaustive_reveal_search: one-dimensional oracles only");
  std::vector<std::size_t> found;
  for (std::size_t s = 0; s <= steps; ++s) {
    const double y = lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(steps);
    const OracleAnswer a = oracle.query(Vec::Constant(1, y));
    if (std::fabs(a.influence) < tol) continue;
    if (std::find(found.begin(), found.end(), a.revealed) == found.end()) found.push_back(a.revealed);
  }
  std::sort(found.begin(), found.end());
  return found;
}

// Static query generators for the non-adaptive baselines.
struct UniformSampler {
  Vec lower, upper;
};
// Each feature drawn independently from its empirical marginal in `reference`.
struct MarginalSampler {
  Mat reference;
};
// Draws without replacement from points not used in training.
struct TrueDistributionSampler {
  Mat pool;
};
using QuerySampler = std::variant<UniformSampler, MarginalSampler, TrueDistributionSampler>;

inline std::string sampler_name(const QuerySampler& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, UniformSampler>) return "uniform";
        else if constexpr (std::is_same_v<T, MarginalSampler>) return "marginal";
        else return "true_distribution";
      },
      s);
}

// Cumulative number of distinct training points revealed after each query.
inline std::vector<std::size_t> baseline_attack(const InfluenceExplainer& e, const QuerySampler& sampler,
                                                std::size_t queries, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(e.dim());
  std::vector<std::size_t> pool_order;
  if (const auto* t = std::get_if<TrueDistributionSampler>(&sampler)) {
    if (static_cast<std::size_t>(t->pool.rows()) < queries)
      throw std::invalid_argument("baseline_attack: held-out pool has " + std::to_string(t->pool.rows()) +
                                  " points, " + std::to_string(queries) + " queries requested");
    pool_order = rng.permutation(static_cast<std::size_t>(t->pool.rows()));
  }
  std::vector<std::uint8_t> seen(e.size(), 0);
  std::vector<std::size_t> curve;
  curve.reserve(queries);
  std::size_t recovered = 0;
  Vec y(n);
  for (std::size_t q = 0; q < queries; ++q) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, UniformSampler>) {
            for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.uniform(s.lower(i), s.upper(i));
          } else if constexpr (std::is_same_v<T, MarginalSampler>) {
            for (Eigen::Index i = 0; i < n; ++i)
              y(i) = s.reference(static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(s.reference.rows()))), i);
          } else {
            y = s.pool.row(static_cast<Eigen::Index>(pool_order[q])).transpose();
          }
        },
        sampler);
    for (std::size_t idx : topk_explain(e, y, 0, k).indices)
      if (!seen[idx]) {
        seen[idx] = 1;
        ++recovered;
      }
    curve.push_back(recovered);
  }
  return curve;
}

}  // namespace privex
