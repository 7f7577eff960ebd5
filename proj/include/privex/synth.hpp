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

// Synthetic classification data: class centers on hypercube vertices with
// Gaussian clusters, and the gradient-norm membership analysis run on it.

#pragma once

#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "privex/dataset.hpp"
#include "privex/explain.hpp"
#include "privex/nn.hpp"
#include "privex/parallel.hpp"
#include "privex/rng.hpp"
#include "privex/stats.hpp"

namespace privex {

// kSqrtDim multiplies the noise by sqrt(n_features / 3), the per-coordinate
// spread of clusters mixed by a random uniform[-1, 1] matrix.
enum class NoiseScaling { kConstant, kSqrtDim };

struct SynthConfig {
  std::size_t n_features = 10;
  std::size_t n_classes = 2;
  std::size_t n_samples = 2000;
  double class_sep = 1.0;
  double cluster_std = 1.0;
  NoiseScaling noise_scaling = NoiseScaling::kConstant;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_features < 1) throw std::invalid_argument("synth: n_features must be >= 1");
    if (n_classes < 2) throw std::invalid_argument("synth: n_classes must be >= 2");
    if (n_features < 63 && n_classes > (std::uint64_t{1} << n_features))
      throw std::invalid_argument("synth: " + std::to_string(n_classes) + " classes need more than the " +
                                  std::to_string(std::uint64_t{1} << n_features) + " hypercube vertices");
    if (n_samples < n_classes) throw std::invalid_argument("synth: n_samples must be >= n_classes");
    if (!(class_sep > 0.0)) throw std::invalid_argument("synth: class_sep must be positive");
    if (!(cluster_std >= 0.0)) throw std::invalid_argument("synth: cluster_std must be >= 0");
  }

  double noise_std() const {
    return noise_scaling == NoiseScaling::kSqrtDim
               ? cluster_std * std::sqrt(static_cast<double>(n_features) / 3.0)
               : cluster_std;
  }
};

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_features", c.n_features}, {"n_classes", c.n_classes}, {"n_samples", c.n_samples},
          {"class_sep", c.class_sep},   {"cluster_std", c.cluster_std},
          {"noise_scaling", c.noise_scaling == NoiseScaling::kSqrtDim ? "sqrt_dim" : "constant"},
          {"seed", c.seed}};
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig c = {}) {
  c.n_features = j.value("n_features", c.n_features);
  c.n_classes = j.value("n_classes", c.n_classes);
  c.n_samples = j.value("n_samples", c.n_samples);
  c.class_sep = j.value("class_sep", c.class_sep);
  c.cluster_std = j.value("cluster_std", c.cluster_std);
  c.seed = j.value("seed", c.seed);
  const std::string ns = j.value("noise_scaling", std::string(c.noise_scaling == NoiseScaling::kSqrtDim ? "sqrt_dim" : "constant"));
  if (ns == "constant") c.noise_scaling = NoiseScaling::kConstant;
  else if (ns == "sqrt_dim") c.noise_scaling = NoiseScaling::kSqrtDim;
  else throw std::invalid_argument("synth: unknown noise_scaling '" + ns + "'");
  c.validate();
  return c;
}

// Distinct random vertices of the centered cube with coordinates +-class_sep,
// one row per class.
inline Mat hypercube_centers(const SynthConfig& cfg, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(cfg.n_features);
  Mat centers(static_cast<Eigen::Index>(cfg.n_classes), n);
  std::set<std::vector<bool>> used;
  for (std::size_t c = 0; c < cfg.n_classes;) {
    std::vector<bool> bits(cfg.n_features);
    for (auto&& b : bits) b = (rng.next_u64() >> 63) != 0;
    if (!used.insert(bits).second) continue;
    for (Eigen::Index i = 0; i < n; ++i)
      centers(static_cast<Eigen::Index>(c), i) = bits[static_cast<std::size_t>(i)] ? cfg.class_sep : -cfg.class_sep;
    ++c;
  }
  return centers;
}

// Labels cycle through the classes (equal counts within one) and rows come
// out in a seeded random order.
inline Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Mat centers = hypercube_centers(cfg, rng);
  const auto order = rng.permutation(cfg.n_samples);
  const double sd = cfg.noise_std();
  Dataset d;
  d.num_classes = cfg.n_classes;
  d.features.resize(static_cast<Eigen::Index>(cfg.n_samples), static_cast<Eigen::Index>(cfg.n_features));
  d.labels.resize(cfg.n_samples);
  for (std::size_t r = 0; r < cfg.n_samples; ++r) {
    const std::size_t label = order[r] % cfg.n_classes;
    d.labels[r] = static_cast<int>(label);
    for (Eigen::Index i = 0; i < d.features.cols(); ++i)
      d.features(static_cast<Eigen::Index>(r), i) = centers(static_cast<Eigen::Index>(label), i) + sd * rng.normal();
  }
  return d;
}

template <ScoreModel M>
double grad_norm_l1(const M& model, const Vec& x) {
  return explain_gradient(model, x).values.template lpNorm<1>();
}

// Point-biserial correlation between the norms and the non-membership
// indicator; positive means non-members have larger gradient norms.
inline Correlation membership_correlation(std::span<const double> norms, std::span<const std::uint8_t> membership) {
  if (norms.size() != membership.size()) throw std::invalid_argument("membership_correlation: length mismatch");
  std::vector<double> outsider(membership.size());
  for (std::size_t i = 0; i < membership.size(); ++i) outsider[i] = membership[i] ? 0.0 : 1.0;
  return pearson(norms, outsider);
}

enum class SweepArch { kSmall, kBase, kBig };

inline std::string_view to_string(SweepArch a) {
  switch (a) {
    case SweepArch::kSmall: return "small";
    case SweepArch::kBase: return "base";
    case SweepArch::kBig: return "big";
  }
  return "base";
}

inline SweepArch sweep_arch_from_string(std::string_view s) {
  if (s == "small") return SweepArch::kSmall;
  if (s == "base") return SweepArch::kBase;
  if (s == "big") return SweepArch::kBig;
  throw std::invalid_argument("unknown sweep architecture '" + std::string(s) + "'");
}

inline std::vector<LayerSpec> sweep_architecture(SweepArch a) {
  switch (a) {
    case SweepArch::kSmall: return {{5, Activation::kTanh}};
    case SweepArch::kBase: return {{50, Activation::kTanh}, {50, Activation::kTanh}};
    case SweepArch::kBig: return {{100, Activation::kTanh}, {100, Activation::kTanh}, {100, Activation::kTanh}};
  }
  return {};
}

inline TrainConfig sweep_train_config() {
  TrainConfig c;
  c.optimizer = Optimizer::kAdagrad;
  c.lr = 0.01;
  c.lr_decay = 1e-7;
  c.epochs = 100;
  c.batch_size = 32;
  return c;
}

struct SweepRow {
  std::size_t dim = 0;
  SweepArch arch = SweepArch::kBase;
  double correlation = 0.0;
  bool correlation_undefined = false;
  double train_acc = 0.0;
  double test_acc = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;  // training diverged; row skipped
};

// Per dimension: generate, split 50/50, train, and correlate the gradient
// L1 norm with non-membership over both halves. Dimensions run on
// `threads` workers; rows come back in input order.
inline std::vector<SweepRow> dimension_sweep(const std::vector<std::size_t>& dims, const SynthConfig& base,
                                             SweepArch arch, const TrainConfig& train_cfg = sweep_train_config(),
                                             std::size_t threads = 1) {
  for (std::size_t i = 1; i < dims.size(); ++i)
    if (dims[i] < dims[i - 1]) throw std::invalid_argument("dimension_sweep: dims must be sorted ascending");
  std::vector<SweepRow> rows(dims.size());
  parallel_for(dims.size(), threads, [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.dim = dims[i];
    row.arch = arch;
    SynthConfig cfg = base;
    cfg.n_features = dims[i];
    cfg.seed = derive_seed(base.seed, {dims[i]});
    row.seed = cfg.seed;
    const Dataset all = generate_synthetic(cfg);
    const std::size_t half = all.size() / 2;
    std::vector<std::size_t> tr(half), te(all.size() - half);
    std::iota(tr.begin(), tr.end(), std::size_t{0});
    std::iota(te.begin(), te.end(), half);
    const Dataset train_set = all.subset(tr), test_set = all.subset(te);
    TrainConfig tc = train_cfg;
    tc.seed = derive_seed(cfg.seed, {1});
    try {
      const MlpModel model =
          train(init_model(sweep_architecture(arch), cfg.n_features, derive_seed(cfg.seed, {0})), train_set, tc);
      row.train_acc = accuracy(model, train_set);
      row.test_acc = accuracy(model, test_set);
      const Dataset eval = membership_eval_set(train_set, test_set);
      std::vector<double> norms(eval.size());
      for (std::size_t r = 0; r < eval.size(); ++r) norms[r] = grad_norm_l1(model, eval.point(r));
      const Correlation c = membership_correlation(norms, eval.membership);
      row.correlation = c.value;
      row.correlation_undefined = c.undefined;
    } catch (const TrainingError& e) {
      row.error = e.what();
    }
  });
  return rows;
}

// CSV: dim,arch,correlation,train_acc,test_acc,seed
inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << "dim,arch,correlation,train_acc,test_acc,seed\n";
  char buf[160];
  for (const auto& r : rows) {
    if (r.error) continue;
    std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g,%llu\n", r.dim, std::string(to_string(r.arch)).c_str(),
                  r.correlation, r.train_acc, r.test_acc, static_cast<unsigned long long>(r.seed));
    os << buf;
  }
}

// CSV: header of x0..x{n-1},label, numeric cells at full precision.
inline void write_dataset_csv(std::ostream& os, const Dataset& d) {
  for (std::size_t c = 0; c < d.dim(); ++c) os << 'x' << c << ',';
  os << "label";
  if (!d.groups.empty()) os << ",group";
  os << '\n';
  char buf[32];
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (std::size_t c = 0; c < d.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g,", d.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      os << buf;
    }
    os << d.labels[r];
    if (!d.groups.empty()) os << ',' << d.groups[r];
    os << '\n';
  }
}

}  // namespace privex
