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

// Experiment orchestration: configs, the disjoint-subset sampling protocol,
// threshold, epoch-sweep, perturbation and reconstruction runs, and their
// CSV/JSON outputs. Every random stream is derived from the master seed and
// the task's coordinates, so thread count never changes a result.

#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "privex/dataset.hpp"
#include "privex/explain.hpp"
#include "privex/graph.hpp"
#include "privex/influence.hpp"
#include "privex/membership.hpp"
#include "privex/nn.hpp"
#include "privex/parallel.hpp"
#include "privex/reconstruct.hpp"
#include "privex/rng.hpp"
#include "privex/stats.hpp"
#include "privex/synth.hpp"

namespace privex {

inline constexpr const char* kVersion = "0.1.0";

// Invalid or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Datasets from CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(cell);
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto r = std::from_chars(first, s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

}  // namespace detail

// Header row required. Every column other than the label and group columns is
// a numeric feature. Labels must be non-negative integers.
inline Dataset load_csv_dataset(std::istream& in, const std::string& label_column = "label",
                                const std::optional<std::string>& group_column = std::nullopt) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty input, header row expected");
  const auto header = detail::split_csv_line(line);
  std::optional<std::size_t> label_idx, group_idx;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) label_idx = c;
    if (group_column && header[c] == *group_column) group_idx = c;
  }
  if (!label_idx) {
    double probe;
    if (!header.empty() && detail::parse_double(header[0], probe))
      throw std::invalid_argument("csv: header row missing (first row is numeric)");
    throw std::invalid_argument("csv: label column '" + label_column + "' not found in header");
  }
  if (group_column && !group_idx) throw std::invalid_argument("csv: group column '" + *group_column + "' not found");
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != *label_idx && (!group_idx || c != *group_idx)) feature_cols.push_back(c);
  if (feature_cols.empty()) throw std::invalid_argument("csv: no feature columns");

  std::vector<double> values;
  Dataset d;
  std::size_t row = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("csv: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                  " cells, header has " + std::to_string(header.size()));
    for (std::size_t c : feature_cols) {
      double v;
      if (!detail::parse_double(cells[c], v))
        throw std::invalid_argument("csv: non-numeric cell at row " + std::to_string(row) + ", column '" +
                                    header[c] + "': '" + cells[c] + "'");
      values.push_back(v);
    }
    double lv;
    if (!detail::parse_double(cells[*label_idx], lv) || lv < 0 || lv != std::floor(lv))
      throw std::invalid_argument("csv: label at row " + std::to_string(row) + " is not a non-negative integer: '" +
                                  cells[*label_idx] + "'");
    d.labels.push_back(static_cast<int>(lv));
    max_label = std::max(max_label, static_cast<int>(lv));
    if (group_idx) d.groups.push_back(cells[*group_idx]);
  }
  if (d.labels.empty()) throw std::invalid_argument("csv: no data rows");
  const auto n = static_cast<Eigen::Index>(d.labels.size());
  const auto m = static_cast<Eigen::Index>(feature_cols.size());
  d.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), n, m);
  d.num_classes = static_cast<std::size_t>(std::max(2, max_label + 1));
  return d;
}

inline Dataset load_csv_dataset(const std::string& path, const std::string& label_column = "label",
                                const std::optional<std::string>& group_column = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("csv: cannot open '" + path + "'");
  return load_csv_dataset(in, label_column, group_column);
}

// ---------------------------------------------------------------------------
// Configuration

struct CsvSource {
  std::string path;
  std::string label_column = "label";
  std::optional<std::string> group_column;
};

struct Calibration {
  std::size_t shadows = 0;  // 0 means the optimal threshold on the target itself

  std::string name() const { return shadows == 0 ? "optimal" : "shadow" + std::to_string(shadows); }

  static Calibration parse(const std::string& s) {
    if (s == "optimal") return {0};
    if (s.starts_with("shadow")) {
      const std::string num = s.substr(6);
      std::size_t v = 0;
      const auto r = std::from_chars(num.data(), num.data() + num.size(), v);
      if (num.empty() || r.ec != std::errc() || r.ptr != num.data() + num.size() || v == 0)
        throw ConfigError("calibration '" + s + "': expected 'optimal' or 'shadow<s>' with s >= 1");
      return {v};
    }
    throw ConfigError("unknown calibration '" + s + "'");
  }
};

struct ReconstructionOptions {
  std::size_t training_points = 20;
  std::size_t k = 5;
  std::size_t baseline_queries = 1000;
  std::size_t random_starts = 10;
  TrainConfig logistic{Optimizer::kGradientAscent, 1.0, 0.0, 100, 0, 0, 1.0};
  Algorithm1Config algorithm1;
  bool verify_fits = true;
};

struct SweepOptions {
  std::vector<std::size_t> dims{10, 100, 500, 1000, 2000};
  SweepArch arch = SweepArch::kBase;
  TrainConfig train = sweep_train_config();
};

struct ExperimentConfig {
  std::variant<SynthConfig, CsvSource> source = SynthConfig{};
  std::vector<LayerSpec> arch{{128, Activation::kTanh}, {64, Activation::kTanh}};
  TrainConfig train;
  std::vector<AttackStatistic> statistics{AttackStatistic::expl_var(ExplanationMethod::kGradient)};
  std::vector<Calibration> calibrations{{0}};
  std::size_t repetitions = 1;
  std::size_t subsets_per_repetition = 4;
  std::size_t subset_size = 0;             // 0: N / subsets, rounded down to even
  std::size_t targets_per_repetition = 0;  // 0: every subset is attacked
  bool allow_resampling = false;
  std::vector<int> epoch_grid{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  ExplainOptions explain;
  double smoothgrad_noise_fraction = 0.1;  // of each feature's std on the target's training half
  ReconstructionOptions reconstruction;
  SweepOptions sweep;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const {
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (subsets_per_repetition < 1) throw ConfigError("subsets_per_repetition must be >= 1");
    if (subset_size % 2 != 0) throw ConfigError("subset_size must be even for a 50/50 split");
    if (targets_per_repetition > subsets_per_repetition)
      throw ConfigError("targets_per_repetition exceeds subsets_per_repetition");
    for (const auto& c : calibrations)
      if (c.shadows > 0 && subsets_per_repetition <= c.shadows)
        throw ConfigError(c.name() + " calibration requires subsets_per_repetition > " + std::to_string(c.shadows));
    if (statistics.empty()) throw ConfigError("at least one attack statistic is required");
    if (calibrations.empty()) throw ConfigError("at least one calibration is required");
    if (arch.empty()) throw ConfigError("arch must have at least one layer");
    if (epoch_grid.empty()) throw ConfigError("epoch_grid must be non-empty");
    for (int e : epoch_grid)
      if (e < 1) throw ConfigError("epoch_grid entries must be >= 1");
    if (!(smoothgrad_noise_fraction >= 0.0)) throw ConfigError("smoothgrad_noise_fraction must be >= 0");
    try {
      train.validate();
      reconstruction.logistic.validate();
      if (const auto* s = std::get_if<SynthConfig>(&source)) s->validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    for (std::size_t i = 1; i < sweep.dims.size(); ++i)
      if (sweep.dims[i] < sweep.dims[i - 1]) throw ConfigError("sweep.dims must be sorted ascending");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline std::vector<LayerSpec> arch_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> arch;
  for (const auto& l : j) {
    reject_unknown_keys(l, {"width", "activation"}, "arch entry");
    arch.push_back({l.at("width").get<std::size_t>(),
                    activation_from_string(l.value("activation", std::string("tanh")))});
  }
  return arch;
}

inline nlohmann::json arch_to_json(const std::vector<LayerSpec>& arch) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& l : arch) j.push_back({{"width", l.width}, {"activation", std::string(to_string(l.activation))}});
  return j;
}

inline TrainConfig train_from_json(const nlohmann::json& j, TrainConfig base) {
  reject_unknown_keys(j, {"optimizer", "lr", "lr_decay", "epochs", "batch_size", "seed", "init_scale"}, "train");
  nlohmann::json merged = train_config_to_json(base);
  merged.update(j);
  return train_config_from_json(merged);
}

}  // namespace detail

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    detail::reject_unknown_keys(
        j,
        {"dataset", "arch", "train", "statistics", "calibrations", "repetitions", "subsets_per_repetition",
         "subset_size", "targets_per_repetition", "allow_resampling", "epoch_grid", "explain",
         "smoothgrad_noise_fraction", "reconstruction", "sweep", "seed", "threads"},
        "config");
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      const std::string kind = d.value("kind", std::string("synthetic"));
      if (kind == "synthetic") {
        detail::reject_unknown_keys(d, {"kind", "n_features", "n_classes", "n_samples", "class_sep", "cluster_std",
                                        "noise_scaling", "seed"},
                                    "dataset");
        c.source = synth_config_from_json(d);
      } else if (kind == "csv") {
        detail::reject_unknown_keys(d, {"kind", "path", "label_column", "group_column"}, "dataset");
        CsvSource s;
        s.path = d.at("path").get<std::string>();
        s.label_column = d.value("label_column", s.label_column);
        if (d.contains("group_column")) s.group_column = d.at("group_column").get<std::string>();
        c.source = s;
      } else {
        throw ConfigError("dataset.kind must be 'synthetic' or 'csv', got '" + kind + "'");
      }
    }
    if (j.contains("arch")) c.arch = detail::arch_from_json(j.at("arch"));
    if (j.contains("train")) c.train = detail::train_from_json(j.at("train"), c.train);
    if (j.contains("statistics")) {
      c.statistics.clear();
      for (const auto& s : j.at("statistics")) c.statistics.push_back(AttackStatistic::parse(s.get<std::string>()));
    }
    if (j.contains("calibrations")) {
      c.calibrations.clear();
      for (const auto& s : j.at("calibrations")) c.calibrations.push_back(Calibration::parse(s.get<std::string>()));
    }
    c.repetitions = j.value("repetitions", c.repetitions);
    c.subsets_per_repetition = j.value("subsets_per_repetition", c.subsets_per_repetition);
    c.subset_size = j.value("subset_size", c.subset_size);
    c.targets_per_repetition = j.value("targets_per_repetition", c.targets_per_repetition);
    c.allow_resampling = j.value("allow_resampling", c.allow_resampling);
    if (j.contains("epoch_grid")) c.epoch_grid = j.at("epoch_grid").get<std::vector<int>>();
    if (j.contains("explain")) {
      const auto& e = j.at("explain");
      detail::reject_unknown_keys(e, {"ig_steps", "smoothgrad_samples", "surrogate"}, "explain");
      c.explain.ig.steps = e.value("ig_steps", c.explain.ig.steps);
      c.explain.smoothgrad.samples = e.value("smoothgrad_samples", c.explain.smoothgrad.samples);
      if (e.contains("surrogate")) {
        const auto& s = e.at("surrogate");
        detail::reject_unknown_keys(s, {"num_samples", "kernel_width", "ridge_lambda", "perturb_scale"},
                                    "explain.surrogate");
        auto& sc = c.explain.surrogate;
        sc.num_samples = s.value("num_samples", sc.num_samples);
        sc.kernel_width = s.value("kernel_width", sc.kernel_width);
        sc.ridge_lambda = s.value("ridge_lambda", sc.ridge_lambda);
        sc.perturb_scale = s.value("perturb_scale", sc.perturb_scale);
      }
    }
    c.smoothgrad_noise_fraction = j.value("smoothgrad_noise_fraction", c.smoothgrad_noise_fraction);
    if (j.contains("reconstruction")) {
      const auto& r = j.at("reconstruction");
      detail::reject_unknown_keys(r, {"training_points", "k", "baseline_queries", "random_starts", "logistic",
                                      "sample_scale", "verify_fits"},
                                  "reconstruction");
      auto& rc = c.reconstruction;
      rc.training_points = r.value("training_points", rc.training_points);
      rc.k = r.value("k", rc.k);
      rc.baseline_queries = r.value("baseline_queries", rc.baseline_queries);
      rc.random_starts = r.value("random_starts", rc.random_starts);
      rc.algorithm1.sample_scale = r.value("sample_scale", rc.algorithm1.sample_scale);
      rc.verify_fits = r.value("verify_fits", rc.verify_fits);
      if (r.contains("logistic")) rc.logistic = detail::train_from_json(r.at("logistic"), rc.logistic);
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      detail::reject_unknown_keys(s, {"dims", "arch", "train"}, "sweep");
      if (s.contains("dims")) c.sweep.dims = s.at("dims").get<std::vector<std::size_t>>();
      if (s.contains("arch")) c.sweep.arch = sweep_arch_from_string(s.at("arch").get<std::string>());
      if (s.contains("train")) c.sweep.train = detail::train_from_json(s.at("train"), c.sweep.train);
    }
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  if (const auto* s = std::get_if<SynthConfig>(&c.source)) {
    j["dataset"] = to_json(*s);
    j["dataset"]["kind"] = "synthetic";
  } else {
    const auto& csv = std::get<CsvSource>(c.source);
    j["dataset"] = {{"kind", "csv"}, {"path", csv.path}, {"label_column", csv.label_column}};
    if (csv.group_column) j["dataset"]["group_column"] = *csv.group_column;
  }
  j["arch"] = detail::arch_to_json(c.arch);
  j["train"] = train_config_to_json(c.train);
  j["statistics"] = nlohmann::json::array();
  for (const auto& s : c.statistics) j["statistics"].push_back(s.name());
  j["calibrations"] = nlohmann::json::array();
  for (const auto& s : c.calibrations) j["calibrations"].push_back(s.name());
  j["repetitions"] = c.repetitions;
  j["subsets_per_repetition"] = c.subsets_per_repetition;
  j["subset_size"] = c.subset_size;
  j["targets_per_repetition"] = c.targets_per_repetition;
  j["allow_resampling"] = c.allow_resampling;
  j["epoch_grid"] = c.epoch_grid;
  j["explain"] = {{"ig_steps", c.explain.ig.steps},
                  {"smoothgrad_samples", c.explain.smoothgrad.samples},
                  {"surrogate",
                   {{"num_samples", c.explain.surrogate.num_samples},
                    {"kernel_width", c.explain.surrogate.kernel_width},
                    {"ridge_lambda", c.explain.surrogate.ridge_lambda},
                    {"perturb_scale", c.explain.surrogate.perturb_scale}}}};
  j["smoothgrad_noise_fraction"] = c.smoothgrad_noise_fraction;
  const auto& r = c.reconstruction;
  j["reconstruction"] = {{"training_points", r.training_points}, {"k", r.k},
                         {"baseline_queries", r.baseline_queries}, {"random_starts", r.random_starts},
                         {"logistic", train_config_to_json(r.logistic)}, {"sample_scale", r.algorithm1.sample_scale},
                         {"verify_fits", r.verify_fits}};
  j["sweep"] = {{"dims", c.sweep.dims}, {"arch", std::string(to_string(c.sweep.arch))},
                {"train", train_config_to_json(c.sweep.train)}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

inline Dataset load_source(const ExperimentConfig& c) {
  if (const auto* s = std::get_if<SynthConfig>(&c.source)) return generate_synthetic(*s);
  const auto& csv = std::get<CsvSource>(c.source);
  return load_csv_dataset(csv.path, csv.label_column, csv.group_column);
}

// ---------------------------------------------------------------------------
// Sampling protocol

struct SubsetSplit {
  std::vector<std::size_t> train;  // members
  std::vector<std::size_t> test;   // non-members
};

// `subsets` disjoint random subsets of `subset_size` rows, each split 50/50.
// With `allow_resampling`, rows are disjoint within a subset but may repeat
// across subsets.
inline std::vector<SubsetSplit> sampling_protocol(std::size_t n_rows, std::size_t subsets, std::size_t subset_size,
                                                  bool allow_resampling, std::uint64_t seed) {
  if (subsets < 1) throw std::invalid_argument("sampling_protocol: need at least one subset");
  if (subset_size == 0) subset_size = (n_rows / subsets) & ~std::size_t{1};
  if (subset_size < 2 || subset_size % 2 != 0)
    throw std::invalid_argument("sampling_protocol: subset size must be an even number >= 2");
  if (subset_size > n_rows || (!allow_resampling && subsets * subset_size > n_rows))
    throw std::invalid_argument("sampling_protocol: " + std::to_string(n_rows) + " rows cannot supply " +
                                std::to_string(subsets) + " disjoint subsets of " + std::to_string(subset_size) +
                                (allow_resampling ? "" : " (enable allow_resampling to reuse rows)"));
  Rng rng(seed);
  std::vector<SubsetSplit> out(subsets);
  std::vector<std::size_t> order = rng.permutation(n_rows);
  const std::size_t half = subset_size / 2;
  for (std::size_t s = 0; s < subsets; ++s) {
    if (allow_resampling && s > 0) order = rng.permutation(n_rows);
    const std::size_t base = allow_resampling ? 0 : s * subset_size;
    out[s].train.assign(order.begin() + static_cast<std::ptrdiff_t>(base),
                        order.begin() + static_cast<std::ptrdiff_t>(base + half));
    out[s].test.assign(order.begin() + static_cast<std::ptrdiff_t>(base + half),
                       order.begin() + static_cast<std::ptrdiff_t>(base + subset_size));
  }
  return out;
}

// Throws if any split is unbalanced or, without resampling, if two subsets
// share a row.
inline void validate_partition(const std::vector<SubsetSplit>& splits, bool allow_resampling) {
  std::map<std::size_t, std::size_t> owner;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    if (splits[s].train.size() != splits[s].test.size())
      throw std::logic_error("partition: subset " + std::to_string(s) + " is not split 50/50");
    std::vector<std::size_t> rows = splits[s].train;
    rows.insert(rows.end(), splits[s].test.begin(), splits[s].test.end());
    std::sort(rows.begin(), rows.end());
    if (std::adjacent_find(rows.begin(), rows.end()) != rows.end())
      throw std::logic_error("partition: subset " + std::to_string(s) + " repeats a row");
    if (allow_resampling) continue;
    for (std::size_t r : rows) {
      const auto [it, fresh] = owner.emplace(r, s);
      if (!fresh)
        throw std::logic_error("partition: row " + std::to_string(r) + " is in subsets " +
                               std::to_string(it->second) + " and " + std::to_string(s));
    }
  }
}

// ---------------------------------------------------------------------------
// Threshold experiments

struct RunRecord {
  std::string run_id;
  std::size_t repetition = 0;
  std::size_t target = 0;
  std::string statistic;
  std::string calibration;
  double tau = 0.0;
  double accuracy = 0.0;
  double target_train_acc = 0.0;
  double target_test_acc = 0.0;
  int epochs = 0;
  double wall_time = 0.0;  // seconds; kept out of the CSV
  std::vector<std::uint8_t> decisions;
  std::vector<std::uint8_t> membership;
};

struct RunFailure {
  std::string run_id;
  std::string message;
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<RunFailure> failures;
  std::vector<std::vector<SubsetSplit>> partitions;  // per repetition
  double wall_time = 0.0;
};

namespace detail {

struct TargetOutcome {
  bool ok = false;
  std::string error;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double wall_time = 0.0;
  std::vector<std::uint8_t> membership;
  std::vector<std::vector<double>> values;  // per statistic
};

inline std::string run_id(std::size_t rep, std::size_t target) {
  return "r" + std::to_string(rep) + "_t" + std::to_string(target);
}

inline TargetOutcome run_target(const ExperimentConfig& cfg, const Dataset& data, const SubsetSplit& split,
                                std::size_t rep, std::size_t t) {
  TargetOutcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Dataset train_set = data.subset(split.train);
    const Dataset test_set = data.subset(split.test);
    const Dataset eval = membership_eval_set(train_set, test_set);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, {rep, t, 2});
    const MlpModel model = train(init_model(cfg.arch, data.dim(), derive_seed(cfg.seed, {rep, t, 1}), tc.init_scale),
                                 train_set, tc);
    out.train_acc = accuracy(model, train_set);
    out.test_acc = accuracy(model, test_set);
    ExplainOptions opts = cfg.explain;
    const SmoothGradConfig sg = smoothgrad_defaults(train_set.features);
    opts.smoothgrad.sigma_per_feature = sg.sigma_per_feature * (cfg.smoothgrad_noise_fraction / 0.1);
    out.membership = eval.membership;
    for (std::size_t s = 0; s < cfg.statistics.size(); ++s)
      out.values.push_back(compute_statistics(cfg.statistics[s], model, eval, opts, derive_seed(cfg.seed, {rep, t, 3, s})));
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace detail

// Per repetition: partition, train every subset's target, compute each
// statistic on its member/non-member halves, then attack the first
// `targets_per_repetition` targets under every calibration. Shadows for
// target t are the other subsets' models in index order.
inline ExperimentResult run_threshold_experiment(const ExperimentConfig& cfg, const Dataset& data) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  const std::size_t subsets = cfg.subsets_per_repetition;
  std::size_t max_shadows = 0;
  for (const auto& c : cfg.calibrations) max_shadows = std::max(max_shadows, c.shadows);
  const std::size_t attacked = cfg.targets_per_repetition == 0 ? subsets : cfg.targets_per_repetition;
  // Only models that serve as a target or a shadow are trained.
  const std::size_t trained = std::min(subsets, std::max(attacked, max_shadows + 1));
  for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
    res.partitions.push_back(sampling_protocol(data.size(), subsets, cfg.subset_size, cfg.allow_resampling,
                                               derive_seed(cfg.seed, {rep, 0})));
    validate_partition(res.partitions.back(), cfg.allow_resampling);
  }
  std::vector<detail::TargetOutcome> outcomes(cfg.repetitions * trained);
  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t task) {
    const std::size_t rep = task / trained, t = task % trained;
    outcomes[task] = detail::run_target(cfg, data, res.partitions[rep][t], rep, t);
  });
  for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
    for (std::size_t t = 0; t < attacked; ++t) {
      const auto& target = outcomes[rep * trained + t];
      const std::string id = detail::run_id(rep, t);
      if (!target.ok) {
        res.failures.push_back({id, target.error});
        continue;
      }
      for (std::size_t s = 0; s < cfg.statistics.size(); ++s) {
        const AttackStatistic& stat = cfg.statistics[s];
        for (const Calibration& cal : cfg.calibrations) {
          double tau;
          if (cal.shadows == 0) {
            tau = optimal_threshold(target.values[s], target.membership, stat.member_if()).tau;
          } else {
            std::vector<ShadowStats> shadows;
            bool missing = false;
            for (std::size_t o = 0; o < trained && shadows.size() < cal.shadows; ++o) {
              if (o == t) continue;
              const auto& sh = outcomes[rep * trained + o];
              if (!sh.ok) {
                missing = true;
                break;
              }
              ShadowStats ss;
              for (std::size_t i = 0; i < sh.values[s].size(); ++i)
                (sh.membership[i] ? ss.members : ss.nonmembers).push_back(sh.values[s][i]);
              shadows.push_back(std::move(ss));
            }
            if (missing || shadows.size() < cal.shadows) {
              res.failures.push_back({id, cal.name() + ": a shadow model failed to train"});
              continue;
            }
            tau = shadow_threshold(shadows, stat.member_if(), cal.shadows);
          }
          const AttackResult ar = evaluate_rule({stat, tau, stat.member_if()}, target.values[s], target.membership);
          RunRecord r;
          r.run_id = id;
          r.repetition = rep;
          r.target = t;
          r.statistic = stat.name();
          r.calibration = cal.name();
          r.tau = tau;
          r.accuracy = ar.accuracy;
          r.target_train_acc = target.train_acc;
          r.target_test_acc = target.test_acc;
          r.epochs = cfg.train.epochs;
          r.wall_time = target.wall_time;
          r.decisions = ar.decisions;
          r.membership = target.membership;
          res.records.push_back(std::move(r));
        }
      }
    }
  }
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// Fraction of persisted decisions that match membership.
inline double recompute_accuracy(const RunRecord& r) {
  if (r.decisions.size() != r.membership.size() || r.decisions.empty())
    throw std::invalid_argument("recompute_accuracy: record has no decisions");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < r.decisions.size(); ++i) correct += (r.decisions[i] != 0) == (r.membership[i] != 0);
  return static_cast<double>(correct) / static_cast<double>(r.decisions.size());
}

struct StatisticSummary {
  std::string statistic;
  std::string calibration;
  int epochs = 0;
  std::size_t runs = 0;
  double mean_accuracy = 0.0;
  double mean_train_acc = 0.0;
  double mean_test_acc = 0.0;
};

// Mean over records grouped by (epochs, statistic, calibration), in first-seen order.
inline std::vector<StatisticSummary> summarize(const std::vector<RunRecord>& records) {
  std::vector<StatisticSummary> out;
  for (const auto& r : records) {
    auto it = std::find_if(out.begin(), out.end(), [&](const StatisticSummary& s) {
      return s.statistic == r.statistic && s.calibration == r.calibration && s.epochs == r.epochs;
    });
    if (it == out.end()) {
      out.push_back({r.statistic, r.calibration, r.epochs, 0, 0.0, 0.0, 0.0});
      it = out.end() - 1;
    }
    ++it->runs;
    it->mean_accuracy += r.accuracy;
    it->mean_train_acc += r.target_train_acc;
    it->mean_test_acc += r.target_test_acc;
  }
  for (auto& s : out) {
    const double n = static_cast<double>(s.runs);
    s.mean_accuracy /= n;
    s.mean_train_acc /= n;
    s.mean_test_acc /= n;
  }
  return out;
}

inline double mean_accuracy(const std::vector<RunRecord>& records, const std::string& statistic,
                            const std::string& calibration) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : records)
    if (r.statistic == statistic && r.calibration == calibration) {
      total += r.accuracy;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("mean_accuracy: no records for " + statistic + "/" + calibration);
  return total / static_cast<double>(n);
}

// Retrains the targets for every epoch count and attacks with the optimal
// threshold.
inline ExperimentResult run_overfit_sweep(const ExperimentConfig& cfg, const Dataset& data) {
  if (cfg.epoch_grid.empty()) throw ConfigError("epoch grid must be non-empty");
  ExperimentResult all;
  for (int epochs : cfg.epoch_grid) {
    ExperimentConfig c = cfg;
    c.train.epochs = epochs;
    c.calibrations = {{0}};
    ExperimentResult r = run_threshold_experiment(c, data);
    all.records.insert(all.records.end(), r.records.begin(), r.records.end());
    all.failures.insert(all.failures.end(), r.failures.begin(), r.failures.end());
    if (all.partitions.empty()) all.partitions = std::move(r.partitions);
    all.wall_time += r.wall_time;
  }
  return all;
}

// Rank correlation between epochs and mean attack accuracy for one statistic.
inline Correlation epoch_accuracy_spearman(const std::vector<RunRecord>& records, const std::string& statistic) {
  std::vector<double> epochs, acc;
  for (const auto& s : summarize(records))
    if (s.statistic == statistic) {
      epochs.push_back(s.epochs);
      acc.push_back(s.mean_accuracy);
    }
  if (epochs.size() < 2) return {0.0, true};
  return spearman(epochs, acc);
}

// The reduced-scale comparison of gradient, prediction and the two
// perturbation-based explanations under optimal calibration.
inline ExperimentConfig perturbation_experiment_config(ExperimentConfig cfg) {
  cfg.statistics = {AttackStatistic::expl_var(ExplanationMethod::kGradient), AttackStatistic::pred_var(),
                    AttackStatistic::expl_var(ExplanationMethod::kLocalSurrogate),
                    AttackStatistic::expl_var(ExplanationMethod::kSmoothGrad)};
  cfg.calibrations = {{0}};
  return cfg;
}

inline ExperimentResult run_reduced_perturbation_experiment(const ExperimentConfig& cfg, const Dataset& data) {
  return run_threshold_experiment(perturbation_experiment_config(cfg), data);
}

// ---------------------------------------------------------------------------
// Reconstruction campaign

struct ReconstructionReport {
  nlohmann::json report;
  GraphMetrics graph;
  std::map<std::string, std::vector<std::size_t>> baseline_curves;
  double wall_time = 0.0;
};

// Binary logistic target on a seeded sample of `training_points` rows; the
// remaining rows form the attacker's held-out pool.
inline ReconstructionReport run_reconstruction_campaign(const ExperimentConfig& cfg, const Dataset& data) {
  const auto start = std::chrono::steady_clock::now();
  const auto& rc = cfg.reconstruction;
  if (data.num_classes != 2) throw std::invalid_argument("reconstruction: binary labels required");
  if (rc.training_points < 2 || rc.training_points > data.size())
    throw std::invalid_argument("reconstruction: training_points must be in [2, " + std::to_string(data.size()) + "]");
  Rng rng(derive_seed(cfg.seed, {0}));
  const auto order = rng.permutation(data.size());
  const std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(rc.training_points));
  const std::vector<std::size_t> pool_rows(order.begin() + static_cast<std::ptrdiff_t>(rc.training_points), order.end());
  const Dataset train_set = data.subset(train_rows);
  const Dataset pool = data.subset(pool_rows);
  const InfluenceExplainer e = build_loo_cache(train_set, rc.logistic, std::min(rc.k, train_set.size()), cfg.threads);
  const std::size_t k = e.k;

  ReconstructionReport out;
  nlohmann::json& j = out.report;
  j["training_points"] = train_set.size();
  j["dimension"] = train_set.dim();
  j["target_train_accuracy"] = accuracy(e.base, train_set);
  j["k"] = k;
  auto isolate = [&](const std::string& key, auto&& body) {
    try {
      body();
    } catch (const std::exception& ex) {
      j[key] = {{"error", ex.what()}};
    }
  };

  isolate("algorithm1", [&] {
    const auto oracle = ModelSetOracle::from(e);
    Algorithm1Config ac = rc.algorithm1;
    ac.seed = derive_seed(cfg.seed, {1});
    const auto st = algorithm1_reconstruct(oracle, ac, rc.verify_fits ? cache_verifier(e.loo) : FitVerifier{});
    nlohmann::json a = to_json(st);
    a["recovered_fraction"] = static_cast<double>(st.revealed.size()) / static_cast<double>(e.size());
    a["query_budget"] = subspace_query_budget(e.dim(), st.revealed.size());
    j["algorithm1"] = a;
  });

  isolate("graph", [&] {
    const InfluenceGraph g = build_influence_graph(e, k);
    out.graph = scc_metrics(g);
    const auto scc = largest_scc(g);
    const auto greedy = greedy_omniscient_baseline(g);
    Rng srng(derive_seed(cfg.seed, {2}));
    nlohmann::json starts = nlohmann::json::array();
    double total = 0.0;
    for (std::size_t s = 0; s < rc.random_starts; ++s) {
      Vec y;
      if (pool.size() > 0) {
        y = pool.point(srng.below(pool.size()));
      } else {
        y.resize(static_cast<Eigen::Index>(e.dim()));
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = srng.normal();
      }
      const auto tr = traverse_attack(e, y, k, Schedule::kBfs);
      total += static_cast<double>(tr.recovered.size());
      starts.push_back({{"recovered", tr.recovered.size()}, {"queries", tr.query_count}});
    }
    j["graph"] = {{"scc_count", out.graph.scc_count},
                  {"singleton_scc_count", out.graph.singleton_scc_count},
                  {"largest_scc_size", out.graph.largest_scc_size},
                  {"max_in_degree", out.graph.max_in_degree},
                  {"zero_in_degree_count", out.graph.zero_in_degree_count},
                  {"largest_scc", scc},
                  {"greedy_seeds", greedy.seeds.size()},
                  {"greedy_covered", greedy.covered},
                  {"coverable", greedy.coverable}};
    j["traversal"] = {{"starts", starts},
                      {"mean_recovered", rc.random_starts ? total / static_cast<double>(rc.random_starts) : 0.0}};
  });

  isolate("baselines", [&] {
    if (pool.size() == 0) throw std::invalid_argument("baselines need a held-out pool");
    Vec lo = pool.features.colwise().minCoeff().transpose();
    Vec hi = pool.features.colwise().maxCoeff().transpose();
    const std::vector<QuerySampler> samplers{UniformSampler{lo, hi}, MarginalSampler{pool.features},
                                             TrueDistributionSampler{pool.features}};
    nlohmann::json b;
    for (std::size_t s = 0; s < samplers.size(); ++s) {
      const std::string name = sampler_name(samplers[s]);
      try {
        const auto curve = baseline_attack(e, samplers[s], rc.baseline_queries, k, derive_seed(cfg.seed, {3, s}));
        out.baseline_curves[name] = curve;
        b[name] = {{"recovered", curve.empty() ? 0 : curve.back()},
                   {"recovered_fraction",
                    curve.empty() ? 0.0 : static_cast<double>(curve.back()) / static_cast<double>(e.size())}};
      } catch (const std::exception& ex) {
        b[name] = {{"error", ex.what()}};
      }
    }
    j["baselines"] = b;
  });

  isolate("self_reveal", [&] { j["self_reveal"] = {{"k", k}, {"rate", self_reveal_rate(e, k)}}; });
  if (!train_set.groups.empty()) {
    isolate("group_reveal", [&] {
      nlohmann::json g;
      for (const auto& [tag, r] : group_reveal_rates(e, k))
        g[tag] = {{"count", r.count}, {"revealed", r.revealed}, {"rate", r.rate}};
      j["group_reveal"] = g;
    });
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

// CSV: run_id,repetition,target,statistic,calibration,tau,accuracy,target_train_acc,target_test_acc,epochs
inline void write_results_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "run_id,repetition,target,statistic,calibration,tau,accuracy,target_train_acc,target_test_acc,epochs\n";
  for (const auto& r : records)
    os << r.run_id << ',' << r.repetition << ',' << r.target << ',' << r.statistic << ',' << r.calibration << ','
       << detail::fmt_double(r.tau) << ',' << detail::fmt_double(r.accuracy) << ','
       << detail::fmt_double(r.target_train_acc) << ',' << detail::fmt_double(r.target_test_acc) << ',' << r.epochs
       << '\n';
}

// CSV: run_id,statistic,calibration,epochs,point,member,decision
inline void write_decisions_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "run_id,statistic,calibration,epochs,point,member,decision\n";
  for (const auto& r : records)
    for (std::size_t i = 0; i < r.decisions.size(); ++i)
      os << r.run_id << ',' << r.statistic << ',' << r.calibration << ',' << r.epochs << ',' << i << ','
         << int(r.membership[i]) << ',' << int(r.decisions[i]) << '\n';
}

// CSV: epochs,statistic,calibration,runs,mean_accuracy,mean_train_acc,mean_test_acc
inline void write_summary_csv(std::ostream& os, const std::vector<StatisticSummary>& rows) {
  os << "epochs,statistic,calibration,runs,mean_accuracy,mean_train_acc,mean_test_acc\n";
  for (const auto& s : rows)
    os << s.epochs << ',' << s.statistic << ',' << s.calibration << ',' << s.runs << ','
       << detail::fmt_double(s.mean_accuracy) << ',' << detail::fmt_double(s.mean_train_acc) << ','
       << detail::fmt_double(s.mean_test_acc) << '\n';
}

// CSV: sampler,query,recovered
inline void write_baseline_curves_csv(std::ostream& os, const std::map<std::string, std::vector<std::size_t>>& curves) {
  os << "sampler,query,recovered\n";
  for (const auto& [name, curve] : curves)
    for (std::size_t q = 0; q < curve.size(); ++q) os << name << ',' << q + 1 << ',' << curve[q] << '\n';
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline nlohmann::json make_manifest(const ExperimentConfig& cfg, const std::string& command,
                                    const std::map<std::string, double>& timings) {
  const std::string dumped = to_json(cfg).dump();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(dumped)));
  return {{"command", command},
          {"config", to_json(cfg)},
          {"config_hash", hash},
          {"seed", cfg.seed},
          {"versions",
           {{"privex", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"compiler", __VERSION__}}},
          {"timings", timings}};
}

}  // namespace privex
