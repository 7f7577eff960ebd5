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

// privex: command-line front end for the experiment harness.
//
//   privex <command> --config <json> [--seed N] [--out DIR] [--threads N]
//
// Exit status: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "privex/harness.hpp"

namespace fs = std::filesystem;
using privex::ConfigError;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<std::size_t> threads;
};

privex::ExperimentConfig load_config(const CommonFlags& f) {
  std::ifstream in(f.config);
  if (!in) throw ConfigError("cannot open config file '" + f.config + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + f.config + "' is not valid JSON: " + e.what());
  }
  privex::ExperimentConfig c = privex::experiment_config_from_json(j);
  if (f.seed) c.seed = *f.seed;
  if (f.threads) {
    if (*f.threads < 1) throw ConfigError("--threads must be >= 1");
    c.threads = *f.threads;
  }
  return c;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
  return os;
}

void write_json(const fs::path& dir, const std::string& name, const nlohmann::json& j) {
  auto os = open_out(dir, name);
  os << j.dump(2) << '\n';
}

void report_failures(const privex::ExperimentResult& r) {
  for (const auto& f : r.failures) std::cerr << "warning: run " << f.run_id << " failed: " << f.message << '\n';
  if (r.records.empty()) throw std::runtime_error("every run failed; no results produced");
}

void write_experiment(const fs::path& dir, const privex::ExperimentConfig& cfg, const std::string& command,
                      const privex::ExperimentResult& r) {
  report_failures(r);
  { auto os = open_out(dir, "results.csv"); privex::write_results_csv(os, r.records); }
  { auto os = open_out(dir, "decisions.csv"); privex::write_decisions_csv(os, r.records); }
  { auto os = open_out(dir, "summary.csv"); privex::write_summary_csv(os, privex::summarize(r.records)); }
  nlohmann::json m = privex::make_manifest(cfg, command, {{"total_seconds", r.wall_time}});
  m["failures"] = nlohmann::json::array();
  for (const auto& f : r.failures) m["failures"].push_back({{"run_id", f.run_id}, {"message", f.message}});
  write_json(dir, "manifest.json", m);
}

int run_command(const std::string& command, const CommonFlags& flags) {
  privex::ExperimentConfig cfg;
  try {
    cfg = load_config(flags);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const fs::path out(flags.out);
    fs::create_directories(out);
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    if (command == "synth") {
      const privex::Dataset d = privex::load_source(cfg);
      { auto os = open_out(out, "dataset.csv"); privex::write_dataset_csv(os, d); }
      write_json(out, "manifest.json", privex::make_manifest(cfg, command, {{"total_seconds", elapsed()}}));
      std::cout << "wrote " << d.size() << " rows to " << (out / "dataset.csv").string() << '\n';
    } else if (command == "train") {
      const privex::Dataset data = privex::load_source(cfg);
      const auto splits = privex::sampling_protocol(data.size(), cfg.subsets_per_repetition, cfg.subset_size,
                                                    cfg.allow_resampling, privex::derive_seed(cfg.seed, {0, 0}));
      const privex::Dataset train_set = data.subset(splits[0].train), test_set = data.subset(splits[0].test);
      privex::TrainConfig tc = cfg.train;
      tc.seed = privex::derive_seed(cfg.seed, {0, 0, 2});
      const privex::MlpModel model = privex::train(
          privex::init_model(cfg.arch, data.dim(), privex::derive_seed(cfg.seed, {0, 0, 1}), tc.init_scale),
          train_set, tc);
      write_json(out, "model.json", privex::model_to_json(model));
      write_json(out, "metrics.json",
                 {{"train_accuracy", privex::accuracy(model, train_set)},
                  {"test_accuracy", privex::accuracy(model, test_set)},
                  {"train_loss", privex::mean_loss(model, train_set)},
                  {"test_loss", privex::mean_loss(model, test_set)}});
      write_json(out, "manifest.json", privex::make_manifest(cfg, command, {{"total_seconds", elapsed()}}));
    } else if (command == "attack") {
      const auto r = privex::run_threshold_experiment(cfg, privex::load_source(cfg));
      write_experiment(out, cfg, command, r);
    } else if (command == "sweep-epochs") {
      const auto r = privex::run_overfit_sweep(cfg, privex::load_source(cfg));
      write_experiment(out, cfg, command, r);
    } else if (command == "perturb-attack") {
      const auto pc = privex::perturbation_experiment_config(cfg);
      const auto r = privex::run_threshold_experiment(pc, privex::load_source(pc));
      write_experiment(out, pc, command, r);
    } else if (command == "sweep-dim") {
      const auto* synth = std::get_if<privex::SynthConfig>(&cfg.source);
      if (!synth) {
        std::cerr << "config error: sweep-dim needs a synthetic dataset source\n";
        return kExitConfig;
      }
      privex::SynthConfig base = *synth;
      base.seed = cfg.seed;
      const auto rows = privex::dimension_sweep(cfg.sweep.dims, base, cfg.sweep.arch, cfg.sweep.train, cfg.threads);
      for (const auto& r : rows)
        if (r.error) std::cerr << "warning: dim " << r.dim << " skipped: " << *r.error << '\n';
      { auto os = open_out(out, "sweep.csv"); privex::write_sweep_csv(os, rows); }
      write_json(out, "manifest.json", privex::make_manifest(cfg, command, {{"total_seconds", elapsed()}}));
    } else if (command == "reconstruct") {
      const auto r = privex::run_reconstruction_campaign(cfg, privex::load_source(cfg));
      write_json(out, "reconstruction.json", r.report);
      { auto os = open_out(out, "graph_metrics.csv"); privex::write_graph_metrics_csv(os, r.graph); }
      { auto os = open_out(out, "baselines.csv"); privex::write_baseline_curves_csv(os, r.baseline_curves); }
      write_json(out, "manifest.json", privex::make_manifest(cfg, command, {{"total_seconds", r.wall_time}}));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy audits of model explanations: membership inference and reconstruction experiments"};
  app.require_subcommand(1, 1);
  CommonFlags flags;
  const std::map<std::string, std::string> commands{
      {"train", "train one target model on the first subset"},
      {"attack", "threshold membership attacks under every calibration"},
      {"sweep-dim", "gradient-norm membership correlation across input dimensions"},
      {"sweep-epochs", "attack accuracy across training epochs"},
      {"reconstruct", "training-set reconstruction against a logistic target"},
      {"synth", "write the configured synthetic dataset as CSV"},
      {"perturb-attack", "gradient, prediction, SmoothGrad and local-surrogate attacks"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", flags.seed, "master seed, overrides the config");
    sub->add_option("--out", flags.out, "output directory")->capture_default_str();
    sub->add_option("--threads", flags.threads, "worker threads, overrides the config");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failing = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << failing->help();
    return kExitConfig;
  }
  return run_command(app.get_subcommands().front()->get_name(), flags);
}
