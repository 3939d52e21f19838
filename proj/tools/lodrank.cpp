// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// lodrank: train, analyse and prune low-rank ordered models from the shell.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "lodrank/config.hpp"
#include "lodrank/experiment.hpp"
#include "lodrank/fetch.hpp"
#include "lodrank/plot.hpp"

using namespace lodrank;

namespace {

// Applies command-line overrides through the canonical text so the result is
// validated exactly like a config file.
ExperimentConfig revalidate(const ExperimentConfig& c) { return parse_config(format_config(c)); }

ExperimentConfig load_as(const std::string& path, RunKind kind, const std::string& out_dir) {
  ExperimentConfig c = load_config(path);
  if (c.kind != kind) {
    throw ConfigError({path + ": run.kind is " + to_string(c.kind) + ", expected " +
                       to_string(kind)});
  }
  if (!out_dir.empty()) c.out_dir = out_dir;
  return c;
}

void print_summary(const nlohmann::json& report) {
  nlohmann::json brief = report;
  brief.erase("config");
  brief.erase("source");
  std::cout << brief.dump(2) << std::endl;
}

// "macs=120000", "params=8000" or "acc=0.98".
void apply_target(ExperimentConfig& c, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw CLI::ValidationError("--target", "expected key=value: " + spec);
  const std::string key = spec.substr(0, eq), value = spec.substr(eq + 1);
  try {
    if (key == "macs") c.max_macs = std::stoull(value);
    else if (key == "params") c.max_params = std::stoull(value);
    else if (key == "acc") c.min_acc = std::stod(value);
    else throw CLI::ValidationError("--target", "unknown target '" + key + "' (macs, params, acc)");
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("--target", "bad value in '" + spec + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank ordered decomposition: training, theory runs, pruning and reports"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir;
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "no progress output");

  auto* run = app.add_subcommand("run", "run any config file, dispatching on run.kind");
  run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "override run.out_dir");

  auto* train = app.add_subcommand("train", "train LeNet-5 on MNIST");
  train->add_option("--config", config_path, "config file with run.kind = train")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "override run.out_dir");

  std::string preset = "fig2a";
  std::uint64_t seed = 1;
  auto* theory = app.add_subcommand("theory", "linear-model experiments");
  theory->add_option("--preset", preset, "experiment preset")
      ->check(CLI::IsMember({"fig2a", "fig2b", "fig7", "fig8"}));
  theory->add_option("--seed", seed, "seed");
  theory->add_option("--out", out_dir, "output directory (default runs/theory-<preset>-<seed>)");

  std::string checkpoint, baseline = "none", mnist_dir;
  std::vector<std::string> targets;
  ExperimentConfig prune_defaults;
  double step_frac = prune_defaults.step_frac;
  std::size_t eval_batch = prune_defaults.eval_batch;
  auto* prune = app.add_subcommand("prune", "greedy rank pruning of a checkpoint");
  prune->add_option("--checkpoint", checkpoint, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  prune->add_option("--target", targets, "macs=N, params=N or acc=X; repeatable");
  prune->add_option("--baseline", baseline, "svd: factorize the weights by SVD first")
      ->check(CLI::IsMember({"none", "svd"}));
  prune->add_option("--step-frac", step_frac, "fraction of a rank removed per move");
  prune->add_option("--eval-batch", eval_batch, "training images used to rank moves");
  prune->add_option("--mnist-dir", mnist_dir, "MNIST directory");
  prune->add_option("--seed", seed, "seed of the evaluation batch draw");
  prune->add_option("--out", out_dir, "output directory (default runs/prune)");

  auto* hpo = app.add_subcommand("hpo", "search the group lasso weight under constraints");
  hpo->add_option("--config", config_path, "config file with run.kind = hpo")
      ->required()
      ->check(CLI::ExistingFile);
  hpo->add_option("--out", out_dir, "override run.out_dir");

  std::string run_dir;
  auto* report = app.add_subcommand("report", "plots for one run, or a sweep table for many");
  report->add_option("--run-dir", run_dir, "run directory or directory of runs")
      ->required()
      ->check(CLI::ExistingDirectory);
  report->add_option("--out", out_dir, "output directory (default <run-dir>/report)");

  std::vector<std::string> csv_paths;
  std::string plot_kind, svg_path;
  auto* plot = app.add_subcommand("plot", "render run CSVs as an SVG line chart");
  plot->add_option("--csv", csv_paths, "CSV file; repeat to overlay runs")
      ->required()
      ->check(CLI::ExistingFile);
  plot->add_option("--kind", plot_kind, "sigma, distance, loss, total_rank, ranks, prune, sweep")
      ->required();
  plot->add_option("--out", svg_path, "SVG path (default: first CSV with .svg)");

  std::string fetch_dir, base_url = kDefaultMnistUrl;
  auto* fetch = app.add_subcommand("fetch-mnist", "download and verify the MNIST files");
  fetch->add_option("--dir", fetch_dir, "target directory")->required();
  fetch->add_option("--base-url", base_url, "mirror holding the .gz files");

  auto* reference = app.add_subcommand("config-reference", "print every config key as markdown");

  CLI11_PARSE(app, argc, argv);
  std::ostream* log = quiet ? nullptr : &std::cerr;

  try {
    nlohmann::json result;
    if (*run) {
      ExperimentConfig c = load_config(config_path);
      if (!out_dir.empty()) c.out_dir = out_dir;
      result = run_experiment(c, log);
    } else if (*train) {
      result = run_experiment(load_as(config_path, RunKind::train, out_dir), log);
    } else if (*hpo) {
      result = run_experiment(load_as(config_path, RunKind::hpo, out_dir), log);
    } else if (*theory) {
      ExperimentConfig c;
      c.kind = RunKind::theory;
      c.preset = preset;
      c.seed = seed;
      c.out_dir = out_dir.empty() ? "runs/theory-" + preset + "-" + std::to_string(seed) : out_dir;
      result = run_experiment(revalidate(c), log);
    } else if (*prune) {
      ExperimentConfig c;
      c.kind = RunKind::prune;
      c.checkpoint = checkpoint;
      c.baseline = baseline;
      c.step_frac = step_frac;
      c.eval_batch = eval_batch;
      c.seed = seed;
      if (!mnist_dir.empty()) c.mnist_dir = mnist_dir;
      for (const auto& t : targets) apply_target(c, t);
      c.out_dir = out_dir.empty() ? "runs/prune" : out_dir;
      result = run_experiment(revalidate(c), log);
    } else if (*report) {
      ExperimentConfig c;
      c.kind = RunKind::report;
      c.run_dir = run_dir;
      c.out_dir = out_dir.empty() ? (std::filesystem::path(run_dir) / "report").string() : out_dir;
      result = run_experiment(revalidate(c), log);
    } else if (*plot) {
      const PlotKind kind = parse_plot_kind(plot_kind);
      if (svg_path.empty()) {
        svg_path = std::filesystem::path(csv_paths.front()).replace_extension(".svg").string();
      }
      write_file_atomic(svg_path, emit_svg_plot(csv_paths, kind));
      std::cout << svg_path << std::endl;
      return 0;
    } else if (*fetch) {
      const auto got = fetch_files(fetch_dir, base_url, mnist_manifest());
      std::cout << got.size() << " file(s) downloaded, " << mnist_manifest().size() - got.size()
                << " already present; all digests verified" << std::endl;
      return 0;
    } else if (*reference) {
      std::cout << config_reference();
      return 0;
    }
    print_summary(result);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << std::endl;
    return 2;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
