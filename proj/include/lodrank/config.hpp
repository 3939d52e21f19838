// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration: INI-style sections of `key = value` lines.
// Every key is listed in config_schema(); anything else is rejected.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lodrank/hpo.hpp"
#include "lodrank/trainer.hpp"

namespace lodrank {

/// Carries every problem found, one per line in what().
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class RunKind { train, theory, prune, hpo, report };
std::string to_string(RunKind k);

struct ExperimentConfig {
  // [run]
  RunKind kind = RunKind::train;
  std::string out_dir = "runs/default";
  std::uint64_t seed = 1;
  // [data]
  std::string mnist_dir = "data/mnist";
  std::size_t train_limit = 0;  ///< 0: whole split
  std::size_t test_limit = 0;
  // [model]
  bool factorized = true;
  // [train]
  TrainConfig train;
  std::size_t checkpoint_every = 0;  ///< epochs; 0 keeps only the final checkpoint
  // [theory]
  std::string preset = "fig2a";
  // [prune]
  std::string checkpoint;
  std::string baseline = "none";  ///< none | svd
  double step_frac = 0.1;
  std::size_t eval_batch = 2048;
  std::optional<std::size_t> max_macs;
  std::optional<std::size_t> max_params;
  std::optional<double> min_acc;
  // [hpo]
  Constraints constraints;  ///< few_params 0 means 1% of the dense model
  std::size_t hpo_eval_every = 2;
  // [report]
  std::string run_dir;

  bool operator==(const ExperimentConfig&) const = default;
};

struct ConfigKey {
  std::string section;
  std::string key;
  std::string type;
  std::string module;
  std::string doc;
};

/// All recognised keys, in file order.
const std::vector<ConfigKey>& config_schema();

/// Parses and validates. Throws ConfigError listing every problem.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& c);

/// Markdown table of config_schema() with defaults.
std::string config_reference();

}  // namespace lodrank
