// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Run orchestration and the CSV/JSON files a run leaves behind.
//
// Every run directory holds config.ini (the canonical config echo) and
// report.json. Per kind:
//   train   history.csv ranks.csv model.ckpt [epoch-N.ckpt]
//   theory  sigma.csv distance.csv loss.csv
//   prune   trace.csv pruned.ckpt
//   hpo     trials.csv [model.ckpt]
//   report  sweep.csv (when aggregating a directory of runs)

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "lodrank/config.hpp"
#include "lodrank/dataset.hpp"
#include "lodrank/model.hpp"
#include "lodrank/pruner.hpp"
#include "lodrank/theory.hpp"
#include "lodrank/trainer.hpp"

namespace lodrank {

/// Comma-separated table with a header row. Fields never contain commas.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  bool has(const std::string& column) const;
  /// Throws FormatError naming the column when absent.
  std::size_t column(const std::string& column) const;
  /// Columns whose name is `prefix` followed by a positive integer, in
  /// numeric order (s1, s2, ..., s10).
  std::vector<std::string> numbered(const std::string& prefix) const;
  const std::string& cell(std::size_t row, const std::string& column) const;
  /// Parses nan and inf as well; throws FormatError on anything else.
  double number(std::size_t row, const std::string& column) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

/// Shortest text that parses back to the same double.
std::string format_number(double v);

// Writers for the per-run CSV files.
std::string history_csv(const std::vector<EpochStats>& history);
std::string ranks_csv(const Model& model);
std::string sigma_csv(const LinearRun& run);
std::string distance_csv(const LinearRun& run);
std::string loss_csv(const LinearRun& run);

struct SweepRow {
  std::string run;
  double lambda_gl = 0.0;
  double final_acc = 0.0;
  std::size_t params = 0;
  std::size_t macs = 0;
  double rel_train_macs = 0.0;
};
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// MNIST splits honouring data.train_limit / data.test_limit.
Dataset load_train_split(const ExperimentConfig& config);
Dataset load_test_split(const ExperimentConfig& config);

/// Runs one experiment, writes its files under config.out_dir and returns the
/// report that was written to report.json. `log` receives progress lines.
/// train.seed is overwritten by run.seed.
nlohmann::json run_experiment(ExperimentConfig config,
                              std::ostream* log = nullptr);

/// Loads, validates and runs a config file.
nlohmann::json run_config_file(const std::string& path, std::ostream* log = nullptr);

}  // namespace lodrank
