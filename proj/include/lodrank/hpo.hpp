// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Group-lasso weight search: halve lambda from a large value until a trial
// meets the accuracy and size constraints.

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lodrank/dataset.hpp"
#include "lodrank/model.hpp"
#include "lodrank/trainer.hpp"

namespace lodrank {

struct Constraints {
  double min_acc = 0.0;
  std::size_t max_params = std::numeric_limits<std::size_t>::max();
  std::size_t few_params = 0;
  double large_value = 2.56e-2;
  double small_value = 1e-6;

  bool operator==(const Constraints&) const = default;
  std::vector<std::string> violations() const;
};

struct TrialCheck {
  std::size_t epochs_done = 0;
  double acc = 0.0;
  std::size_t params = 0;
  std::size_t macs = 0;
};

/// One trial at a time: start() re-initializes, advance() trains one epoch.
class TrialRunner {
 public:
  virtual ~TrialRunner() = default;
  virtual void start(double lambda, std::uint64_t seed) = 0;
  virtual void train_one_epoch() = 0;
  virtual TrialCheck measure() = 0;
  virtual std::size_t epochs() const = 0;
  /// Executed training MACs of the current trial so far.
  virtual double train_macs() const = 0;
  virtual Model snapshot() const = 0;
};

/// LeNet on MNIST-style data with the standard trainer.
class LenetTrialRunner : public TrialRunner {
 public:
  LenetTrialRunner(const Dataset& train, const Dataset& test, TrainConfig base);
  void start(double lambda, std::uint64_t seed) override;
  void train_one_epoch() override;
  TrialCheck measure() override;
  std::size_t epochs() const override { return base_.epochs; }
  double train_macs() const override;
  Model snapshot() const override;

 private:
  const Dataset& train_;
  const Dataset& test_;
  TrainConfig base_;
  std::optional<Trainer> trainer_;
};

enum class HpoOutcome { found, params_only, not_found };
std::string to_string(HpoOutcome o);

struct TrialRecord {
  std::size_t trial = 0;
  double lambda = 0.0;
  std::size_t epochs_run = 0;
  double best_acc = 0.0;
  std::size_t params = 0;
  std::size_t macs = 0;
  double train_macs = 0.0;
  std::string verdict;  ///< satisfied | too_sparse | over_params | continue
};

struct HpoResult {
  HpoOutcome outcome = HpoOutcome::not_found;
  std::optional<Model> model;
  double lambda = 0.0;
  std::vector<TrialRecord> log;
  double total_train_macs = 0.0;
};

/// Trial t uses seed (seed XOR t). Evaluates after epochs 1, 1 + eval_every, ...
HpoResult tune_lambda(const Constraints& constraints, TrialRunner& runner, std::size_t eval_every,
                      std::uint64_t seed);

std::string trial_log_csv(const std::vector<TrialRecord>& log);

}  // namespace lodrank
