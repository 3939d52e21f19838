// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Training with sampled (layer, rank) truncation, hierarchical group lasso
// and end-of-epoch progressive shrinking.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lodrank/dataset.hpp"
#include "lodrank/model.hpp"
#include "lodrank/rng.hpp"

namespace lodrank {

enum class Variant { standard, no_hgl, no_ps, extra_full_pass };

/// How the group-lasso term enters the update.
///   proximal:    nested-group soft threshold after each momentum step
///   subgradient: explicit subgradient added to the autodiff gradient
enum class HglMode { proximal, subgradient };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
std::string to_string(HglMode m);
HglMode parse_hgl_mode(const std::string& s);

struct TrainConfig {
  double lambda_gl = 0.0;
  double epsilon_ps = 1e-7;
  std::size_t epochs = 20;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
  Variant variant = Variant::standard;
  std::size_t eval_every = 1;
  HglMode hgl_mode = HglMode::proximal;

  bool operator==(const TrainConfig&) const = default;

  /// Every violated constraint, one message each; empty when valid.
  std::vector<std::string> violations() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double task_loss = 0.0;  ///< mean over steps
  double penalty = 0.0;    ///< mean over steps
  double total_loss = 0.0;
  std::size_t total_rank = 0;
  RankProfile ranks;
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t backward_passes = 0;
};

/// Uniform draw over all pairs (i, b) with 1 <= b <= ranks[i]. Throws
/// ContractError when the ranks sum to zero.
std::pair<std::size_t, std::size_t> sample_rank_pair(const RankProfile& ranks, Rng& rng);

/// Norms of the nested tail groups: out[b] = |M_{b:}|_F for b = 0..cols-1.
std::vector<double> tail_group_norms(const Tensor& m, std::size_t active);
/// lambda * sum_b |M_{b:}|_F over the first `active` columns.
double hgl_penalty(const Tensor& m, std::size_t active, double lambda);
/// lambda * sum over factorized layers of the U and V penalties.
double hgl_penalty(const Model& model, double lambda);
/// Column j gets lambda * m_j * sum_{b <= j} 1 / |M_{b:}|_F; groups with norm
/// below 1e-12 contribute nothing.
Tensor hgl_subgradient(const Tensor& m, double lambda, std::size_t active);
Tensor hgl_subgradient(const Tensor& m, double lambda);
/// Proximal map of threshold * sum_b |M_{b:}|_F, applied from the innermost
/// group outwards.
void hgl_prox(Tensor& m, double threshold, std::size_t active);

/// At the first b with |V_{b:}| |U_{b:}| <= epsilon sets r = b - 1 and drops
/// the columns. Returns the new profile.
RankProfile progressive_shrink(Model& model, double epsilon);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};
/// Task loss and accuracy (classification) over the whole dataset.
EvalResult evaluate(const Model& model, const Dataset& data, std::size_t chunk = 1000);

class Trainer {
 public:
  Trainer(Model model, TrainConfig config);

  /// One pass over `train`, then shrinking. Evaluates on `test` when
  /// non-null and the epoch index hits eval_every.
  EpochStats train_epoch(const Dataset& train, const Dataset* test = nullptr);

  struct StepResult {
    double task_loss = 0.0;
    double penalty = 0.0;
    std::size_t layer = 0;
    std::size_t rank = 0;
  };
  /// One optimizer step on a batch.
  StepResult step(const Dataset& batch);

  const Model& model() const { return model_; }
  Model& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  std::size_t epochs_done() const { return epoch_; }

  std::uint64_t backward_passes() const { return backward_passes_; }
  /// Executed multiplies, forward plus backward at 2x forward.
  double mac_meter() const { return mac_meter_; }
  /// Same meter for the dense model over the samples seen so far.
  double dense_mac_meter() const { return dense_mac_meter_; }
  /// Mean stored parameters over steps, relative to the dense model.
  double rel_train_params() const;

  /// Forces the sampled pair for the next steps (test hook). Pass nullopt to
  /// return to random sampling.
  void force_pair(std::optional<Truncation> pair) { forced_ = pair; }

 private:
  struct Buffers {
    Tensor u;
    Tensor v;
    Tensor bias;
  };

  void apply_update(const std::vector<Buffers>& grads);

  Model model_;
  TrainConfig config_;
  Rng rng_;
  std::vector<Buffers> momentum_;
  std::size_t epoch_ = 0;
  std::uint64_t step_count_ = 0;
  std::uint64_t backward_passes_ = 0;
  double mac_meter_ = 0.0;
  double dense_mac_meter_ = 0.0;
  double param_meter_ = 0.0;
  std::size_t dense_params_ = 0;
  std::size_t dense_macs_ = 0;
  std::optional<Truncation> forced_;
};

}  // namespace lodrank
