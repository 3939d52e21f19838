// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Deploy-time compression: greedy rank pruning on a fixed evaluation batch
// and the SVD-then-prune baseline for dense models.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lodrank/dataset.hpp"
#include "lodrank/model.hpp"

namespace lodrank {

/// Stop conditions. With nothing set the pruner runs until every rank is zero.
struct PruneTarget {
  std::optional<std::size_t> max_macs;
  std::optional<std::size_t> max_params;
  /// Moves that would take accuracy (test set if given, else eval batch)
  /// below this value are not taken; pruning stops there.
  std::optional<double> min_acc;

  bool satisfied_by(std::size_t macs, std::size_t params) const;
};

struct PrunePoint {
  std::size_t iter = 0;
  long layer_changed = -1;  ///< -1 for the unpruned model
  RankProfile ranks;
  double est_loss = 0.0;
  double test_acc = 0.0;  ///< NaN when no test set was given
  std::size_t macs = 0;
  std::size_t params = 0;
};

struct PruneTrace {
  std::vector<PrunePoint> points;
  bool target_met = false;
  bool exhausted = false;  ///< ran out of ranks before meeting the target
  Model final_model;
};

/// `count` distinct rows of `source` chosen by the "eval-batch" stream of seed.
Dataset make_eval_batch(const Dataset& source, std::size_t count, std::uint64_t seed);

/// Candidate rank after one greedy step on a layer of rank r.
std::size_t prune_step(std::size_t r, double step_frac);

/// Greedy search: each iteration tries shrinking every factorized layer by
/// max(1, ceil(step_frac * r)) and keeps the move with the lowest eval-batch
/// loss. A point is recorded whenever served MACs strictly drop; moves that
/// leave the served cost unchanged are folded into the next point.
PruneTrace greedy_prune(const Model& model, const Dataset& eval_batch, const PruneTarget& target,
                        double step_frac = 0.1, const Dataset* test = nullptr);

/// Factorizes every weight with its best rank-k factors (U~ sqrt(S), V~ sqrt(S)).
/// Empty schedule keeps full rank.
Model svd_compress_baseline(const Model& dense, const RankProfile& k_schedule = {});

std::string prune_trace_csv(const PruneTrace& trace);

}  // namespace lodrank
