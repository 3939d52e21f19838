// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lodrank/linalg.hpp"
#include "lodrank/ops.hpp"
#include "lodrank/trainer.hpp"

namespace lodrank {

bool PruneTarget::satisfied_by(std::size_t macs, std::size_t params) const {
  if (!max_macs && !max_params) return false;
  return (!max_macs || macs <= *max_macs) && (!max_params || params <= *max_params);
}

Dataset make_eval_batch(const Dataset& source, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> rows(source.size());
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng = Rng(seed).derive("eval-batch");
  shuffle(rng, rows);
  rows.resize(std::min(count, rows.size()));
  std::sort(rows.begin(), rows.end());
  return source.subset(rows);
}

std::size_t prune_step(std::size_t r, double step_frac) {
  if (r == 0) return 0;
  const auto cut = static_cast<std::size_t>(std::ceil(step_frac * static_cast<double>(r)));
  return r - std::min(r, std::max<std::size_t>(1, cut));
}

namespace {

double task_loss(const Tensor& out, const Dataset& data) {
  if (data.classification()) return softmax_cross_entropy(out, data.labels, nullptr);
  return sum_squares(sub(out, data.targets)) / static_cast<double>(data.size());
}

double accuracy(const Tensor& logits, const Dataset& data) {
  if (!data.classification()) return std::numeric_limits<double>::quiet_NaN();
  const auto pred = argmax_rows(logits);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

// Layer inputs of the current model on a fixed dataset; a move on layer i
// only needs the stages from layer i onwards.
struct CachedData {
  const Dataset* data = nullptr;
  std::vector<Tensor> layer_inputs;
  Tensor output;

  void refresh(const Model& m, std::size_t from_layer) {
    const std::size_t first = stage_of_layer(m, from_layer);
    std::vector<Tensor> fresh;
    output = model_forward_range(m, first == 0 ? data->inputs : layer_inputs[from_layer], first,
                                 m.stages.size(), std::nullopt, &fresh);
    layer_inputs.resize(m.layers.size());
    for (std::size_t i = 0; i < m.layers.size(); ++i)
      if (stage_of_layer(m, i) >= first) layer_inputs[i] = std::move(fresh[i]);
  }

  Tensor try_move(const Model& m, std::size_t layer, std::size_t rank) const {
    return model_forward_range(m, layer_inputs[layer], stage_of_layer(m, layer), m.stages.size(),
                               Truncation{layer, rank});
  }
};

}  // namespace

PruneTrace greedy_prune(const Model& model, const Dataset& eval_batch, const PruneTarget& target,
                        double step_frac, const Dataset* test) {
  if (!(step_frac > 0.0 && step_frac <= 1.0)) {
    throw ContractError("step_frac must be in (0, 1]");
  }
  if (eval_batch.size() == 0) throw ContractError("greedy_prune: empty evaluation batch");

  PruneTrace trace;
  Model m = model;
  compact(m);
  CachedData eval{&eval_batch, {}, {}};
  eval.refresh(m, 0);
  std::optional<CachedData> held;
  if (test) {
    held = CachedData{test, {}, {}};
    held->refresh(m, 0);
  }
  auto current_acc = [&] {
    return held ? accuracy(held->output, *test) : accuracy(eval.output, eval_batch);
  };

  PrunePoint p0;
  p0.ranks = m.profile();
  p0.est_loss = task_loss(eval.output, eval_batch);
  p0.test_acc = held ? accuracy(held->output, *test) : std::numeric_limits<double>::quiet_NaN();
  p0.macs = mac_count(m);
  p0.params = param_count(m);
  trace.points.push_back(p0);
  if (target.satisfied_by(p0.macs, p0.params)) {
    trace.target_met = true;
    trace.final_model = m;
    return trace;
  }

  for (std::size_t iter = 1;; ++iter) {
    double best_loss = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_layer;
    std::size_t best_rank = 0;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      const FactorizedLayer& l = m.layers[i];
      if (!l.factorized || l.r_active == 0) continue;
      const std::size_t rank = prune_step(l.r_active, step_frac);
      const double loss = task_loss(eval.try_move(m, i, rank), eval_batch);
      // First minimum wins ties; a NaN loss is only kept when nothing else exists.
      if (!best_layer || loss < best_loss) {
        best_loss = loss;
        best_layer = i;
        best_rank = rank;
      }
    }
    if (!best_layer) {
      trace.exhausted = true;
      break;
    }

    Model next = m;
    next.layers[*best_layer].r_active = best_rank;
    compact(next);
    const Model prev = m;
    m = std::move(next);
    eval.refresh(m, *best_layer);
    if (held) held->refresh(m, *best_layer);

    if (target.min_acc && current_acc() < *target.min_acc) {
      m = prev;
      trace.target_met = true;
      break;
    }

    const std::size_t macs = mac_count(m);
    if (macs < trace.points.back().macs) {
      PrunePoint pt;
      pt.iter = iter;
      pt.layer_changed = static_cast<long>(*best_layer);
      pt.ranks = m.profile();
      pt.est_loss = best_loss;
      pt.test_acc = held ? accuracy(held->output, *test) : std::numeric_limits<double>::quiet_NaN();
      pt.macs = macs;
      pt.params = param_count(m);
      trace.points.push_back(pt);
      if (target.satisfied_by(pt.macs, pt.params)) {
        trace.target_met = true;
        break;
      }
    }
  }
  // With no size target, running out of ranks without breaking the accuracy
  // floor completes the search.
  if (!target.max_macs && !target.max_params) trace.target_met = true;
  trace.final_model = std::move(m);
  return trace;
}

Model svd_compress_baseline(const Model& dense, const RankProfile& k_schedule) {
  if (!k_schedule.empty() && k_schedule.size() != dense.layers.size()) {
    throw ContractError("k_schedule needs one entry per layer");
  }
  Model out = dense;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    FactorizedLayer& l = out.layers[i];
    const Tensor w = l.factorized ? l.weight() : l.u;
    const SvdResult s = svd(w);
    const std::size_t full = s.sigma.size();
    const std::size_t k = k_schedule.empty() ? full : k_schedule[i];
    if (k > full) {
      throw ContractError("k_schedule entry " + std::to_string(k) + " exceeds rank " +
                          std::to_string(full) + " of layer " + std::to_string(i));
    }
    Tensor u = leading_columns(s.u, k), v = leading_columns(s.v, k);
    for (std::size_t c = 0; c < k; ++c) {
      const double root = std::sqrt(s.sigma[c]);
      for (std::size_t r = 0; r < u.rows(); ++r) u(r, c) *= root;
      for (std::size_t r = 0; r < v.rows(); ++r) v(r, c) *= root;
    }
    l.factorized = true;
    l.u = std::move(u);
    l.v = std::move(v);
    l.r_max = full;
    l.r_active = k;
  }
  return out;
}

std::string prune_trace_csv(const PruneTrace& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "iter,layer_changed,ranks,est_loss,test_acc,macs,params\n";
  for (const auto& p : trace.points) {
    os << p.iter << ',' << p.layer_changed << ',' << format_profile(p.ranks) << ',' << p.est_loss
       << ',' << p.test_acc << ',' << p.macs << ',' << p.params << '\n';
  }
  return os.str();
}

}  // namespace lodrank
