// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace lodrank {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::standard: return "standard";
    case Variant::no_hgl: return "no_hgl";
    case Variant::no_ps: return "no_ps";
    case Variant::extra_full_pass: return "extra_full_pass";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::standard, Variant::no_hgl, Variant::no_ps, Variant::extra_full_pass})
    if (to_string(v) == s) return v;
  throw ContractError("unknown variant '" + s + "'");
}

std::string to_string(HglMode m) {
  return m == HglMode::proximal ? "proximal" : "subgradient";
}

HglMode parse_hgl_mode(const std::string& s) {
  if (s == "proximal") return HglMode::proximal;
  if (s == "subgradient") return HglMode::subgradient;
  throw ContractError("unknown hgl_mode '" + s + "'");
}

std::vector<std::string> TrainConfig::violations() const {
  std::vector<std::string> out;
  if (!(lambda_gl >= 0.0)) out.push_back("lambda_gl must be >= 0");
  if (!(epsilon_ps >= 0.0)) out.push_back("epsilon_ps must be >= 0");
  if (epochs < 1) out.push_back("epochs must be >= 1");
  if (!(lr > 0.0)) out.push_back("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) out.push_back("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) out.push_back("weight_decay must be >= 0");
  if (batch_size < 1) out.push_back("batch_size must be >= 1");
  if (eval_every < 1) out.push_back("eval_every must be >= 1");
  return out;
}

std::pair<std::size_t, std::size_t> sample_rank_pair(const RankProfile& ranks, Rng& rng) {
  const std::size_t total = std::accumulate(ranks.begin(), ranks.end(), std::size_t{0});
  if (total == 0) throw ContractError("sample_rank_pair: all ranks are zero");
  std::size_t j = rng.below(total);
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (j < ranks[i]) return {i, j + 1};
    j -= ranks[i];
  }
  throw ContractError("sample_rank_pair: unreachable");
}

namespace {

std::vector<double> column_squares(const Tensor& m, std::size_t active) {
  std::vector<double> sq(active, 0.0);
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.raw() + r * cols;
    for (std::size_t c = 0; c < active; ++c) sq[c] += row[c] * row[c];
  }
  return sq;
}

}  // namespace

std::vector<double> tail_group_norms(const Tensor& m, std::size_t active) {
  std::vector<double> sq = column_squares(m, active);
  std::vector<double> out(active);
  double acc = 0.0;
  for (std::size_t b = active; b-- > 0;) {
    acc += sq[b];
    out[b] = std::sqrt(acc);
  }
  return out;
}

double hgl_penalty(const Tensor& m, std::size_t active, double lambda) {
  if (lambda == 0.0) return 0.0;
  double s = 0.0;
  for (double n : tail_group_norms(m, active)) s += n;
  return lambda * s;
}

double hgl_penalty(const Model& model, double lambda) {
  double s = 0.0;
  for (const auto& l : model.layers) {
    if (!l.factorized) continue;
    s += hgl_penalty(l.u, l.r_active, lambda) + hgl_penalty(l.v, l.r_active, lambda);
  }
  return s;
}

Tensor hgl_subgradient(const Tensor& m, double lambda, std::size_t active) {
  const std::vector<double> norms = tail_group_norms(m, active);
  std::vector<double> coef(active);
  double acc = 0.0;
  for (std::size_t j = 0; j < active; ++j) {
    if (norms[j] >= 1e-12) acc += 1.0 / norms[j];
    coef[j] = lambda * acc;
  }
  Tensor g(m.shape());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < active; ++c) g(r, c) = coef[c] * m(r, c);
  return g;
}

Tensor hgl_subgradient(const Tensor& m, double lambda) {
  return hgl_subgradient(m, lambda, m.cols());
}

void hgl_prox(Tensor& m, double threshold, std::size_t active) {
  if (threshold <= 0.0 || active == 0) return;
  std::vector<double> sq = column_squares(m, active);
  // Scale applied so far to each column; groups are nested, so each step
  // rescales a suffix.
  std::vector<double> factor(active, 1.0);
  double tail = 0.0;  // current squared norm of columns [b, active)
  for (std::size_t b = active; b-- > 0;) {
    tail += sq[b];
    const double norm = std::sqrt(tail);
    const double s = norm > 0.0 ? std::max(0.0, 1.0 - threshold / norm) : 0.0;
    if (s == 1.0) continue;
    for (std::size_t c = b; c < active; ++c) {
      factor[c] *= s;
      sq[c] *= s * s;
    }
    tail *= s * s;
  }
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* row = m.raw() + r * cols;
    for (std::size_t c = 0; c < active; ++c) row[c] *= factor[c];
  }
}

RankProfile progressive_shrink(Model& model, double epsilon) {
  for (auto& l : model.layers) {
    if (!l.factorized) continue;
    const std::vector<double> nu = tail_group_norms(l.u, l.r_active);
    const std::vector<double> nv = tail_group_norms(l.v, l.r_active);
    for (std::size_t b = 0; b < l.r_active; ++b) {
      if (nu[b] * nv[b] <= epsilon) {
        l.r_active = b;
        break;
      }
    }
  }
  compact(model);
  return model.profile();
}

EvalResult evaluate(const Model& model, const Dataset& data, std::size_t chunk) {
  EvalResult res;
  const std::size_t n = data.size();
  if (n == 0) return res;
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t end = std::min(n, start + chunk);
    std::vector<std::size_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const Tensor logits = model_forward(model, data.gather_inputs(rows));
    if (data.classification()) {
      const auto labels = data.gather_labels(rows);
      loss_sum += softmax_cross_entropy(logits, labels, nullptr) * static_cast<double>(rows.size());
      const auto pred = argmax_rows(logits);
      for (std::size_t i = 0; i < rows.size(); ++i) correct += pred[i] == labels[i];
    } else {
      loss_sum += sum_squares(sub(logits, data.gather_targets(rows)));
    }
  }
  res.loss = loss_sum / static_cast<double>(n);
  res.accuracy = data.classification() ? static_cast<double>(correct) / static_cast<double>(n)
                                       : std::numeric_limits<double>::quiet_NaN();
  return res;
}

Trainer::Trainer(Model model, TrainConfig config)
    : model_(std::move(model)), config_(config), rng_(Rng(config.seed).derive("train")) {
  const auto problems = config_.violations();
  if (!problems.empty()) throw ContractError("invalid training config: " + problems.front());
  compact(model_);
  for (const auto& l : model_.layers) {
    momentum_.push_back(Buffers{Tensor(l.u.shape()), Tensor(l.v.shape()), Tensor(l.bias.shape())});
    dense_params_ += l.in_features() * l.out_features() + l.bias.size();
    dense_macs_ += l.positions() * l.in_features() * l.out_features();
  }
}

double Trainer::rel_train_params() const {
  if (step_count_ == 0) return 0.0;
  return param_meter_ / static_cast<double>(step_count_) / static_cast<double>(dense_params_);
}

Trainer::StepResult Trainer::step(const Dataset& batch) {
  const std::size_t n = batch.size();
  const RankProfile profile = model_.profile();
  RankProfile sampleable(profile.size(), 0);
  for (std::size_t i = 0; i < profile.size(); ++i)
    if (model_.layers[i].factorized) sampleable[i] = profile[i];

  StepResult res;
  std::optional<Truncation> trunc = forced_;
  if (!trunc && std::accumulate(sampleable.begin(), sampleable.end(), std::size_t{0}) > 0) {
    const auto [i, b] = sample_rank_pair(sampleable, rng_);
    trunc = Truncation{i, b};
  }
  if (trunc) {
    res.layer = trunc->layer;
    res.rank = trunc->rank;
  }

  std::vector<Buffers> grads;
  for (const auto& l : model_.layers)
    grads.push_back(Buffers{Tensor(l.u.shape()), Tensor(l.v.shape()), Tensor(l.bias.shape())});

  auto pass = [&](std::optional<Truncation> t) {
    Graph g;
    const GraphForward f = model_forward_graph(g, model_, batch.inputs, t);
    const NodeId loss = batch.classification()
                            ? g.softmax_cross_entropy(f.logits, batch.labels)
                            : g.mean_squared_error(f.logits, g.constant(batch.targets));
    const double value = g.value(loss)[0];
    if (!std::isfinite(value)) {
      throw NumericError("non-finite loss at step " + std::to_string(step_count_ + 1), value);
    }
    const Gradients gr = g.backward(loss);
    ++backward_passes_;
    for (std::size_t i = 0; i < model_.layers.size(); ++i) {
      const LayerNodes& p = f.params[i];
      axpy(1.0, gr[p.u], grads[i].u);
      if (model_.layers[i].factorized) axpy(1.0, gr[p.v], grads[i].v);
      if (p.has_bias) axpy(1.0, gr[p.bias], grads[i].bias);
    }
    RankProfile executed = profile;
    if (t) executed[t->layer] = t->rank;
    mac_meter_ += 3.0 * static_cast<double>(executed_mac_count(model_, executed)) *
                  static_cast<double>(n);
    return value;
  };

  res.task_loss = pass(trunc);
  if (config_.variant == Variant::extra_full_pass) pass(std::nullopt);
  dense_mac_meter_ += 3.0 * static_cast<double>(dense_macs_) * static_cast<double>(n);
  param_meter_ += static_cast<double>(stored_param_count(model_));

  const bool use_hgl = config_.variant != Variant::no_hgl && config_.lambda_gl > 0.0;
  res.penalty = use_hgl ? hgl_penalty(model_, config_.lambda_gl) : 0.0;
  if (use_hgl && config_.hgl_mode == HglMode::subgradient) {
    for (std::size_t i = 0; i < model_.layers.size(); ++i) {
      const FactorizedLayer& l = model_.layers[i];
      if (!l.factorized) continue;
      axpy(1.0, hgl_subgradient(l.u, config_.lambda_gl, l.r_active), grads[i].u);
      axpy(1.0, hgl_subgradient(l.v, config_.lambda_gl, l.r_active), grads[i].v);
    }
  }

  apply_update(grads);

  if (use_hgl && config_.hgl_mode == HglMode::proximal) {
    // Matches the steady-state step length of a constant gradient under
    // momentum, lr / (1 - momentum).
    const double t = config_.lr * config_.lambda_gl / (1.0 - config_.momentum);
    for (auto& l : model_.layers) {
      if (!l.factorized) continue;
      hgl_prox(l.u, t, l.r_active);
      hgl_prox(l.v, t, l.r_active);
    }
  }
  ++step_count_;
  return res;
}

void Trainer::apply_update(const std::vector<Buffers>& grads) {
  const double lr = config_.lr, mu = config_.momentum, wd = config_.weight_decay;
  auto update = [&](Tensor& param, Tensor& buf, const Tensor& grad, std::size_t decay_cols) {
    const std::size_t cols = param.ndim() == 2 ? param.cols() : param.size();
    const std::size_t rows = param.size() / std::max<std::size_t>(cols, 1);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t k = r * cols + c;
        double g = grad[k];
        if (wd > 0.0 && c < decay_cols) g += wd * param[k];
        buf[k] = mu * buf[k] + g;
        param[k] -= lr * buf[k];
      }
    }
  };
  for (std::size_t i = 0; i < model_.layers.size(); ++i) {
    FactorizedLayer& l = model_.layers[i];
    Buffers& m = momentum_[i];
    if (l.factorized) {
      // No decay on tails already at or below the shrink threshold.
      std::size_t live = l.r_active;
      if (wd > 0.0) {
        const auto nu = tail_group_norms(l.u, l.r_active);
        const auto nv = tail_group_norms(l.v, l.r_active);
        for (std::size_t b = 0; b < l.r_active; ++b) {
          if (nu[b] * nv[b] <= config_.epsilon_ps) {
            live = b;
            break;
          }
        }
      }
      update(l.u, m.u, grads[i].u, live);
      update(l.v, m.v, grads[i].v, live);
    } else {
      update(l.u, m.u, grads[i].u, l.u.cols());
    }
    if (l.has_bias()) update(l.bias, m.bias, grads[i].bias, l.bias.size());
  }
}

EpochStats Trainer::train_epoch(const Dataset& train, const Dataset* test) {
  const auto t0 = std::chrono::steady_clock::now();
  EpochStats st;
  st.epoch = ++epoch_;
  const std::uint64_t passes0 = backward_passes_;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(rng_, order);

  double task = 0.0, pen = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    const std::vector<std::size_t> rows(order.begin() + start, order.begin() + end);
    Dataset batch;
    batch.inputs = train.gather_inputs(rows);
    if (train.classification()) batch.labels = train.gather_labels(rows);
    else batch.targets = train.gather_targets(rows);
    const StepResult r = step(batch);
    task += r.task_loss;
    pen += r.penalty;
    ++st.steps;
  }
  if (st.steps) {
    st.task_loss = task / static_cast<double>(st.steps);
    st.penalty = pen / static_cast<double>(st.steps);
  }
  st.total_loss = st.task_loss + st.penalty;

  if (config_.variant != Variant::no_ps) {
    progressive_shrink(model_, config_.epsilon_ps);
    for (std::size_t i = 0; i < model_.layers.size(); ++i) {
      const FactorizedLayer& l = model_.layers[i];
      Buffers& m = momentum_[i];
      if (l.factorized && m.u.cols() != l.u.cols()) {
        m.u = leading_columns(m.u, l.u.cols());
        m.v = leading_columns(m.v, l.v.cols());
      }
    }
  }
  st.ranks = model_.profile();
  st.total_rank = std::accumulate(st.ranks.begin(), st.ranks.end(), std::size_t{0});
  st.backward_passes = backward_passes_ - passes0;
  if (test && (st.epoch % config_.eval_every == 0 || st.epoch == config_.epochs)) {
    st.test_acc = evaluate(model_, *test).accuracy;
  }
  st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return st;
}

}  // namespace lodrank
