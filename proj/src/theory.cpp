// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lodrank/autodiff.hpp"
#include "lodrank/ops.hpp"
#include "lodrank/trainer.hpp"

namespace lodrank {

std::string to_string(DataMode m) {
  switch (m) {
    case DataMode::unit_ball: return "unit_ball";
    case DataMode::gaussian_frame: return "gaussian_frame";
    case DataMode::reversed_importance: return "reversed_importance";
    case DataMode::matrix_objective: return "matrix_objective";
  }
  return "?";
}

DataMode parse_data_mode(const std::string& s) {
  for (DataMode m : {DataMode::unit_ball, DataMode::gaussian_frame, DataMode::reversed_importance,
                     DataMode::matrix_objective})
    if (to_string(m) == s) return m;
  throw ContractError("unknown data_mode '" + s + "'");
}

std::vector<std::string> LinearExperiment::violations() const {
  std::vector<std::string> out;
  if (a.ndim() != 2) {
    out.push_back("target A must be a matrix");
    return out;
  }
  if (r < 1 || r > std::min(a.rows(), a.cols())) out.push_back("r must be in [1, min(m, n)]");
  if (iterations < 1) out.push_back("iterations must be >= 1");
  if (!(lr > 0.0)) out.push_back("lr must be > 0");
  if (!(lambda_gl >= 0.0)) out.push_back("lambda_gl must be >= 0");
  if (batch_size < 1) out.push_back("batch_size must be >= 1");
  if (checkpoint_every < 1) out.push_back("checkpoint_every must be >= 1");
  if (drop_at && *drop_at >= iterations) out.push_back("drop_at must be < iterations");
  const bool framed =
      data_mode == DataMode::gaussian_frame || data_mode == DataMode::reversed_importance;
  if (framed) {
    if (frame.ndim() != 2 || frame.rows() != a.cols()) {
      out.push_back("frame must have n = cols(A) rows");
    } else if (frame_std.size() != frame.cols()) {
      out.push_back("frame_std needs one entry per frame column");
    } else if (drop_at && drop_direction >= frame.cols()) {
      out.push_back("drop_direction out of range");
    }
  }
  return out;
}

Tensor sample_inputs(const LinearExperiment& exp, std::size_t count, Rng& rng,
                     std::size_t iteration) {
  const std::size_t n = exp.a.cols();
  Tensor x({count, n});
  switch (exp.data_mode) {
    case DataMode::matrix_objective:
    case DataMode::unit_ball:
      for (std::size_t i = 0; i < count; ++i) {
        const Tensor s = sample_unit_ball(rng, n);
        for (std::size_t c = 0; c < n; ++c) x(i, c) = s[c];
      }
      break;
    case DataMode::gaussian_frame:
    case DataMode::reversed_importance: {
      const std::size_t k = exp.frame.cols();
      const bool dropped = exp.drop_at && iteration >= *exp.drop_at;
      for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          double c = rng.normal() * exp.frame_std[j];
          if (dropped && j == exp.drop_direction) c = 0.0;
          for (std::size_t d = 0; d < n; ++d) x(i, d) += c * exp.frame(d, j);
        }
      }
      break;
    }
  }
  return x;
}

Dataset synth_linear_dataset(const LinearExperiment& exp, std::size_t n_samples, Rng& rng) {
  Dataset d;
  d.inputs = sample_inputs(exp, n_samples, rng);
  d.targets = matmul_nt(d.inputs, exp.a);
  d.split = "synthetic";
  return d;
}

std::vector<double> sigma_hat(const Tensor& u, const Tensor& v) {
  std::vector<double> s(u.cols());
  for (std::size_t b = 0; b < u.cols(); ++b) s[b] = column_norm(u, b) * column_norm(v, b);
  return s;
}

namespace {

SigmaCheckpoint make_checkpoint(std::size_t iteration, const Tensor& u, const Tensor& v,
                                const SvdResult& target, double loss) {
  SigmaCheckpoint cp;
  cp.iteration = iteration;
  cp.sigma_hat = sigma_hat(u, v);
  cp.loss = loss;
  for (std::size_t k = 1; k <= u.cols(); ++k) {
    const Tensor approx = matmul_nt(leading_columns(u, k), leading_columns(v, k));
    cp.distance.push_back(frobenius_norm(sub(approx, best_rank_k(target, k))));
  }
  return cp;
}

}  // namespace

LinearRun run_linear_lod(const LinearExperiment& exp) {
  const auto problems = exp.violations();
  if (!problems.empty()) throw ContractError("invalid linear experiment: " + problems.front());
  const std::size_t m = exp.a.rows(), n = exp.a.cols(), r = exp.r;
  const Rng root(exp.seed);
  Rng init = root.derive("init");
  Rng train = root.derive("train");
  const SvdResult target = svd(exp.a);
  const Tensor neg_a = scale(exp.a, -1.0);

  LinearRun run;
  run.u = sample_gaussian(init, {m, r}, exp.init_std);
  run.v = sample_gaussian(init, {n, r}, exp.init_std);

  double loss_acc = 0.0;
  std::size_t loss_count = 0;
  for (std::size_t t = 0; t < exp.iterations; ++t) {
    const double eta = exp.lr * (exp.lr_drop_at && t >= *exp.lr_drop_at ? 0.1 : 1.0);
    const std::size_t b = 1 + train.below(r);

    Graph g;
    const NodeId pu = g.parameter(run.u);
    const NodeId pv = g.parameter(run.v);
    const NodeId ub = b == r ? pu : g.leading_columns(pu, b);
    const NodeId vb = b == r ? pv : g.leading_columns(pv, b);
    NodeId loss;
    if (exp.data_mode == DataMode::matrix_objective) {
      loss = g.sum_squares(g.add(g.matmul_nt(ub, vb), g.constant(neg_a)));
    } else {
      const Tensor x = sample_inputs(exp, exp.batch_size, train, t);
      const Tensor y = matmul_nt(x, exp.a);
      const NodeId xs = g.constant(x);
      loss = g.mean_squared_error(g.matmul_nt(g.matmul(xs, vb), ub), g.constant(y));
    }
    const double value = g.value(loss)[0];
    if (!std::isfinite(value) || value > 1e6) {
      throw NumericError("linear run diverged at iteration " + std::to_string(t + 1), value);
    }
    loss_acc += value;
    ++loss_count;
    const Gradients grads = g.backward(loss);
    Tensor gu = grads[pu];
    Tensor gv = grads[pv];
    if (exp.lambda_gl > 0.0) {
      axpy(1.0, hgl_subgradient(run.u, exp.lambda_gl), gu);
      axpy(1.0, hgl_subgradient(run.v, exp.lambda_gl), gv);
    }
    axpy(-eta, gu, run.u);
    axpy(-eta, gv, run.v);

    if ((t + 1) % exp.checkpoint_every == 0 || t + 1 == exp.iterations) {
      run.trajectory.push_back(make_checkpoint(t + 1, run.u, run.v, target,
                                               loss_acc / static_cast<double>(loss_count)));
      loss_acc = 0.0;
      loss_count = 0;
    }
  }
  return run;
}

Tensor random_with_spectrum(Rng& rng, std::size_t m, std::size_t n,
                            const std::vector<double>& sigma) {
  const std::size_t k = sigma.size();
  Tensor left = sample_orthonormal(rng, m, k);
  const Tensor right = sample_orthonormal(rng, n, k);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < k; ++c) left(r, c) *= sigma[c];
  return matmul_nt(left, right);
}

double max_principal_angle_deg(const Tensor& a, const Tensor& b) {
  const Tensor qa = leading_columns(svd(a).u, std::min(a.rows(), a.cols()));
  const Tensor qb = leading_columns(svd(b).u, std::min(b.rows(), b.cols()));
  const SvdResult d = svd(matmul_tn(qa, qb));
  const double c = std::clamp(d.sigma[d.sigma.size() - 1], -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

LinearExperiment fig2a_experiment(std::uint64_t seed) {
  LinearExperiment e;
  Rng target = Rng(seed).derive("target");
  e.a = random_with_spectrum(target, 9, 6, {3.0, 2.0, 1.0});
  e.data_mode = DataMode::unit_ball;
  e.r = 6;
  e.iterations = 8000;
  e.lr = 0.1;
  e.lr_drop_at = 6000;
  e.lambda_gl = 1e-3;
  e.batch_size = 32;
  e.init_std = 0.05;
  e.seed = seed;
  e.checkpoint_every = 50;
  return e;
}

LinearExperiment fig2b_experiment(std::uint64_t seed) {
  LinearExperiment e;
  Rng target = Rng(seed).derive("target");
  e.a = Tensor::identity(6);
  e.data_mode = DataMode::gaussian_frame;
  e.frame = sample_orthonormal(target, 6, 3);
  e.frame_std = {1.0, 1.0, 1.0};
  e.r = 6;
  e.iterations = 2500;
  e.lr = 0.05;
  e.lambda_gl = 1e-2;
  e.batch_size = 8;
  e.init_std = 0.05;
  e.seed = seed;
  return e;
}

LinearExperiment fig7_experiment(std::uint64_t seed, bool isotropic_control) {
  LinearExperiment e = fig2a_experiment(seed);
  // The weakest input direction needs a longer run to settle its column.
  e.iterations = 16000;
  e.lr_drop_at = 12000;
  if (!isotropic_control) {
    e.data_mode = DataMode::reversed_importance;
    e.frame = leading_columns(svd(e.a).v, 3);
    e.frame_std = {1.0 / 9.0, 1.0 / 4.0, 1.0};
  }
  return e;
}

LinearExperiment fig8_experiment(std::uint64_t seed) {
  LinearExperiment e = fig2b_experiment(seed);
  // Distinct variances make the surviving directions identifiable.
  e.frame_std = {1.0, 0.8, 0.6};
  e.drop_at = e.iterations / 2;
  e.drop_direction = 2;
  return e;
}

SvdRecoveryReport svd_recovery_experiment(std::uint64_t seed) {
  const LinearExperiment e = fig2a_experiment(seed);
  SvdRecoveryReport rep;
  rep.target_norm = frobenius_norm(e.a);
  rep.run = run_linear_lod(e);
  rep.final_distance = rep.run.final_checkpoint().distance;
  return rep;
}

PcaRecoveryReport pca_recovery_experiment(std::uint64_t seed) {
  const LinearExperiment e = fig2b_experiment(seed);
  PcaRecoveryReport rep;
  rep.run = run_linear_lod(e);
  rep.final_sigma = rep.run.final_checkpoint().sigma_hat;
  rep.span_angle_deg = max_principal_angle_deg(leading_columns(rep.run.v, 3), e.frame);
  return rep;
}

namespace {

// For each learned output direction u_b (b < k), the target singular
// direction it aligns with best and the |cos| to `predicted` column b.
void learned_alignment(const Tensor& u, const Tensor& target_u, const Tensor& predicted,
                       std::size_t k, std::vector<std::size_t>& order, std::vector<double>& cos) {
  order.clear();
  cos.clear();
  for (std::size_t b = 0; b < k; ++b) {
    const double nu = column_norm(u, b);
    std::size_t best = 0;
    double best_cos = -1.0;
    for (std::size_t j = 0; j < k; ++j) {
      double d = 0.0;
      for (std::size_t r = 0; r < u.rows(); ++r) d += u(r, b) * target_u(r, j);
      const double c = nu > 0.0 ? std::abs(d) / nu : 0.0;
      if (c > best_cos) {
        best_cos = c;
        best = j;
      }
    }
    order.push_back(best);
    double d = 0.0;
    for (std::size_t r = 0; r < u.rows(); ++r) d += u(r, b) * predicted(r, b);
    cos.push_back(nu > 0.0 ? std::abs(d) / (nu * column_norm(predicted, b)) : 0.0);
  }
}

}  // namespace

OrderingReport reversed_importance_experiment(std::uint64_t seed) {
  const std::size_t k = 3;
  OrderingReport rep;
  const LinearExperiment e = fig7_experiment(seed, false);
  const SvdResult target = svd(e.a);

  // Oracle on a large independent sample.
  Rng sample_rng = Rng(seed).derive("oracle-sample");
  const Tensor sample = sample_inputs(e, 20000, sample_rng);
  const PcaResult oracle = transformed_pca_oracle(e.a, sample);
  for (std::size_t b = 0; b < k; ++b) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < oracle.components.rows(); ++j)
      if (std::abs(oracle.components(j, b)) > std::abs(oracle.components(best, b))) best = j;
    rep.oracle_order.push_back(best);
  }
  // Predicted output-side directions U~ c_b.
  const Tensor predicted = matmul(target.u, oracle.components);

  rep.run = run_linear_lod(e);
  learned_alignment(rep.run.u, target.u, predicted, k, rep.learned_order, rep.learned_cos);

  const LinearExperiment control = fig7_experiment(seed, true);
  rep.control = run_linear_lod(control);
  learned_alignment(rep.control.u, target.u, target.u, k, rep.control_order, rep.control_cos);
  return rep;
}

DimensionDropReport dimension_drop_experiment(std::uint64_t seed) {
  const LinearExperiment e = fig8_experiment(seed);
  DimensionDropReport rep;
  rep.run = run_linear_lod(e);
  const std::size_t mid = *e.drop_at;
  for (const SigmaCheckpoint& cp : rep.run.trajectory) {
    if (cp.iteration == mid) rep.midpoint_sigma = cp.sigma_hat;
    if (cp.iteration > mid) {
      for (std::size_t b = 0; b < 2; ++b)
        rep.second_half_top2_dev = std::max(rep.second_half_top2_dev, std::abs(cp.sigma_hat[b] - 1.0));
    }
  }
  rep.final_sigma = rep.run.final_checkpoint().sigma_hat;
  return rep;
}

}  // namespace lodrank
