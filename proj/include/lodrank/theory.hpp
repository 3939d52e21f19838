// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Linear-model experiments: f(x) = U V^T x trained with uniformly sampled
// truncation b, compared against SVD / PCA predictions.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lodrank/dataset.hpp"
#include "lodrank/linalg.hpp"
#include "lodrank/rng.hpp"
#include "lodrank/tensor.hpp"

namespace lodrank {

enum class DataMode { unit_ball, gaussian_frame, reversed_importance, matrix_objective };

std::string to_string(DataMode m);
DataMode parse_data_mode(const std::string& s);

struct LinearExperiment {
  Tensor a;  ///< target, m x n; y = A x
  DataMode data_mode = DataMode::unit_ball;
  /// gaussian_frame / reversed_importance: x = frame * (c .* frame_std) with
  /// c standard normal; frame is n x k with orthonormal columns.
  Tensor frame;
  std::vector<double> frame_std;
  std::size_t r = 0;
  std::size_t iterations = 2500;
  double lr = 0.05;
  /// Iteration from which the step size is multiplied by 0.1.
  std::optional<std::size_t> lr_drop_at;
  double lambda_gl = 0.0;
  std::size_t batch_size = 1;
  double init_std = 0.05;
  std::uint64_t seed = 0;
  /// From this iteration on, frame direction `drop_direction` gets zero weight.
  std::optional<std::size_t> drop_at;
  std::size_t drop_direction = 2;
  std::size_t checkpoint_every = 25;

  std::vector<std::string> violations() const;
};

struct SigmaCheckpoint {
  std::size_t iteration = 0;
  std::vector<double> sigma_hat;  ///< |u_b| |v_b| for b = 1..r
  std::vector<double> distance;   ///< |U_{:k} V_{:k}^T - A_k|_F for k = 1..r
  double loss = 0.0;              ///< mean task loss since the previous checkpoint
};

struct LinearRun {
  Tensor u;  ///< m x r
  Tensor v;  ///< n x r
  std::vector<SigmaCheckpoint> trajectory;

  const SigmaCheckpoint& final_checkpoint() const { return trajectory.back(); }
};

/// Draws `count` inputs (rows) for the given iteration.
Tensor sample_inputs(const LinearExperiment& exp, std::size_t count, Rng& rng,
                     std::size_t iteration = 0);

/// Features drawn per data mode, responses y = A x exactly.
Dataset synth_linear_dataset(const LinearExperiment& exp, std::size_t n_samples, Rng& rng);

/// SGD on the sampled-truncation objective (matrix objective in
/// matrix_objective mode). Throws NumericError when the loss exceeds 1e6.
LinearRun run_linear_lod(const LinearExperiment& exp);

/// sigma_hat of factor columns.
std::vector<double> sigma_hat(const Tensor& u, const Tensor& v);

/// Random m x n matrix U diag(sigma) V^T with orthonormal random frames.
Tensor random_with_spectrum(Rng& rng, std::size_t m, std::size_t n,
                            const std::vector<double>& sigma);

/// Largest principal angle (degrees) between the column spans of a and b.
double max_principal_angle_deg(const Tensor& a, const Tensor& b);

// Presets reproducing the four linear figures.
LinearExperiment fig2a_experiment(std::uint64_t seed);
LinearExperiment fig2b_experiment(std::uint64_t seed);
LinearExperiment fig7_experiment(std::uint64_t seed, bool isotropic_control = false);
LinearExperiment fig8_experiment(std::uint64_t seed);

struct SvdRecoveryReport {
  LinearRun run;
  double target_norm = 0.0;
  std::vector<double> final_distance;  ///< k = 1..6
};
SvdRecoveryReport svd_recovery_experiment(std::uint64_t seed);

struct PcaRecoveryReport {
  LinearRun run;
  std::vector<double> final_sigma;
  double span_angle_deg = 0.0;  ///< span(V_{:3}) vs data span
};
PcaRecoveryReport pca_recovery_experiment(std::uint64_t seed);

struct OrderingReport {
  /// Oracle order: entry b is the index j of the target singular direction
  /// that learned component b should align with.
  std::vector<std::size_t> oracle_order;
  std::vector<std::size_t> learned_order;
  std::vector<double> learned_cos;  ///< |cos(u_b, U~ c_b)|
  std::vector<std::size_t> control_order;
  std::vector<double> control_cos;
  LinearRun run;
  LinearRun control;
};
OrderingReport reversed_importance_experiment(std::uint64_t seed);

struct DimensionDropReport {
  LinearRun run;
  std::vector<double> midpoint_sigma;
  std::vector<double> final_sigma;
  /// Largest |sigma_hat_b - 1| for b = 1, 2 over second-half checkpoints.
  double second_half_top2_dev = 0.0;
};
DimensionDropReport dimension_drop_experiment(std::uint64_t seed);

}  // namespace lodrank
