// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Exact dense references: SVD, truncation, PCA and the transformed-PCA
// prediction for the linear nested-dropout objective.

#pragma once

#include <cstddef>

#include "lodrank/tensor.hpp"

namespace lodrank {

/// A = U diag(sigma) V^T with p = min(m, n) columns in U and V.
struct SvdResult {
  Tensor u;      ///< m x p, orthonormal columns
  Tensor sigma;  ///< p, descending, non-negative
  Tensor v;      ///< n x p, orthonormal columns
};

struct PcaResult {
  Tensor components;  ///< n x n, one direction per column
  Tensor variances;   ///< n, descending
  Tensor mean;        ///< n
};

/// One-sided Jacobi SVD. Every vector pair (u_j, v_j) is signed so that the
/// largest-magnitude entry of u_j is positive. Throws NumericError if the
/// sweep cap is hit before the relative off-diagonal drops below 1e-12.
SvdResult svd(const Tensor& a);

/// U_{:k} diag(sigma_{:k}) V_{:k}^T.
Tensor best_rank_k(const Tensor& a, std::size_t k);
Tensor best_rank_k(const SvdResult& decomposition, std::size_t k);

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Eigenvalues
/// descending; eigenvectors as columns, largest entry made positive.
struct SymmetricEigen {
  Tensor values;
  Tensor vectors;
};
SymmetricEigen symmetric_eigen(const Tensor& a);

/// PCA of the rows of `data` via the covariance (centered, divided by N).
/// Variances are clamped at zero.
PcaResult pca(const Tensor& data);

/// PCA of the rows mapped by x -> diag(sigma) V^T x, where svd(a) = U S V^T
/// and `a` is m x n acting on column vectors x in R^n. Component c
/// predicts the learned output-side direction U c.
PcaResult transformed_pca_oracle(const Tensor& a, const Tensor& data);

/// Flips the sign of column `col` of `primary` (and of `partner` if non-null)
/// so its largest-magnitude entry is positive.
void canonicalize_sign(Tensor& primary, std::size_t col, Tensor* partner);

}  // namespace lodrank
