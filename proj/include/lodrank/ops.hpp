// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Plain tensor kernels. Everything here is a pure function of its inputs;
// the autodiff graph and the inference path both call into these.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lodrank/tensor.hpp"

namespace lodrank {

/// C = A * B.
Tensor matmul(const Tensor& a, const Tensor& b);
/// C = A^T * B.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// C = A * B^T.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

/// First `count` columns of a matrix.
Tensor leading_columns(const Tensor& a, std::size_t count);
/// Writes `block` into the first block.cols() columns of `dst`.
void add_into_leading_columns(Tensor& dst, const Tensor& block);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
void axpy(double alpha, const Tensor& x, Tensor& y);

/// Adds a length-n vector to every row of an (m x n) matrix.
Tensor add_row_vector(const Tensor& a, const Tensor& row);
/// Column sums of an (m x n) matrix.
Tensor column_sums(const Tensor& a);

Tensor relu(const Tensor& a);

double dot(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);
double sum_squares(const Tensor& a);
double max_abs(const Tensor& a);
/// Norm of column `col` of a matrix.
double column_norm(const Tensor& a, std::size_t col);
/// Frobenius norm of columns [first, cols) of a matrix.
double tail_norm(const Tensor& a, std::size_t first);

/// Geometry of a 2-D convolution over an (H, W, C) image.
struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_height() const;
  std::size_t out_width() const;
  std::size_t patch_size() const { return in_channels * kernel * kernel; }
  /// Throws ShapeError when the output size is not a positive integer.
  void validate() const;
};

/// Unrolls a channels-last batch {N, H, W, C} into
/// {N * out_h * out_w, C * k * k}. Column index is c * k * k + ky * k + kx.
Tensor im2col_nhwc(const Tensor& batch, const ConvGeometry& geometry);
/// Adjoint of im2col_nhwc: scatter-adds patch rows back into {N, H, W, C}.
Tensor col2im_nhwc(const Tensor& columns, std::size_t batch,
                   const ConvGeometry& geometry);

/// Single-image convenience form taking a {C, H, W} tensor; returns the
/// {out_h * out_w, C * k * k} matrix.
Tensor im2col(const Tensor& image_chw, std::size_t kernel, std::size_t stride,
              std::size_t pad);

struct PoolGeometry {
  std::size_t window = 2;
  std::size_t stride = 2;
};

/// Max pooling on {N, H, W, C}; `argmax` receives the flat input index of
/// every output element.
Tensor maxpool_nhwc(const Tensor& batch, const PoolGeometry& pool,
                    std::vector<std::size_t>* argmax);

/// Mean softmax cross-entropy over rows of `logits`; writes the gradient
/// with respect to logits when `grad` is non-null.
double softmax_cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels,
                             Tensor* grad);

/// Row-wise argmax.
std::vector<std::int32_t> argmax_rows(const Tensor& logits);

}  // namespace lodrank
