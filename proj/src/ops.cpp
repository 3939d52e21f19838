// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace lodrank {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(const Tensor& t) {
  return ConstMap(t.raw(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap view(Tensor& t) {
  return MutMap(t.raw(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  }
}

[[noreturn]] void mismatch(const char* what, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(what) + ": incompatible shapes " + to_string(a.shape()) +
                   " and " + to_string(b.shape()));
}

}  // namespace

// Eigen's single-threaded GEMM uses a fixed blocking for given sizes, so
// results are bit-reproducible run to run.
Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  Tensor c({a.rows(), b.cols()});
  if (a.cols() == 0) return c;
  view(c).noalias() = view(a) * view(b);
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) mismatch("matmul_tn", a, b);
  Tensor c({a.cols(), b.cols()});
  if (a.rows() == 0) return c;
  view(c).noalias() = view(a).transpose() * view(b);
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) mismatch("matmul_nt", a, b);
  Tensor c({a.rows(), b.rows()});
  if (a.cols() == 0) return c;
  view(c).noalias() = view(a) * view(b).transpose();
  return c;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Tensor leading_columns(const Tensor& a, std::size_t count) {
  require_matrix(a, "leading_columns");
  if (count > a.cols()) {
    throw ContractError("leading_columns: requested " + std::to_string(count) +
                        " columns of " + to_string(a.shape()));
  }
  Tensor out({a.rows(), count});
  for (std::size_t i = 0; i < a.rows(); ++i)
    std::copy_n(a.raw() + i * a.cols(), count, out.raw() + i * count);
  return out;
}

void add_into_leading_columns(Tensor& dst, const Tensor& block) {
  require_matrix(dst, "add_into_leading_columns");
  require_matrix(block, "add_into_leading_columns");
  if (block.rows() != dst.rows() || block.cols() > dst.cols()) {
    mismatch("add_into_leading_columns", dst, block);
  }
  const std::size_t w = block.cols();
  for (std::size_t i = 0; i < dst.rows(); ++i) {
    double* d = dst.raw() + i * dst.cols();
    const double* s = block.raw() + i * w;
    for (std::size_t j = 0; j < w; ++j) d[j] += s[j];
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor c = a;
  for (double& v : c.data()) v *= factor;
  return c;
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
  require_same_shape(x, y, "axpy");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

Tensor add_row_vector(const Tensor& a, const Tensor& row) {
  require_matrix(a, "add_row_vector");
  if (row.size() != a.cols()) mismatch("add_row_vector", a, row);
  Tensor c = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* r = c.raw() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) r[j] += row[j];
  }
  return c;
}

Tensor column_sums(const Tensor& a) {
  require_matrix(a, "column_sums");
  Tensor s({a.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* r = a.raw() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) s[j] += r[j];
  }
  return s;
}

Tensor relu(const Tensor& a) {
  Tensor c = a;
  for (double& v : c.data()) v = v > 0.0 ? v : 0.0;
  return c;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) mismatch("dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sum_squares(const Tensor& a) { return dot(a, a); }

double frobenius_norm(const Tensor& a) { return std::sqrt(sum_squares(a)); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double column_norm(const Tensor& a, std::size_t col) {
  require_matrix(a, "column_norm");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, col) * a(i, col);
  return std::sqrt(s);
}

double tail_norm(const Tensor& a, std::size_t first) {
  require_matrix(a, "tail_norm");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = first; j < a.cols(); ++j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

std::size_t ConvGeometry::out_height() const {
  return (in_height + 2 * pad - kernel) / stride + 1;
}

std::size_t ConvGeometry::out_width() const {
  return (in_width + 2 * pad - kernel) / stride + 1;
}

void ConvGeometry::validate() const {
  auto check = [&](std::size_t extent, const char* axis) {
    if (kernel == 0 || stride == 0 || extent + 2 * pad < kernel ||
        (extent + 2 * pad - kernel) % stride != 0) {
      throw ShapeError(std::string("convolution ") + axis + ": (" +
                       std::to_string(extent) + " + 2*" + std::to_string(pad) + " - " +
                       std::to_string(kernel) + ") / " + std::to_string(stride) +
                       " + 1 is not a positive integer");
    }
  };
  check(in_height, "height");
  check(in_width, "width");
}

Tensor im2col_nhwc(const Tensor& batch, const ConvGeometry& g) {
  g.validate();
  if (batch.ndim() != 4 || batch.dim(1) != g.in_height || batch.dim(2) != g.in_width ||
      batch.dim(3) != g.in_channels) {
    throw ShapeError("im2col: input " + to_string(batch.shape()) +
                     " does not match geometry (N," + std::to_string(g.in_height) + "," +
                     std::to_string(g.in_width) + "," + std::to_string(g.in_channels) + ")");
  }
  const std::size_t n = batch.dim(0), oh = g.out_height(), ow = g.out_width();
  const std::size_t k = g.kernel, c = g.in_channels, h = g.in_height, w = g.in_width;
  const std::size_t cols = g.patch_size();
  Tensor out({n * oh * ow, cols});
  const double* in = batch.raw();
  double* dst = out.raw();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, dst += cols) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const double* src = in + ((b * h + iy) * w + ix) * c;
            for (std::size_t ch = 0; ch < c; ++ch) dst[ch * k * k + ky * k + kx] = src[ch];
          }
        }
      }
    }
  }
  return out;
}

Tensor col2im_nhwc(const Tensor& columns, std::size_t n, const ConvGeometry& g) {
  g.validate();
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t k = g.kernel, c = g.in_channels, h = g.in_height, w = g.in_width;
  const std::size_t cols = g.patch_size();
  if (columns.ndim() != 2 || columns.rows() != n * oh * ow || columns.cols() != cols) {
    throw ShapeError("col2im: columns " + to_string(columns.shape()) +
                     " do not match geometry");
  }
  Tensor out({n, h, w, c});
  double* img = out.raw();
  const double* src = columns.raw();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, src += cols) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            double* d = img + ((b * h + iy) * w + ix) * c;
            for (std::size_t ch = 0; ch < c; ++ch) d[ch] += src[ch * k * k + ky * k + kx];
          }
        }
      }
    }
  }
  return out;
}

Tensor im2col(const Tensor& image, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (image.ndim() != 3) {
    throw ShapeError("im2col: expected a (c, h, w) tensor, got " + to_string(image.shape()));
  }
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor hwc({1, h, w, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) hwc[(y * w + x) * c + ch] = image[(ch * h + y) * w + x];
  ConvGeometry g{c, h, w, kernel, stride, pad};
  return im2col_nhwc(hwc, g);
}

Tensor maxpool_nhwc(const Tensor& batch, const PoolGeometry& pool,
                    std::vector<std::size_t>* argmax) {
  if (batch.ndim() != 4) throw ShapeError("maxpool: expected (N,H,W,C), got " + to_string(batch.shape()));
  const std::size_t n = batch.dim(0), h = batch.dim(1), w = batch.dim(2), c = batch.dim(3);
  if (pool.window == 0 || pool.stride == 0 || h < pool.window || w < pool.window) {
    throw ShapeError("maxpool: window larger than input " + to_string(batch.shape()));
  }
  const std::size_t oh = (h - pool.window) / pool.stride + 1;
  const std::size_t ow = (w - pool.window) / pool.stride + 1;
  Tensor out({n, oh, ow, c});
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t ch = 0; ch < c; ++ch, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t dy = 0; dy < pool.window; ++dy)
            for (std::size_t dx = 0; dx < pool.window; ++dx) {
              const std::size_t idx =
                  ((b * h + oy * pool.stride + dy) * w + ox * pool.stride + dx) * c + ch;
              if (batch[idx] > best) {
                best = batch[idx];
                best_idx = idx;
              }
            }
          out[o] = best;
          if (argmax) (*argmax)[o] = best_idx;
        }
  return out;
}

double softmax_cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels,
                             Tensor* grad) {
  require_matrix(logits, "softmax_cross_entropy");
  const std::size_t n = logits.rows(), k = logits.cols();
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  if (grad) *grad = Tensor({n, k});
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.raw() + i * k;
    const auto label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw ContractError("softmax_cross_entropy: label " + std::to_string(label) +
                          " outside [0, " + std::to_string(k) + ")");
    }
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double log_z = mx + std::log(z);
    total += log_z - row[label];
    if (grad) {
      double* g = grad->raw() + i * k;
      for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(row[j] - log_z) / static_cast<double>(n);
      g[label] -= 1.0 / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

std::vector<std::int32_t> argmax_rows(const Tensor& logits) {
  require_matrix(logits, "argmax_rows");
  std::vector<std::int32_t> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* row = logits.raw() + i * logits.cols();
    out[i] = static_cast<std::int32_t>(std::max_element(row, row + logits.cols()) - row);
  }
  return out;
}

}  // namespace lodrank
