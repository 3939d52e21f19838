// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "lodrank/ops.hpp"

namespace lodrank {
namespace {

constexpr double kJacobiTol = 1e-12;
constexpr int kMaxSweeps = 80;

double col_dot(const Tensor& a, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, i) * a(r, j);
  return s;
}

void rotate_cols(Tensor& a, std::size_t i, std::size_t j, double c, double s) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double x = a(r, i);
    const double y = a(r, j);
    a(r, i) = c * x - s * y;
    a(r, j) = s * x + c * y;
  }
}

// Fills columns of q flagged in `missing` with unit vectors orthogonal to all
// other columns, trying standard basis vectors in order.
void complete_orthonormal(Tensor& q, const std::vector<bool>& missing) {
  const std::size_t m = q.rows();
  const std::size_t p = q.cols();
  std::vector<bool> done(p);
  for (std::size_t j = 0; j < p; ++j) done[j] = !missing[j];
  std::size_t basis = 0;
  for (std::size_t j = 0; j < p; ++j) {
    if (done[j]) continue;
    while (true) {
      if (basis >= m) throw NumericError("svd: cannot complete orthonormal basis", 0.0);
      std::vector<double> v(m, 0.0);
      v[basis++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < p; ++k) {
          if (!done[k]) continue;
          double d = 0.0;
          for (std::size_t r = 0; r < m; ++r) d += q(r, k) * v[r];
          for (std::size_t r = 0; r < m; ++r) v[r] -= d * q(r, k);
        }
      }
      double n = 0.0;
      for (double x : v) n += x * x;
      n = std::sqrt(n);
      if (n < 1e-6) continue;
      for (std::size_t r = 0; r < m; ++r) q(r, j) = v[r] / n;
      done[j] = true;
      break;
    }
  }
}

// Jacobi SVD for m >= n.
SvdResult svd_tall(const Tensor& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Tensor w = a;
  Tensor v = Tensor::identity(n);

  double off = 0.0;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    off = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double alpha = col_dot(w, i, i);
        const double beta = col_dot(w, j, j);
        const double gamma = col_dot(w, i, j);
        if (alpha == 0.0 || beta == 0.0) continue;
        const double rel = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, rel);
        if (rel <= kJacobiTol) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_cols(w, i, j, c, s);
        rotate_cols(v, i, j, c, s);
      }
    }
    if (off <= kJacobiTol) break;
  }
  if (off > kJacobiTol) {
    throw NumericError("svd: Jacobi did not converge, off-diagonal " + std::to_string(off), off);
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(col_dot(w, j, j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdResult out{Tensor({m, n}), Tensor({n}), Tensor({n, n})};
  const double top = n ? norms[order[0]] : 0.0;
  const double floor = top * 1e-13 * static_cast<double>(std::max<std::size_t>(m, 1));
  std::vector<bool> missing(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.sigma[k] = norms[src];
    for (std::size_t r = 0; r < n; ++r) out.v(r, k) = v(r, src);
    if (norms[src] <= floor || norms[src] == 0.0) {
      missing[k] = true;
      continue;
    }
    for (std::size_t r = 0; r < m; ++r) out.u(r, k) = w(r, src) / norms[src];
  }
  complete_orthonormal(out.u, missing);
  for (std::size_t k = 0; k < n; ++k) canonicalize_sign(out.u, k, &out.v);
  return out;
}

}  // namespace

void canonicalize_sign(Tensor& primary, std::size_t col, Tensor* partner) {
  std::size_t best = 0;
  double mag = -1.0;
  for (std::size_t r = 0; r < primary.rows(); ++r) {
    if (std::abs(primary(r, col)) > mag) {
      mag = std::abs(primary(r, col));
      best = r;
    }
  }
  if (primary.rows() == 0 || primary(best, col) >= 0.0) return;
  for (std::size_t r = 0; r < primary.rows(); ++r) primary(r, col) = -primary(r, col);
  if (partner) {
    for (std::size_t r = 0; r < partner->rows(); ++r) (*partner)(r, col) = -(*partner)(r, col);
  }
}

SvdResult svd(const Tensor& a) {
  require_matrix(a, "svd");
  if (!a.all_finite()) throw NumericError("svd: non-finite input", 0.0);
  if (a.rows() >= a.cols()) return svd_tall(a);
  // Wide case: decompose A^T = V S U^T, then swap roles and re-sign on U.
  SvdResult t = svd_tall(transpose(a));
  SvdResult out{std::move(t.v), std::move(t.sigma), std::move(t.u)};
  for (std::size_t k = 0; k < out.sigma.size(); ++k) canonicalize_sign(out.u, k, &out.v);
  return out;
}

Tensor best_rank_k(const SvdResult& d, std::size_t k) {
  const std::size_t p = d.sigma.size();
  if (k > p) {
    throw ContractError("best_rank_k: k=" + std::to_string(k) + " exceeds min(m,n)=" +
                        std::to_string(p));
  }
  Tensor us = leading_columns(d.u, k);
  for (std::size_t r = 0; r < us.rows(); ++r) {
    for (std::size_t c = 0; c < k; ++c) us(r, c) *= d.sigma[c];
  }
  return matmul_nt(us, leading_columns(d.v, k));
}

Tensor best_rank_k(const Tensor& a, std::size_t k) {
  require_matrix(a, "best_rank_k");
  if (k > std::min(a.rows(), a.cols())) {
    throw ContractError("best_rank_k: k=" + std::to_string(k) + " exceeds min(m,n)=" +
                        std::to_string(std::min(a.rows(), a.cols())));
  }
  return best_rank_k(svd(a), k);
}

SymmetricEigen symmetric_eigen(const Tensor& a) {
  require_matrix(a, "symmetric_eigen");
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("symmetric_eigen: matrix is " + to_string(a.shape()));
  Tensor s = a;
  Tensor q = Tensor::identity(n);
  const double scale = std::max(frobenius_norm(a), 1e-300);

  auto off_norm = [&] {
    double o = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) o += s(i, j) * s(i, j);
      }
    }
    return std::sqrt(o);
  };

  int sweep = 0;
  for (; sweep < kMaxSweeps && off_norm() > 1e-15 * scale; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t r = p + 1; r < n; ++r) {
        if (s(p, r) == 0.0) continue;
        const double theta = (s(r, r) - s(p, p)) / (2.0 * s(p, r));
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = c * t;
        // S <- J^T S J on rows/cols p and r.
        for (std::size_t k = 0; k < n; ++k) {
          const double x = s(k, p);
          const double y = s(k, r);
          s(k, p) = c * x - sn * y;
          s(k, r) = sn * x + c * y;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double x = s(p, k);
          const double y = s(r, k);
          s(p, k) = c * x - sn * y;
          s(r, k) = sn * x + c * y;
        }
        rotate_cols(q, p, r, c, sn);
      }
    }
  }
  const double residual = off_norm() / scale;
  if (residual > 1e-15) {
    throw NumericError("symmetric_eigen: Jacobi did not converge", residual);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return s(x, x) > s(y, y); });
  SymmetricEigen out{Tensor({n}), Tensor({n, n})};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = s(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = q(r, order[k]);
    canonicalize_sign(out.vectors, k, nullptr);
  }
  return out;
}

PcaResult pca(const Tensor& data) {
  require_matrix(data, "pca");
  const std::size_t rows = data.rows();
  const std::size_t n = data.cols();
  if (rows == 0) throw ContractError("pca: need at least one sample");
  Tensor mean = column_sums(data);
  for (double& x : mean.data()) x /= static_cast<double>(rows);
  Tensor centered = data;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < n; ++c) centered(r, c) -= mean[c];
  }
  Tensor cov = matmul_tn(centered, centered);
  for (double& x : cov.data()) x /= static_cast<double>(rows);
  // Enforce exact symmetry before Jacobi.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (cov(i, j) + cov(j, i));
      cov(i, j) = cov(j, i) = avg;
    }
  }
  SymmetricEigen e = symmetric_eigen(cov);
  for (double& x : e.values.data()) x = std::max(x, 0.0);
  return PcaResult{std::move(e.vectors), std::move(e.values), std::move(mean)};
}

PcaResult transformed_pca_oracle(const Tensor& a, const Tensor& data) {
  require_matrix(a, "transformed_pca_oracle");
  require_matrix(data, "transformed_pca_oracle");
  if (data.cols() != a.cols()) {
    throw ShapeError("transformed_pca_oracle: data rows have " + std::to_string(data.cols()) +
                     " entries but A is " + to_string(a.shape()));
  }
  const SvdResult d = svd(a);
  // Row form of x -> S V^T x is X V S.
  Tensor z = matmul(data, d.v);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) *= d.sigma[c];
  }
  return pca(z);
}

}  // namespace lodrank
