// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "lodrank/linalg.hpp"
#include "lodrank/ops.hpp"
#include "lodrank/rng.hpp"

using namespace lodrank;

namespace {

Tensor reconstruct(const SvdResult& d) { return best_rank_k(d, d.sigma.size()); }

void check_invariants(const Tensor& a, const SvdResult& d) {
  const std::size_t p = d.sigma.size();
  CHECK(max_abs(sub(matmul_tn(d.u, d.u), Tensor::identity(p))) <= 1e-10);
  CHECK(max_abs(sub(matmul_tn(d.v, d.v), Tensor::identity(p))) <= 1e-10);
  for (std::size_t i = 0; i < p; ++i) {
    CHECK(d.sigma[i] >= 0.0);
    if (i) CHECK(d.sigma[i] <= d.sigma[i - 1]);
  }
  CHECK(frobenius_norm(sub(reconstruct(d), a)) <= 1e-9 * std::max(1.0, frobenius_norm(a)));
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t(r, c);
  return m;
}

Tensor rank_k_matrix(Rng& rng, std::size_t m, std::size_t n, std::size_t k) {
  return matmul_nt(sample_gaussian(rng, {m, k}), sample_gaussian(rng, {n, k}));
}

}  // namespace

TEST_CASE("svd of a diagonal matrix") {
  Tensor a = Tensor::matrix(3, 3, {3, 0, 0, 0, 2, 0, 0, 0, 1});
  SvdResult d = svd(a);
  CHECK(d.sigma == Tensor::vector({3, 2, 1}));
  CHECK(max_abs(sub(d.u, Tensor::identity(3))) <= 1e-15);
  CHECK(max_abs(sub(d.v, Tensor::identity(3))) <= 1e-15);
}

TEST_CASE("svd of the zero matrix still has orthonormal factors") {
  Tensor a({4, 3});
  SvdResult d = svd(a);
  CHECK(max_abs(d.sigma) == 0.0);
  check_invariants(a, d);
}

TEST_CASE("svd of a random 9x6 matrix") {
  Rng rng(1);
  Tensor a = sample_gaussian(rng, {9, 6});
  SvdResult d = svd(a);
  check_invariants(a, d);
  CHECK(frobenius_norm(sub(reconstruct(d), a)) <= 1e-10 * frobenius_norm(a));
  // Gram-matrix eigenvalues are sigma^2.
  SymmetricEigen g = symmetric_eigen(matmul_tn(a, a));
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(std::abs(g.values[i] - d.sigma[i] * d.sigma[i]) <= 1e-10 * g.values[0]);
}

TEST_CASE("svd agrees with Eigen's JacobiSVD") {
  Rng rng(2);
  for (auto [m, n] : {std::pair<std::size_t, std::size_t>{9, 6}, {5, 12}, {16, 16}}) {
    Tensor a = sample_gaussian(rng, {m, n});
    Eigen::JacobiSVD<Eigen::MatrixXd> ref(to_eigen(a));
    SvdResult d = svd(a);
    for (std::size_t i = 0; i < d.sigma.size(); ++i)
      CHECK(std::abs(d.sigma[i] - ref.singularValues()(i)) <= 1e-10 * d.sigma[0]);
  }
}

TEST_CASE("svd invariants over random shapes and ranks") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.below(32), n = 1 + rng.below(32);
    const std::size_t k = rng.below(std::min(m, n) + 1);
    Tensor a = trial % 3 == 0 ? rank_k_matrix(rng, m, n, k) : sample_gaussian(rng, {m, n});
    check_invariants(a, svd(a));
  }
}

TEST_CASE("svd sign convention") {
  Rng rng(4);
  SvdResult d = svd(sample_gaussian(rng, {7, 5}));
  for (std::size_t k = 0; k < 5; ++k) {
    double best = 0;
    for (std::size_t r = 0; r < 7; ++r)
      if (std::abs(d.u(r, k)) > std::abs(best)) best = d.u(r, k);
    CHECK(best > 0);
  }
}

TEST_CASE("svd rejects non-finite input") {
  Tensor a({2, 2});
  a[1] = std::nan("");
  CHECK_THROWS_AS(svd(a), NumericError);
}

TEST_CASE("best_rank_k") {
  Rng rng(5);
  Tensor a = rank_k_matrix(rng, 9, 6, 3);
  CHECK(frobenius_norm(sub(best_rank_k(a, 3), a)) <= 1e-10 * frobenius_norm(a));
  CHECK(max_abs(best_rank_k(a, 0)) == 0.0);
  SvdResult d = svd(a);
  const double res2 = sum_squares(sub(a, best_rank_k(a, 2)));
  CHECK(std::abs(res2 - d.sigma[2] * d.sigma[2]) <= 1e-9 * std::max(1.0, res2));
  CHECK_THROWS_AS(best_rank_k(a, 7), ContractError);
}

TEST_CASE("Eckart-Young: truncation beats random rank-k matrices") {
  Rng rng(6);
  Tensor a = sample_gaussian(rng, {8, 6});
  SvdResult d = svd(a);
  for (std::size_t k = 0; k <= 6; ++k) {
    const double best = frobenius_norm(sub(a, best_rank_k(d, k)));
    for (int t = 0; t < 50; ++t) {
      Tensor b = k ? rank_k_matrix(rng, 8, 6, k) : Tensor({8, 6});
      // Also try rank-k perturbations of the optimum, so the check is not vacuous.
      if (t % 2 && k) {
        SvdResult e = d;
        e.u = add(e.u, scale(sample_gaussian(rng, e.u.shape()), 1e-3));
        b = best_rank_k(e, k);
      }
      CHECK(best <= frobenius_norm(sub(a, b)) + 1e-12);
    }
  }
}

TEST_CASE("pca of points on one axis") {
  Tensor data({5, 3});
  for (std::size_t i = 0; i < 5; ++i) data(i, 1) = double(i) - 1.5;
  PcaResult p = pca(data);
  CHECK(std::abs(p.components(1, 0)) >= 1 - 1e-10);
  CHECK(p.variances[1] <= 1e-12);
  CHECK(p.variances[2] <= 1e-12);
}

TEST_CASE("pca of three-direction data in R^6") {
  Rng rng(7);
  Tensor dirs = sample_orthonormal(rng, 6, 3);
  Tensor coeff = sample_gaussian(rng, {500, 3});
  PcaResult p = pca(matmul_nt(coeff, dirs));
  int above = 0;
  for (double v : p.variances.data()) above += v > 1e-8;
  CHECK(above == 3);
}

TEST_CASE("pca variances equal squared singular values of centered data over N") {
  Rng rng(8);
  Tensor data = sample_gaussian(rng, {40, 5});
  PcaResult p = pca(data);
  Tensor centered = data;
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 0; c < 5; ++c) centered(r, c) -= p.mean[c];
  SvdResult d = svd(centered);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(std::abs(p.variances[i] - d.sigma[i] * d.sigma[i] / 40.0) <= 1e-9);
  CHECK(max_abs(sub(matmul_tn(p.components, p.components), Tensor::identity(5))) <= 1e-10);
}

TEST_CASE("transformed PCA with identity mapping is plain PCA") {
  Rng rng(9);
  Tensor data = sample_gaussian(rng, {30, 4});
  PcaResult a = transformed_pca_oracle(Tensor::identity(4), data);
  PcaResult b = pca(data);
  CHECK(max_abs(sub(a.components, b.components)) <= 1e-10);
  CHECK(max_abs(sub(a.variances, b.variances)) <= 1e-10);
}

TEST_CASE("transformed PCA on isotropic data follows sigma order") {
  Rng rng(10);
  Tensor a = sample_gaussian(rng, {9, 6});
  Tensor data({20000, 6});
  for (std::size_t i = 0; i < 20000; ++i) {
    Tensor x = sample_unit_ball(rng, 6);
    for (std::size_t c = 0; c < 6; ++c) data(i, c) = x[c];
  }
  PcaResult p = transformed_pca_oracle(a, data);
  // Component j should be close to the j-th coordinate axis.
  for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(p.components(j, j)) >= 0.9);
}

TEST_CASE("transformed PCA reverses order for reversed-importance data") {
  // sigma = (3, 2, 1); data variance along v_j chosen to invert sigma_j^2 * var_j.
  Rng rng(11);
  Tensor uq = sample_orthonormal(rng, 9, 3), vq = sample_orthonormal(rng, 6, 3);
  Tensor us = uq;
  const double sig[3] = {3, 2, 1}, sd[3] = {1.0 / 9, 1.0 / 4, 1.0};
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t c = 0; c < 3; ++c) us(r, c) *= sig[c];
  Tensor a = matmul_nt(us, vq);
  Tensor coeff = sample_gaussian(rng, {5000, 3});
  for (std::size_t i = 0; i < 5000; ++i)
    for (std::size_t c = 0; c < 3; ++c) coeff(i, c) *= sd[c];
  PcaResult p = transformed_pca_oracle(a, matmul_nt(coeff, vq));
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(p.components(2 - j, j)) >= 0.99);
}
