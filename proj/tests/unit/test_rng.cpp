// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "lodrank/ops.hpp"
#include "lodrank/rng.hpp"

using namespace lodrank;

TEST_CASE("same seed, same stream") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
  CHECK(sample_gaussian(a, {10}) == sample_gaussian(b, {10}));
}

TEST_CASE("pinned stream values") {
  // splitmix64 reference output for state 0 (from the published algorithm).
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  Rng r(0);
  CHECK(r.next_u64() == splitmix64(splitmix64(0)));
}

TEST_CASE("derived streams are independent of each other") {
  Rng root(7);
  Rng a = root.derive("train"), b = root.derive("init");
  CHECK(a.next_u64() != b.next_u64());
  CHECK(root.derive("train").next_u64() == root.derive("train").next_u64());
}

TEST_CASE("unit ball draws stay inside") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) CHECK(frobenius_norm(sample_unit_ball(rng, 4)) <= 1.0);
  CHECK_THROWS_AS(sample_unit_ball(rng, 0), ContractError);
}

TEST_CASE("unit ball in 2-D has near-zero mean") {
  Rng rng(2);
  double mx = 0, my = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    Tensor v = sample_unit_ball(rng, 2);
    mx += v[0];
    my += v[1];
  }
  CHECK(std::hypot(mx / n, my / n) <= 0.02);
}

TEST_CASE("unit ball in 3-D second moment is 3/5") {
  Rng rng(3);
  double s = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) s += sum_squares(sample_unit_ball(rng, 3));
  CHECK(std::abs(s / n - 0.6) <= 0.02);
}

TEST_CASE("below is uniform (chi-square)") {
  Rng rng(4);
  const int bins = 10, n = 50000;
  std::vector<int> count(bins);
  for (int i = 0; i < n; ++i) ++count[rng.below(bins)];
  double chi = 0;
  for (int c : count) chi += (c - n / bins) * (c - n / bins) / double(n / bins);
  CHECK(chi < 27.88);  // 99.9% quantile, 9 dof
}

TEST_CASE("normal draws have unit variance") {
  Rng rng(5);
  Tensor g = sample_gaussian(rng, {200000});
  double m = 0;
  for (double x : g.data()) m += x;
  m /= g.size();
  CHECK(std::abs(m) < 0.01);
  CHECK(std::abs(sum_squares(g) / g.size() - 1.0) < 0.01);
}

TEST_CASE("orthonormal sampler") {
  Rng rng(6);
  Tensor q = sample_orthonormal(rng, 9, 4);
  CHECK(max_abs(sub(matmul_tn(q, q), Tensor::identity(4))) <= 1e-12);
}
