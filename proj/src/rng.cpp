// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/rng.hpp"

#include <cmath>
#include <numbers>

#include "lodrank/ops.hpp"

namespace lodrank {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_name(std::string_view name) noexcept {
  // FNV-1a, then mixed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

std::uint64_t Rng::next_u64() noexcept {
  return splitmix64(splitmix64(seed_) ^ (counter_++ * 0xd1b54a32d192ed03ULL));
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() noexcept {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ContractError("Rng::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Rng Rng::derive(std::string_view name) const {
  return Rng(splitmix64(seed_ ^ hash_name(name)));
}

Rng Rng::derive(std::uint64_t index) const {
  return Rng(splitmix64(seed_ ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

Tensor sample_gaussian(Rng& rng, Shape shape, double stddev) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = stddev * rng.normal();
  return t;
}

Tensor sample_uniform(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

Tensor sample_unit_ball(Rng& rng, std::size_t dim) {
  if (dim == 0) throw ContractError("sample_unit_ball: dim must be >= 1");
  Tensor g = sample_gaussian(rng, {dim});
  double norm = frobenius_norm(g);
  while (norm == 0.0) {
    g = sample_gaussian(rng, {dim});
    norm = frobenius_norm(g);
  }
  const double radius = std::pow(rng.uniform_open(), 1.0 / static_cast<double>(dim));
  for (double& v : g.data()) v *= radius / norm;
  return g;
}

Tensor sample_orthonormal(Rng& rng, std::size_t rows, std::size_t cols) {
  if (cols > rows) throw ContractError("sample_orthonormal: cols > rows");
  Tensor q({rows, cols});
  for (std::size_t j = 0; j < cols; ++j) {
    while (true) {
      std::vector<double> v(rows);
      for (double& x : v) x = rng.normal();
      // Two passes of modified Gram-Schmidt.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < j; ++k) {
          double d = 0.0;
          for (std::size_t i = 0; i < rows; ++i) d += q(i, k) * v[i];
          for (std::size_t i = 0; i < rows; ++i) v[i] -= d * q(i, k);
        }
      }
      double n = 0.0;
      for (double x : v) n += x * x;
      n = std::sqrt(n);
      if (n < 1e-8) continue;
      for (std::size_t i = 0; i < rows; ++i) q(i, j) = v[i] / n;
      break;
    }
  }
  return q;
}

void shuffle(Rng& rng, std::vector<std::size_t>& items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace lodrank
