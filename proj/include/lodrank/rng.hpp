// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "lodrank/tensor.hpp"

namespace lodrank {

/// Counter-based generator: draw k is splitmix64(seed, k). The stream is a
/// pure function of (seed, counter), independent of the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform_open() noexcept;
  /// Standard normal (Box-Muller; one draw per call, no cached pair).
  double normal() noexcept;
  /// Uniform integer on [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Independent stream keyed by name, e.g. "train", "init", "eval-batch".
  Rng derive(std::string_view name) const;
  Rng derive(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t hash_name(std::string_view name) noexcept;

Tensor sample_gaussian(Rng& rng, Shape shape, double stddev = 1.0);
Tensor sample_uniform(Rng& rng, Shape shape, double lo, double hi);
/// Uniform draw from the closed unit ball in R^dim: g * u^(1/dim) / |g|.
Tensor sample_unit_ball(Rng& rng, std::size_t dim);
/// Random matrix with orthonormal columns (Gram-Schmidt on a Gaussian draw).
Tensor sample_orthonormal(Rng& rng, std::size_t rows, std::size_t cols);

void shuffle(Rng& rng, std::vector<std::size_t>& items);

}  // namespace lodrank
