// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lodrank/io.hpp"
#include "lodrank/rng.hpp"
#include "lodrank/tensor.hpp"

namespace lodrank {

/// Inputs plus either class labels (classification) or target rows
/// (regression). Images are stored channels-last, {N, H, W, C}.
struct Dataset {
  Tensor inputs;
  std::vector<std::int32_t> labels;
  Tensor targets;
  std::string split;
  double norm_mean = 0.0;
  double norm_std = 1.0;

  std::size_t size() const { return inputs.ndim() ? inputs.dim(0) : 0; }
  bool classification() const { return !labels.empty(); }

  /// Copies the given rows into a new batch.
  Tensor gather_inputs(const std::vector<std::size_t>& rows) const;
  std::vector<std::int32_t> gather_labels(const std::vector<std::size_t>& rows) const;
  Tensor gather_targets(const std::vector<std::size_t>& rows) const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

class MnistWrongMagic : public FormatError {
 public:
  using FormatError::FormatError;
};
class MnistTruncated : public FormatError {
 public:
  using FormatError::FormatError;
};
class MnistCountMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

constexpr double kMnistMean = 0.1307;
constexpr double kMnistStd = 0.3081;

/// Parses an IDX image/label file pair. Pixels are scaled to [0, 1] and then
/// standardized with the usual MNIST mean and std.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

/// Loads `<dir>/{train,t10k}-{images-idx3,labels-idx1}-ubyte`.
Dataset load_mnist_split(const std::string& dir, bool train);

/// Fraction of samples whose most frequent label is the prediction.
double majority_class_rate(const std::vector<std::int32_t>& labels, std::size_t classes);

}  // namespace lodrank
