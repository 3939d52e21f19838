// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>

namespace lodrank {

Tensor Dataset::gather_inputs(const std::vector<std::size_t>& rows) const {
  Shape shape = inputs.shape();
  const std::size_t stride = inputs.size() / shape[0];
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(out.raw() + i * stride, inputs.raw() + rows[i] * stride, stride * sizeof(double));
  }
  return out;
}

std::vector<std::int32_t> Dataset::gather_labels(const std::vector<std::size_t>& rows) const {
  std::vector<std::int32_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels.at(r));
  return out;
}

Tensor Dataset::gather_targets(const std::vector<std::size_t>& rows) const {
  Tensor out({rows.size(), targets.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < targets.cols(); ++c) out(i, c) = targets(rows[i], c);
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset d;
  d.inputs = gather_inputs(rows);
  if (classification()) d.labels = gather_labels(rows);
  if (!targets.empty()) d.targets = gather_targets(rows);
  d.split = split;
  d.norm_mean = norm_mean;
  d.norm_std = norm_std;
  return d;
}

namespace {

std::uint32_t be32(const std::string& bytes, std::size_t at) {
  return (std::uint32_t(static_cast<unsigned char>(bytes[at])) << 24) |
         (std::uint32_t(static_cast<unsigned char>(bytes[at + 1])) << 16) |
         (std::uint32_t(static_cast<unsigned char>(bytes[at + 2])) << 8) |
         std::uint32_t(static_cast<unsigned char>(bytes[at + 3]));
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  const std::string img = read_file(images_path);
  const std::string lab = read_file(labels_path);
  if (img.size() < 16) throw MnistTruncated(images_path + ": header truncated");
  if (lab.size() < 8) throw MnistTruncated(labels_path + ": header truncated");
  if (be32(img, 0) != 0x00000803) {
    throw MnistWrongMagic(images_path + ": expected image magic 0x00000803");
  }
  if (be32(lab, 0) != 0x00000801) {
    throw MnistWrongMagic(labels_path + ": expected label magic 0x00000801");
  }
  const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  if (img.size() < 16 + n * rows * cols) throw MnistTruncated(images_path + ": payload truncated");
  if (lab.size() < 8 + n_labels) throw MnistTruncated(labels_path + ": payload truncated");
  if (n != n_labels) {
    throw MnistCountMismatch("image count " + std::to_string(n) + " != label count " +
                             std::to_string(n_labels));
  }

  Dataset d;
  d.inputs = Tensor({n, rows, cols, 1});
  d.norm_mean = kMnistMean;
  d.norm_std = kMnistStd;
  for (std::size_t i = 0; i < n * rows * cols; ++i) {
    const double px = static_cast<unsigned char>(img[16 + i]) / 255.0;
    d.inputs[i] = (px - kMnistMean) / kMnistStd;
  }
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = static_cast<unsigned char>(lab[8 + i]);
  return d;
}

Dataset load_mnist_split(const std::string& dir, bool train) {
  const std::filesystem::path base(dir);
  const std::string prefix = train ? "train" : "t10k";
  Dataset d = load_mnist_idx((base / (prefix + "-images-idx3-ubyte")).string(),
                             (base / (prefix + "-labels-idx1-ubyte")).string());
  d.split = train ? "train" : "test";
  return d;
}

double majority_class_rate(const std::vector<std::int32_t>& labels, std::size_t classes) {
  if (labels.empty()) return 0.0;
  std::vector<std::size_t> count(classes, 0);
  for (auto l : labels) ++count.at(static_cast<std::size_t>(l));
  return static_cast<double>(*std::max_element(count.begin(), count.end())) /
         static_cast<double>(labels.size());
}

}  // namespace lodrank
