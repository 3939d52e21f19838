// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Tape-style reverse-mode differentiation over a fixed set of primitives.
// A Graph is built fresh for every training step and discarded afterwards.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "lodrank/ops.hpp"
#include "lodrank/tensor.hpp"

namespace lodrank {

struct NodeId {
  std::size_t index = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

class Graph;

/// Gradients indexed by node; nodes that the loss does not reach map to a
/// zero tensor of the node's shape.
class Gradients {
 public:
  Gradients(const Graph& graph, std::vector<Tensor> grads);
  Tensor operator[](NodeId id) const;

 private:
  const Graph* graph_;
  std::vector<Tensor> grads_;
};

class Graph {
 public:
  NodeId constant(Tensor value);
  /// Trainable leaf.
  NodeId parameter(Tensor value);

  const Tensor& value(NodeId id) const { return nodes_.at(id.index).value; }
  bool requires_grad(NodeId id) const { return nodes_.at(id.index).requires_grad; }
  bool is_parameter(NodeId id) const { return nodes_.at(id.index).parameter; }
  std::size_t size() const noexcept { return nodes_.size(); }

  NodeId matmul(NodeId a, NodeId b);
  /// a * b^T
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId leading_columns(NodeId a, std::size_t count);
  NodeId add(NodeId a, NodeId b);
  /// Adds a bias vector to each row.
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId scale(NodeId a, double factor);
  /// max(x, 0); derivative at exactly 0 is 0.
  NodeId relu(NodeId a);
  NodeId reshape(NodeId a, Shape shape);
  NodeId im2col(NodeId batch, const ConvGeometry& geometry);
  NodeId maxpool(NodeId batch, const PoolGeometry& pool);
  /// Mean softmax cross-entropy over rows.
  NodeId softmax_cross_entropy(NodeId logits, std::vector<std::int32_t> labels);
  /// (1/N) * sum_i |pred_i - target_i|^2 over the N rows.
  NodeId mean_squared_error(NodeId pred, NodeId target);
  /// Squared Frobenius norm.
  NodeId sum_squares(NodeId a);
  NodeId mean(NodeId a);

  /// Reverse sweep from a scalar node. Throws ContractError for a
  /// non-scalar loss.
  Gradients backward(NodeId loss) const;

 private:
  using Backward = std::function<void(const Graph&, const Tensor& grad_out,
                                      std::vector<Tensor>& grads)>;
  struct Node {
    Tensor value;
    bool requires_grad = false;
    bool parameter = false;
    Backward backward;
  };

  NodeId push(Tensor value, bool requires_grad, Backward backward);
  static void accumulate(std::vector<Tensor>& grads, NodeId id, Tensor g);

  std::vector<Node> nodes_;
};

}  // namespace lodrank
