// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/autodiff.hpp"

#include <utility>

namespace lodrank {

Gradients::Gradients(const Graph& graph, std::vector<Tensor> grads)
    : graph_(&graph), grads_(std::move(grads)) {}

Tensor Gradients::operator[](NodeId id) const {
  const Tensor& g = grads_.at(id.index);
  if (g.shape() != graph_->value(id).shape()) return Tensor(graph_->value(id).shape());
  return g;
}

NodeId Graph::push(Tensor value, bool requires_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), requires_grad, false, std::move(backward)});
  return NodeId{nodes_.size() - 1};
}

void Graph::accumulate(std::vector<Tensor>& grads, NodeId id, Tensor g) {
  Tensor& slot = grads[id.index];
  if (slot.shape() != g.shape()) {
    slot = std::move(g);
  } else {
    axpy(1.0, g, slot);
  }
}

NodeId Graph::constant(Tensor value) { return push(std::move(value), false, nullptr); }

NodeId Graph::parameter(Tensor value) {
  NodeId id = push(std::move(value), true, nullptr);
  nodes_.back().parameter = true;
  return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Tensor out = lodrank::matmul(value(a), value(b));
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](const Graph& g, const Tensor& go, auto& grads) {
    if (g.requires_grad(a)) accumulate(grads, a, lodrank::matmul_nt(go, g.value(b)));
    if (g.requires_grad(b)) accumulate(grads, b, matmul_tn(g.value(a), go));
  });
}

NodeId Graph::matmul_nt(NodeId a, NodeId b) {
  Tensor out = lodrank::matmul_nt(value(a), value(b));
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](const Graph& g, const Tensor& go, auto& grads) {
    // out = A B^T: dA = go B, dB = go^T A.
    if (g.requires_grad(a)) accumulate(grads, a, lodrank::matmul(go, g.value(b)));
    if (g.requires_grad(b)) accumulate(grads, b, matmul_tn(go, g.value(a)));
  });
}

NodeId Graph::leading_columns(NodeId a, std::size_t count) {
  Tensor out = lodrank::leading_columns(value(a), count);
  return push(std::move(out), requires_grad(a), [a](const Graph& g, const Tensor& go, auto& grads) {
    Tensor full(g.value(a).shape());
    add_into_leading_columns(full, go);
    accumulate(grads, a, std::move(full));
  });
}

NodeId Graph::add(NodeId a, NodeId b) {
  Tensor out = lodrank::add(value(a), value(b));
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](const Graph& g, const Tensor& go, auto& grads) {
    if (g.requires_grad(a)) accumulate(grads, a, go);
    if (g.requires_grad(b)) accumulate(grads, b, go);
  });
}

NodeId Graph::add_bias(NodeId x, NodeId bias) {
  Tensor out = add_row_vector(value(x), value(bias));
  const bool rg = requires_grad(x) || requires_grad(bias);
  return push(std::move(out), rg, [x, bias](const Graph& g, const Tensor& go, auto& grads) {
    if (g.requires_grad(x)) accumulate(grads, x, go);
    if (g.requires_grad(bias)) accumulate(grads, bias, column_sums(go));
  });
}

NodeId Graph::scale(NodeId a, double factor) {
  Tensor out = lodrank::scale(value(a), factor);
  return push(std::move(out), requires_grad(a),
              [a, factor](const Graph&, const Tensor& go, auto& grads) {
                accumulate(grads, a, lodrank::scale(go, factor));
              });
}

NodeId Graph::relu(NodeId a) {
  Tensor out = lodrank::relu(value(a));
  return push(std::move(out), requires_grad(a), [a](const Graph& g, const Tensor& go, auto& grads) {
    const Tensor& in = g.value(a);
    Tensor d = go;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!(in[i] > 0.0)) d[i] = 0.0;
    }
    accumulate(grads, a, std::move(d));
  });
}

NodeId Graph::reshape(NodeId a, Shape shape) {
  Tensor out = value(a).reshaped(std::move(shape));
  return push(std::move(out), requires_grad(a), [a](const Graph& g, const Tensor& go, auto& grads) {
    accumulate(grads, a, go.reshaped(g.value(a).shape()));
  });
}

NodeId Graph::im2col(NodeId batch, const ConvGeometry& geometry) {
  Tensor out = im2col_nhwc(value(batch), geometry);
  return push(std::move(out), requires_grad(batch),
              [batch, geometry](const Graph& g, const Tensor& go, auto& grads) {
                accumulate(grads, batch, col2im_nhwc(go, g.value(batch).dim(0), geometry));
              });
}

NodeId Graph::maxpool(NodeId batch, const PoolGeometry& pool) {
  std::vector<std::size_t> argmax;
  Tensor out = maxpool_nhwc(value(batch), pool, &argmax);
  return push(std::move(out), requires_grad(batch),
              [batch, argmax = std::move(argmax)](const Graph& g, const Tensor& go, auto& grads) {
                Tensor d(g.value(batch).shape());
                for (std::size_t i = 0; i < argmax.size(); ++i) d[argmax[i]] += go[i];
                accumulate(grads, batch, std::move(d));
              });
}

NodeId Graph::softmax_cross_entropy(NodeId logits, std::vector<std::int32_t> labels) {
  Tensor grad;
  const double loss = lodrank::softmax_cross_entropy(value(logits), labels,
                                                     requires_grad(logits) ? &grad : nullptr);
  return push(Tensor::vector({loss}), requires_grad(logits),
              [logits, grad = std::move(grad)](const Graph&, const Tensor& go, auto& grads) {
                accumulate(grads, logits, lodrank::scale(grad, go[0]));
              });
}

NodeId Graph::mean_squared_error(NodeId pred, NodeId target) {
  const Tensor diff = sub(value(pred), value(target));
  const double n = static_cast<double>(diff.ndim() == 0 ? 1 : diff.dim(0));
  const double loss = lodrank::sum_squares(diff) / n;
  const bool rg = requires_grad(pred) || requires_grad(target);
  return push(Tensor::vector({loss}), rg,
              [pred, target, diff, n](const Graph& g, const Tensor& go, auto& grads) {
                Tensor d = lodrank::scale(diff, 2.0 * go[0] / n);
                if (g.requires_grad(target)) accumulate(grads, target, lodrank::scale(d, -1.0));
                if (g.requires_grad(pred)) accumulate(grads, pred, std::move(d));
              });
}

NodeId Graph::sum_squares(NodeId a) {
  const double s = lodrank::sum_squares(value(a));
  return push(Tensor::vector({s}), requires_grad(a), [a](const Graph& g, const Tensor& go, auto& grads) {
    accumulate(grads, a, lodrank::scale(g.value(a), 2.0 * go[0]));
  });
}

NodeId Graph::mean(NodeId a) {
  const Tensor& v = value(a);
  double s = 0.0;
  for (double x : v.data()) s += x;
  const double n = static_cast<double>(v.size());
  if (v.size() == 0) throw ContractError("Graph::mean: empty tensor");
  return push(Tensor::vector({s / n}), requires_grad(a),
              [a, n](const Graph& g, const Tensor& go, auto& grads) {
                accumulate(grads, a, Tensor(g.value(a).shape(), go[0] / n));
              });
}

Gradients Graph::backward(NodeId loss) const {
  if (value(loss).size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        to_string(value(loss).shape()));
  }
  // A slot whose shape differs from its node's value means "no gradient yet".
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.index] = Tensor(value(loss).shape(), 1.0);
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward) continue;
    if (grads[i].shape() != node.value.shape()) continue;  // unreached
    node.backward(*this, grads[i], grads);
  }
  return Gradients(*this, std::move(grads));
}

}  // namespace lodrank
