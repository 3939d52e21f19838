// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>

#include "doctest.h"
#include "lodrank/autodiff.hpp"
#include "lodrank/rng.hpp"

using namespace lodrank;

namespace {

using Builder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

// Max relative error between backward() and central differences.
double fd_error(const std::vector<Tensor>& params, const Builder& build, double h = 1e-6) {
  Graph g;
  std::vector<NodeId> ids;
  for (const Tensor& p : params) ids.push_back(g.parameter(p));
  const NodeId loss = build(g, ids);
  const Gradients grads = g.backward(loss);

  auto eval = [&](const std::vector<Tensor>& ps) {
    Graph e;
    std::vector<NodeId> pid;
    for (const Tensor& p : ps) pid.push_back(e.parameter(p));
    return e.value(build(e, pid))[0];
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor analytic = grads[ids[k]];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      std::vector<Tensor> plus = params, minus = params;
      plus[k][i] += h;
      minus[k][i] -= h;
      const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
      worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("gradient of squared norm") {
  Graph g;
  NodeId x = g.parameter(Tensor::vector({1, -2, 3}));
  Gradients grads = g.backward(g.sum_squares(x));
  CHECK(grads[x] == Tensor::vector({2, -4, 6}));
}

TEST_CASE("relu derivative at zero is zero") {
  Graph g;
  NodeId x = g.parameter(Tensor::vector({0.0, 1.0, -1.0}));
  Gradients grads = g.backward(g.mean(g.relu(x)));
  CHECK(grads[x][0] == 0.0);
  CHECK(grads[x][1] == doctest::Approx(1.0 / 3.0));
  CHECK(grads[x][2] == 0.0);
}

TEST_CASE("non-scalar loss is a contract error") {
  Graph g;
  NodeId x = g.parameter(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(g.backward(x), ContractError);
}

TEST_CASE("unreached leaves get zero gradients") {
  Graph g;
  NodeId x = g.parameter(Tensor::vector({1, 2}));
  NodeId y = g.parameter(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Gradients grads = g.backward(g.sum_squares(x));
  CHECK(grads[y] == Tensor({2, 2}));
}

TEST_CASE("matmul chain matches finite differences") {
  Rng rng(9);
  std::vector<Tensor> ps{sample_gaussian(rng, {4, 3}), sample_gaussian(rng, {3, 2})};
  CHECK(fd_error(ps, [](Graph& g, const auto& id) {
          return g.sum_squares(g.matmul(id[0], id[1]));
        }) <= 1e-5);
}

TEST_CASE("every primitive matches finite differences") {
  Rng rng(21);
  SUBCASE("matmul_nt and leading_columns") {
    std::vector<Tensor> ps{sample_gaussian(rng, {5, 4}), sample_gaussian(rng, {3, 4}),
                           sample_gaussian(rng, {6, 5})};
    CHECK(fd_error(ps, [](Graph& g, const auto& id) {
            NodeId u = g.leading_columns(id[0], 2);
            NodeId v = g.leading_columns(id[1], 2);
            return g.sum_squares(g.matmul_nt(g.matmul(id[2], u), v));
          }) <= 1e-5);
  }
  SUBCASE("add, add_bias, scale, mean") {
    std::vector<Tensor> ps{sample_gaussian(rng, {3, 4}), sample_gaussian(rng, {3, 4}),
                           sample_gaussian(rng, {4})};
    CHECK(fd_error(ps, [](Graph& g, const auto& id) {
            NodeId s = g.scale(g.add(id[0], id[1]), -1.7);
            return g.mean(g.matmul_nt(g.add_bias(s, id[2]), g.add_bias(s, id[2])));
          }) <= 1e-5);
  }
  SUBCASE("relu away from kinks") {
    Tensor x = sample_gaussian(rng, {4, 5});
    for (double& v : x.data())
      if (std::abs(v) < 0.05) v = 0.3;
    CHECK(fd_error({x}, [](Graph& g, const auto& id) {
            return g.sum_squares(g.relu(id[0]));
          }) <= 1e-5);
  }
  SUBCASE("im2col, maxpool, reshape, cross-entropy") {
    ConvGeometry geo{2, 6, 6, 3, 1, 0};
    Tensor x = sample_gaussian(rng, {2, 6, 6, 2});
    Tensor w = sample_gaussian(rng, {18, 3});
    std::vector<std::int32_t> labels{1, 2};
    CHECK(fd_error({x, w}, [&](Graph& g, const auto& id) {
            NodeId cols = g.im2col(id[0], geo);
            NodeId y = g.reshape(g.matmul(cols, id[1]), {2, 4, 4, 3});
            NodeId p = g.maxpool(y, PoolGeometry{});
            NodeId flat = g.reshape(p, {2, 12});
            NodeId logits = g.matmul(flat, g.constant(Tensor({12, 3}, 0.1)));
            return g.softmax_cross_entropy(logits, labels);
          }) <= 1e-5);
  }
  SUBCASE("mean squared error") {
    std::vector<Tensor> ps{sample_gaussian(rng, {5, 3}), sample_gaussian(rng, {5, 3})};
    CHECK(fd_error(ps, [](Graph& g, const auto& id) {
            return g.mean_squared_error(id[0], id[1]);
          }) <= 1e-5);
  }
}

TEST_CASE("one least-squares step by hand") {
  // loss = (1/2) * ((w.x1 - y1)^2 + (w.x2 - y2)^2) with w = (1, 0).
  Tensor x = Tensor::matrix(2, 2, {1, 2, 3, -1});
  Tensor y = Tensor::matrix(2, 1, {0, 1});
  Graph g;
  NodeId w = g.parameter(Tensor::matrix(2, 1, {1, 0}));
  NodeId loss = g.mean_squared_error(g.matmul(g.constant(x), w), g.constant(y));
  CHECK(g.value(loss)[0] == doctest::Approx(2.5));
  // residuals r = (1, 2); grad = (2/2) * X^T r = (1*1 + 3*2, 2*1 - 1*2) = (7, 0)
  Gradients grads = g.backward(loss);
  CHECK(grads[w] == Tensor::matrix(2, 1, {7, 0}));
}
