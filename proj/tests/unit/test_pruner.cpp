// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "doctest.h"
#include "lodrank/linalg.hpp"
#include "lodrank/ops.hpp"
#include "lodrank/pruner.hpp"
#include "lodrank/trainer.hpp"

using namespace lodrank;

namespace {

Model two_layer(Rng& rng, std::size_t in, std::size_t hidden, std::size_t out) {
  Model m;
  auto [w1, b1] = kaiming_uniform(rng, in, hidden);
  auto [w2, b2] = kaiming_uniform(rng, hidden, out);
  m.layers.push_back(make_factorized(w1, b1));
  m.layers.push_back(make_factorized(w2, b2));
  m.stages = {Stage{StageKind::layer, 0, {}}, Stage{StageKind::relu, 0, {}},
              Stage{StageKind::layer, 1, {}}};
  m.classes = out;
  return m;
}

Dataset labelled(Rng& rng, std::size_t n, std::size_t features, std::size_t classes) {
  Dataset d;
  d.inputs = sample_gaussian(rng, {n, features});
  for (std::size_t i = 0; i < n; ++i) {
    // Skewed labels: class 0 is the majority.
    const auto c = rng.uniform() < 0.5 ? 0 : static_cast<std::int32_t>(rng.below(classes));
    d.labels.push_back(c);
    d.inputs(i, static_cast<std::size_t>(c)) += 2.0;
  }
  return d;
}

double eval_loss(const Model& m, const Dataset& d) {
  return softmax_cross_entropy(model_forward(m, d.inputs), d.labels, nullptr);
}

}  // namespace

TEST_CASE("prune step sizes") {
  CHECK(prune_step(10, 0.1) == 9);
  CHECK(prune_step(120, 0.1) == 108);
  CHECK(prune_step(11, 0.1) == 9);
  CHECK(prune_step(1, 0.1) == 0);
  CHECK(prune_step(5, 1.0) == 0);
  CHECK(prune_step(0, 0.5) == 0);
}

TEST_CASE("target already met gives a single point") {
  Rng rng(1);
  Model m = two_layer(rng, 8, 6, 4);
  Dataset d = labelled(rng, 64, 8, 4);
  PruneTarget t;
  t.max_macs = mac_count(m);
  const PruneTrace tr = greedy_prune(m, d, t);
  CHECK(tr.points.size() == 1);
  CHECK(tr.target_met);
  CHECK(tr.points[0].layer_changed == -1);
}

TEST_CASE("single layer: ranks drop by exactly one step per iteration") {
  Rng rng(2);
  Model m;
  auto [w, b] = kaiming_uniform(rng, 40, 30);
  m.layers.push_back(make_factorized(w, b));
  m.stages = {Stage{StageKind::layer, 0, {}}};
  Dataset d;
  d.inputs = sample_gaussian(rng, {50, 40});
  for (std::size_t i = 0; i < 50; ++i) d.labels.push_back(static_cast<std::int32_t>(i % 30));
  const PruneTrace tr = greedy_prune(m, d, PruneTarget{}, 0.1);
  REQUIRE(tr.points.size() > 2);
  CHECK(tr.exhausted);
  CHECK(tr.points.back().ranks == RankProfile{0});
  for (std::size_t k = 1; k < tr.points.size(); ++k) {
    std::size_t r = tr.points[k - 1].ranks[0];
    for (std::size_t it = tr.points[k - 1].iter; it < tr.points[k].iter; ++it) r = prune_step(r, 0.1);
    CHECK(tr.points[k].ranks[0] == r);
  }
}

TEST_CASE("first adopted move is the brute-force argmin over candidates") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    Rng rng(seed);
    const Model full = two_layer(rng, 20, 16, 10);
    // Start below break-even so every move changes served cost.
    const Model m = apply_rank_profile(full, {5, 4});
    const Dataset d = labelled(rng, 200, 20, 10);
    PruneTarget t;
    t.max_macs = mac_count(m) - 1;
    const PruneTrace tr = greedy_prune(m, d, t, 0.25);
    REQUIRE(tr.points.size() == 2);

    double best = std::numeric_limits<double>::infinity();
    RankProfile best_profile;
    for (std::size_t i = 0; i < 2; ++i) {
      RankProfile p = m.profile();
      p[i] = prune_step(p[i], 0.25);
      const double loss = eval_loss(apply_rank_profile(m, p), d);
      if (loss < best) {
        best = loss;
        best_profile = p;
      }
    }
    CHECK(tr.points[1].ranks == best_profile);
    CHECK(tr.points[1].est_loss == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("trace invariants and determinism") {
  Rng rng(3);
  const Model m = two_layer(rng, 12, 10, 6);
  const Dataset d = labelled(rng, 300, 12, 6);
  const Dataset eval = make_eval_batch(d, 100, 7);
  CHECK(eval.size() == 100);
  const PruneTrace a = greedy_prune(m, eval, PruneTarget{}, 0.1, &d);
  const PruneTrace b = greedy_prune(m, make_eval_batch(d, 100, 7), PruneTarget{}, 0.1, &d);
  CHECK(prune_trace_csv(a) == prune_trace_csv(b));
  CHECK(a.points.front().ranks == m.profile());
  for (std::size_t k = 1; k < a.points.size(); ++k) {
    CHECK(a.points[k].macs < a.points[k - 1].macs);
    CHECK(a.points[k].params < a.points[k - 1].params);
    // Recorded accuracy is the exact accuracy of that profile.
    const Model pruned = apply_rank_profile(m, a.points[k].ranks);
    const EvalResult r = evaluate(pruned, d);
    CHECK(a.points[k].test_acc == doctest::Approx(r.accuracy).epsilon(1e-12));
    CHECK(a.points[k].macs == mac_count(pruned));
  }
  CHECK(prune_trace_csv(a).rfind("iter,layer_changed,ranks,est_loss,test_acc,macs,params\n", 0) == 0);
}

TEST_CASE("unsatisfiable target is reported as an exhausted trace") {
  Rng rng(4);
  const Model m = two_layer(rng, 8, 6, 4);
  const Dataset d = labelled(rng, 64, 8, 4);
  PruneTarget t;
  t.max_params = 0;  // the biases alone exceed this
  const PruneTrace tr = greedy_prune(m, d, t);
  CHECK(tr.exhausted);
  CHECK_FALSE(tr.target_met);
}

TEST_CASE("min_acc stops before accuracy falls below the floor") {
  Rng rng(5);
  const Model m = two_layer(rng, 10, 10, 5);
  const Dataset d = labelled(rng, 400, 10, 5);
  const double start = evaluate(m, d).accuracy;
  PruneTarget t;
  t.min_acc = start - 0.05;
  const PruneTrace tr = greedy_prune(m, d, t, 0.1, &d);
  CHECK(tr.target_met);
  for (const auto& p : tr.points) CHECK(p.test_acc >= *t.min_acc);
  CHECK(evaluate(tr.final_model, d).accuracy >= *t.min_acc);
}

TEST_CASE("step_frac is validated") {
  Rng rng(6);
  const Model m = two_layer(rng, 4, 4, 2);
  const Dataset d = labelled(rng, 10, 4, 2);
  CHECK_THROWS_AS(greedy_prune(m, d, {}, 0.0), ContractError);
  CHECK_THROWS_AS(greedy_prune(m, d, {}, 1.5), ContractError);
}

TEST_CASE("all-zero profile serves the bias: accuracy equals the majority rate") {
  Rng rng(7);
  const Dataset d = labelled(rng, 1000, 10, 5);
  TrainConfig cfg;
  cfg.batch_size = 50;
  Rng init(8);
  Trainer t(two_layer(init, 10, 8, 5), cfg);
  for (int e = 0; e < 5; ++e) t.train_epoch(d);
  const Model zero = apply_rank_profile(t.model(), {0, 0});
  CHECK(std::abs(evaluate(zero, d).accuracy - majority_class_rate(d.labels, 5)) <= 0.02);
}

TEST_CASE("svd baseline: full rank reproduces the dense model") {
  Rng init(9);
  const Model dense = make_lenet(init, false);
  Rng data(10);
  const Tensor x = sample_gaussian(data, {3, 28, 28, 1});
  const Model fact = svd_compress_baseline(dense);
  CHECK(fact.profile() == RankProfile{6, 16, 120, 84, 10});
  CHECK(max_abs(sub(model_forward(fact, x), model_forward(dense, x))) <= 1e-9);
  CHECK(param_count(fact) == 44426);
}

TEST_CASE("svd baseline: per-layer error is the Eckart-Young residual") {
  Rng init(11);
  const Model dense = make_lenet(init, false);
  const RankProfile k{3, 8, 20, 15, 5};
  const Model fact = svd_compress_baseline(dense, k);
  for (std::size_t i = 0; i < dense.layers.size(); ++i) {
    const SvdResult s = svd(dense.layers[i].u);
    double tail = 0.0;
    for (std::size_t j = k[i]; j < s.sigma.size(); ++j) tail += s.sigma[j] * s.sigma[j];
    const double err = frobenius_norm(sub(fact.layers[i].weight(), dense.layers[i].u));
    CHECK(err == doctest::Approx(std::sqrt(tail)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(svd_compress_baseline(dense, {7, 8, 20, 15, 5}), ContractError);
}
