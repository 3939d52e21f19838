// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <map>

#include "doctest.h"
#include "lodrank/ops.hpp"
#include "lodrank/trainer.hpp"

using namespace lodrank;

namespace {

// Model built from linear layers with relu between them; input is N x features.
Model mlp(Rng& rng, const std::vector<std::size_t>& widths) {
  Model m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    auto [w, b] = kaiming_uniform(rng, widths[i], widths[i + 1]);
    m.layers.push_back(make_factorized(w, b));
    if (i) m.stages.push_back(Stage{StageKind::relu, 0, {}});
    m.stages.push_back(Stage{StageKind::layer, i, {}});
  }
  m.classes = widths.back();
  return m;
}

Dataset blobs(Rng& rng, std::size_t n, std::size_t features, std::size_t classes) {
  Dataset d;
  d.inputs = sample_gaussian(rng, {n, features});
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::int32_t>(rng.below(classes));
    d.labels[i] = c;
    d.inputs(i, static_cast<std::size_t>(c) % features) += 3.0;
  }
  return d;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.raw(), b.raw(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("sampler: single layer of rank one always gives (0, 1)") {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    auto [layer, b] = sample_rank_pair({1}, rng);
    CHECK(layer == 0);
    CHECK(b == 1);
  }
}

TEST_CASE("sampler: ranks [3,5] pass a chi-square test over 8 cells") {
  Rng rng(11);
  std::map<std::pair<std::size_t, std::size_t>, int> count;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++count[sample_rank_pair({3, 5}, rng)];
  REQUIRE(count.size() == 8);
  double chi2 = 0.0;
  const double expected = draws / 8.0;
  for (auto& [cell, c] : count) {
    CHECK(cell.second >= 1);
    CHECK(cell.second <= (cell.first == 0 ? 3u : 5u));
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // Upper 0.001 quantile of chi-square with 7 degrees of freedom.
  CHECK(chi2 < 24.322);
}

TEST_CASE("sampler: all-zero profile is a contract error") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_rank_pair({0, 0}, rng), ContractError);
  CHECK_THROWS_AS(sample_rank_pair({}, rng), ContractError);
}

TEST_CASE("hgl penalty examples") {
  const Tensor eye = Tensor::identity(2);
  CHECK(hgl_penalty(eye, 2, 0.0) == 0.0);
  const double both = hgl_penalty(eye, 2, 1.0) + hgl_penalty(eye, 2, 1.0);
  CHECK(both == doctest::Approx(2.0 * (std::sqrt(2.0) + 1.0)).epsilon(1e-15));
  CHECK(both == doctest::Approx(4.8284).epsilon(1e-5));

  Tensor u({3, 1}), v({2, 1});
  u(0, 0) = 3; u(1, 0) = 4;
  v(0, 0) = 1; v(1, 0) = -1;
  CHECK(hgl_penalty(u, 1, 0.5) + hgl_penalty(v, 1, 0.5) ==
        doctest::Approx(0.5 * (5.0 + std::sqrt(2.0))));

  // Model form sums over factorized layers.
  Model m;
  m.layers.push_back(make_factorized(eye, Tensor()));
  CHECK(hgl_penalty(m, 1.0) == doctest::Approx(2.0 * (std::sqrt(2.0) + 1.0)));
}

TEST_CASE("hgl subgradient: zero matrix gives zero") {
  Tensor z({4, 3});
  CHECK(max_abs(hgl_subgradient(z, 1.0)) == 0.0);
}

TEST_CASE("hgl subgradient matches central differences") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor m = sample_gaussian(rng, {4, 3});
    bool ok = true;
    for (double n : tail_group_norms(m, 3)) ok = ok && n > 0.1;
    if (!ok) continue;
    const double lambda = 0.7;
    const Tensor g = hgl_subgradient(m, lambda);
    const double h = 1e-6;
    for (std::size_t k = 0; k < m.size(); ++k) {
      Tensor p = m, q = m;
      p[k] += h;
      q[k] -= h;
      const double fd = (hgl_penalty(p, 3, lambda) - hgl_penalty(q, 3, lambda)) / (2 * h);
      CHECK(std::abs(fd - g[k]) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("hgl subgradient is invariant to positive scaling") {
  Rng rng(5);
  const Tensor m = sample_gaussian(rng, {5, 4});
  for (double c : {0.5, 2.0, 4.0, 0.25}) {
    CHECK(bit_equal(hgl_subgradient(scale(m, c), 1.3), hgl_subgradient(m, 1.3)));
  }
}

TEST_CASE("hgl prox: zero threshold is identity, huge threshold zeroes") {
  Rng rng(8);
  Tensor m = sample_gaussian(rng, {4, 3});
  const Tensor orig = m;
  hgl_prox(m, 0.0, 3);
  CHECK(bit_equal(m, orig));
  hgl_prox(m, 1e6, 3);
  CHECK(max_abs(m) == 0.0);
}

TEST_CASE("hgl prox on a single group is block soft-thresholding") {
  Tensor m({2, 1});
  m(0, 0) = 3;
  m(1, 0) = 4;
  hgl_prox(m, 1.0, 1);
  CHECK(m(0, 0) == doctest::Approx(3 * 0.8));
  CHECK(m(1, 0) == doctest::Approx(4 * 0.8));
}

TEST_CASE("hgl prox minimizes the penalized distance") {
  // Compare against random perturbations of the returned point.
  Rng rng(13);
  const Tensor m = sample_gaussian(rng, {3, 3});
  const double t = 0.4;
  Tensor p = m;
  hgl_prox(p, t, 3);
  auto objective = [&](const Tensor& x) {
    return 0.5 * sum_squares(sub(x, m)) + hgl_penalty(x, 3, t);
  };
  const double best = objective(p);
  for (int i = 0; i < 500; ++i) {
    Tensor q = add(p, sample_gaussian(rng, {3, 3}, 1e-3));
    CHECK(objective(q) >= best - 1e-12);
  }
}

TEST_CASE("shrink examples") {
  SUBCASE("epsilon 0 keeps the profile") {
    Rng rng(2);
    Model m = mlp(rng, {6, 5, 4});
    const RankProfile before = m.profile();
    CHECK(progressive_shrink(m, 0.0) == before);
  }
  SUBCASE("zero tail columns are dropped") {
    Rng rng(4);
    Tensor u = sample_gaussian(rng, {6, 5}), v = sample_gaussian(rng, {4, 5});
    FactorizedLayer l = make_factorized(matmul_nt(u, v), Tensor());
    for (std::size_t r = 0; r < l.u.rows(); ++r)
      for (std::size_t c = 2; c < l.u.cols(); ++c) l.u(r, c) = 0.0;
    Model m;
    m.layers.push_back(l);
    CHECK(progressive_shrink(m, 1e-7) == RankProfile{2});
    CHECK(m.layers[0].u.cols() == 2);
    CHECK(m.layers[0].v.cols() == 2);
  }
  SUBCASE("tail products (5, 1e-8, 1e-9) with epsilon 1e-7 give rank 1") {
    const std::vector<double> tail{5.0, 1e-8, 1e-9};
    FactorizedLayer l;
    l.u = Tensor({3, 3});
    l.v = Tensor({3, 3});
    // Orthogonal columns with equal U and V norms: tail product = tail squared norm.
    for (std::size_t c = 0; c < 3; ++c) {
      const double sq = tail[c] - (c + 1 < 3 ? tail[c + 1] : 0.0);
      l.u(c, c) = l.v(c, c) = std::sqrt(sq);
    }
    l.r_max = l.r_active = 3;
    Model m;
    m.layers.push_back(l);
    const auto nu = tail_group_norms(m.layers[0].u, 3);
    for (std::size_t b = 0; b < 3; ++b) CHECK(nu[b] * nu[b] == doctest::Approx(tail[b]));
    CHECK(progressive_shrink(m, 1e-7) == RankProfile{1});
  }
}

TEST_CASE("shrinking changes the output by at most epsilon times the input norm") {
  Rng rng(17);
  Tensor u = sample_gaussian(rng, {8, 4}), v = sample_gaussian(rng, {5, 4});
  for (std::size_t r = 0; r < 8; ++r) u(r, 3) *= 1e-5;
  for (std::size_t r = 0; r < 5; ++r) v(r, 3) *= 1e-4;
  FactorizedLayer l;
  l.u = u;
  l.v = v;
  l.bias = sample_gaussian(rng, {5});
  l.r_max = l.r_active = 4;
  Model m;
  m.layers.push_back(l);
  m.stages.push_back(Stage{StageKind::layer, 0, {}});
  const double eps = tail_group_norms(u, 4)[3] * tail_group_norms(v, 4)[3] * 1.0001;
  const Tensor x = sample_gaussian(rng, {10, 8});
  const Tensor before = model_forward(m, x);
  CHECK(progressive_shrink(m, eps) == RankProfile{3});
  const Tensor after = model_forward(m, x);
  for (std::size_t i = 0; i < 10; ++i) {
    double diff = 0.0, xn = 0.0;
    for (std::size_t c = 0; c < 5; ++c) diff += std::pow(before(i, c) - after(i, c), 2);
    for (std::size_t c = 0; c < 8; ++c) xn += x(i, c) * x(i, c);
    CHECK(std::sqrt(diff) <= eps * std::sqrt(xn));
  }
}

TEST_CASE("one step on a rank-one linear least-squares model equals plain gradient descent") {
  Rng rng(31);
  const std::size_t n = 12, in = 4, out = 3;
  FactorizedLayer layer;
  layer.u = sample_gaussian(rng, {in, 1});
  layer.v = sample_gaussian(rng, {out, 1});
  layer.bias = sample_gaussian(rng, {out});
  layer.r_max = layer.r_active = 1;
  Model m;
  m.layers.push_back(layer);
  m.stages.push_back(Stage{StageKind::layer, 0, {}});
  REQUIRE(m.layers[0].r_active == 1);
  Dataset d;
  d.inputs = sample_gaussian(rng, {n, in});
  d.targets = sample_gaussian(rng, {n, out});

  const Tensor u0 = m.layers[0].u, v0 = m.layers[0].v, b0 = m.layers[0].bias;
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.momentum = 0.0;
  Trainer t(m, cfg);
  t.step(d);

  // Hand-derived gradients of (1/n) sum_i |x_i u v^T + b - y_i|^2.
  std::vector<double> xu(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < in; ++k) xu[i] += d.inputs(i, k) * u0(k, 0);
  Tensor resid({n, out});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < out; ++j)
      resid(i, j) = 2.0 / n * (xu[i] * v0(j, 0) + b0[j] - d.targets(i, j));
  Tensor gu({in, 1}), gv({out, 1}), gb({out});
  for (std::size_t i = 0; i < n; ++i) {
    double rv = 0.0;
    for (std::size_t j = 0; j < out; ++j) {
      rv += resid(i, j) * v0(j, 0);
      gv(j, 0) += resid(i, j) * xu[i];
      gb[j] += resid(i, j);
    }
    for (std::size_t k = 0; k < in; ++k) gu(k, 0) += d.inputs(i, k) * rv;
  }
  const FactorizedLayer& l = t.model().layers[0];
  for (std::size_t k = 0; k < in; ++k) CHECK(std::abs(l.u(k, 0) - (u0(k, 0) - 0.05 * gu(k, 0))) < 1e-10);
  for (std::size_t j = 0; j < out; ++j) {
    CHECK(std::abs(l.v(j, 0) - (v0(j, 0) - 0.05 * gv(j, 0))) < 1e-10);
    CHECK(std::abs(l.bias[j] - (b0[j] - 0.05 * gb[j])) < 1e-10);
  }
}

TEST_CASE("training is bit-identical under a fixed seed") {
  Rng data_rng(40);
  const Dataset d = blobs(data_rng, 300, 8, 4);
  auto run = [&] {
    Rng init(41);
    TrainConfig cfg;
    cfg.lambda_gl = 1e-3;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    cfg.weight_decay = 1e-4;
    Trainer t(mlp(init, {8, 12, 4}), cfg);
    for (int e = 0; e < 3; ++e) t.train_epoch(d);
    return t.model();
  };
  const Model a = run(), b = run();
  REQUIRE(a.layers.size() == b.layers.size());
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    CHECK(bit_equal(a.layers[i].u, b.layers[i].u));
    CHECK(bit_equal(a.layers[i].v, b.layers[i].v));
    CHECK(bit_equal(a.layers[i].bias, b.layers[i].bias));
  }
}

TEST_CASE("history: rank monotone, loss additive, backward passes counted") {
  Rng data_rng(50);
  const Dataset d = blobs(data_rng, 256, 8, 4);
  for (Variant variant : {Variant::standard, Variant::no_hgl, Variant::no_ps,
                          Variant::extra_full_pass}) {
    for (HglMode mode : {HglMode::proximal, HglMode::subgradient}) {
      Rng init(51);
      TrainConfig cfg;
      cfg.lambda_gl = 2e-2;
      cfg.batch_size = 32;
      cfg.epochs = 6;
      cfg.variant = variant;
      cfg.hgl_mode = mode;
      Trainer t(mlp(init, {8, 10, 4}), cfg);
      RankProfile prev = t.model().profile();
      for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const EpochStats st = t.train_epoch(d, &d);
        CHECK(st.total_loss == st.task_loss + st.penalty);
        std::size_t sum = 0;
        for (std::size_t i = 0; i < st.ranks.size(); ++i) {
          CHECK(st.ranks[i] <= prev[i]);
          sum += st.ranks[i];
        }
        CHECK(st.total_rank == sum);
        CHECK(st.steps == 8);
        CHECK(st.backward_passes == (variant == Variant::extra_full_pass ? 16u : 8u));
        if (variant == Variant::no_hgl) CHECK(st.penalty == 0.0);
        if (variant == Variant::no_ps) CHECK(st.ranks == prev);
        prev = st.ranks;
      }
    }
  }
}

TEST_CASE("no_hgl with epsilon 0 never shrinks") {
  Rng data_rng(60);
  const Dataset d = blobs(data_rng, 200, 8, 4);
  Rng init(61);
  TrainConfig cfg;
  cfg.variant = Variant::no_hgl;
  cfg.epsilon_ps = 0.0;
  cfg.epochs = 5;
  Trainer t(mlp(init, {8, 10, 4}), cfg);
  const RankProfile start = t.model().profile();
  for (int e = 0; e < 5; ++e) CHECK(t.train_epoch(d).ranks == start);
}

TEST_CASE("LeNet meters: dense cost is 3 x 281640 per sample") {
  Rng init(7);
  Model m = make_lenet(init);
  Rng data_rng(8);
  Dataset batch;
  batch.inputs = sample_gaussian(data_rng, {2, 28, 28, 1});
  batch.labels = {3, 7};
  TrainConfig cfg;
  Trainer t(m, cfg);
  t.force_pair(Truncation{4, 10});
  t.step(batch);
  CHECK(t.dense_mac_meter() == 3.0 * 281640.0 * 2.0);
  CHECK(t.mac_meter() == 3.0 * 2.0 * static_cast<double>(executed_mac_count(m, {6, 16, 120, 84, 10})));
  CHECK(t.rel_train_params() == doctest::Approx(66274.0 / 44426.0));
  CHECK(t.backward_passes() == 1);
}

TEST_CASE("NaN loss aborts with a diagnostic naming the step") {
  Rng init(9);
  Model m = mlp(init, {4, 3});
  Dataset d;
  d.inputs = Tensor({2, 4});
  d.inputs[0] = std::nan("");
  d.labels = {0, 1};
  Trainer t(m, TrainConfig{});
  try {
    t.step(d);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("config violations are all reported") {
  TrainConfig cfg;
  cfg.lambda_gl = -1;
  cfg.epochs = 0;
  cfg.lr = 0;
  cfg.momentum = 1.0;
  CHECK(cfg.violations().size() == 4);
  CHECK_THROWS_AS(Trainer(Model{}, cfg), ContractError);
  CHECK(TrainConfig{}.violations().empty());
  CHECK(parse_variant("extra_full_pass") == Variant::extra_full_pass);
  CHECK_THROWS_AS(parse_variant("bogus"), ContractError);
  CHECK(parse_hgl_mode(to_string(HglMode::subgradient)) == HglMode::subgradient);
}
