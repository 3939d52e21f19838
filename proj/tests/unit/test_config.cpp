// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "doctest.h"
#include "lodrank/config.hpp"

using namespace lodrank;

TEST_CASE("defaults round-trip through the canonical text") {
  const ExperimentConfig c;
  const std::string text = format_config(c);
  CHECK(parse_config(text) == c);
  CHECK(format_config(parse_config(text)) == text);
}

TEST_CASE("every schema key appears once in the canonical text") {
  const std::string text = format_config(ExperimentConfig{});
  std::set<std::string> names;
  for (const auto& k : config_schema()) {
    CHECK(names.insert(k.section + "." + k.key).second);
    CHECK_FALSE(k.doc.empty());
    CHECK_FALSE(k.module.empty());
    CHECK(text.find("\n" + k.key + " = ") != std::string::npos);
  }
  CHECK(config_reference().find("`train.lambda_gl`") != std::string::npos);
}

TEST_CASE("a full config parses and the echo re-parses to an equal config") {
  const std::string text = R"(
# compression run
[run]
kind = prune
out_dir = runs/x   ; trailing comment
seed = 7

[data]
mnist_dir = /data/mnist
train_limit = 1000

[train]
lambda_gl = 0.00256
epochs = 3
lr = 0.1
hgl_mode = subgradient
variant = no_ps

[prune]
checkpoint = runs/a/model.ckpt
baseline = svd
step_frac = 0.2
max_macs = 100000
min_acc = 0.97
)";
  const ExperimentConfig c = parse_config(text);
  CHECK(c.kind == RunKind::prune);
  CHECK(c.out_dir == "runs/x");
  CHECK(c.seed == 7);
  CHECK(c.train.seed == 7);
  CHECK(c.train_limit == 1000);
  CHECK(c.train.lambda_gl == 0.00256);
  CHECK(c.train.hgl_mode == HglMode::subgradient);
  CHECK(c.train.variant == Variant::no_ps);
  CHECK(c.max_macs == std::size_t{100000});
  CHECK_FALSE(c.max_params.has_value());
  CHECK(c.min_acc == 0.97);
  CHECK(parse_config(format_config(c)) == c);
}

TEST_CASE("odd doubles survive the round trip exactly") {
  ExperimentConfig c;
  c.train.lambda_gl = 0.1 + 0.2;
  c.train.lr = 1e-300;
  c.constraints.large_value = 3.0 / 7.0;
  CHECK(parse_config(format_config(c)) == c);
}

TEST_CASE("every violation is reported at once") {
  const std::string text = R"(
[run]
kind = train
colour = blue
[train]
lr = fast
momentum = 1.5
batch_size = 0
[mystery]
x = 1
)";
  try {
    parse_config(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const auto& p = e.problems();
    REQUIRE(p.size() == 3);  // syntax problems first; semantic checks need a clean parse
    CHECK(p[0].find("run.colour") != std::string::npos);
    CHECK(p[1].find("train.lr") != std::string::npos);
    CHECK(p[2].find("mystery.x") != std::string::npos);
  }
  try {
    parse_config("[train]\nmomentum = 1.5\nbatch_size = 0\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.problems().size() == 2);
  }
}

TEST_CASE("kind-specific requirements") {
  CHECK_THROWS_AS(parse_config("[run]\nkind = prune\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nkind = report\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nkind = theory\n[theory]\npreset = fig9\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nkind = hpo\n[hpo]\nlarge_value = 1e-9\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nkind = sweep\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nseed\n"), ConfigError);
  CHECK(parse_config("[run]\nkind = theory\n[theory]\npreset = fig8\n").preset == "fig8");
}
