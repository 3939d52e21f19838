// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lodrank {

std::vector<std::string> Constraints::violations() const {
  std::vector<std::string> out;
  if (!(min_acc >= 0.0 && min_acc <= 1.0)) out.push_back("min_acc must be in [0, 1]");
  if (!(small_value > 0.0)) out.push_back("small_value must be > 0");
  if (!(small_value < large_value)) out.push_back("small_value must be < large_value");
  if (few_params >= max_params) out.push_back("few_params must be < max_params");
  return out;
}

LenetTrialRunner::LenetTrialRunner(const Dataset& train, const Dataset& test, TrainConfig base)
    : train_(train), test_(test), base_(base) {}

void LenetTrialRunner::start(double lambda, std::uint64_t seed) {
  TrainConfig cfg = base_;
  cfg.lambda_gl = lambda;
  cfg.seed = seed;
  Rng init = Rng(seed).derive("init");
  trainer_.emplace(make_lenet(init), cfg);
}

void LenetTrialRunner::train_one_epoch() { trainer_->train_epoch(train_); }

TrialCheck LenetTrialRunner::measure() {
  TrialCheck c;
  c.epochs_done = trainer_->epochs_done();
  c.acc = evaluate(trainer_->model(), test_).accuracy;
  c.params = param_count(trainer_->model());
  c.macs = mac_count(trainer_->model());
  return c;
}

double LenetTrialRunner::train_macs() const { return trainer_ ? trainer_->mac_meter() : 0.0; }

Model LenetTrialRunner::snapshot() const { return trainer_->model(); }

std::string to_string(HpoOutcome o) {
  switch (o) {
    case HpoOutcome::found: return "found";
    case HpoOutcome::params_only: return "params_only";
    case HpoOutcome::not_found: return "not_found";
  }
  return "?";
}

HpoResult tune_lambda(const Constraints& c, TrialRunner& runner, std::size_t eval_every,
                      std::uint64_t seed) {
  const auto problems = c.violations();
  if (!problems.empty()) throw ContractError("invalid constraints: " + problems.front());
  if (eval_every < 1) throw ContractError("eval_every must be >= 1");

  HpoResult res;
  std::optional<Model> last_within_params;
  double last_lambda = 0.0;
  double lambda = c.large_value;
  for (std::size_t trial = 0; lambda > c.small_value; ++trial) {
    runner.start(lambda, seed ^ trial);
    TrialRecord rec;
    rec.trial = trial;
    rec.lambda = lambda;
    rec.verdict = "continue";
    bool satisfied = false;
    for (std::size_t t = 0; t < runner.epochs(); ++t) {
      runner.train_one_epoch();
      rec.epochs_run = t + 1;
      if (t % eval_every != 0) continue;
      const TrialCheck chk = runner.measure();
      rec.best_acc = std::max(rec.best_acc, chk.acc);
      rec.params = chk.params;
      rec.macs = chk.macs;
      if (chk.acc >= c.min_acc && chk.params <= c.max_params) {
        satisfied = true;
        rec.verdict = "satisfied";
        break;
      }
      if (chk.params < c.few_params) {
        rec.verdict = "too_sparse";
        break;
      }
    }
    rec.train_macs = runner.train_macs();
    res.total_train_macs += rec.train_macs;
    if (satisfied) {
      res.log.push_back(rec);
      res.outcome = HpoOutcome::found;
      res.model = runner.snapshot();
      res.lambda = lambda;
      return res;
    }
    const TrialCheck end = runner.measure();
    rec.params = end.params;
    rec.macs = end.macs;
    rec.best_acc = std::max(rec.best_acc, end.acc);
    if (end.params > c.max_params) {
      rec.verdict = "over_params";
      res.log.push_back(rec);
      break;
    }
    res.log.push_back(rec);
    last_within_params = runner.snapshot();
    last_lambda = lambda;
    lambda /= 2.0;
  }
  if (last_within_params) {
    res.outcome = HpoOutcome::params_only;
    res.model = std::move(last_within_params);
    res.lambda = last_lambda;
  }
  return res;
}

std::string trial_log_csv(const std::vector<TrialRecord>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "trial,lambda,epochs_run,best_acc,params,macs,verdict,train_macs\n";
  for (const auto& r : log) {
    os << r.trial << ',' << r.lambda << ',' << r.epochs_run << ',' << r.best_acc << ','
       << r.params << ',' << r.macs << ',' << r.verdict << ',' << r.train_macs << '\n';
  }
  return os.str();
}

}  // namespace lodrank
