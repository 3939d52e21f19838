// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lodrank/hpo.hpp"
#include "lodrank/io.hpp"
#include "lodrank/plot.hpp"

namespace lodrank {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- CSV

bool CsvTable::has(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw FormatError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<std::string> CsvTable::numbered(const std::string& prefix) const {
  std::vector<std::pair<unsigned long, std::string>> found;
  for (const auto& h : header) {
    if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) continue;
    unsigned long n = 0;
    const char* b = h.data() + prefix.size();
    const auto r = std::from_chars(b, h.data() + h.size(), n);
    if (r.ec == std::errc() && r.ptr == h.data() + h.size() && n > 0 && *b != '0')
      found.emplace_back(n, h);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

const std::string& CsvTable::cell(std::size_t row, const std::string& name) const {
  return rows.at(row).at(column(name));
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& s = cell(row, name);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError("column '" + name + "' row " + std::to_string(row + 1) +
                      ": not a number: '" + s + "'");
  }
  return v;
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto c = line.find(',', start);
    out.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
    if (c == std::string::npos) return out;
    start = c + 1;
  }
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_commas(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw FormatError("line " + std::to_string(lineno) + ": " + std::to_string(fields.size()) +
                        " fields, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) throw FormatError("CSV has no header row");
  return t;
}

CsvTable read_csv(const std::string& path) {
  try {
    return parse_csv(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,task_loss,penalty,total_rank,ranks,test_acc\n";
  for (const auto& h : history) {
    out += std::to_string(h.epoch) + ',' + format_number(h.task_loss) + ',' +
           format_number(h.penalty) + ',' + std::to_string(h.total_rank) + ',' +
           format_profile(h.ranks) + ',' + format_number(h.test_acc) + '\n';
  }
  return out;
}

std::string ranks_csv(const Model& model) {
  std::string out = "layer,rank,max_rank,factorized\n";
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    out += std::to_string(i) + ',' + std::to_string(l.r_active) + ',' + std::to_string(l.r_max) +
           ',' + (l.factorized ? "1" : "0") + '\n';
  }
  return out;
}

namespace {

std::string trajectory_csv(const LinearRun& run, const std::string& prefix,
                           const std::vector<double> SigmaCheckpoint::*field) {
  const std::size_t width = run.trajectory.empty() ? run.u.cols() : (run.trajectory[0].*field).size();
  std::string out = "iteration";
  for (std::size_t k = 1; k <= width; ++k) out += ',' + prefix + std::to_string(k);
  out += '\n';
  for (const auto& cp : run.trajectory) {
    out += std::to_string(cp.iteration);
    for (double v : cp.*field) out += ',' + format_number(v);
    out += '\n';
  }
  return out;
}

}  // namespace

std::string sigma_csv(const LinearRun& run) {
  return trajectory_csv(run, "s", &SigmaCheckpoint::sigma_hat);
}

std::string distance_csv(const LinearRun& run) {
  return trajectory_csv(run, "k", &SigmaCheckpoint::distance);
}

std::string loss_csv(const LinearRun& run) {
  std::string out = "iteration,loss\n";
  for (const auto& cp : run.trajectory)
    out += std::to_string(cp.iteration) + ',' + format_number(cp.loss) + '\n';
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "run,lambda_gl,final_acc,params,macs,rel_train_macs\n";
  for (const auto& r : rows) {
    out += r.run + ',' + format_number(r.lambda_gl) + ',' + format_number(r.final_acc) + ',' +
           std::to_string(r.params) + ',' + std::to_string(r.macs) + ',' +
           format_number(r.rel_train_macs) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------- runs

namespace {

Dataset first_n(Dataset d, std::size_t limit) {
  if (limit == 0 || limit >= d.size()) return d;
  std::vector<std::size_t> rows(limit);
  std::iota(rows.begin(), rows.end(), 0);
  return d.subset(rows);
}

json profile_json(const RankProfile& p) { return json(std::vector<std::size_t>(p.begin(), p.end())); }

// NaN has no JSON form; it is written as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class RunDir {
 public:
  RunDir(const ExperimentConfig& c, std::ostream* log) : dir_(c.out_dir), log_(log) {
    fs::create_directories(dir_);
    write("config.ini", format_config(c));
  }
  void write(const std::string& name, const std::string& contents) const {
    write_file_atomic(path(name), contents);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::ostream* log() const { return log_; }

 private:
  fs::path dir_;
  std::ostream* log_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json run_train(const ExperimentConfig& c, const RunDir& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset train = load_train_split(c);
  const Dataset test = load_test_split(c);
  Rng init = Rng(c.seed).derive("init");
  Trainer trainer(make_lenet(init, c.factorized), c.train);

  std::vector<EpochStats> history;
  for (std::size_t e = 1; e <= c.train.epochs; ++e) {
    history.push_back(trainer.train_epoch(train, &test));
    const EpochStats& h = history.back();
    if (out.log()) {
      *out.log() << "epoch " << h.epoch << '/' << c.train.epochs << " loss "
                 << format_number(h.task_loss) << " ranks " << format_profile(h.ranks) << " acc "
                 << format_number(h.test_acc) << " (" << h.seconds << " s)" << std::endl;
    }
    out.write("history.csv", history_csv(history));
    if (c.checkpoint_every && e % c.checkpoint_every == 0 && e != c.train.epochs) {
      save_checkpoint(trainer.model(), out.path("epoch-" + std::to_string(e) + ".ckpt"));
    }
  }
  const Model& m = trainer.model();
  save_checkpoint(m, out.path("model.ckpt"));
  out.write("ranks.csv", ranks_csv(m));

  json r;
  r["final_acc"] = history.empty() ? json(nullptr) : num(history.back().test_acc);
  r["params"] = param_count(m);
  r["macs"] = mac_count(m);
  r["rank_profile"] = profile_json(m.profile());
  r["rel_train_macs"] = num(trainer.mac_meter() / trainer.dense_mac_meter());
  r["rel_train_params"] = num(trainer.rel_train_params());
  r["train_macs"] = trainer.mac_meter();
  r["history"] = "history.csv";
  r["checkpoint"] = "model.ckpt";
  r["seconds"] = seconds_since(t0);
  return r;
}

void write_trajectory(const RunDir& out, const LinearRun& run) {
  out.write("sigma.csv", sigma_csv(run));
  out.write("distance.csv", distance_csv(run));
  out.write("loss.csv", loss_csv(run));
}

json run_theory(const ExperimentConfig& c, const RunDir& out) {
  json r;
  r["preset"] = c.preset;
  if (c.preset == "fig2a") {
    const SvdRecoveryReport rep = svd_recovery_experiment(c.seed);
    write_trajectory(out, rep.run);
    r["target_norm"] = rep.target_norm;
    r["final_distance"] = rep.final_distance;
    std::vector<double> rel;
    for (double d : rep.final_distance) rel.push_back(d / rep.target_norm);
    r["relative_distance"] = rel;
    r["final_sigma"] = rep.run.final_checkpoint().sigma_hat;
  } else if (c.preset == "fig2b") {
    const PcaRecoveryReport rep = pca_recovery_experiment(c.seed);
    write_trajectory(out, rep.run);
    r["final_sigma"] = rep.final_sigma;
    r["span_angle_deg"] = rep.span_angle_deg;
  } else if (c.preset == "fig7") {
    const OrderingReport rep = reversed_importance_experiment(c.seed);
    write_trajectory(out, rep.run);
    out.write("control_sigma.csv", sigma_csv(rep.control));
    r["oracle_order"] = rep.oracle_order;
    r["learned_order"] = rep.learned_order;
    r["learned_cos"] = rep.learned_cos;
    r["control_order"] = rep.control_order;
    r["control_cos"] = rep.control_cos;
    r["final_sigma"] = rep.run.final_checkpoint().sigma_hat;
  } else {
    const DimensionDropReport rep = dimension_drop_experiment(c.seed);
    write_trajectory(out, rep.run);
    r["midpoint_sigma"] = rep.midpoint_sigma;
    r["final_sigma"] = rep.final_sigma;
    r["second_half_top2_dev"] = rep.second_half_top2_dev;
  }
  r["sigma"] = "sigma.csv";
  r["distance"] = "distance.csv";
  return r;
}

json run_prune(const ExperimentConfig& c, const RunDir& out) {
  Model m = load_checkpoint(c.checkpoint);
  if (c.baseline == "svd") m = svd_compress_baseline(m);
  const Dataset train = load_train_split(c);
  const Dataset test = load_test_split(c);
  const Dataset eval = make_eval_batch(train, c.eval_batch, c.seed);
  PruneTarget target;
  target.max_macs = c.max_macs;
  target.max_params = c.max_params;
  target.min_acc = c.min_acc;
  const PruneTrace trace = greedy_prune(m, eval, target, c.step_frac, &test);
  out.write("trace.csv", prune_trace_csv(trace));
  save_checkpoint(trace.final_model, out.path("pruned.ckpt"));
  if (out.log()) {
    *out.log() << trace.points.size() << " trace points, target "
               << (trace.target_met ? "met" : "not met") << std::endl;
  }

  json r;
  r["baseline"] = c.baseline;
  r["target_met"] = trace.target_met;
  r["exhausted"] = trace.exhausted;
  r["points"] = trace.points.size();
  r["start_acc"] = num(trace.points.front().test_acc);
  r["final_acc"] = num(evaluate(trace.final_model, test).accuracy);
  r["params"] = param_count(trace.final_model);
  r["macs"] = mac_count(trace.final_model);
  r["rank_profile"] = profile_json(trace.final_model.profile());
  r["trace"] = "trace.csv";
  r["checkpoint"] = "pruned.ckpt";
  return r;
}

json run_hpo(const ExperimentConfig& c, const RunDir& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset train = load_train_split(c);
  const Dataset test = load_test_split(c);
  Constraints cons = c.constraints;
  if (cons.few_params == 0) {
    Rng init(0);
    cons.few_params = param_count(make_lenet(init, false)) / 100;
  }
  LenetTrialRunner runner(train, test, c.train);
  const HpoResult res = tune_lambda(cons, runner, c.hpo_eval_every, c.seed);
  out.write("trials.csv", trial_log_csv(res.log));

  json r;
  r["outcome"] = to_string(res.outcome);
  r["lambda_gl"] = res.lambda;
  r["trials"] = res.log.size();
  r["total_train_macs"] = res.total_train_macs;
  r["trial_log"] = "trials.csv";
  if (res.model) {
    save_checkpoint(*res.model, out.path("model.ckpt"));
    r["final_acc"] = num(evaluate(*res.model, test).accuracy);
    r["params"] = param_count(*res.model);
    r["macs"] = mac_count(*res.model);
    r["rank_profile"] = profile_json(res.model->profile());
    r["checkpoint"] = "model.ckpt";
  }
  r["seconds"] = seconds_since(t0);
  return r;
}

// CSV files a run may contain and the plot each one feeds.
const std::vector<std::pair<std::string, PlotKind>>& known_plots() {
  static const std::vector<std::pair<std::string, PlotKind>> table = {
      {"history.csv", PlotKind::loss},   {"ranks.csv", PlotKind::ranks},
      {"sigma.csv", PlotKind::sigma},    {"distance.csv", PlotKind::distance},
      {"loss.csv", PlotKind::loss},      {"trace.csv", PlotKind::prune},
      {"sweep.csv", PlotKind::sweep},
  };
  return table;
}

json run_report(const ExperimentConfig& c, const RunDir& out) {
  const fs::path dir(c.run_dir);
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + c.run_dir);
  json r;
  r["run_dir"] = c.run_dir;

  if (fs::exists(dir / "report.json")) {
    const json source = json::parse(read_file((dir / "report.json").string()));
    r["source"] = source;
    std::vector<std::string> plots;
    for (const auto& [name, kind] : known_plots()) {
      if (!fs::exists(dir / name)) continue;
      const std::string svg_name = fs::path(name).stem().string() + ".svg";
      out.write(svg_name, emit_svg_plot({(dir / name).string()}, kind));
      plots.push_back(svg_name);
      if (name == "history.csv") {
        out.write("total_rank.svg", emit_svg_plot({(dir / name).string()}, PlotKind::total_rank));
        plots.push_back("total_rank.svg");
      }
    }
    r["plots"] = plots;
    return r;
  }

  // A directory of runs: one sweep row per train run.
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "report.json")) subdirs.push_back(e.path());
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<SweepRow> rows;
  for (const auto& d : subdirs) {
    const json rep = json::parse(read_file((d / "report.json").string()));
    if (rep.value("kind", "") != "train") continue;
    const ExperimentConfig rc = parse_config(rep.at("config").get<std::string>());
    SweepRow row;
    row.run = d.filename().string();
    row.lambda_gl = rc.train.lambda_gl;
    row.final_acc = rep.at("final_acc").is_number() ? rep.at("final_acc").get<double>() : NAN;
    row.params = rep.at("params").get<std::size_t>();
    row.macs = rep.at("macs").get<std::size_t>();
    row.rel_train_macs =
        rep.at("rel_train_macs").is_number() ? rep.at("rel_train_macs").get<double>() : NAN;
    rows.push_back(row);
  }
  out.write("sweep.csv", sweep_csv(rows));
  out.write("sweep.svg", emit_svg_plot({out.path("sweep.csv")}, PlotKind::sweep));
  r["runs"] = rows.size();
  r["sweep"] = "sweep.csv";
  return r;
}

}  // namespace

Dataset load_train_split(const ExperimentConfig& c) {
  return first_n(load_mnist_split(c.mnist_dir, true), c.train_limit);
}

Dataset load_test_split(const ExperimentConfig& c) {
  return first_n(load_mnist_split(c.mnist_dir, false), c.test_limit);
}

json run_experiment(ExperimentConfig c, std::ostream* log) {
  c.train.seed = c.seed;  // one top-level seed; the trainer derives its stream from it
  const RunDir out(c, log);
  json body;
  switch (c.kind) {
    case RunKind::train: body = run_train(c, out); break;
    case RunKind::theory: body = run_theory(c, out); break;
    case RunKind::prune: body = run_prune(c, out); break;
    case RunKind::hpo: body = run_hpo(c, out); break;
    case RunKind::report: body = run_report(c, out); break;
  }
  json report;
  report["kind"] = to_string(c.kind);
  report["config"] = format_config(c);
  report.update(body);
  out.write("report.json", report.dump(2) + "\n");
  return report;
}

json run_config_file(const std::string& path, std::ostream* log) {
  return run_experiment(load_config(path), log);
}

}  // namespace lodrank
