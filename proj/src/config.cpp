// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "lodrank/io.hpp"

namespace lodrank {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Parsers return an error message, empty on success.
std::string parse_double(const std::string& s, double& out) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return "expected a number, got '" + s + "'";
  return "";
}

template <typename T>
std::string parse_uint(const std::string& s, T& out) {
  unsigned long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    return "expected a non-negative integer, got '" + s + "'";
  }
  out = static_cast<T>(v);
  return "";
}

std::string parse_bool(const std::string& s, bool& out) {
  if (s == "true") out = true;
  else if (s == "false") out = false;
  else return "expected true or false, got '" + s + "'";
  return "";
}

RunKind parse_kind(const std::string& s) {
  for (RunKind k : {RunKind::train, RunKind::theory, RunKind::prune, RunKind::hpo, RunKind::report})
    if (to_string(k) == s) return k;
  throw ContractError("unknown kind '" + s + "'");
}

struct Entry {
  ConfigKey doc;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<std::string(ExperimentConfig&, const std::string&)> set;
};

template <typename F>
std::string guarded(F&& f) {
  try {
    f();
    return "";
  } catch (const ContractError& e) {
    return e.what();
  }
}

#define STR_KEY(sec, name, field, mod, text)                                                    \
  Entry{{sec, name, "string", mod, text}, [](const ExperimentConfig& c) { return c.field; },  \
        [](ExperimentConfig& c, const std::string& v) {                                      \
          c.field = v;                                                                         \
          return std::string();                                                                \
        }}
#define DBL_KEY(sec, name, field, mod, text)                                                    \
  Entry{{sec, name, "real", mod, text},                                                         \
        [](const ExperimentConfig& c) { return fmt_double(c.field); },                          \
        [](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.field); }}
#define UINT_KEY(sec, name, field, mod, text)                                                   \
  Entry{{sec, name, "integer", mod, text},                                                      \
        [](const ExperimentConfig& c) { return std::to_string(c.field); },                      \
        [](ExperimentConfig& c, const std::string& v) { return parse_uint(v, c.field); }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{{"run", "kind", "train|theory|prune|hpo|report", "experiment-cli", "what to run"},
            [](const ExperimentConfig& c) { return to_string(c.kind); },
            [](ExperimentConfig& c, const std::string& v) {
              return guarded([&] { c.kind = parse_kind(v); });
            }},
      STR_KEY("run", "out_dir", out_dir, "experiment-cli", "directory for reports and checkpoints"),
      UINT_KEY("run", "seed", seed, "experiment-cli",
               "top-level seed; init, train and eval-batch streams derive from it"),
      STR_KEY("data", "mnist_dir", mnist_dir, "experiment-cli", "directory with the four IDX files"),
      UINT_KEY("data", "train_limit", train_limit, "experiment-cli",
               "use only the first N training images (0 = all)"),
      UINT_KEY("data", "test_limit", test_limit, "experiment-cli",
               "use only the first N test images (0 = all)"),
      Entry{{"model", "factorized", "bool", "factorized-model",
             "train U V^T factors (true) or plain dense weights (false)"},
            [](const ExperimentConfig& c) { return std::string(c.factorized ? "true" : "false"); },
            [](ExperimentConfig& c, const std::string& v) { return parse_bool(v, c.factorized); }},
      DBL_KEY("train", "lambda_gl", train.lambda_gl, "lod-trainer", "group lasso weight"),
      DBL_KEY("train", "epsilon_ps", train.epsilon_ps, "lod-trainer",
              "rank shrink threshold on tail norm products"),
      UINT_KEY("train", "epochs", train.epochs, "lod-trainer", "training epochs"),
      DBL_KEY("train", "lr", train.lr, "lod-trainer", "SGD step size"),
      DBL_KEY("train", "momentum", train.momentum, "lod-trainer", "SGD momentum"),
      DBL_KEY("train", "weight_decay", train.weight_decay, "lod-trainer", "L2 weight decay"),
      UINT_KEY("train", "batch_size", train.batch_size, "lod-trainer", "mini-batch size"),
      Entry{{"train", "variant", "standard|no_hgl|no_ps|extra_full_pass", "lod-trainer",
             "ablation switch"},
            [](const ExperimentConfig& c) { return to_string(c.train.variant); },
            [](ExperimentConfig& c, const std::string& v) {
              return guarded([&] { c.train.variant = parse_variant(v); });
            }},
      UINT_KEY("train", "eval_every", train.eval_every, "lod-trainer",
               "evaluate test accuracy every N epochs (and at the end)"),
      Entry{{"train", "hgl_mode", "proximal|subgradient", "lod-trainer",
             "how the group lasso enters the update"},
            [](const ExperimentConfig& c) { return to_string(c.train.hgl_mode); },
            [](ExperimentConfig& c, const std::string& v) {
              return guarded([&] { c.train.hgl_mode = parse_hgl_mode(v); });
            }},
      UINT_KEY("train", "checkpoint_every", checkpoint_every, "experiment-cli",
               "write an extra checkpoint every N epochs (0 = final only)"),
      STR_KEY("theory", "preset", preset, "theory-lab", "fig2a | fig2b | fig7 | fig8"),
      STR_KEY("prune", "checkpoint", checkpoint, "deploy-pruner", "model to prune"),
      STR_KEY("prune", "baseline", baseline, "deploy-pruner",
              "none, or svd to factorize a dense checkpoint first"),
      DBL_KEY("prune", "step_frac", step_frac, "deploy-pruner",
              "fraction of a layer's rank removed per greedy move"),
      UINT_KEY("prune", "eval_batch", eval_batch, "deploy-pruner",
               "training images in the fixed evaluation batch"),
      Entry{{"prune", "max_macs", "integer (optional)", "deploy-pruner", "stop at this many MACs"},
            [](const ExperimentConfig& c) {
              return c.max_macs ? std::to_string(*c.max_macs) : std::string();
            },
            [](ExperimentConfig& c, const std::string& v) {
              if (v.empty()) return (c.max_macs.reset(), std::string());
              std::size_t x = 0;
              auto err = parse_uint(v, x);
              if (err.empty()) c.max_macs = x;
              return err;
            }},
      Entry{{"prune", "max_params", "integer (optional)", "deploy-pruner",
             "stop at this many parameters"},
            [](const ExperimentConfig& c) {
              return c.max_params ? std::to_string(*c.max_params) : std::string();
            },
            [](ExperimentConfig& c, const std::string& v) {
              if (v.empty()) return (c.max_params.reset(), std::string());
              std::size_t x = 0;
              auto err = parse_uint(v, x);
              if (err.empty()) c.max_params = x;
              return err;
            }},
      Entry{{"prune", "min_acc", "real (optional)", "deploy-pruner",
             "never take a move that drops test accuracy below this"},
            [](const ExperimentConfig& c) {
              return c.min_acc ? fmt_double(*c.min_acc) : std::string();
            },
            [](ExperimentConfig& c, const std::string& v) {
              if (v.empty()) return (c.min_acc.reset(), std::string());
              double x = 0;
              auto err = parse_double(v, x);
              if (err.empty()) c.min_acc = x;
              return err;
            }},
      DBL_KEY("hpo", "min_acc", constraints.min_acc, "hpo-driver", "required test accuracy"),
      UINT_KEY("hpo", "max_params", constraints.max_params, "hpo-driver",
               "largest acceptable served parameter count"),
      UINT_KEY("hpo", "few_params", constraints.few_params, "hpo-driver",
               "abandon a trial below this many parameters (0 = 1% of dense)"),
      DBL_KEY("hpo", "large_value", constraints.large_value, "hpo-driver", "first lambda tried"),
      DBL_KEY("hpo", "small_value", constraints.small_value, "hpo-driver",
              "search stops once lambda is not above this"),
      UINT_KEY("hpo", "eval_every", hpo_eval_every, "hpo-driver",
               "check constraints after epochs 1, 1 + N, ..."),
      STR_KEY("report", "run_dir", run_dir, "experiment-cli",
              "run directory, or a directory of run directories"),
  };
  return table;
}

#undef STR_KEY
#undef DBL_KEY
#undef UINT_KEY

std::vector<std::string> semantic_problems(const ExperimentConfig& c) {
  std::vector<std::string> out;
  for (const auto& p : c.train.violations()) out.push_back("train." + p);
  if (c.kind == RunKind::theory && c.preset != "fig2a" && c.preset != "fig2b" &&
      c.preset != "fig7" && c.preset != "fig8") {
    out.push_back("theory.preset must be one of fig2a, fig2b, fig7, fig8");
  }
  if (c.kind == RunKind::prune) {
    if (c.checkpoint.empty()) out.push_back("prune.checkpoint is required");
    if (c.baseline != "none" && c.baseline != "svd") out.push_back("prune.baseline must be none or svd");
    if (!(c.step_frac > 0.0 && c.step_frac <= 1.0)) out.push_back("prune.step_frac must be in (0, 1]");
    if (c.eval_batch < 1) out.push_back("prune.eval_batch must be >= 1");
  }
  if (c.kind == RunKind::hpo) {
    Constraints probe = c.constraints;
    if (probe.few_params == 0) probe.few_params = 444;  // 1% of dense LeNet
    for (const auto& p : probe.violations()) out.push_back("hpo." + p);
    if (c.hpo_eval_every < 1) out.push_back("hpo.eval_every must be >= 1");
  }
  if (c.kind == RunKind::report && c.run_dir.empty()) out.push_back("report.run_dir is required");
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

std::string to_string(RunKind k) {
  switch (k) {
    case RunKind::train: return "train";
    case RunKind::theory: return "theory";
    case RunKind::prune: return "prune";
    case RunKind::hpo: return "hpo";
    case RunKind::report: return "report";
  }
  return "?";
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.doc);
    return out;
  }();
  return keys;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::vector<std::string> problems;
  std::map<std::string, const Entry*> by_name;
  for (const auto& e : entries()) by_name[e.doc.section + "." + e.doc.key] = &e;

  std::istringstream in(text);
  std::string line, section;
  std::map<std::string, std::size_t> seen;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        problems.push_back(where + "unterminated section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    const auto it = by_name.find(full);
    if (it == by_name.end()) {
      problems.push_back(where + "unknown key '" + full + "'");
      continue;
    }
    if (seen.count(full)) {
      problems.push_back(where + "duplicate key '" + full + "' (first on line " +
                         std::to_string(seen[full]) + ")");
      continue;
    }
    seen[full] = lineno;
    const std::string err = it->second->set(c, value);
    if (!err.empty()) problems.push_back(where + full + ": " + err);
  }
  if (problems.empty()) problems = semantic_problems(c);
  if (!problems.empty()) throw ConfigError(problems);
  c.train.seed = c.seed;
  return c;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream os;
  std::string section;
  for (const auto& e : entries()) {
    if (e.doc.section != section) {
      if (!section.empty()) os << '\n';
      section = e.doc.section;
      os << '[' << section << "]\n";
    }
    os << e.doc.key << " = " << e.get(c) << '\n';
  }
  return os.str();
}

std::string config_reference() {
  const ExperimentConfig defaults;
  std::ostringstream os;
  os << "| key | type | default | module | meaning |\n|---|---|---|---|---|\n";
  for (const auto& e : entries()) {
    const std::string def = e.get(defaults);
    os << "| `" << e.doc.section << '.' << e.doc.key << "` | " << e.doc.type << " | "
       << (def.empty() ? "(unset)" : "`" + def + "`") << " | " << e.doc.module << " | "
       << e.doc.doc << " |\n";
  }
  return os.str();
}

}  // namespace lodrank
