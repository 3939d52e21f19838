// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "lodrank/io.hpp"
#include "lodrank/linalg.hpp"

namespace lodrank {

std::string format_profile(const RankProfile& profile, char sep) {
  std::string out;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(profile[i]);
  }
  return out;
}

RankProfile parse_profile(const std::string& text, char sep) {
  RankProfile out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(sep, start);
    const std::string item = text.substr(start, end == std::string::npos ? end : end - start);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ContractError("malformed rank profile '" + text + "'");
    }
    out.push_back(std::stoull(item));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

std::size_t FactorizedLayer::positions() const {
  return kind == LayerKind::conv ? conv.out_height() * conv.out_width() : 1;
}

Tensor FactorizedLayer::weight(std::size_t b) const {
  if (!factorized) return u;
  return matmul_nt(leading_columns(u, b), leading_columns(v, b));
}

FactorPair spectral_init(const Tensor& w) {
  SvdResult d = svd(w);
  const std::size_t p = d.sigma.size();
  for (std::size_t k = 0; k < p; ++k) {
    const double s = std::sqrt(d.sigma[k]);
    for (std::size_t r = 0; r < d.u.rows(); ++r) d.u(r, k) *= s;
    for (std::size_t r = 0; r < d.v.rows(); ++r) d.v(r, k) *= s;
  }
  return FactorPair{std::move(d.u), std::move(d.v)};
}

std::pair<Tensor, Tensor> kaiming_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor w = sample_uniform(rng, {fan_in, fan_out}, -bound, bound);
  Tensor b = sample_uniform(rng, {fan_out}, -bound, bound);
  return {std::move(w), std::move(b)};
}

FactorizedLayer make_factorized(const Tensor& w, Tensor bias, LayerKind kind,
                                const ConvGeometry& conv) {
  FactorizedLayer layer;
  layer.kind = kind;
  layer.conv = conv;
  FactorPair f = spectral_init(w);
  layer.u = std::move(f.u);
  layer.v = std::move(f.v);
  layer.bias = std::move(bias);
  layer.r_max = layer.r_active = layer.u.cols();
  return layer;
}

FactorizedLayer make_dense(Tensor w, Tensor bias, LayerKind kind, const ConvGeometry& conv) {
  FactorizedLayer layer;
  layer.kind = kind;
  layer.conv = conv;
  layer.factorized = false;
  layer.r_max = layer.r_active = std::min(w.rows(), w.cols());
  layer.u = std::move(w);
  layer.bias = std::move(bias);
  return layer;
}

namespace {

void check_rank(const FactorizedLayer& layer, std::size_t b) {
  if (b > layer.r_active) {
    throw ContractError("rank " + std::to_string(b) + " exceeds active rank " +
                        std::to_string(layer.r_active));
  }
}

Tensor apply_matrix(const FactorizedLayer& layer, const Tensor& rows, std::size_t b) {
  Tensor y;
  if (!layer.factorized) {
    y = matmul(rows, layer.u);
  } else if (b == 0) {
    y = Tensor({rows.rows(), layer.out_features()});
  } else {
    const Tensor ub = b == layer.u.cols() ? layer.u : leading_columns(layer.u, b);
    const Tensor vb = b == layer.v.cols() ? layer.v : leading_columns(layer.v, b);
    y = matmul_nt(matmul(rows, ub), vb);
  }
  if (layer.has_bias()) y = add_row_vector(y, layer.bias);
  return y;
}

}  // namespace

Tensor forward_truncated(const FactorizedLayer& layer, const Tensor& x, std::size_t b) {
  check_rank(layer, b);
  if (layer.kind == LayerKind::linear) return apply_matrix(layer, x, b);
  const std::size_t n = x.dim(0);
  Tensor y = apply_matrix(layer, im2col_nhwc(x, layer.conv), b);
  y.reshape({n, layer.conv.out_height(), layer.conv.out_width(), layer.out_features()});
  return y;
}

Tensor forward(const FactorizedLayer& layer, const Tensor& x) {
  return forward_truncated(layer, x, layer.r_active);
}

bool decide_decomposition(std::size_t m_eff, std::size_t n, std::size_t r) {
  return r * (m_eff + n) < m_eff * n;
}

RankProfile Model::profile() const {
  RankProfile p;
  for (const auto& l : layers) p.push_back(l.r_active);
  return p;
}

std::size_t Model::total_rank() const {
  std::size_t t = 0;
  for (const auto& l : layers)
    if (l.factorized) t += l.r_active;
  return t;
}

Model make_lenet(Rng& init, bool factorized) {
  Model m;
  m.in_height = 28;
  m.in_width = 28;
  m.in_channels = 1;
  m.classes = 10;

  auto add_layer = [&](std::size_t fan_in, std::size_t fan_out, LayerKind kind,
                       const ConvGeometry& g) {
    auto [w, b] = kaiming_uniform(init, fan_in, fan_out);
    m.layers.push_back(factorized ? make_factorized(w, std::move(b), kind, g)
                                  : make_dense(std::move(w), std::move(b), kind, g));
    m.stages.push_back(Stage{StageKind::layer, m.layers.size() - 1, {}});
  };
  auto relu = [&] { m.stages.push_back(Stage{StageKind::relu, 0, {}}); };
  auto pool = [&] { m.stages.push_back(Stage{StageKind::maxpool, 0, PoolGeometry{2, 2}}); };

  const ConvGeometry c1{1, 28, 28, 5, 1, 0};
  const ConvGeometry c2{6, 12, 12, 5, 1, 0};
  add_layer(c1.patch_size(), 6, LayerKind::conv, c1);
  relu();
  pool();
  add_layer(c2.patch_size(), 16, LayerKind::conv, c2);
  relu();
  pool();
  m.stages.push_back(Stage{StageKind::flatten, 0, {}});
  add_layer(256, 120, LayerKind::linear, {});
  relu();
  add_layer(120, 84, LayerKind::linear, {});
  relu();
  add_layer(84, 10, LayerKind::linear, {});
  return m;
}

Tensor model_forward_range(const Model& model, Tensor x, std::size_t first, std::size_t last,
                           std::optional<Truncation> trunc, std::vector<Tensor>* layer_inputs) {
  if (layer_inputs) layer_inputs->resize(model.layers.size());
  for (std::size_t i = first; i < last; ++i) {
    const Stage& s = model.stages.at(i);
    switch (s.kind) {
      case StageKind::layer: {
        const FactorizedLayer& l = model.layers.at(s.layer);
        const std::size_t b = trunc && trunc->layer == s.layer ? trunc->rank : l.r_active;
        if (layer_inputs) (*layer_inputs)[s.layer] = x;
        x = forward_truncated(l, x, b);
        break;
      }
      case StageKind::relu:
        x = relu(x);
        break;
      case StageKind::maxpool:
        x = maxpool_nhwc(x, s.pool, nullptr);
        break;
      case StageKind::flatten: {
        const std::size_t n = x.dim(0);
        x.reshape({n, x.size() / n});
        break;
      }
    }
  }
  return x;
}

Tensor model_forward(const Model& model, const Tensor& input, std::optional<Truncation> trunc) {
  return model_forward_range(model, input, 0, model.stages.size(), trunc);
}

std::size_t stage_of_layer(const Model& model, std::size_t layer) {
  for (std::size_t i = 0; i < model.stages.size(); ++i)
    if (model.stages[i].kind == StageKind::layer && model.stages[i].layer == layer) return i;
  throw ContractError("layer " + std::to_string(layer) + " has no stage");
}

GraphForward model_forward_graph(Graph& g, const Model& model, const Tensor& input,
                                 std::optional<Truncation> trunc) {
  GraphForward out;
  for (const FactorizedLayer& l : model.layers) {
    LayerNodes nodes;
    nodes.u = g.parameter(l.u);
    nodes.v = l.factorized ? g.parameter(l.v) : nodes.u;
    nodes.has_bias = l.has_bias();
    if (nodes.has_bias) nodes.bias = g.parameter(l.bias);
    out.params.push_back(nodes);
  }

  NodeId x = g.constant(input);
  for (const Stage& s : model.stages) {
    switch (s.kind) {
      case StageKind::layer: {
        const FactorizedLayer& l = model.layers.at(s.layer);
        const LayerNodes& p = out.params[s.layer];
        const std::size_t b = trunc && trunc->layer == s.layer ? trunc->rank : l.r_active;
        check_rank(l, b);
        const std::size_t batch = g.value(x).dim(0);
        NodeId rows = l.kind == LayerKind::conv ? g.im2col(x, l.conv) : x;
        NodeId y;
        if (!l.factorized) {
          y = g.matmul(rows, p.u);
        } else if (b == 0) {
          y = g.constant(Tensor({g.value(rows).rows(), l.out_features()}));
        } else {
          NodeId ub = b == l.u.cols() ? p.u : g.leading_columns(p.u, b);
          NodeId vb = b == l.v.cols() ? p.v : g.leading_columns(p.v, b);
          y = g.matmul_nt(g.matmul(rows, ub), vb);
        }
        if (p.has_bias) y = g.add_bias(y, p.bias);
        if (l.kind == LayerKind::conv) {
          y = g.reshape(y, {batch, l.conv.out_height(), l.conv.out_width(), l.out_features()});
        }
        x = y;
        break;
      }
      case StageKind::relu:
        x = g.relu(x);
        break;
      case StageKind::maxpool:
        x = g.maxpool(x, s.pool);
        break;
      case StageKind::flatten: {
        const std::size_t n = g.value(x).dim(0);
        x = g.reshape(x, {n, g.value(x).size() / n});
        break;
      }
    }
  }
  out.logits = x;
  return out;
}

namespace {

void check_profile(const Model& model, const RankProfile& profile) {
  if (profile.size() != model.layers.size()) {
    throw ContractError("rank profile has " + std::to_string(profile.size()) +
                        " entries for " + std::to_string(model.layers.size()) + " layers");
  }
}

std::size_t layer_macs(const FactorizedLayer& l, std::size_t r, bool use_rule) {
  const std::size_t m = l.in_features(), n = l.out_features();
  const bool fact = l.factorized && (!use_rule || decide_decomposition(m, n, r));
  return l.positions() * (fact ? r * (m + n) : m * n);
}

}  // namespace

std::size_t param_count(const Model& model, const RankProfile& profile) {
  check_profile(model, profile);
  std::size_t total = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const FactorizedLayer& l = model.layers[i];
    const std::size_t m = l.in_features(), n = l.out_features();
    const bool fact = l.factorized && decide_decomposition(m, n, profile[i]);
    total += (fact ? profile[i] * (m + n) : m * n) + l.bias.size();
  }
  return total;
}

std::size_t param_count(const Model& model) { return param_count(model, model.profile()); }

std::size_t mac_count(const Model& model, const RankProfile& profile) {
  check_profile(model, profile);
  std::size_t total = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    total += layer_macs(model.layers[i], profile[i], true);
  return total;
}

std::size_t mac_count(const Model& model) { return mac_count(model, model.profile()); }

std::size_t executed_mac_count(const Model& model, const RankProfile& profile) {
  check_profile(model, profile);
  std::size_t total = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    total += layer_macs(model.layers[i], profile[i], false);
  return total;
}

std::size_t stored_param_count(const Model& model) {
  std::size_t total = 0;
  for (const auto& l : model.layers) total += l.u.size() + l.v.size() + l.bias.size();
  return total;
}

void compact(Model& model) {
  for (auto& l : model.layers) {
    if (!l.factorized || l.u.cols() == l.r_active) continue;
    l.u = leading_columns(l.u, l.r_active);
    l.v = leading_columns(l.v, l.r_active);
  }
}

Model apply_rank_profile(const Model& model, const RankProfile& profile) {
  check_profile(model, profile);
  Model out = model;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    FactorizedLayer& l = out.layers[i];
    if (profile[i] > l.r_active) {
      throw ContractError("profile entry " + std::to_string(profile[i]) + " for layer " +
                          std::to_string(i) + " exceeds active rank " +
                          std::to_string(l.r_active));
    }
    if (!l.factorized) {
      if (profile[i] != l.r_active) {
        throw ContractError("layer " + std::to_string(i) + " is dense and cannot be truncated");
      }
      continue;
    }
    l.r_active = profile[i];
  }
  compact(out);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint container. Layout is documented in docs/checkpoint-format.md.

namespace {

constexpr char kMagic[6] = {'M', 'S', 'T', 'R', 'O', '1'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void tensor(const Tensor& t) {
    for (double x : t.data()) f64(x);
  }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  Tensor tensor(Shape shape) {
    Tensor t(std::move(shape));
    for (double& x : t.data()) x = f64();
    return t;
  }

 private:
  std::uint64_t le(int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) throw FormatError("checkpoint truncated");
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }
  std::istream& in_;
};

}  // namespace

void save_checkpoint(const Model& model, std::ostream& out) {
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const FactorizedLayer& l : model.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u8(l.factorized ? 1 : 0);
    w.u8(l.has_bias() ? 1 : 0);
    w.u8(0);
    w.u64(l.in_features());
    w.u64(l.out_features());
    w.u64(l.r_max);
    w.u64(l.r_active);
    w.u64(l.stored_rank());
    const ConvGeometry& g = l.conv;
    const bool conv = l.kind == LayerKind::conv;
    for (std::size_t v : {g.in_channels, g.in_height, g.in_width, g.kernel, g.stride, g.pad})
      w.u64(conv ? v : 0);
    w.tensor(l.u);
    if (l.factorized) w.tensor(l.v);
    if (l.has_bias()) w.tensor(l.bias);
  }
  w.u32(static_cast<std::uint32_t>(model.stages.size()));
  for (const Stage& s : model.stages) {
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.u64(s.layer);
    w.u64(s.pool.window);
    w.u64(s.pool.stride);
  }
  w.u64(model.in_height);
  w.u64(model.in_width);
  w.u64(model.in_channels);
  w.u64(model.classes);
  if (!out) throw IoError("checkpoint write failed");
}

Model load_checkpoint(std::istream& in) {
  char magic[6];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  Reader r(in);
  Model m;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    FactorizedLayer l;
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw FormatError("checkpoint: unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.factorized = r.u8() != 0;
    const bool has_bias = r.u8() != 0;
    (void)r.u8();
    const std::size_t rows = r.u64(), cols = r.u64();
    l.r_max = r.u64();
    l.r_active = r.u64();
    const std::size_t stored = r.u64();
    ConvGeometry& g = l.conv;
    g.in_channels = r.u64();
    g.in_height = r.u64();
    g.in_width = r.u64();
    g.kernel = r.u64();
    g.stride = r.u64();
    g.pad = r.u64();
    if (l.kind == LayerKind::linear) g = ConvGeometry{};
    if (l.factorized && (l.r_active > stored || stored > l.r_max)) {
      throw FormatError("checkpoint: inconsistent ranks in layer " + std::to_string(i));
    }
    if (l.factorized) {
      l.u = r.tensor({rows, stored});
      l.v = r.tensor({cols, stored});
    } else {
      l.u = r.tensor({rows, cols});
    }
    if (has_bias) l.bias = r.tensor({cols});
    m.layers.push_back(std::move(l));
  }
  const std::uint32_t stages = r.u32();
  for (std::uint32_t i = 0; i < stages; ++i) {
    Stage s;
    const std::uint8_t kind = r.u8();
    if (kind > 3) throw FormatError("checkpoint: unknown stage kind " + std::to_string(kind));
    s.kind = static_cast<StageKind>(kind);
    s.layer = r.u64();
    s.pool.window = r.u64();
    s.pool.stride = r.u64();
    if (s.kind == StageKind::layer && s.layer >= m.layers.size()) {
      throw FormatError("checkpoint: stage references missing layer");
    }
    m.stages.push_back(s);
  }
  m.in_height = r.u64();
  m.in_width = r.u64();
  m.in_channels = r.u64();
  m.classes = r.u64();
  return m;
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ostringstream buf(std::ios::binary);
  save_checkpoint(model, buf);
  write_file_atomic(path, buf.str());
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

}  // namespace lodrank
