// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Factorized layers W = U V^T, model assembly and footprint accounting.
//
// Orientation: a layer maps row vectors x (length m_eff) to x W + bias with
// W = U V^T, U of shape m_eff x r and V of shape n x r. For convolutions W is
// the unrolled (c k^2) x n kernel and x a patch row from im2col_nhwc.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lodrank/autodiff.hpp"
#include "lodrank/ops.hpp"
#include "lodrank/rng.hpp"
#include "lodrank/tensor.hpp"

namespace lodrank {

enum class LayerKind : std::uint8_t { linear = 0, conv = 1 };

using RankProfile = std::vector<std::size_t>;

std::string format_profile(const RankProfile& profile, char sep = ';');
/// Inverse of format_profile. Throws ContractError on malformed input.
RankProfile parse_profile(const std::string& text, char sep = ';');

struct FactorizedLayer {
  LayerKind kind = LayerKind::linear;
  /// false: `u` holds the dense m_eff x n weight and `v` is empty.
  bool factorized = true;
  Tensor u;
  Tensor v;
  Tensor bias;  ///< length n, or empty when absent
  std::size_t r_max = 0;
  std::size_t r_active = 0;
  ConvGeometry conv;  ///< meaningful when kind == conv

  std::size_t in_features() const { return u.rows(); }
  std::size_t out_features() const { return factorized ? v.rows() : u.cols(); }
  /// Columns currently stored in U and V (>= r_active).
  std::size_t stored_rank() const { return factorized ? u.cols() : 0; }
  /// Output positions per sample: out_h * out_w for conv, 1 for linear.
  std::size_t positions() const;
  bool has_bias() const { return !bias.empty(); }

  /// U_{:b} V_{:b}^T, or the dense weight.
  Tensor weight(std::size_t b) const;
  Tensor weight() const { return weight(r_active); }
};

/// Builds a factorized layer from a dense weight via spectral_init.
FactorizedLayer make_factorized(const Tensor& w, Tensor bias, LayerKind kind = LayerKind::linear,
                                const ConvGeometry& conv = {});
FactorizedLayer make_dense(Tensor w, Tensor bias, LayerKind kind = LayerKind::linear,
                           const ConvGeometry& conv = {});

/// U = U~ sqrt(S), V = V~ sqrt(S) from svd(w) = U~ S V~^T.
struct FactorPair {
  Tensor u;
  Tensor v;
};
FactorPair spectral_init(const Tensor& w);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weight (fan_in x fan_out) and bias.
std::pair<Tensor, Tensor> kaiming_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out);

/// Applies the layer to x truncated at rank b. Linear: x is N x m_eff.
/// Conv: x is {N, H, W, C} and the result {N, out_h, out_w, n}.
Tensor forward_truncated(const FactorizedLayer& layer, const Tensor& x, std::size_t b);
Tensor forward(const FactorizedLayer& layer, const Tensor& x);

/// Serve factorized iff r (m_eff + n) < m_eff n.
bool decide_decomposition(std::size_t m_eff, std::size_t n, std::size_t r);

enum class StageKind : std::uint8_t { layer = 0, relu = 1, maxpool = 2, flatten = 3 };

struct Stage {
  StageKind kind = StageKind::layer;
  std::size_t layer = 0;  ///< index into Model::layers when kind == layer
  PoolGeometry pool;
};

struct Model {
  std::vector<FactorizedLayer> layers;
  std::vector<Stage> stages;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t in_channels = 0;
  std::size_t classes = 0;

  RankProfile profile() const;
  /// Number of ranks that can be sampled (sum of active ranks of factorized layers).
  std::size_t total_rank() const;
};

/// conv(1->6, k5) relu pool2 conv(6->16, k5) relu pool2 fc 256-120-84-10, on
/// 28x28x1 input. All five weight layers start factorized at full rank.
Model make_lenet(Rng& init, bool factorized = true);

/// Optional truncation of one layer during the forward pass.
struct Truncation {
  std::size_t layer = 0;
  std::size_t rank = 0;
};

/// Inference forward; input {N, H, W, C} (or N x features for a model without
/// conv stages). Returns N x classes logits.
Tensor model_forward(const Model& model, const Tensor& input,
                     std::optional<Truncation> truncation = std::nullopt);

/// Runs stages [first, last) on x. When `layer_inputs` is non-null, slot i
/// receives the input seen by layer i for every layer stage in the range.
Tensor model_forward_range(const Model& model, Tensor x, std::size_t first, std::size_t last,
                           std::optional<Truncation> truncation = std::nullopt,
                           std::vector<Tensor>* layer_inputs = nullptr);

/// Index of the stage that applies layer `layer`.
std::size_t stage_of_layer(const Model& model, std::size_t layer);

/// Parameter leaves of one layer in a graph.
struct LayerNodes {
  NodeId u;
  NodeId v;
  NodeId bias;
  bool has_bias = false;
};

struct GraphForward {
  NodeId logits;
  std::vector<LayerNodes> params;
};

/// Records the forward pass on `graph`, registering every layer's factors
/// (full stored width) and bias as parameters.
GraphForward model_forward_graph(Graph& graph, const Model& model, const Tensor& input,
                                 std::optional<Truncation> truncation = std::nullopt);

/// Served footprint under the decompose-or-not rule.
std::size_t param_count(const Model& model, const RankProfile& profile);
std::size_t param_count(const Model& model);
/// Multiplies per sample in the served forward pass.
std::size_t mac_count(const Model& model, const RankProfile& profile);
std::size_t mac_count(const Model& model);

/// Multiplies per sample when every factorized layer runs as U, V at the given
/// ranks regardless of the serving rule (the executed training form).
std::size_t executed_mac_count(const Model& model, const RankProfile& profile);
std::size_t stored_param_count(const Model& model);

/// Cuts stored columns of every factorized layer to its active rank.
void compact(Model& model);

/// Truncates each layer to the given rank (no retraining). Throws
/// ContractError if an entry exceeds the layer's active rank.
Model apply_rank_profile(const Model& model, const RankProfile& profile);

void save_checkpoint(const Model& model, std::ostream& out);
Model load_checkpoint(std::istream& in);
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace lodrank
