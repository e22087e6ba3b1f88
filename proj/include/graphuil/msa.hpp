#pragma once

// Multi-stage aggregation encoder: a global spectral aggregator and a local
// attention aggregator per layer, stacked, with the layer outputs joined by a
// learned projection (jumping-knowledge style long skip connection).

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "graphuil/autodiff.hpp"
#include "graphuil/graph.hpp"

namespace graphuil {

enum class Aggregators { both, gta_only, lta_only };
enum class SkipMode { concat, sum };

struct EncoderConfig {
  std::size_t input_dim{64};
  std::size_t hidden_dim{128};
  std::size_t attention_dim{128};  // F; the attention vector has 2F entries
  std::size_t layers{3};
  /// Attention support includes the node itself.
  bool attention_self{true};
  Aggregators aggregators{Aggregators::both};
  SkipMode skip{SkipMode::concat};

  void validate() const;
};

std::string to_string(Aggregators a);
Aggregators parse_aggregators(const std::string& s);
std::string to_string(SkipMode s);
SkipMode parse_skip_mode(const std::string& s);

/// Per-graph operators, computed once and shared by every forward pass.
/// Must outlive any tape that uses it.
struct GraphContext {
  const Graph* graph{nullptr};
  SparseSymMatrix propagation;
  SparsePattern support;

  GraphContext(const Graph& g, bool attention_self);
};

// Block names inside an encoder ParamSet.
std::string layer_block(std::size_t layer, std::string_view what);  // "layer<i>.<what>"
inline constexpr std::string_view kSkipBlock = "skip";

/// Glorot-uniform weights; blocks of a disabled aggregator path are zero.
ParamSet init_encoder(const EncoderConfig& cfg, std::uint64_t seed);

/// Blocks that must not train under cfg.aggregators (the disabled path).
std::vector<std::string> disabled_blocks(const EncoderConfig& cfg);

/// P·X·W_GTA, no activation.
Var gta_agg(const GraphContext& ctx, Var x, Var w_gta);

/// Attention coefficients on ctx.support as an nnz×1 edge tensor: for edge
/// (i, j), softmax_j relu(g_src·(W′ᵀx_i) + g_dst·(W′ᵀx_j)) with g = [g_src; g_dst].
Var attention_weights(const GraphContext& ctx, Var x, Var w_att, Var g_att);

/// A′·X·W_LTA, no activation.
Var lta_agg(const GraphContext& ctx, Var attention, Var x, Var w_lta);

struct LayerVars {
  Var w_gta;
  Var w_lta;
  Var w_att;
  Var g_att;
};

/// relu(gta_agg + lta_agg); a disabled path contributes nothing.
Var msa_layer(const GraphContext& ctx, Var x, const LayerVars& w, Aggregators aggregators);

/// Runs every layer and the skip projection. Blocks are looked up as
/// prefix + block name.
Var encode(const GraphContext& ctx, Var x0, const BoundParams& params, const EncoderConfig& cfg,
           std::string_view prefix = "");

/// Value-only encode.
Matrix encode(const GraphContext& ctx, const Matrix& x0, const ParamSet& params, const EncoderConfig& cfg);

/// Dense N×N attention matrix for inspection.
Matrix attention_matrix(const GraphContext& ctx, const Matrix& x, const Matrix& w_att, const Matrix& g_att);

}  // namespace graphuil
