#include "graphuil/msa.hpp"

#include <cmath>
#include <stdexcept>

#include "graphuil/error.hpp"
#include "graphuil/rng.hpp"

namespace graphuil {

void EncoderConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || attention_dim == 0 || layers == 0) {
    throw std::invalid_argument("encoder dimensions and layer count must be positive");
  }
}

std::string to_string(Aggregators a) {
  switch (a) {
    case Aggregators::both: return "both";
    case Aggregators::gta_only: return "gta_only";
    case Aggregators::lta_only: return "lta_only";
  }
  return "?";
}

Aggregators parse_aggregators(const std::string& s) {
  if (s == "both") return Aggregators::both;
  if (s == "gta_only") return Aggregators::gta_only;
  if (s == "lta_only") return Aggregators::lta_only;
  throw std::invalid_argument("unknown aggregator set: " + s);
}

std::string to_string(SkipMode s) { return s == SkipMode::concat ? "concat" : "sum"; }

SkipMode parse_skip_mode(const std::string& s) {
  if (s == "concat") return SkipMode::concat;
  if (s == "sum") return SkipMode::sum;
  throw std::invalid_argument("unknown skip mode: " + s);
}

GraphContext::GraphContext(const Graph& g, bool attention_self)
    : graph(&g), propagation(propagation_matrix(g)), support(SparsePattern::from_graph(g, attention_self)) {}

std::string layer_block(std::size_t layer, std::string_view what) {
  return "layer" + std::to_string(layer) + "." + std::string(what);
}

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = limit * (2.0 * uniform01(rng) - 1.0);
  return m;
}

}  // namespace

ParamSet init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed, {0x656e63ULL});
  ParamSet p;
  std::size_t in = cfg.input_dim;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    p.add(layer_block(l, "w_gta"), glorot(in, cfg.hidden_dim, rng));
    p.add(layer_block(l, "w_lta"), glorot(in, cfg.hidden_dim, rng));
    p.add(layer_block(l, "w_att"), glorot(in, cfg.attention_dim, rng));
    p.add(layer_block(l, "g_att"), glorot(2 * cfg.attention_dim, 1, rng));
    in = cfg.hidden_dim;
  }
  const std::size_t skip_in = cfg.skip == SkipMode::concat ? cfg.layers * cfg.hidden_dim : cfg.hidden_dim;
  p.add(std::string(kSkipBlock), glorot(skip_in, cfg.hidden_dim, rng));
  for (const auto& name : disabled_blocks(cfg)) p.at(name).setZero();
  return p;
}

std::vector<std::string> disabled_blocks(const EncoderConfig& cfg) {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    if (cfg.aggregators == Aggregators::gta_only) {
      out.push_back(layer_block(l, "w_lta"));
      out.push_back(layer_block(l, "w_att"));
      out.push_back(layer_block(l, "g_att"));
    } else if (cfg.aggregators == Aggregators::lta_only) {
      out.push_back(layer_block(l, "w_gta"));
    }
  }
  return out;
}

Var gta_agg(const GraphContext& ctx, Var x, Var w_gta) { return ad::spmm(ctx.propagation, ad::matmul(x, w_gta)); }

Var attention_weights(const GraphContext& ctx, Var x, Var w_att, Var g_att) {
  Tape& t = *x.tape;
  const auto f = static_cast<std::size_t>(t.value(w_att).cols());
  if (t.value(g_att).rows() != static_cast<Eigen::Index>(2 * f) || t.value(g_att).cols() != 1) {
    throw DimensionError("attention vector must be 2F x 1");
  }
  const Var h = ad::matmul(x, w_att);
  const Var src = ad::matmul(h, ad::slice_rows(g_att, 0, f));
  const Var dst = ad::matmul(h, ad::slice_rows(g_att, f, f));
  const Var logits = ad::relu(ad::edge_sum(ctx.support, src, dst));
  return ad::segment_softmax(ctx.support, logits);
}

Var lta_agg(const GraphContext& ctx, Var attention, Var x, Var w_lta) {
  return ad::pattern_spmm(ctx.support, attention, ad::matmul(x, w_lta));
}

Var msa_layer(const GraphContext& ctx, Var x, const LayerVars& w, Aggregators aggregators) {
  switch (aggregators) {
    case Aggregators::gta_only: return ad::relu(gta_agg(ctx, x, w.w_gta));
    case Aggregators::lta_only:
      return ad::relu(lta_agg(ctx, attention_weights(ctx, x, w.w_att, w.g_att), x, w.w_lta));
    case Aggregators::both: break;
  }
  const Var global = gta_agg(ctx, x, w.w_gta);
  const Var local = lta_agg(ctx, attention_weights(ctx, x, w.w_att, w.g_att), x, w.w_lta);
  return ad::relu(ad::add(global, local));
}

Var encode(const GraphContext& ctx, Var x0, const BoundParams& params, const EncoderConfig& cfg,
           std::string_view prefix) {
  Tape& t = *x0.tape;
  if (t.value(x0).cols() != static_cast<Eigen::Index>(cfg.input_dim) ||
      t.value(x0).rows() != static_cast<Eigen::Index>(ctx.graph->num_nodes())) {
    throw DimensionError("encode: input features must be N x " + std::to_string(cfg.input_dim));
  }
  auto block = [&](std::size_t l, std::string_view what) {
    return params[std::string(prefix) + layer_block(l, what)];
  };
  std::vector<Var> outputs;
  Var x = x0;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const LayerVars w{block(l, "w_gta"), block(l, "w_lta"), block(l, "w_att"), block(l, "g_att")};
    x = msa_layer(ctx, x, w, cfg.aggregators);
    outputs.push_back(x);
  }
  Var joined = outputs.front();
  if (cfg.skip == SkipMode::concat) {
    joined = ad::concat_cols(outputs);
  } else {
    for (std::size_t l = 1; l < outputs.size(); ++l) joined = ad::add(joined, outputs[l]);
  }
  return ad::matmul(joined, params[std::string(prefix) + std::string(kSkipBlock)]);
}

Matrix encode(const GraphContext& ctx, const Matrix& x0, const ParamSet& params, const EncoderConfig& cfg) {
  Tape tape;
  BoundParams bound(tape, params, {}, false);
  return tape.value(encode(ctx, tape.constant(x0), bound, cfg));
}

Matrix attention_matrix(const GraphContext& ctx, const Matrix& x, const Matrix& w_att, const Matrix& g_att) {
  Tape tape;
  const Var a = attention_weights(ctx, tape.constant(x), tape.constant(w_att), tape.constant(g_att));
  const Matrix& values = tape.value(a);
  const auto n = static_cast<Eigen::Index>(ctx.support.n);
  Matrix dense = Matrix::Zero(n, n);
  for (std::size_t e = 0; e < ctx.support.nnz(); ++e) {
    dense(ctx.support.rows[e], ctx.support.cols[e]) = values(static_cast<Eigen::Index>(e), 0);
  }
  return dense;
}

}  // namespace graphuil
