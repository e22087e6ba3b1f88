#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphuil/anchors.hpp"
#include "graphuil/autodiff.hpp"
#include "graphuil/graph.hpp"

namespace graphuil {

/// Pairs entering the reconstruction loss: every edge plus sampled non-edges.
struct NegSampleMask {
  std::vector<Edge> positives;
  std::vector<Edge> negatives;
  std::uint64_t seed{0};
  /// Fewer non-edges exist than edges; all of them were taken.
  bool imbalanced{false};

  std::size_t size() const noexcept { return positives.size() + negatives.size(); }
};

/// All |E| edges plus |E| distinct non-edges drawn without replacement with
/// probability ∝ (deg_i · deg_j)^0.75. Deterministic per seed.
NegSampleMask negative_sample(const Graph& g, std::uint64_t seed);

/// sigmoid(x_i · x_j) for each pair.
std::vector<double> decode_edges(const Matrix& x, std::span<const Edge> pairs);
Var decode_edges(Var x, std::span<const Edge> pairs);

/// Σ over masked pairs of (a_ij − ŷ_ij)², each unordered pair once.
Var global_loss(Var x, const NegSampleMask& mask);
double global_loss(const Matrix& x, const NegSampleMask& mask);

/// Σ_i 1/|N(i)| Σ_{j∈N(i)} ||x_i − x_j||²; isolated nodes contribute 0.
Var local_loss(const Graph& g, Var x);
double local_loss(const Graph& g, const Matrix& x);

/// relu MLP with `hidden_layers` hidden layers and a linear output layer.
struct MapperConfig {
  std::size_t input_dim{128};
  std::size_t hidden_dim{128};
  std::size_t output_dim{128};
  std::size_t hidden_layers{2};
};

/// Blocks "w<k>" (in×out) and "b<k>" (1×out), k = 0..hidden_layers.
/// Glorot-uniform weights, zero biases.
ParamSet init_mapper(const MapperConfig& cfg, std::uint64_t seed);

/// Applies the mapper to every row of x.
Var mapper_forward(Var x, const BoundParams& params, std::string_view prefix = "");
Matrix mapper_forward(const Matrix& x, const ParamSet& params);

/// Σ over anchors of ||f(x1_i) − x2_k||².
Var match_loss(std::span<const AnchorPair> anchors, Var x1, Var x2, const BoundParams& params,
               std::string_view prefix = "");
double match_loss(std::span<const AnchorPair> anchors, const Matrix& x1, const Matrix& x2, const ParamSet& mapper);

struct LossBreakdown {
  double global_sn1{0.0};
  double global_sn2{0.0};
  double local_sn1{0.0};
  double local_sn2{0.0};
  double match{0.0};
  double total{0.0};
  double alpha{0.0};
  double beta{0.0};
};

/// total = α(global_sn1 + global_sn2) + β(local_sn1 + local_sn2) + match.
LossBreakdown total_loss(double global_sn1, double global_sn2, double local_sn1, double local_sn2, double match,
                         double alpha, double beta);

}  // namespace graphuil
