#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "graphuil/graph.hpp"
#include "graphuil/params.hpp"

namespace graphuil {

enum class FeatureMethod { walk_skipgram, spectral, random, file };

FeatureMethod parse_feature_method(const std::string& name);
std::string to_string(FeatureMethod m);

/// Uniform random walks (p = q = 1) fed to skip-gram with negative sampling.
struct WalkParams {
  std::size_t walks_per_node{10};
  std::size_t walk_length{40};
  std::size_t window{5};
  std::size_t negatives{5};
  std::size_t epochs{2};
  double learning_rate{0.025};
};

struct FeatureInitSpec {
  FeatureMethod method{FeatureMethod::walk_skipgram};
  std::size_t dim{64};
  WalkParams walk;
  std::uint64_t seed{0};
  std::filesystem::path file;
  /// Feature file rows start with the node's external id.
  bool file_has_ids{false};

  void validate() const;
};

/// N×dim initial features; a pure function of (g, spec).
Matrix init_features(const Graph& g, const FeatureInitSpec& spec);

/// Gaussian entries with standard deviation 1/sqrt(dim).
Matrix random_features(std::size_t n, std::size_t dim, std::uint64_t seed);

/// Leading eigenvectors (largest eigenvalue first) of the propagation matrix,
/// by block power iteration with Rayleigh-Ritz deflation. Column signs make
/// each column's largest-magnitude entry positive. Requires dim < n.
/// Throws ConvergenceError when the residual stays above tol.
Matrix spectral_features(const Graph& g, std::size_t dim, double tol = 1e-8, std::size_t max_iter = 1000);

/// walks_per_node rounds; round r visits every node as a start in id order.
/// Each walk draws from its own seed derived from (seed, round, start).
std::vector<std::vector<NodeId>> uniform_walks(const Graph& g, std::size_t walks_per_node, std::size_t walk_length,
                                               std::uint64_t seed);

Matrix walk_skipgram_features(const Graph& g, std::size_t dim, const WalkParams& walk, std::uint64_t seed);

/// Feature file: header `N dim`, then N rows of dim values, each optionally
/// preceded by the node's external id.
Matrix load_feature_file(const std::filesystem::path& path, const Graph& g, std::size_t dim, bool has_ids);
void save_feature_file(const std::filesystem::path& path, const Matrix& x, const Graph* ids = nullptr);

}  // namespace graphuil
