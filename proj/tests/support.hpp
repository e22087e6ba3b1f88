#pragma once

// Hand-rolled generators shared by the unit and acceptance tests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include "graphuil/graph.hpp"
#include "graphuil/params.hpp"
#include "graphuil/rng.hpp"

namespace graphuil::testing {

inline Graph random_graph(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x67ULL}));
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (uniform01(rng) < p) edges.push_back({u, v});
    }
  }
  return Graph::from_edges(n, edges);
}

/// Random graph with a spanning path, so no node is isolated.
inline Graph random_connected_graph(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x63ULL}));
  std::vector<Edge> edges;
  for (NodeId u = 0; u + 1 < n; ++u) edges.push_back({u, u + 1});
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 2; v < n; ++v) {
      if (uniform01(rng) < p) edges.push_back({u, v});
    }
  }
  return Graph::from_edges(n, edges);
}

inline Graph path_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u + 1 < n; ++u) edges.push_back({u, u + 1});
  return Graph::from_edges(n, edges);
}

inline Graph complete_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) edges.push_back({u, v});
  }
  return Graph::from_edges(n, edges);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  Rng rng(derive_seed(seed, {0x6dULL}));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * standard_normal(rng);
  return m;
}

inline std::vector<NodeId> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  Rng rng(derive_seed(seed, {0x70ULL}));
  shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto stamp = derive_seed(static_cast<std::uint64_t>(::getpid()), {++counter});
    path_ = std::filesystem::temp_directory_path() / ("graphuil-" + tag + "-" + std::to_string(stamp % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace graphuil::testing
