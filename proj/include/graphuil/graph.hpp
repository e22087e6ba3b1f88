#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace graphuil {

using NodeId = std::uint32_t;

struct Edge {
  NodeId u{0};
  NodeId v{0};

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable undirected simple graph in CSR form.
///
/// Node ids are dense in [0, n). Neighbor lists are sorted, so edge
/// membership is a binary search. Optional string labels keep the
/// external ids seen at load time.
class Graph {
 public:
  Graph() = default;

  /// Builds a graph from an edge list. Duplicate and reversed edges
  /// collapse; self-loops and out-of-range ids throw std::invalid_argument.
  static Graph from_edges(std::size_t n, std::span<const Edge> edges,
                          std::vector<std::string> labels = {});

  std::size_t num_nodes() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const noexcept { return neighbors_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v], neighbors_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(NodeId u, NodeId v) const;

  /// Edges with u < v, sorted lexicographically.
  std::vector<Edge> edges() const;

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  bool has_labels() const noexcept { return !labels_.empty(); }
  /// External id of v; the decimal id when the graph carries no labels.
  std::string label(NodeId v) const;
  /// Reverse lookup of external ids. Built on demand.
  std::unordered_map<std::string, NodeId> label_index() const;

  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
  const std::vector<NodeId>& adjacency() const noexcept { return neighbors_; }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> neighbors_;
  std::vector<std::string> labels_;
};

/// Symmetric sparse matrix in CSR form with sorted column indices.
struct SparseSymMatrix {
  std::size_t n{0};
  std::vector<std::size_t> row_ptr;
  std::vector<NodeId> cols;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return cols.size(); }
  /// Entry (i, j), zero when off-pattern.
  double at(NodeId i, NodeId j) const;
};

struct GraphStats {
  std::size_t nodes{0};
  std::size_t edges{0};
  double avg_degree{0.0};
  double sparsity{0.0};
  /// Set when n < 2 and sparsity is undefined (reported as 0).
  bool sparsity_undefined{false};
};

struct EdgeListLoad {
  Graph graph;
  std::size_t self_loops_dropped{0};
};

/// Reads a whitespace-separated edge list. Tokens are external ids, relabeled
/// densely in first-occurrence order. `#` lines and blank lines are ignored.
/// A single-token line declares an isolated node.
EdgeListLoad load_edge_list(const std::filesystem::path& path);
EdgeListLoad parse_edge_list(const std::string& text);

/// Writes isolated-node declarations followed by one `u v` line per edge,
/// using the graph's labels.
void save_edge_list(const Graph& g, const std::filesystem::path& path);
std::string format_edge_list(const Graph& g);

/// Single pass: drops every node whose degree in g is below min_degree.
/// Survivors keep their relative order and labels.
Graph prune_low_degree(const Graph& g, std::size_t min_degree);

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
SparseSymMatrix propagation_matrix(const Graph& g);

GraphStats graph_stats(const Graph& g);
std::string stats_json(const GraphStats& s);

/// Subgraph induced by `nodes`; node nodes[k] becomes k.
Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes);

/// Relabels so that old node v becomes perm[v].
Graph permute(const Graph& g, std::span<const NodeId> perm);

}  // namespace graphuil
