#include "graphuil/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "graphuil/error.hpp"

namespace graphuil {

Graph Graph::from_edges(std::size_t n, std::span<const Edge> edges, std::vector<std::string> labels) {
  if (!labels.empty() && labels.size() != n) {
    throw std::invalid_argument("label count does not match node count");
  }
  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) throw std::invalid_argument("edge endpoint out of range");
    if (e.u == e.v) throw std::invalid_argument("self-loop in edge list");
    directed.push_back({e.u, e.v});
    directed.push_back({e.v, e.u});
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  Graph g;
  g.offsets_.assign(n + 1, 0);
  g.neighbors_.reserve(directed.size());
  for (const auto& e : directed) {
    ++g.offsets_[e.u + 1];
    g.neighbors_.push_back(e.v);
  }
  for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] += g.offsets_[i];
  g.labels_ = std::move(labels);
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes(); ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.push_back({u, v});
    }
  }
  return out;
}

std::string Graph::label(NodeId v) const {
  return labels_.empty() ? std::to_string(v) : labels_[v];
}

std::unordered_map<std::string, NodeId> Graph::label_index() const {
  std::unordered_map<std::string, NodeId> index;
  index.reserve(num_nodes());
  for (NodeId v = 0; v < num_nodes(); ++v) index.emplace(label(v), v);
  return index;
}

double SparseSymMatrix::at(NodeId i, NodeId j) const {
  auto first = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
  auto last = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
  auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - cols.begin())];
}

EdgeListLoad parse_edge_list(const std::string& text) {
  std::unordered_map<std::string, NodeId> ids;
  std::vector<std::string> labels;
  std::vector<Edge> edges;
  std::size_t self_loops = 0;

  auto intern = [&](const std::string& tok) {
    auto [it, inserted] = ids.try_emplace(tok, static_cast<NodeId>(labels.size()));
    if (inserted) labels.push_back(tok);
    return it->second;
  };

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.empty() || tokens.front().front() == '#') continue;
    if (tokens.size() == 1) {
      intern(tokens[0]);
      continue;
    }
    if (tokens.size() != 2) throw ParseError("expected two node tokens per edge line", lineno);
    const NodeId a = intern(tokens[0]);
    const NodeId b = intern(tokens[1]);
    if (a == b) {
      ++self_loops;
      continue;
    }
    edges.push_back({a, b});
  }
  const std::size_t n = labels.size();
  return {Graph::from_edges(n, edges, std::move(labels)), self_loops};
}

EdgeListLoad load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open edge list: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_edge_list(buf.str());
}

std::string format_edge_list(const Graph& g) {
  std::string out;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (g.degree(v) == 0) out += g.label(v) + "\n";
  }
  for (const auto& e : g.edges()) out += g.label(e.u) + " " + g.label(e.v) + "\n";
  return out;
}

void save_edge_list(const Graph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write edge list: " + path.string());
  out << format_edge_list(g);
}

Graph prune_low_degree(const Graph& g, std::size_t min_degree) {
  std::vector<NodeId> keep;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (g.degree(v) >= min_degree) keep.push_back(v);
  }
  return induced_subgraph(g, keep);
}

Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  constexpr NodeId kAbsent = static_cast<NodeId>(-1);
  std::vector<NodeId> remap(g.num_nodes(), kAbsent);
  for (std::size_t k = 0; k < nodes.size(); ++k) remap[nodes[k]] = static_cast<NodeId>(k);

  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    if (remap[e.u] != kAbsent && remap[e.v] != kAbsent) edges.push_back({remap[e.u], remap[e.v]});
  }
  std::vector<std::string> labels;
  if (g.has_labels()) {
    labels.reserve(nodes.size());
    for (NodeId v : nodes) labels.push_back(g.labels()[v]);
  }
  return Graph::from_edges(nodes.size(), edges, std::move(labels));
}

Graph permute(const Graph& g, std::span<const NodeId> perm) {
  if (perm.size() != g.num_nodes()) throw std::invalid_argument("permutation size mismatch");
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) edges.push_back({perm[e.u], perm[e.v]});
  std::vector<std::string> labels;
  if (g.has_labels()) {
    labels.resize(g.num_nodes());
    for (NodeId v = 0; v < g.num_nodes(); ++v) labels[perm[v]] = g.labels()[v];
  }
  return Graph::from_edges(g.num_nodes(), edges, std::move(labels));
}

SparseSymMatrix propagation_matrix(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt_deg(n);
  for (NodeId v = 0; v < n; ++v) inv_sqrt_deg[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));

  SparseSymMatrix p;
  p.n = n;
  p.row_ptr.assign(n + 1, 0);
  p.cols.reserve(g.adjacency().size() + n);
  p.values.reserve(g.adjacency().size() + n);
  for (NodeId i = 0; i < n; ++i) {
    bool diag_done = false;
    auto push = [&](NodeId j) {
      p.cols.push_back(j);
      p.values.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    };
    for (NodeId j : g.neighbors(i)) {
      if (!diag_done && j > i) {
        push(i);
        diag_done = true;
      }
      push(j);
    }
    if (!diag_done) push(i);
    p.row_ptr[i + 1] = p.cols.size();
  }
  return p;
}

GraphStats graph_stats(const Graph& g) {
  GraphStats s;
  s.nodes = g.num_nodes();
  s.edges = g.num_edges();
  const double n = static_cast<double>(s.nodes);
  const double m = static_cast<double>(s.edges);
  s.avg_degree = s.nodes == 0 ? 0.0 : 2.0 * m / n;
  if (s.nodes < 2) {
    s.sparsity = 0.0;
    s.sparsity_undefined = true;
  } else {
    s.sparsity = 2.0 * m / (n * (n - 1.0));
  }
  return s;
}

std::string stats_json(const GraphStats& s) {
  nlohmann::ordered_json j;
  j["nodes"] = s.nodes;
  j["edges"] = s.edges;
  j["avg_degree"] = s.avg_degree;
  j["sparsity"] = s.sparsity;
  if (s.sparsity_undefined) j["sparsity_undefined"] = true;
  return j.dump();
}

}  // namespace graphuil
