#pragma once

// Synthetic two-network benchmarks: a base graph, two overlapping noisy
// views of it, and the ground-truth identity links between the views.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "graphuil/anchors.hpp"
#include "graphuil/graph.hpp"
#include "graphuil/rng.hpp"

namespace graphuil {

inline constexpr const char* kGeneratorVersion = "1";

enum class BaseModel { barabasi_albert, watts_strogatz, sbm };
std::string to_string(BaseModel m);
/// Accepts "ba", "ws", "sbm" and the long names.
BaseModel parse_base_model(const std::string& s);

struct BenchSpec {
  BaseModel model{BaseModel::barabasi_albert};
  std::size_t n{500};
  std::size_t m{4};          // barabasi_albert: edges per new node
  std::size_t k{4};          // watts_strogatz: ring degree (even)
  double p_rewire{0.1};      // watts_strogatz
  std::size_t blocks{2};     // sbm
  double p_in{0.1};          // sbm
  double p_out{0.01};        // sbm
  double overlap{0.6};       // fraction of base nodes present in both views
  double edge_noise{0.1};    // fraction of each view's edges rewired
  double train_frac{0.6};
  double val_frac{0.1};
  double test_frac{0.3};
  std::uint64_t seed{0};

  void validate() const;
};

nlohmann::ordered_json to_json(const BenchSpec& s);
BenchSpec bench_spec_from_json(const nlohmann::json& j);

struct BenchInstance {
  Graph g1;
  Graph g2;
  AnchorLinkSet anchors;
  BenchSpec spec;
};

/// barabasi_albert starts from a clique on m+1 nodes, then each new node links
/// to m distinct existing nodes chosen ∝ degree, giving m·n − m(m+1)/2 edges.
/// watts_strogatz rewires each ring edge's far end with probability p_rewire.
/// sbm splits nodes into equal contiguous blocks.
Graph generate_base_graph(const BenchSpec& spec);

/// Moves round(noise·|E|) distinct edges onto uniform non-edges. Removed
/// edges are not eligible for reinsertion, so exactly that many edges change
/// and the edge count is kept.
Graph rewire_edges(const Graph& g, double noise, Rng& rng);

/// ⌊overlap·n⌋ shared nodes; the remaining nodes are divided between the
/// views (first view gets the smaller half). Each view is the induced
/// subgraph with round(edge_noise·|E|) edges moved to uniform non-edges, then
/// relabeled by an independent random permutation.
BenchInstance derive_views(const Graph& base, const BenchSpec& spec);

/// generate_base_graph then derive_views.
BenchInstance generate_instance(const BenchSpec& spec);

/// Writes g1.edges, g2.edges, anchors.tsv, spec.json.
void write_instance(const BenchInstance& inst, const std::filesystem::path& dir);
BenchInstance read_instance(const std::filesystem::path& dir);

}  // namespace graphuil
