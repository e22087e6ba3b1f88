#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "graphuil/graph.hpp"

namespace graphuil {

enum class Split { train, val, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

/// Ground-truth identity pair: node in the first network, node in the second.
struct AnchorPair {
  NodeId sn1{0};
  NodeId sn2{0};

  friend bool operator==(const AnchorPair&, const AnchorPair&) = default;
  friend auto operator<=>(const AnchorPair&, const AnchorPair&) = default;
};

struct AnchorLinkSet {
  std::vector<AnchorPair> pairs;
  std::vector<Split> splits;  // parallel to pairs

  std::size_t size() const noexcept { return pairs.size(); }
  std::vector<AnchorPair> in_split(Split s) const;
  std::size_t count(Split s) const;

  /// Throws std::invalid_argument when pairs repeat a node on either side,
  /// reference nodes outside the graphs, or the split tags are missing.
  void validate(std::size_t n1, std::size_t n2) const;
};

/// anchors.tsv: a `#` header line, then `id1<TAB>id2<TAB>split` rows using
/// the graphs' external ids.
void save_anchors(const AnchorLinkSet& anchors, const Graph& g1, const Graph& g2, const std::filesystem::path& path);
AnchorLinkSet load_anchors(const std::filesystem::path& path, const Graph& g1, const Graph& g2);

}  // namespace graphuil
