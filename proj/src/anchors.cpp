#include "graphuil/anchors.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "graphuil/error.hpp"

namespace graphuil {

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + s);
}

std::vector<AnchorPair> AnchorLinkSet::in_split(Split s) const {
  std::vector<AnchorPair> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (splits[i] == s) out.push_back(pairs[i]);
  }
  return out;
}

std::size_t AnchorLinkSet::count(Split s) const {
  std::size_t c = 0;
  for (auto t : splits) c += t == s ? 1 : 0;
  return c;
}

void AnchorLinkSet::validate(std::size_t n1, std::size_t n2) const {
  if (splits.size() != pairs.size()) throw std::invalid_argument("anchor split tags missing");
  std::vector<bool> used1(n1, false);
  std::vector<bool> used2(n2, false);
  for (const auto& p : pairs) {
    if (p.sn1 >= n1 || p.sn2 >= n2) throw std::invalid_argument("anchor references a node outside the graph");
    if (used1[p.sn1] || used2[p.sn2]) throw std::invalid_argument("anchor node appears in more than one pair");
    used1[p.sn1] = used2[p.sn2] = true;
  }
}

void save_anchors(const AnchorLinkSet& anchors, const Graph& g1, const Graph& g2, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# id1\tid2\tsplit\n";
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    out << g1.label(anchors.pairs[i].sn1) << '\t' << g2.label(anchors.pairs[i].sn2) << '\t'
        << to_string(anchors.splits[i]) << '\n';
  }
}

AnchorLinkSet load_anchors(const std::filesystem::path& path, const Graph& g1, const Graph& g2) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto idx1 = g1.label_index();
  const auto idx2 = g2.label_index();
  AnchorLinkSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string a, b, s;
    if (!(fields >> a >> b >> s)) throw ParseError("anchor rows need id1, id2 and split", lineno);
    auto i1 = idx1.find(a);
    auto i2 = idx2.find(b);
    if (i1 == idx1.end() || i2 == idx2.end()) throw ParseError("anchor references unknown node", lineno);
    out.pairs.push_back({i1->second, i2->second});
    out.splits.push_back(parse_split(s));
  }
  out.validate(g1.num_nodes(), g2.num_nodes());
  return out;
}

}  // namespace graphuil
