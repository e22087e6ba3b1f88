#include "graphuil/benchgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "graphuil/error.hpp"
#include "graphuil/rng.hpp"

namespace graphuil {

namespace {

constexpr std::uint64_t kTagBase = 0x62617365ULL;
constexpr std::uint64_t kTagViews = 0x76696577ULL;
constexpr std::uint64_t kTagNoise = 0x6e6f6973ULL;
constexpr std::uint64_t kTagPerm = 0x7065726dULL;
constexpr std::uint64_t kTagSplit = 0x73706c74ULL;

std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

bool is_prob(double p) { return p >= 0.0 && p <= 1.0; }

Graph barabasi_albert(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<Edge> edges;
  // Every edge endpoint once; uniform draws from it are degree-proportional.
  std::vector<NodeId> ends;
  for (NodeId u = 0; u <= m; ++u) {
    for (NodeId v = u + 1; v <= m; ++v) {
      edges.push_back({u, v});
      ends.push_back(u);
      ends.push_back(v);
    }
  }
  std::vector<NodeId> chosen;
  for (auto v = static_cast<NodeId>(m + 1); v < n; ++v) {
    chosen.clear();
    while (chosen.size() < m) {
      const NodeId t = ends[uniform_index(rng, ends.size())];
      if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) chosen.push_back(t);
    }
    for (NodeId t : chosen) {
      edges.push_back({t, v});
      ends.push_back(t);
      ends.push_back(v);
    }
  }
  return Graph::from_edges(n, edges);
}

Graph watts_strogatz(std::size_t n, std::size_t k, double p, Rng& rng) {
  std::unordered_set<std::uint64_t> present;
  std::vector<Edge> ring;
  for (NodeId u = 0; u < n; ++u) {
    for (std::size_t j = 1; j <= k / 2; ++j) {
      const auto v = static_cast<NodeId>((u + j) % n);
      ring.push_back({u, v});
      present.insert(pair_key(u, v));
    }
  }
  for (auto& e : ring) {
    if (uniform01(rng) >= p) continue;
    // Skip when u is already linked to everyone.
    std::size_t deg = 0;
    for (NodeId w = 0; w < n; ++w) deg += w != e.u && present.contains(pair_key(e.u, w));
    if (deg >= n - 1) continue;
    NodeId w;
    do {
      w = static_cast<NodeId>(uniform_index(rng, n));
    } while (w == e.u || present.contains(pair_key(e.u, w)));
    present.erase(pair_key(e.u, e.v));
    present.insert(pair_key(e.u, w));
    e.v = w;
  }
  return Graph::from_edges(n, ring);
}

Graph stochastic_block(std::size_t n, std::size_t blocks, double p_in, double p_out, Rng& rng) {
  std::vector<Edge> edges;
  auto block = [&](NodeId v) { return static_cast<std::size_t>(v) * blocks / n; };
  for (NodeId u = 0; u < n; ++u) {
    for (auto v = static_cast<NodeId>(u + 1); v < n; ++v) {
      const double p = block(u) == block(v) ? p_in : p_out;
      if (uniform01(rng) < p) edges.push_back({u, v});
    }
  }
  return Graph::from_edges(n, edges);
}

}  // namespace

Graph rewire_edges(const Graph& g, double noise, Rng& rng) {
  std::vector<Edge> edges = g.edges();
  const auto k = static_cast<std::size_t>(std::llround(noise * static_cast<double>(edges.size())));
  if (k == 0) return g;
  const std::size_t n = g.num_nodes();
  const std::size_t pairs = n * (n - 1) / 2;
  if (pairs < edges.size() + k) throw std::invalid_argument("view too dense to rewire " + std::to_string(k) + " edges");
  shuffle(edges.begin(), edges.end(), rng);
  std::unordered_set<std::uint64_t> blocked;
  for (const auto& e : edges) blocked.insert(pair_key(e.u, e.v));
  edges.erase(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(k));
  std::size_t added = 0;
  while (added < k) {
    const auto u = static_cast<NodeId>(uniform_index(rng, n));
    const auto v = static_cast<NodeId>(uniform_index(rng, n));
    if (u == v || !blocked.insert(pair_key(u, v)).second) continue;
    edges.push_back({std::min(u, v), std::max(u, v)});
    ++added;
  }
  return Graph::from_edges(n, edges);
}

std::string to_string(BaseModel m) {
  switch (m) {
    case BaseModel::barabasi_albert: return "barabasi_albert";
    case BaseModel::watts_strogatz: return "watts_strogatz";
    case BaseModel::sbm: return "sbm";
  }
  return "?";
}

BaseModel parse_base_model(const std::string& s) {
  if (s == "ba" || s == "barabasi_albert") return BaseModel::barabasi_albert;
  if (s == "ws" || s == "watts_strogatz") return BaseModel::watts_strogatz;
  if (s == "sbm") return BaseModel::sbm;
  throw std::invalid_argument("unknown base model: " + s);
}

void BenchSpec::validate() const {
  if (n < 2) throw std::invalid_argument("n must be at least 2");
  switch (model) {
    case BaseModel::barabasi_albert:
      if (m < 1 || m >= n) throw std::invalid_argument("barabasi_albert needs 1 <= m < n");
      break;
    case BaseModel::watts_strogatz:
      if (k < 2 || k % 2 != 0 || k >= n) throw std::invalid_argument("watts_strogatz needs an even k with 2 <= k < n");
      if (!is_prob(p_rewire)) throw std::invalid_argument("p_rewire must lie in [0, 1]");
      break;
    case BaseModel::sbm:
      if (blocks < 1 || blocks > n) throw std::invalid_argument("sbm needs 1 <= blocks <= n");
      if (!is_prob(p_in) || !is_prob(p_out)) throw std::invalid_argument("sbm probabilities must lie in [0, 1]");
      break;
  }
  if (!(overlap > 0.0 && overlap <= 1.0)) throw std::invalid_argument("overlap must lie in (0, 1]");
  if (!(edge_noise >= 0.0 && edge_noise < 1.0)) throw std::invalid_argument("edge noise must lie in [0, 1)");
  if (train_frac < 0 || val_frac < 0 || test_frac < 0 || std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must be non-negative and sum to 1");
  }
}

nlohmann::ordered_json to_json(const BenchSpec& s) {
  nlohmann::ordered_json j;
  j["generator_version"] = kGeneratorVersion;
  j["model"] = to_string(s.model);
  j["n"] = s.n;
  j["m"] = s.m;
  j["k"] = s.k;
  j["p_rewire"] = s.p_rewire;
  j["blocks"] = s.blocks;
  j["p_in"] = s.p_in;
  j["p_out"] = s.p_out;
  j["overlap"] = s.overlap;
  j["edge_noise"] = s.edge_noise;
  j["splits"] = {s.train_frac, s.val_frac, s.test_frac};
  j["seed"] = s.seed;
  return j;
}

BenchSpec bench_spec_from_json(const nlohmann::json& j) {
  BenchSpec s;
  s.model = parse_base_model(j.at("model").get<std::string>());
  s.n = j.at("n").get<std::size_t>();
  s.m = j.at("m").get<std::size_t>();
  s.k = j.at("k").get<std::size_t>();
  s.p_rewire = j.at("p_rewire").get<double>();
  s.blocks = j.at("blocks").get<std::size_t>();
  s.p_in = j.at("p_in").get<double>();
  s.p_out = j.at("p_out").get<double>();
  s.overlap = j.at("overlap").get<double>();
  s.edge_noise = j.at("edge_noise").get<double>();
  s.train_frac = j.at("splits").at(0).get<double>();
  s.val_frac = j.at("splits").at(1).get<double>();
  s.test_frac = j.at("splits").at(2).get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

Graph generate_base_graph(const BenchSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, {kTagBase});
  switch (spec.model) {
    case BaseModel::barabasi_albert: return barabasi_albert(spec.n, spec.m, rng);
    case BaseModel::watts_strogatz: return watts_strogatz(spec.n, spec.k, spec.p_rewire, rng);
    case BaseModel::sbm: return stochastic_block(spec.n, spec.blocks, spec.p_in, spec.p_out, rng);
  }
  throw std::invalid_argument("unknown base model");
}

BenchInstance derive_views(const Graph& base, const BenchSpec& spec) {
  spec.validate();
  const std::size_t n = base.num_nodes();
  const auto shared = static_cast<std::size_t>(std::floor(spec.overlap * static_cast<double>(n)));
  if (shared < 10) throw std::invalid_argument("overlap * n must be at least 10 to split anchors");

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  Rng view_rng = make_rng(spec.seed, {kTagViews});
  shuffle(order.begin(), order.end(), view_rng);
  const std::size_t rest = n - shared;
  const std::size_t only1 = rest / 2;

  std::vector<NodeId> nodes1(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shared + only1));
  std::vector<NodeId> nodes2(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shared));
  nodes2.insert(nodes2.end(), order.begin() + static_cast<std::ptrdiff_t>(shared + only1), order.end());

  BenchInstance inst;
  inst.spec = spec;
  std::array<Graph, 2> views;
  std::array<std::vector<NodeId>, 2> perms;
  const std::vector<NodeId>* members[2] = {&nodes1, &nodes2};
  for (std::size_t v = 0; v < 2; ++v) {
    Rng noise_rng = make_rng(spec.seed, {kTagNoise, v + 1});
    const Graph noisy = rewire_edges(induced_subgraph(base, *members[v]), spec.edge_noise, noise_rng);
    perms[v].resize(noisy.num_nodes());
    std::iota(perms[v].begin(), perms[v].end(), NodeId{0});
    Rng perm_rng = make_rng(spec.seed, {kTagPerm, v + 1});
    shuffle(perms[v].begin(), perms[v].end(), perm_rng);
    views[v] = permute(noisy, perms[v]);
  }
  inst.g1 = std::move(views[0]);
  inst.g2 = std::move(views[1]);

  // Shared node k sits at position k in both member lists.
  for (std::size_t k = 0; k < shared; ++k) inst.anchors.pairs.push_back({perms[0][k], perms[1][k]});
  std::sort(inst.anchors.pairs.begin(), inst.anchors.pairs.end());

  std::vector<std::size_t> idx(shared);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng split_rng = make_rng(spec.seed, {kTagSplit});
  shuffle(idx.begin(), idx.end(), split_rng);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_frac * static_cast<double>(shared)));
  const auto n_val = std::min(shared - n_train,
                              static_cast<std::size_t>(std::llround(spec.val_frac * static_cast<double>(shared))));
  inst.anchors.splits.assign(shared, Split::test);
  for (std::size_t r = 0; r < shared; ++r) {
    if (r < n_train) inst.anchors.splits[idx[r]] = Split::train;
    else if (r < n_train + n_val) inst.anchors.splits[idx[r]] = Split::val;
  }
  return inst;
}

BenchInstance generate_instance(const BenchSpec& spec) { return derive_views(generate_base_graph(spec), spec); }

void write_instance(const BenchInstance& inst, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_edge_list(inst.g1, dir / "g1.edges");
  save_edge_list(inst.g2, dir / "g2.edges");
  save_anchors(inst.anchors, inst.g1, inst.g2, dir / "anchors.tsv");
  std::ofstream out(dir / "spec.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "spec.json").string());
  out << to_json(inst.spec).dump(2) << '\n';
}

BenchInstance read_instance(const std::filesystem::path& dir) {
  for (const char* f : {"g1.edges", "g2.edges", "anchors.tsv"}) {
    if (!std::filesystem::exists(dir / f)) throw std::runtime_error("missing instance file: " + (dir / f).string());
  }
  BenchInstance inst;
  inst.g1 = load_edge_list(dir / "g1.edges").graph;
  inst.g2 = load_edge_list(dir / "g2.edges").graph;
  inst.anchors = load_anchors(dir / "anchors.tsv", inst.g1, inst.g2);
  if (std::filesystem::exists(dir / "spec.json")) {
    std::ifstream in(dir / "spec.json");
    try {
      inst.spec = bench_spec_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("spec.json: ") + e.what());
    }
  }
  return inst;
}

}  // namespace graphuil
