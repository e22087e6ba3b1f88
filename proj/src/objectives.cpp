#include "graphuil/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <unordered_set>

#include "graphuil/error.hpp"
#include "graphuil/rng.hpp"

namespace graphuil {

namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

NegSampleMask negative_sample(const Graph& g, std::uint64_t seed) {
  if (g.num_edges() == 0) throw std::invalid_argument("negative_sample needs at least one edge");
  NegSampleMask mask;
  mask.seed = seed;
  mask.positives = g.edges();
  const std::size_t want = mask.positives.size();

  std::vector<double> weight(g.num_nodes());
  std::vector<double> cumulative(g.num_nodes());
  std::size_t active = 0;
  double acc = 0.0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    weight[v] = std::pow(static_cast<double>(g.degree(v)), 0.75);
    acc += weight[v];
    cumulative[v] = acc;
    if (g.degree(v) > 0) ++active;
  }
  // Non-edges with nonzero probability: pairs of positive-degree nodes.
  const std::size_t available = active * (active - 1) / 2 - g.num_edges();

  Rng rng = make_rng(seed, {0x6e6567ULL});
  std::unordered_set<std::uint64_t> taken;

  auto exhaustive = [&](std::size_t count) {
    // Weighted sampling without replacement over every remaining candidate via
    // exponential keys; matches sequential draws ∝ weight.
    using Keyed = std::pair<double, Edge>;
    std::vector<Keyed> keyed;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      if (weight[u] == 0.0) continue;
      for (NodeId v = u + 1; v < g.num_nodes(); ++v) {
        if (weight[v] == 0.0 || g.has_edge(u, v) || taken.contains(pair_key(u, v))) continue;
        const double w = weight[u] * weight[v];
        double r = uniform01(rng);
        while (r <= 0.0) r = uniform01(rng);
        keyed.push_back({std::log(r) / w, {u, v}});
      }
    }
    count = std::min(count, keyed.size());
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end(),
                      [](const Keyed& a, const Keyed& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (std::size_t k = 0; k < count; ++k) mask.negatives.push_back(keyed[k].second);
  };

  if (available <= want) {
    mask.imbalanced = available < want;
    exhaustive(available);
    return mask;
  }

  auto draw = [&]() {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return static_cast<NodeId>(it - cumulative.begin());
  };
  const std::size_t max_attempts = 64 * want + 1024;
  std::size_t attempts = 0;
  while (mask.negatives.size() < want && attempts < max_attempts) {
    ++attempts;
    const NodeId a = draw();
    const NodeId b = draw();
    if (a == b || g.has_edge(a, b)) continue;
    if (!taken.insert(pair_key(a, b)).second) continue;
    mask.negatives.push_back(a < b ? Edge{a, b} : Edge{b, a});
  }
  if (mask.negatives.size() < want) exhaustive(want - mask.negatives.size());
  return mask;
}

std::vector<double> decode_edges(const Matrix& x, std::span<const Edge> pairs) {
  Tape tape;
  const Matrix& y = tape.value(decode_edges(tape.constant(x), pairs));
  return {y.data(), y.data() + y.size()};
}

Var decode_edges(Var x, std::span<const Edge> pairs) {
  std::vector<NodeId> left;
  std::vector<NodeId> right;
  left.reserve(pairs.size());
  right.reserve(pairs.size());
  for (const auto& e : pairs) {
    left.push_back(e.u);
    right.push_back(e.v);
  }
  return ad::sigmoid(ad::row_dot(ad::gather_rows(x, left), ad::gather_rows(x, right)));
}

Var global_loss(Var x, const NegSampleMask& mask) {
  std::vector<Edge> pairs = mask.positives;
  pairs.insert(pairs.end(), mask.negatives.begin(), mask.negatives.end());
  const auto m = static_cast<Eigen::Index>(pairs.size());
  Matrix target = Matrix::Zero(m, 1);
  target.topRows(static_cast<Eigen::Index>(mask.positives.size())).setOnes();
  return ad::masked_sq_error(decode_edges(x, pairs), target, Matrix::Ones(m, 1));
}

double global_loss(const Matrix& x, const NegSampleMask& mask) {
  Tape tape;
  return tape.scalar(global_loss(tape.constant(x), mask));
}

Var local_loss(const Graph& g, Var x) {
  std::vector<NodeId> src;
  std::vector<NodeId> dst;
  std::vector<double> w;
  src.reserve(g.adjacency().size());
  dst.reserve(g.adjacency().size());
  w.reserve(g.adjacency().size());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const double inv = g.degree(i) > 0 ? 1.0 / static_cast<double>(g.degree(i)) : 0.0;
    for (NodeId j : g.neighbors(i)) {
      src.push_back(i);
      dst.push_back(j);
      w.push_back(inv);
    }
  }
  if (src.empty()) return x.tape->constant(Matrix::Zero(1, 1));
  return ad::weighted_row_sq_norm(ad::sub(ad::gather_rows(x, src), ad::gather_rows(x, dst)), w);
}

double local_loss(const Graph& g, const Matrix& x) {
  Tape tape;
  return tape.scalar(local_loss(g, tape.constant(x)));
}

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = limit * (2.0 * uniform01(rng) - 1.0);
  return m;
}

std::string wname(std::size_t k) { return "w" + std::to_string(k); }
std::string bname(std::size_t k) { return "b" + std::to_string(k); }

}  // namespace

ParamSet init_mapper(const MapperConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x6d6170ULL});
  ParamSet p;
  std::size_t in = cfg.input_dim;
  for (std::size_t k = 0; k <= cfg.hidden_layers; ++k) {
    const std::size_t out = k == cfg.hidden_layers ? cfg.output_dim : cfg.hidden_dim;
    p.add(wname(k), glorot(in, out, rng));
    p.add(bname(k), Matrix::Zero(1, static_cast<Eigen::Index>(out)));
    in = out;
  }
  return p;
}

Var mapper_forward(Var x, const BoundParams& params, std::string_view prefix) {
  const std::string pre(prefix);
  std::size_t layers = 0;
  while (params.params().contains(pre + wname(layers))) ++layers;
  if (layers == 0) throw std::invalid_argument("mapper has no layers under prefix '" + pre + "'");
  Var h = x;
  for (std::size_t k = 0; k < layers; ++k) {
    h = ad::add_bias(ad::matmul(h, params[pre + wname(k)]), params[pre + bname(k)]);
    if (k + 1 < layers) h = ad::relu(h);
  }
  return h;
}

Matrix mapper_forward(const Matrix& x, const ParamSet& params) {
  Tape tape;
  BoundParams bound(tape, params, {}, false);
  return tape.value(mapper_forward(tape.constant(x), bound));
}

Var match_loss(std::span<const AnchorPair> anchors, Var x1, Var x2, const BoundParams& params,
               std::string_view prefix) {
  if (anchors.empty()) return x1.tape->constant(Matrix::Zero(1, 1));
  std::vector<NodeId> left;
  std::vector<NodeId> right;
  for (const auto& a : anchors) {
    left.push_back(a.sn1);
    right.push_back(a.sn2);
  }
  const Var mapped = mapper_forward(ad::gather_rows(x1, left), params, prefix);
  return ad::sum_squares(ad::sub(mapped, ad::gather_rows(x2, right)));
}

double match_loss(std::span<const AnchorPair> anchors, const Matrix& x1, const Matrix& x2, const ParamSet& mapper) {
  Tape tape;
  BoundParams bound(tape, mapper, {}, false);
  return tape.scalar(match_loss(anchors, tape.constant(x1), tape.constant(x2), bound));
}

LossBreakdown total_loss(double global_sn1, double global_sn2, double local_sn1, double local_sn2, double match,
                         double alpha, double beta) {
  if (alpha < 0 || beta < 0) throw std::invalid_argument("loss weights must be non-negative");
  LossBreakdown b;
  b.global_sn1 = global_sn1;
  b.global_sn2 = global_sn2;
  b.local_sn1 = local_sn1;
  b.local_sn2 = local_sn2;
  b.match = match;
  b.alpha = alpha;
  b.beta = beta;
  b.total = alpha * (global_sn1 + global_sn2) + beta * (local_sn1 + local_sn2) + match;
  return b;
}

}  // namespace graphuil
