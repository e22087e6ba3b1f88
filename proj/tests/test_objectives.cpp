#include <doctest.h>

#include <cmath>
#include <set>

#include "graphuil/adam.hpp"
#include "graphuil/gradcheck.hpp"
#include "graphuil/objectives.hpp"
#include "support.hpp"

using namespace graphuil;
using namespace graphuil::testing;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : values) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Two stars whose hubs are not adjacent. The hub pair is the heaviest
// non-edge under the degree-product weighting.
Graph two_stars(std::size_t leaves) {
  std::vector<Edge> edges;
  const auto n = static_cast<NodeId>(2 + 2 * leaves);
  for (NodeId k = 0; k < leaves; ++k) {
    edges.push_back({0, static_cast<NodeId>(2 + k)});
    edges.push_back({1, static_cast<NodeId>(2 + leaves + k)});
  }
  return Graph::from_edges(n, edges);
}

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("decoder examples") {
    const Matrix x = rows({{1, 0}, {0, 1}, {std::log(9.0), 0}, {1, 0}});
    const std::vector<Edge> pairs{{0, 1}, {2, 3}, {3, 2}};
    const auto y = decode_edges(x, pairs);
    CHECK(y[0] == 0.5);
    CHECK(std::abs(y[1] - 0.9) < 1e-9);
    CHECK(y[1] == y[2]);
  }

  TEST_CASE("property: decoded values are strictly inside (0, 1) and symmetric") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Matrix x = random_matrix(10, 4, seed, seed % 2 ? 30.0 : 1.0);
      std::vector<Edge> fwd, rev;
      for (NodeId i = 0; i < 10; ++i) {
        for (NodeId j = 0; j < 10; ++j) {
          fwd.push_back({i, j});
          rev.push_back({j, i});
        }
      }
      const auto a = decode_edges(x, fwd);
      const auto b = decode_edges(x, rev);
      for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k] > 0.0);
        CHECK(a[k] < 1.0);
        CHECK(a[k] == b[k]);
      }
    }
  }

  TEST_CASE("negative sampling: determinism, balance and disjointness") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Graph g = random_graph(40, 0.08, seed);
      if (g.num_edges() == 0) continue;
      const auto m = negative_sample(g, seed);
      const auto again = negative_sample(g, seed);
      CHECK(m.negatives == again.negatives);
      CHECK(m.positives == g.edges());
      CHECK(m.negatives.size() == g.num_edges());
      CHECK_FALSE(m.imbalanced);
      std::set<Edge> seen;
      for (const Edge& e : m.negatives) {
        CHECK(e.u < e.v);
        CHECK_FALSE(g.has_edge(e.u, e.v));
        CHECK(g.degree(e.u) > 0);
        CHECK(g.degree(e.v) > 0);
        CHECK(seen.insert(e).second);
      }
    }
    const Graph g = random_graph(40, 0.1, 1);
    CHECK(negative_sample(g, 1).negatives != negative_sample(g, 2).negatives);
  }

  TEST_CASE("negative sampling on K4 takes nothing and flags the imbalance") {
    const auto m = negative_sample(complete_graph(4), 3);
    CHECK(m.positives.size() == 6);
    CHECK(m.negatives.empty());
    CHECK(m.imbalanced);
  }

  TEST_CASE("negative sampling on a dense graph takes every non-edge") {
    // K5 minus one edge: 9 edges, 1 non-edge
    std::vector<Edge> edges;
    for (NodeId u = 0; u < 5; ++u) {
      for (NodeId v = u + 1; v < 5; ++v) {
        if (!(u == 0 && v == 1)) edges.push_back({u, v});
      }
    }
    const auto m = negative_sample(Graph::from_edges(5, edges), 0);
    CHECK(m.negatives == std::vector<Edge>{{0, 1}});
    CHECK(m.imbalanced);
  }

  TEST_CASE("negative sampling favors high-degree pairs") {
    // hub pair weight (8·8)^0.75 = 22.6 against 1 for a leaf pair
    const Graph g = two_stars(8);
    std::size_t hub = 0, leaf = 0;
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
      const auto m = negative_sample(g, seed);
      for (const Edge& e : m.negatives) {
        hub += e == Edge{0, 1};
        leaf += e == Edge{2, 10};
      }
    }
    CHECK(hub > 3 * leaf);
  }

  TEST_CASE("global loss examples") {
    NegSampleMask one;
    one.positives = {{0, 1}};
    CHECK(global_loss(rows({{1, 0}, {0, 1}}), one) == 0.25);

    NegSampleMask zero_target;
    zero_target.negatives = {{0, 1}};
    CHECK(global_loss(rows({{1, 0}, {0, 1}}), zero_target) == 0.25);

    // Decodes never reach 0 or 1 exactly, so even saturated embeddings leave
    // a positive residue of at most 2 · (2^-53)².
    NegSampleMask mixed;
    mixed.positives = {{0, 1}};
    mixed.negatives = {{0, 2}};
    const double saturated = global_loss(rows({{40, 0}, {40, 0}, {-40, 0}}), mixed);
    CHECK(saturated > 0.0);
    CHECK(saturated <= 2.0 * std::pow(2.0, -106));
  }

  TEST_CASE("property: global loss is nonnegative and its positive part ignores the seed") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const Graph g = random_graph(30, 0.1, seed);
      if (g.num_edges() == 0) continue;
      const Matrix x = random_matrix(30, 4, seed);
      const auto a = negative_sample(g, seed);
      const auto b = negative_sample(g, seed + 1000);
      NegSampleMask pa = a, pb = b;
      pa.negatives.clear();
      pb.negatives.clear();
      CHECK(global_loss(x, pa) == global_loss(x, pb));
      NegSampleMask na = a, nb = b;
      na.positives.clear();
      nb.positives.clear();
      CHECK(global_loss(x, a) == doctest::Approx(global_loss(x, pa) + global_loss(x, na)).epsilon(1e-12));
      CHECK(global_loss(x, b) == doctest::Approx(global_loss(x, pb) + global_loss(x, nb)).epsilon(1e-12));
      CHECK(global_loss(x, a) >= 0.0);
    }
  }

  TEST_CASE("local loss examples") {
    CHECK(local_loss(path_graph(2), rows({{1, 0}, {0, 1}})) == 4.0);
    CHECK(local_loss(random_graph(10, 0.3, 1), Matrix::Ones(10, 3)) == 0.0);
    CHECK(local_loss(Graph::from_edges(5, std::vector<Edge>{}), random_matrix(5, 3, 2)) == 0.0);
  }

  TEST_CASE("property: local loss matches a direct sum") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const Graph g = random_graph(20, 0.15, seed);
      const Matrix x = random_matrix(20, 3, seed);
      double expect = 0.0;
      for (NodeId i = 0; i < 20; ++i) {
        for (NodeId j : g.neighbors(i)) expect += (x.row(i) - x.row(j)).squaredNorm() / double(g.degree(i));
      }
      CHECK(local_loss(g, x) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("mapper examples") {
    MapperConfig cfg;
    const ParamSet p = init_mapper(cfg, 1);
    CHECK(p.size() == 6);
    CHECK(p.at("w0").rows() == 128);
    CHECK(p.at("w2").cols() == 128);
    const Matrix x = random_matrix(5, 128, 2).cwiseAbs();
    CHECK(mapper_forward(x, p.zeros_like()).isZero(0.0));

    ParamSet id = p.zeros_like();
    for (auto& blk : id) {
      if (blk.name[0] == 'w') blk.value.setIdentity();
    }
    CHECK(mapper_forward(x, id) == x);
  }

  TEST_CASE("match loss examples") {
    MapperConfig cfg{3, 3, 3, 2};
    ParamSet id = init_mapper(cfg, 0).zeros_like();
    for (auto& blk : id) {
      if (blk.name[0] == 'w') blk.value.setIdentity();
    }
    const std::vector<AnchorPair> one{{0, 0}};
    CHECK(match_loss(one, rows({{1, 0, 0}}), rows({{0, 1, 0}}), id) == 2.0);
    const Matrix x = random_matrix(4, 3, 5).cwiseAbs();
    const std::vector<AnchorPair> all{{0, 3}, {1, 2}, {2, 1}, {3, 0}};
    Matrix y = x.colwise().reverse();
    CHECK(match_loss(all, x, y, id) == 0.0);
  }

  TEST_CASE("term gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Graph g = random_connected_graph(12, 0.25, seed);
      const auto mask = negative_sample(g, seed);
      ParamSet p;
      p.add("x", random_matrix(12, 8, seed, 0.5));
      p.append(init_mapper({8, 8, 8, 2}, seed), "map.");
      p.add("y", random_matrix(12, 8, seed + 1));
      const std::vector<AnchorPair> anchors{{0, 3}, {4, 1}, {7, 7}, {11, 2}};
      // scaled so that rounding in the loss stays under the check's floor
      LossBuilder loss = [&](Tape&, const BoundParams& b) {
        Var total = ad::add(global_loss(b["x"], mask), local_loss(g, b["x"]));
        total = ad::add(total, match_loss(anchors, b["x"], b["y"], b, "map."));
        return ad::scale(total, 1e-4);
      };
      const auto report = finite_diff_check(loss, p);
      for (const auto& blk : report.blocks) {
        INFO(seed << " " << blk.name);
        CHECK(blk.max_rel_error < 1e-5);
      }
    }
  }

  TEST_CASE("match loss does not increase under small Adam steps on the mapper") {
    const Matrix x1 = random_matrix(10, 6, 1);
    const Matrix x2 = random_matrix(10, 6, 2);
    const std::vector<AnchorPair> anchors{{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}};
    ParamSet p = init_mapper({6, 6, 6, 2}, 3);
    AdamConfig cfg;
    cfg.lr = 1e-3;
    auto st = AdamState::init(p, cfg);
    LossBuilder loss = [&](Tape& t, const BoundParams& b) {
      return match_loss(anchors, t.constant(x1), t.constant(x2), b);
    };
    double prev = evaluate_loss(loss, p);
    const double first = prev;
    for (int step = 0; step < 200; ++step) {
      adam_step(p, graphuil::grad(loss, p).grads, st);
      const double now = evaluate_loss(loss, p);
      CHECK(now <= prev + 1e-12);
      prev = now;
    }
    CHECK(prev < first);
  }

  TEST_CASE("total loss arithmetic") {
    const auto b = total_loss(1.5, 2.0, 0.25, 0.75, 3.0, 10.0, 1.0);
    CHECK(b.total == doctest::Approx(10 * 3.5 + 1.0 + 3.0).epsilon(1e-15));
    CHECK(total_loss(1.5, 2.0, 0.25, 0.75, 3.0, 0.0, 0.0).total == 3.0);
    CHECK(total_loss(0, 0, 0, 0, 0, 10, 1).total == 0.0);
    CHECK_THROWS(total_loss(0, 0, 0, 0, 0, -1, 1));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const Matrix r = random_matrix(1, 7, seed).cwiseAbs();
      const double alpha = 100.0 * r(0, 5), beta = 100.0 * r(0, 6);
      const auto t = total_loss(r(0, 0), r(0, 1), r(0, 2), r(0, 3), r(0, 4), alpha, beta);
      CHECK(std::abs(t.total - (alpha * (r(0, 0) + r(0, 1)) + beta * (r(0, 2) + r(0, 3)) + r(0, 4))) <= 1e-10);
    }
  }
}
