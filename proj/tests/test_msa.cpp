#include <doctest.h>

#include <cmath>

#include "graphuil/gradcheck.hpp"
#include "graphuil/msa.hpp"
#include "support.hpp"

using namespace graphuil;
using namespace graphuil::testing;

namespace {

Matrix run_gta(const GraphContext& ctx, const Matrix& x, const Matrix& w) {
  Tape t;
  return t.value(gta_agg(ctx, t.constant(x), t.constant(w)));
}

Matrix run_lta_uniform(const GraphContext& ctx, const Matrix& x, const Matrix& w) {
  // identical features make every logit in a row equal, hence uniform rows
  Tape t;
  const Matrix same = Matrix::Ones(x.rows(), 1);
  Var a = attention_weights(ctx, t.constant(same), t.constant(Matrix::Ones(1, 1)), t.constant(Matrix::Ones(2, 1)));
  return t.value(lta_agg(ctx, a, t.constant(x), t.constant(w)));
}

EncoderConfig small_config(std::size_t in = 6, std::size_t hidden = 5) {
  EncoderConfig cfg;
  cfg.input_dim = in;
  cfg.hidden_dim = hidden;
  cfg.attention_dim = 4;
  cfg.layers = 3;
  return cfg;
}

ParamSet zeroed(ParamSet p, const std::vector<std::string>& names) {
  for (const auto& n : names) p.at(n).setZero();
  return p;
}

}  // namespace

TEST_SUITE("msa") {
  TEST_CASE("GTA examples") {
    const GraphContext two(path_graph(2), true);
    const Matrix p = run_gta(two, Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    CHECK((p - Matrix::Constant(2, 2, 0.5)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(run_gta(two, random_matrix(2, 3, 1), Matrix::Zero(3, 4)).isZero(0.0));

    const GraphContext empty(Graph::from_edges(4, std::vector<Edge>{}), true);
    const Matrix x = random_matrix(4, 3, 2);
    CHECK(run_gta(empty, x, Matrix::Identity(3, 3)) == x);
  }

  TEST_CASE("LTA examples") {
    const GraphContext empty(Graph::from_edges(3, std::vector<Edge>{}), true);
    const Matrix x = random_matrix(3, 2, 3);
    CHECK(run_lta_uniform(empty, x, Matrix::Identity(2, 2)) == x);
    CHECK(run_lta_uniform(empty, x, Matrix::Zero(2, 2)).isZero(0.0));

    const GraphContext two(path_graph(2), true);
    Matrix x2(2, 2);
    x2 << 2, 0, 0, 2;
    const Matrix out = run_lta_uniform(two, x2, Matrix::Identity(2, 2));
    CHECK((out - Matrix::Ones(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("attention examples") {
    // identical features: uniform over each support
    const Graph g = random_connected_graph(12, 0.2, 5);
    const GraphContext ctx(g, true);
    const Matrix same = Matrix::Ones(12, 3) * 0.7;
    const Matrix a = attention_matrix(ctx, same, random_matrix(3, 4, 6), random_matrix(8, 1, 7));
    for (NodeId i = 0; i < 12; ++i) {
      const double expect = 1.0 / double(g.degree(i) + 1);
      CHECK(a(i, i) == doctest::Approx(expect).epsilon(1e-14));
      for (NodeId j : g.neighbors(i)) CHECK(a(i, j) == doctest::Approx(expect).epsilon(1e-14));
    }

    // support {self} only
    const GraphContext lonely(Graph::from_edges(1, std::vector<Edge>{}), true);
    CHECK(attention_matrix(lonely, Matrix::Ones(1, 2), Matrix::Ones(2, 2), Matrix::Ones(4, 1))(0, 0) == 1.0);

    // logits 1 (self) and 0 (neighbor) in row 0: g = [0; 1] scores only the target
    const GraphContext two(path_graph(2), true);
    Matrix x(2, 1);
    x << 1, 0;
    Matrix g_att(2, 1);
    g_att << 0, 1;
    const Matrix a2 = attention_matrix(two, x, Matrix::Ones(1, 1), g_att);
    CHECK(std::abs(a2(0, 0) - 0.7311) < 1e-4);
    CHECK(std::abs(a2(0, 1) - 0.2689) < 1e-4);
  }

  TEST_CASE("layer examples") {
    const GraphContext two(path_graph(2), true);
    Tape t;
    Var x = t.constant(random_matrix(2, 2, 8));
    Var zero = t.constant(Matrix::Zero(2, 2));
    Var zero_att = t.constant(Matrix::Zero(2, 2));
    Var zero_g = t.constant(Matrix::Zero(4, 1));
    CHECK(t.value(msa_layer(two, x, {zero, zero, zero_att, zero_g}, Aggregators::both)).isZero(0.0));

    Var w = t.constant(random_matrix(2, 3, 9));
    const Matrix gta_only = t.value(msa_layer(two, x, {w, w, zero_att, zero_g}, Aggregators::gta_only));
    CHECK(gta_only == t.value(ad::relu(gta_agg(two, x, w))));

    // identity weights and a zero attention vector: A′ rows are (.5, .5), equal to P here
    Matrix xv(2, 2);
    xv << 2, 0, -4, 2;
    Var id = t.constant(Matrix::Identity(2, 2));
    const Matrix out = t.value(msa_layer(two, t.constant(xv), {id, id, id, t.constant(Matrix::Zero(4, 1))},
                                         Aggregators::both));
    // P·X = A′·X = [[-1, 1], [-1, 1]]; relu(2·that) = [[0, 2], [0, 2]]
    Matrix expect(2, 2);
    expect << 0, 2, 0, 2;
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("encoder output shape and purity") {
    for (std::size_t n : {std::size_t{1}, std::size_t{7}, std::size_t{30}}) {
      const Graph g = random_graph(n, 0.2, n);
      const GraphContext ctx(g, true);
      EncoderConfig cfg;  // 64 -> 128 x3 -> 128
      const ParamSet p = init_encoder(cfg, 1);
      const Matrix x0 = random_matrix(n, 64, 2);
      const Matrix out = encode(ctx, x0, p, cfg);
      CHECK(out.rows() == Eigen::Index(n));
      CHECK(out.cols() == 128);
      CHECK(out == encode(ctx, x0, p, cfg));
      CHECK(p.at(std::string(kSkipBlock)).rows() == 384);
      CHECK(encode(ctx, x0, p.zeros_like(), cfg).isZero(0.0));
    }
  }

  TEST_CASE("encoder rejects a wrong input width") {
    const GraphContext ctx(path_graph(3), true);
    const EncoderConfig cfg = small_config();
    CHECK_THROWS(encode(ctx, random_matrix(3, 7, 1), init_encoder(cfg, 1), cfg));
  }

  TEST_CASE("property: attention rows are distributions on their support") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const std::size_t n = 2 + seed * 3;
      const Graph g = random_graph(n, 0.1, seed);
      for (bool self : {true, false}) {
        const GraphContext ctx(g, self);
        const Matrix a = attention_matrix(ctx, random_matrix(n, 5, seed), random_matrix(5, 4, seed + 1),
                                          random_matrix(8, 1, seed + 2, 3.0));
        for (NodeId i = 0; i < n; ++i) {
          double total = 0.0;
          for (NodeId j = 0; j < n; ++j) {
            const bool on = g.has_edge(i, j) || (self && i == j);
            if (on) {
              CHECK(a(i, j) >= 0.0);
              total += a(i, j);
            } else {
              CHECK(a(i, j) == 0.0);
            }
          }
          if (self || g.degree(i) > 0) CHECK(std::abs(total - 1.0) <= 1e-12);
        }
      }
    }
  }

  TEST_CASE("property: encoder is permutation equivariant") {
    const EncoderConfig cfg = small_config();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Graph g = random_graph(20, 0.2, seed);
      const auto perm = random_permutation(20, seed);
      const Graph pg = permute(g, perm);
      const ParamSet p = init_encoder(cfg, seed);
      const Matrix x0 = random_matrix(20, cfg.input_dim, seed);
      Matrix px0(20, x0.cols());
      for (NodeId v = 0; v < 20; ++v) px0.row(perm[v]) = x0.row(v);
      const Matrix out = encode(GraphContext(g, true), x0, p, cfg);
      const Matrix pout = encode(GraphContext(pg, true), px0, p, cfg);
      for (NodeId v = 0; v < 20; ++v) CHECK((pout.row(perm[v]) - out.row(v)).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  TEST_CASE("property: encoder gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Graph g = random_connected_graph(8, 0.3, seed);
      const GraphContext ctx(g, true);
      for (SkipMode skip : {SkipMode::concat, SkipMode::sum}) {
        EncoderConfig cfg = small_config(4, 4);
        cfg.attention_dim = 3;
        cfg.skip = skip;
        const ParamSet p = init_encoder(cfg, seed);
        const Matrix x0 = random_matrix(8, 4, seed + 1);
        // A small loss keeps finite-difference rounding (ulp(loss)/eps) under
        // the check's 1e-8 floor; the attention source weights have zero
        // gradient whenever no logit in a row is clipped.
        LossBuilder loss = [&](Tape& t, const BoundParams& b) {
          return ad::scale(ad::sum_squares(encode(ctx, t.constant(x0), b, cfg)), 1e-4);
        };
        const auto report = finite_diff_check(loss, p);
        for (const auto& blk : report.blocks) {
          INFO(blk.name);
          CHECK(blk.max_rel_error < 1e-5);
        }
      }
    }
  }

  TEST_CASE("ablation consistency: single-path encoders equal zeroed, frozen full encoders") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Graph g = random_graph(15, 0.2, seed);
      const GraphContext ctx(g, true);
      const Matrix x0 = random_matrix(15, 6, seed);
      EncoderConfig both = small_config();
      for (Aggregators which : {Aggregators::gta_only, Aggregators::lta_only}) {
        EncoderConfig single = both;
        single.aggregators = which;
        const auto disabled = disabled_blocks(single);
        REQUIRE(disabled.size() == (which == Aggregators::gta_only ? 9u : 3u));
        const ParamSet p = init_encoder(single, seed);
        for (const auto& name : disabled) CHECK(p.at(name).isZero(0.0));
        const ParamSet full = zeroed(init_encoder(both, seed), disabled);
        ParamSet shared = full;
        for (auto& blk : shared) blk.value = p.at(blk.name);
        CHECK(encode(ctx, x0, shared, single) == encode(ctx, x0, shared, both));

        LossBuilder loss = [&](Tape& t, const BoundParams& b) {
          return ad::sum_squares(encode(ctx, t.constant(x0), b, both));
        };
        const auto r = graphuil::grad(loss, shared, disabled);
        for (const auto& name : disabled) CHECK(r.grads.at(name).isZero(0.0));
      }
    }
  }

  TEST_CASE("config parsing") {
    CHECK(parse_aggregators("gta_only") == Aggregators::gta_only);
    CHECK(parse_skip_mode("sum") == SkipMode::sum);
    CHECK_THROWS(parse_skip_mode("max"));
    EncoderConfig cfg;
    cfg.layers = 0;
    CHECK_THROWS(cfg.validate());
  }
}
