#include <doctest.h>

#include <cmath>
#include <numeric>

#include "grade/coherence_model.hpp"
#include "grade/graph_reasoning.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace grade;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

NeighborSets all_pairs(int n) {
  NeighborSets s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) s[static_cast<std::size_t>(i)].push_back(j);
  return s;
}

MatrixXd permute_rows(const MatrixXd& m, const std::vector<int>& p) {
  MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < p.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(p[i]);
  return out;
}

MatrixXd permute_both(const MatrixXd& m, const std::vector<int>& p) {
  MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(p[i], p[j]);
  return out;
}

double leaky(double x, double slope) { return x > 0 ? x : slope * x; }
double elu1(double x) { return x > 0 ? x : std::exp(x) - 1.0; }

}  // namespace

TEST_SUITE("graph_reasoning") {

TEST_CASE("single neighbor gets all the attention") {
  MatrixXd h(2, 4);
  h << 1, 2, 3, 4, -1, 0.5, 2, 0;
  std::mt19937_64 rng(1);
  GatLayerParams<double> p{glorot<double>(4, 4, rng), glorot<double>(8, 1, rng), glorot<double>(4, 4, rng)};
  MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  auto alpha = attention_coefficients(h, normalize_adjacency(a), p, active_neighbors(a), {2, 0.2});
  REQUIRE(alpha.size() == 2);
  for (const auto& m : alpha) {
    CHECK(m(0, 1) == 1.0);
    CHECK(m(1, 0) == 1.0);
    CHECK(m(0, 0) == 0.0);
  }
}

TEST_CASE("identical neighbors with identical weights split attention evenly") {
  MatrixXd h(3, 2);
  h << 0.3, -0.2, 1, 1, 1, 1;
  std::mt19937_64 rng(2);
  GatLayerParams<double> p{glorot<double>(2, 2, rng), glorot<double>(4, 1, rng), glorot<double>(2, 2, rng)};
  MatrixXd a = MatrixXd::Zero(3, 3);
  a(0, 1) = a(1, 0) = a(0, 2) = a(2, 0) = 0.5;
  auto alpha = attention_coefficients(h, normalize_adjacency(a), p, active_neighbors(a), {1, 0.2});
  CHECK(alpha[0](0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(alpha[0](0, 2) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("attention on a hand-set three node graph matches scalar evaluation") {
  // d = 2, one head, Abar set by hand (not necessarily a normalized matrix).
  MatrixXd h(3, 2);
  h << 1.0, -0.5, 0.25, 2.0, -1.5, 0.75;
  GatLayerParams<double> p;
  p.transform.resize(2, 2);
  p.transform << 0.5, -1.0, 2.0, 0.1;
  p.attention.resize(4);
  p.attention << 0.3, -0.7, 1.1, 0.4;
  p.combination.resize(2, 2);
  p.combination << 1.0, 0.5, -0.25, 2.0;
  MatrixXd abar(3, 3);
  abar << 0.5, 0.4, 0.3, 0.4, 0.6, 0.2, 0.3, 0.2, 0.7;
  NeighborSets nbrs = all_pairs(3);
  const double slope = 0.2;

  double wh[3][2];
  for (int i = 0; i < 3; ++i)
    for (int r = 0; r < 2; ++r) wh[i][r] = p.transform(r, 0) * h(i, 0) + p.transform(r, 1) * h(i, 1);
  double alpha[3][3] = {};
  for (int i = 0; i < 3; ++i) {
    double denom = 0.0;
    double ex[3] = {};
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const double s = p.attention(0) * wh[i][0] + p.attention(1) * wh[i][1] + p.attention(2) * wh[j][0] +
                       p.attention(3) * wh[j][1];
      ex[j] = std::exp(abar(i, j) * leaky(s, slope));
      denom += ex[j];
    }
    for (int j = 0; j < 3; ++j) alpha[i][j] = ex[j] / denom;
  }
  auto got = attention_coefficients(h, abar, p, nbrs, {1, slope});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(got[0](i, j) == doctest::Approx(alpha[i][j]).epsilon(1e-14));

  auto out = gat_layer(h, abar, p, nbrs, {1, slope});
  for (int i = 0; i < 3; ++i)
    for (int r = 0; r < 2; ++r) {
      double z = 0.0;
      for (int j = 0; j < 3; ++j) z += alpha[i][j] * wh[j][r];
      const double pre = p.combination(r, 0) * h(i, 0) + p.combination(r, 1) * h(i, 1) + z;
      CHECK(out(i, r) == doctest::Approx(elu1(pre)).epsilon(1e-14));
    }
}

TEST_CASE("heads attend over their own blocks and are concatenated") {
  std::mt19937_64 rng(5);
  MatrixXd h = MatrixXd::Random(4, 6);
  GatLayerParams<double> p{glorot<double>(6, 6, rng), glorot<double>(12, 1, rng), MatrixXd::Zero(6, 6)};
  MatrixXd a = MatrixXd::Ones(4, 4) - MatrixXd::Identity(4, 4);
  MatrixXd abar = normalize_adjacency(a);
  auto nbrs = active_neighbors(a);
  auto out = gat_layer(h, abar, p, nbrs, {3, 0.2});
  MatrixXd wh = h * p.transform.transpose();
  for (int k = 0; k < 3; ++k) {
    // A single-head layer over the k-th block only.
    GatLayerParams<double> sub{MatrixXd::Identity(2, 2), VectorXd(4), MatrixXd::Zero(2, 2)};
    sub.attention << p.attention.segment(2 * k, 2), p.attention.segment(6 + 2 * k, 2);
    MatrixXd block = wh.middleCols(2 * k, 2);
    auto expected = gat_layer(block, abar, sub, nbrs, {1, 0.2});
    CHECK((out.middleCols(2 * k, 2) - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("no neighbors reduces to ELU(V h)") {
  std::mt19937_64 rng(4);
  MatrixXd h = MatrixXd::Random(3, 4);
  GatLayerParams<double> p{glorot<double>(4, 4, rng), glorot<double>(8, 1, rng), glorot<double>(4, 4, rng)};
  NeighborSets none(3);
  auto out = gat_layer(h, MatrixXd(MatrixXd::Identity(3, 3)), p, none, {2, 0.2});
  MatrixXd expected = elu(MatrixXd(h * p.combination.transpose()));
  CHECK((out - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("V = 0, W = I and one neighbor copies the neighbor through ELU") {
  MatrixXd h(2, 2);
  h << 0.5, -2.0, -0.3, 1.5;
  GatLayerParams<double> p{MatrixXd::Identity(2, 2), VectorXd::Constant(4, 0.7), MatrixXd::Zero(2, 2)};
  MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  auto out = gat_layer(h, normalize_adjacency(a), p, active_neighbors(a), {1, 0.2});
  CHECK(out(0, 0) == doctest::Approx(elu1(-0.3)));
  CHECK(out(0, 1) == doctest::Approx(elu1(1.5)));
  CHECK(out(1, 0) == doctest::Approx(elu1(0.5)));
  CHECK(out(1, 1) == doctest::Approx(elu1(-2.0)));
}

TEST_CASE("gat layer is permutation equivariant") {
  std::mt19937_64 rng(8);
  const int n = 6;
  MatrixXd h = MatrixXd::Random(n, 8);
  GatLayerParams<double> p{glorot<double>(8, 8, rng), glorot<double>(16, 1, rng), glorot<double>(8, 8, rng)};
  MatrixXd a = MatrixXd::Zero(n, n);
  a(0, 3) = a(3, 0) = 1;
  a(1, 4) = a(4, 1) = 0.5;
  a(2, 5) = a(5, 2) = 1.0 / 3;
  a(0, 5) = a(5, 0) = 0.5;
  std::vector<int> perm{4, 2, 0, 5, 1, 3};
  auto out = gat_layer(h, normalize_adjacency(a), p, active_neighbors(a), {4, 0.2});
  MatrixXd pa = permute_both(a, perm);
  auto pout = gat_layer(permute_rows(h, perm), normalize_adjacency(pa), p, active_neighbors(pa), {4, 0.2});
  CHECK((pout - permute_rows(out, perm)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("dimension errors") {
  GatLayerParams<double> p = GatLayerParams<double>::zeros(6);
  MatrixXd h = MatrixXd::Zero(2, 6);
  NeighborSets none(2);
  CHECK_THROWS_AS(gat_layer(h, MatrixXd(MatrixXd::Identity(2, 2)), p, none, {4, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(gat_layer(MatrixXd(MatrixXd::Zero(2, 5)), MatrixXd(MatrixXd::Identity(2, 2)), p, none, {3, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(gat_layer(h, MatrixXd(MatrixXd::Identity(3, 3)), p, none, {3, 0.2}), std::invalid_argument);
}

TEST_CASE("pooling") {
  std::mt19937_64 rng(9);
  MatrixXd w = glorot<double>(3, 3, rng);
  VectorXd b = VectorXd::Random(3);
  SUBCASE("identical rows pool to FC0 of that row") {
    Eigen::RowVector3d u(0.2, -1.0, 0.5);
    MatrixXd h = u.replicate(4, 1);
    VectorXd expected = elu(VectorXd(w * u.transpose() + b));
    CHECK((pool_graph(h, w, b) - expected).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("row order does not matter") {
    MatrixXd h = MatrixXd::Random(5, 3);
    std::vector<int> perm{3, 1, 4, 0, 2};
    CHECK((pool_graph(h, w, b) - pool_graph(permute_rows(h, perm), w, b)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("three random nodes against mean-affine-ELU arithmetic") {
    MatrixXd h = MatrixXd::Random(3, 3);
    auto got = pool_graph(h, w, b);
    for (int r = 0; r < 3; ++r) {
      double z = b(r);
      for (int c = 0; c < 3; ++c) z += w(r, c) * (h(0, c) + h(1, c) + h(2, c)) / 3.0;
      CHECK(got(r) == doctest::Approx(elu1(z)).epsilon(1e-6));
    }
  }
}

TEST_CASE("graph head gradients match finite differences") {
  // v_g is reduced to a scalar with a fixed random readout.
  const int d = 8;
  auto vec = [&](std::uint64_t seed) {
    std::mt19937_64 r(seed);
    return fixtures::random_vector(d, r);
  };
  auto s = ConceptNetSnapshot::from_parts({{"ab", "cd"}, {"cd", "ef"}, {"ef", "gh"}, {"ab", "ij"}},
                                          {{"ab", vec(1)}, {"cd", vec(2)}, {"ef", vec(3)}, {"gh", vec(4)}, {"ij", vec(5)}});
  GraphOptions opts;
  opts.neighbor_limits = {5, 5};
  auto g = prepare_graph<double>(KeywordList{{"ab", "ef"}, Origin::Context}, KeywordList{{"cd", "gh"}, Origin::Response},
                                 s, opts);
  std::mt19937_64 rng(21);
  ModelParams<double> params;
  params.node_init = NodeInitParams<double>::zeros(2, d);
  params.node_init.hop_weights = {glorot<double>(d, d, rng), glorot<double>(d, d, rng)};
  params.node_init.bias = VectorXd::Random(d) * 0.1;
  params.graph = GraphHead<double>::random(2, d, rng);
  params.graph.pool_bias = VectorXd::Random(d) * 0.1;
  VectorXd readout = VectorXd::Random(d);
  const MatrixXd abar = normalize_adjacency(g.adjacency);
  const auto nbrs = active_neighbors(g.adjacency);
  const GatOptions gat{2, 0.2};

  auto loss = [&] {
    auto h0 = init_node_features(g, params.node_init);
    return readout.dot(graph_head_forward(params.graph, h0, abar, nbrs, gat));
  };
  ModelParams<double> grad = params.zeros_like();
  GraphHeadCache<double> cache;
  auto h0 = init_node_features(g, params.node_init);
  graph_head_forward(params.graph, h0, abar, nbrs, gat, &cache);
  MatrixXd d_h0 = graph_head_backward(cache, readout, params.graph, abar, nbrs, gat, grad.graph);
  for (std::size_t k = 0; k < 2; ++k) {
    grad.node_init.hop_weights[k] += d_h0.transpose() * g.shell_means[k];
    grad.node_init.bias += d_h0.colwise().sum().transpose();
  }

  auto results = fixtures::check_gradients(params, grad, loss, 15, 3);
  CHECK(results.size() == 2 + 1 + 2 * 3 + 2);
  for (const auto& r : results) {
    INFO(r.name);
    CHECK(r.directional_error < 1e-4);
    CHECK(r.entry_error < 1e-4);
  }
}

}
