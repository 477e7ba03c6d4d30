#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "oggbn/deep.hpp"
#include "oggbn/errors.hpp"
#include "oggbn/ogfa.hpp"

using namespace oggbn;

namespace {

struct Problem {
  OrdinalMatrix Y;
  AdjacencyGraph A;
  std::size_t U, I;
  std::uint32_t V;
};

Problem small_problem(std::uint64_t seed) {
  Hyper h;
  h.r = 1.5;
  h.eta = 0.1;
  const std::size_t U = 28, I = 22;
  auto sim = simulate(U, I, 3, 3, h, {0.5, 0.3, 0.2}, seed);
  return {std::move(sim.ratings), std::move(sim.graph), U, I, 3};
}

}  // namespace

TEST_CASE("one-layer hierarchy reproduces the flat sampler bit for bit") {
  auto p = small_problem(60);
  Hyper h;
  const std::uint32_t K = 5;

  auto flat = ogfa_init(p.U, p.I, K, p.V, h, 404);
  auto deep = deep_init(p.U, p.I, {K}, p.V, h, 404);
  REQUIRE(deep.theta[0].storage() == flat.theta.storage());
  REQUIRE(deep.phi[0].storage() == flat.phi.storage());
  REQUIRE(deep.u[0] == flat.u);
  REQUIRE(deep.c_rate[0] == flat.c_user);

  const auto graphs = build_layer_graphs(p.A, 1);
  SweepOptions opts;
  opts.workers = 3;
  for (int t = 0; t < 50; ++t) {
    gibbs_sweep(p.Y, p.A, flat, 31337, opts);
    deep_sweep(p.Y, graphs, deep, 31337, opts);
  }
  REQUIRE(deep.theta[0].storage() == flat.theta.storage());
  REQUIRE(deep.phi[0].storage() == flat.phi.storage());
  REQUIRE(deep.u[0] == flat.u);
  REQUIRE(deep.c_rate[0] == flat.c_user);
  REQUIRE(deep.tm.delta == flat.tm.delta);
  REQUIRE(deep.sweep == flat.sweep);
}

TEST_CASE("first boolean power is the graph itself") {
  auto p = small_problem(61);
  const auto graphs = build_layer_graphs(p.A, 3);
  REQUIRE(graphs.size() == 3);
  for (std::size_t a = 0; a < p.U; ++a)
    for (std::size_t b = a + 1; b < p.U; ++b)
      REQUIRE(graphs[0].has_edge(a, b) == p.A.has_edge(a, b));
  // Powers only gain reachability.
  for (unsigned t = 1; t < 3; ++t)
    for (const auto& [a, b] : graphs[t - 1].edges())
      REQUIRE(graphs[t].has_edge(a, b));
}

TEST_CASE("preference draw has the compound-gamma moments") {
  // shape = prior 2 + count 3, rate = rate hyper 4 (no exposure, no graph
  // term with a single user): mean 5/4, variance 5/16.
  Matrix theta(1, 1);
  theta(0, 0) = 1.0;
  const std::vector<double> shape0 = {2.0};
  const std::vector<std::uint64_t> x = {3};
  Matrix q(1, 1);  // zero exposure
  const std::vector<double> u_sc = {0.7};  // inert: totals - cur = 0
  const std::vector<double> c_rate = {4.0};
  SweepOptions opts;
  double sum = 0.0, sq = 0.0;
  const int n = 1000000;
  for (int sweep = 0; sweep < n; ++sweep) {
    sample_theta_generic(theta, nullptr, shape0, x, q, u_sc, c_rate, 4040, 0,
                         sweep, opts);
    sum += theta(0, 0);
    sq += theta(0, 0) * theta(0, 0);
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 1.25) < 0.01);
  CHECK(std::abs(sq / n - mean * mean - 5.0 / 16.0) < 0.01);
}

TEST_CASE("community projection composes the loading maps") {
  Hyper h;
  auto s = deep_init(6, 4, {3, 2}, 3, h, 77);

  // Bottom layer: the projection is the loading column itself.
  for (std::size_t k = 0; k < 3; ++k) {
    const auto v = project_community(s, 1, k);
    REQUIRE(v.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
      REQUIRE(v[i] == doctest::Approx(s.phi[0](i, k)).epsilon(1e-15));
  }

  // Identity-like top loading: projection of an upper community equals the
  // matching lower column.
  s.phi[1] = Matrix(3, 2);
  s.phi[1](0, 0) = 1.0;
  s.phi[1](2, 1) = 1.0;
  auto v0 = project_community(s, 2, 0);
  auto v1 = project_community(s, 2, 1);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(v0[i] == doctest::Approx(s.phi[0](i, 0)).epsilon(1e-14));
    CHECK(v1[i] == doctest::Approx(s.phi[0](i, 2)).epsilon(1e-14));
  }

  // Mixed loading composes linearly.
  s.phi[1](0, 0) = 0.3;
  s.phi[1](1, 0) = 0.7;
  s.phi[1](2, 0) = 0.0;
  v0 = project_community(s, 2, 0);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(v0[i] == doctest::Approx(0.3 * s.phi[0](i, 0) +
                                   0.7 * s.phi[0](i, 1)).epsilon(1e-14));

  // Any projection of a simplex column through simplex maps stays a simplex.
  double total = 0.0;
  for (double x : v0) total += x;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-8));

  CHECK_THROWS_AS(project_community(s, 0, 0), IndexOutOfRange);
  CHECK_THROWS_AS(project_community(s, 3, 0), IndexOutOfRange);
  CHECK_THROWS_AS(project_community(s, 2, 2), IndexOutOfRange);
}

TEST_CASE("upward pass conserves counts between layers") {
  auto p = small_problem(62);
  Hyper h;
  auto s = deep_init(p.U, p.I, {5, 3}, p.V, h, 11);
  const auto graphs = build_layer_graphs(p.A, 2);
  SweepOptions opts;
  opts.workers = 2;
  const auto counts = upward_pass(p.Y, graphs, s, 900, opts);

  REQUIRE(counts.x.size() == 2);
  REQUIRE(counts.crt_split.size() == 1);  // one bridge between two layers
  REQUIRE(counts.exposure.size() == 2);

  // Layer-0 evidence is the rating splits plus the base graph splits.
  for (std::size_t j = 0; j < p.U * 5; ++j)
    REQUIRE(counts.x[0][j] ==
            counts.rating.user_comm[j] + counts.edges[0].user_comm[j]);

  // The tables thinning (u,k) land in crt_split[0] (5x3) and, summed with
  // the second graph's splits, in x[1].
  std::uint64_t split_mass = 0;
  for (auto c : counts.crt_split[0]) split_mass += c;
  std::uint64_t x1_mass = 0, edge1_mass = 0;
  for (auto c : counts.x[1]) x1_mass += c;
  for (auto c : counts.edges[1].user_comm) edge1_mass += c;
  REQUIRE(x1_mass == split_mass + edge1_mass);

  // Tables never exceed the counts they summarize.
  std::uint64_t x0_mass = 0;
  for (auto c : counts.x[0]) x0_mass += c;
  REQUIRE(split_mass <= x0_mass);
  REQUIRE(split_mass >= 1);  // simulated data is never empty
}

TEST_CASE("zero evidence draws zero tables") {
  // A user with no ratings and no edges contributes nothing upward.
  std::vector<RatingTriple> triples = {{0, 0, 2}};
  const auto Y = build_ordinal(triples, 3, 2, 3);
  const auto A = build_adjacency({{{0, 1}}}, 3);  // user 2 isolated
  Hyper h;
  auto s = deep_init(3, 2, {2, 2}, 3, h, 5);
  const auto graphs = build_layer_graphs(A, 2);
  SweepOptions opts;
  const auto counts = upward_pass(Y, graphs, s, 7, opts);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(counts.x[0][2 * 2 + k] == 0);
    CHECK(counts.x[1][2 * 2 + k] == 0);
  }
}

TEST_CASE("two-layer chain stays healthy over many sweeps") {
  auto p = small_problem(63);
  Hyper h;
  auto s = deep_init(p.U, p.I, {6, 3}, p.V, h, 2024);
  const auto graphs = build_layer_graphs(p.A, 2);
  SweepOptions opts;
  opts.workers = 4;
  for (int t = 0; t < 30; ++t) deep_sweep(p.Y, graphs, s, 555, opts);
  REQUIRE(s.sweep == 30);
  for (unsigned t = 0; t < 2; ++t) {
    for (double v : s.theta[t].storage()) {
      REQUIRE(std::isfinite(v));
      REQUIRE(v > 0.0);
    }
    for (double v : s.u[t]) REQUIRE(v > 0.0);
    for (double v : s.c_rate[t]) REQUIRE(v > 0.0);
  }
  // Loading columns stay simplices.
  for (unsigned t = 0; t < 2; ++t) {
    const auto& phi = s.phi[t];
    for (std::size_t k = 0; k < phi.cols(); ++k) {
      double total = 0.0;
      for (std::size_t i = 0; i < phi.rows(); ++i) {
        REQUIRE(phi(i, k) >= 0.0);
        total += phi(i, k);
      }
      REQUIRE(total == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
  for (std::uint32_t l = 0; l < p.V; ++l) REQUIRE(s.tm.delta[l] > 0.0);

  // Reproducibility holds for the deep chain too.
  auto s2 = deep_init(p.U, p.I, {6, 3}, p.V, h, 2024);
  SweepOptions o2;
  o2.workers = 1;
  for (int t = 0; t < 30; ++t) deep_sweep(p.Y, graphs, s2, 555, o2);
  for (unsigned t = 0; t < 2; ++t) {
    REQUIRE(s.theta[t].storage() == s2.theta[t].storage());
    REQUIRE(s.phi[t].storage() == s2.phi[t].storage());
    REQUIRE(s.u[t] == s2.u[t]);
    REQUIRE(s.c_rate[t] == s2.c_rate[t]);
  }
}

TEST_CASE("hierarchy construction validates its dimensions") {
  Hyper h;
  CHECK_THROWS_AS(deep_init(5, 5, {}, 3, h, 1), BadDimensions);
  CHECK_THROWS_AS(deep_init(5, 5, {4, 0}, 3, h, 1), BadDimensions);
  CHECK_THROWS_AS(deep_init(0, 5, {4}, 3, h, 1), BadDimensions);
  CHECK_THROWS_AS(deep_init(5, 5, {4}, 0, h, 1), BadDimensions);
}
