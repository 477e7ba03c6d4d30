#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

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
  const std::size_t U = 30, I = 25;
  auto sim = simulate(U, I, 4, 3, h, {0.5, 0.3, 0.2}, seed);
  return {std::move(sim.ratings), std::move(sim.graph), U, I, 3};
}

bool same_state(const OgfaState& a, const OgfaState& b) {
  return a.theta.storage() == b.theta.storage() &&
         a.phi.storage() == b.phi.storage() && a.u == b.u &&
         a.c_user == b.c_user && a.tm.delta == b.tm.delta &&
         a.sweep == b.sweep;
}

}  // namespace

TEST_CASE("sweeps are reproducible from the seed") {
  auto p = small_problem(42);
  Hyper h;
  auto s1 = ogfa_init(p.U, p.I, 5, p.V, h, 1234);
  auto s2 = ogfa_init(p.U, p.I, 5, p.V, h, 1234);
  REQUIRE(same_state(s1, s2));
  SweepOptions opts;
  for (int t = 0; t < 10; ++t) {
    gibbs_sweep(p.Y, p.A, s1, 777, opts);
    gibbs_sweep(p.Y, p.A, s2, 777, opts);
  }
  CHECK(same_state(s1, s2));

  auto s3 = ogfa_init(p.U, p.I, 5, p.V, h, 1234);
  gibbs_sweep(p.Y, p.A, s3, 778, opts);
  gibbs_sweep(p.Y, p.A, s1, 777, opts);
  CHECK_FALSE(s3.theta.storage() == s1.theta.storage());
}

TEST_CASE("worker count never changes a bit") {
  auto p = small_problem(43);
  Hyper h;
  for (const auto scan : {ThetaScan::Frozen, ThetaScan::Sequential}) {
    auto s1 = ogfa_init(p.U, p.I, 6, p.V, h, 9);
    auto s2 = s1;
    SweepOptions o1, o2;
    o1.workers = 1;
    o2.workers = 7;
    o1.theta_scan = o2.theta_scan = scan;
    o1.phi_mh = o2.phi_mh = true;
    for (int t = 0; t < 8; ++t) {
      gibbs_sweep(p.Y, p.A, s1, 55, o1);
      gibbs_sweep(p.Y, p.A, s2, 55, o2);
    }
    REQUIRE(same_state(s1, s2));
  }
}

TEST_CASE("relabeling users relabels the posterior draws with it") {
  // With order-free reductions and per-user streams, permuting the user
  // index while tagging each stream with the original id must permute
  // every user-indexed quantity and leave the rest bit-identical.
  auto p = small_problem(44);
  const std::size_t U = p.U;
  std::vector<std::uint32_t> perm(U);
  std::iota(perm.begin(), perm.end(), 0);
  // Deterministic scramble.
  for (std::size_t i = U - 1; i > 0; --i)
    std::swap(perm[i], perm[(i * 2654435761u) % (i + 1)]);

  // Permuted copies of the data.
  std::vector<RatingTriple> triples2;
  for (std::uint32_t u = 0; u < U; ++u) {
    const auto items = p.Y.row_items(u);
    const auto levels = p.Y.row_levels(u);
    for (std::size_t j = 0; j < items.size(); ++j)
      triples2.push_back({perm[u], items[j], levels[j]});
  }
  const auto Y2 = build_ordinal(triples2, U, p.I, p.V);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges2;
  for (const auto& [a, b] : p.A.edges()) edges2.emplace_back(perm[a], perm[b]);
  const auto A2 = build_adjacency(edges2, U);

  Hyper h;
  auto s1 = ogfa_init(U, p.I, 4, p.V, h, 31);
  OgfaState s2 = s1;
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t k = 0; k < 4; ++k) s2.theta(perm[u], k) = s1.theta(u, k);
    s2.c_user[perm[u]] = s1.c_user[u];
  }
  SweepOptions o1, o2;
  o1.theta_scan = o2.theta_scan = ThetaScan::Frozen;
  o2.user_tags.resize(U);
  for (std::size_t u = 0; u < U; ++u) o2.user_tags[perm[u]] = u;

  for (int t = 0; t < 6; ++t) {
    gibbs_sweep(p.Y, p.A, s1, 100, o1);
    gibbs_sweep(Y2, A2, s2, 100, o2);
  }
  REQUIRE(s1.phi.storage() == s2.phi.storage());
  REQUIRE(s1.u == s2.u);
  REQUIRE(s1.tm.delta == s2.tm.delta);
  for (std::size_t u = 0; u < U; ++u) {
    REQUIRE(s1.c_user[u] == s2.c_user[perm[u]]);
    for (std::size_t k = 0; k < 4; ++k)
      REQUIRE(s1.theta(u, k) == s2.theta(perm[u], k));
  }
}

TEST_CASE("binary data makes both exposure modes identical") {
  // With one level and unit gap, a rated cell's linear coefficient equals
  // the unrated one, so the exact exposure collapses to the constant 1.
  Hyper h;
  auto sim = simulate(25, 20, 3, 1, h, {1.0}, 7);
  auto s1 = ogfa_init(25, 20, 4, 1, h, 2);
  auto s2 = s1;
  SweepOptions o1, o2;
  o1.exposure = ExposureMode::Exact;
  o2.exposure = ExposureMode::Simplified;
  o1.update_thresholds = o2.update_thresholds = false;  // keep the unit gap
  for (int t = 0; t < 15; ++t) {
    gibbs_sweep(sim.ratings, sim.graph, s1, 66, o1);
    gibbs_sweep(sim.ratings, sim.graph, s2, 66, o2);
  }
  REQUIRE(same_state(s1, s2));
}

TEST_CASE("forward-simulated levels follow the ordinal pmf") {
  OgfaState s;
  s.hyper = Hyper{};
  s.tm = from_deltas({0.5, 0.3, 0.2});
  s.theta = Matrix(1, 1);
  s.theta(0, 0) = 1.7;
  s.phi = Matrix(1, 1);
  s.phi(0, 0) = 1.0;
  s.u = {1e-12};
  s.r = {1.0};
  s.c_user = {1.0};

  const int n = 400000;
  std::vector<double> freq(4, 0.0);
  for (int round = 0; round < n; ++round) {
    auto [Y, A] = sample_observations(s, 8080, round);
    const std::uint32_t y =
        Y.row_items(0).empty() ? 0 : Y.row_levels(0)[0];
    freq[y] += 1.0;
  }
  for (std::uint32_t v = 0; v <= 3; ++v)
    CHECK(std::abs(freq[v] / n - pmf(1.7, v, s.tm)) < 0.002);
}

TEST_CASE("forward-simulated edges appear at the linked Bernoulli rate") {
  OgfaState s;
  s.hyper = Hyper{};
  s.tm = from_deltas({1.0});
  s.theta = Matrix(2, 1);
  s.theta(0, 0) = 0.9;
  s.theta(1, 0) = 1.1;
  s.phi = Matrix(1, 1);
  s.phi(0, 0) = 1e-9;  // keep the rating side quiet
  s.u = {0.8};
  s.r = {1.0};
  s.c_user = {1.0, 1.0};
  const double rate = 0.9 * 1.1 * 0.8;

  const int n = 400000;
  int hits = 0;
  for (int round = 0; round < n; ++round) {
    auto [Y, A] = sample_observations(s, 909, round);
    hits += A.has_edge(0, 1) ? 1 : 0;
  }
  CHECK(std::abs(double(hits) / n - -std::expm1(-rate)) < 0.002);
}

TEST_CASE("score prediction averages intensities over states") {
  OgfaState a, b;
  a.theta = Matrix(2, 2);
  a.theta(0, 0) = 1.0;
  a.theta(0, 1) = 2.0;
  a.theta(1, 0) = 0.5;
  a.theta(1, 1) = 0.5;
  a.phi = Matrix(3, 2);
  a.phi(0, 0) = 0.2;
  a.phi(0, 1) = 0.3;
  a.phi(2, 0) = 0.8;
  a.phi(2, 1) = 0.7;
  b = a;
  b.theta(0, 0) = 3.0;  // shifts cell (0,0) by phi(.,0)

  const std::vector<std::uint32_t> users = {0, 1};
  const std::vector<std::uint32_t> items = {0, 2};
  std::vector<OgfaState> states = {a, b};
  const auto scores = predict_scores(states, users, items);
  REQUIRE(scores.rows() == 2);
  REQUIRE(scores.cols() == 2);
  // cell (0,0): mean of 1*0.2+2*0.3 and 3*0.2+2*0.3
  CHECK(scores(0, 0) == doctest::Approx(0.5 * (0.8 + 1.2)).epsilon(1e-15));
  // cell (1,1): user 1 against item 2, identical in both states
  CHECK(scores(1, 1) == doctest::Approx(0.5 * 0.8 + 0.5 * 0.7).epsilon(1e-14));

  CHECK_THROWS_AS(predict_scores({}, users, items), EmptyStateList);
}

TEST_CASE("held-out log-likelihood matches a hand computation") {
  OgfaState s;
  s.theta = Matrix(1, 2);
  s.theta(0, 0) = 1.0;
  s.theta(0, 1) = 0.5;
  s.phi = Matrix(2, 2);
  s.phi(0, 0) = 0.4;
  s.phi(0, 1) = 0.2;
  s.phi(1, 0) = 0.6;
  s.phi(1, 1) = 0.8;
  s.tm = from_deltas({0.6, 0.4});

  const std::vector<RatingTriple> cells = {{0, 0, 2}, {0, 1, 0}};
  const double lam0 = 1.0 * 0.4 + 0.5 * 0.2;
  const double lam1 = 1.0 * 0.6 + 0.5 * 0.8;
  const double want = log_lik(lam0, 2, s.tm) + log_lik(lam1, 0, s.tm);

  std::vector<OgfaState> states = {s};
  CHECK(heldout_loglik(cells, states) == doctest::Approx(want).epsilon(1e-14));
  CHECK(heldout_loglik(cells, s.theta, s.phi, s.tm) ==
        doctest::Approx(want).epsilon(1e-14));
  CHECK_THROWS_AS(heldout_loglik(cells, std::span<const OgfaState>{}),
                  EmptyStateList);
}

TEST_CASE("prior state rejects degenerate shapes") {
  Hyper h;
  CHECK_THROWS_AS(ogfa_init(0, 5, 2, 3, h, 1), BadDimensions);
  CHECK_THROWS_AS(ogfa_init(5, 0, 2, 3, h, 1), BadDimensions);
  CHECK_THROWS_AS(ogfa_init(5, 5, 0, 3, h, 1), BadDimensions);
  CHECK_THROWS_AS(ogfa_init(5, 5, 2, 0, h, 1), BadDimensions);
  CHECK_THROWS_AS(simulate(5, 5, 2, 3, h, {0.5, 0.5}, 1), BadDimensions);
}

TEST_CASE("thresholds move toward the latent mass during sweeps") {
  // Not a correctness oracle, a sanity check: after several sweeps on
  // simulated data all gaps stay positive and the chain keeps its simplex
  // of boundaries strictly ordered.
  auto p = small_problem(45);
  Hyper h;
  auto s = ogfa_init(p.U, p.I, 4, p.V, h, 5);
  SweepOptions opts;
  opts.workers = 2;
  for (int t = 0; t < 25; ++t) gibbs_sweep(p.Y, p.A, s, 321, opts);
  REQUIRE(s.sweep == 25);
  for (std::uint32_t l = 0; l < p.V; ++l) CHECK(s.tm.delta[l] > 0.0);
  for (std::uint32_t v = 0; v < p.V; ++v) CHECK(s.tm.gamma[v] > s.tm.gamma[v + 1]);
  for (double x : s.theta.storage()) CHECK(x > 0.0);
  for (double x : s.phi.storage()) CHECK(x >= 0.0);
}
