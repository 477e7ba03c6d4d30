#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oggbn/errors.hpp"
#include "oggbn/rng.hpp"
#include "oggbn/thresholds.hpp"

using namespace oggbn;

TEST_CASE("gap vector builds a strictly decreasing boundary chain") {
  const auto tm = from_deltas({0.5, 0.3, 0.2});
  CHECK(tm.V == 3);
  REQUIRE(tm.gamma.size() == 4);
  CHECK(tm.gamma[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tm.gamma[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tm.gamma[2] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(tm.gamma[3] == 0.0);
  for (std::uint32_t v = 0; v < 3; ++v) CHECK(tm.gamma[v] > tm.gamma[v + 1]);

  CHECK_THROWS_AS(from_deltas({0.5, 0.0}), NonPositiveDelta);
  CHECK_THROWS_AS(from_deltas({0.5, -0.1}), NonPositiveDelta);
  CHECK_THROWS_AS(from_deltas({}), NonPositiveDelta);
}

TEST_CASE("pmf sums to one and telescopes the cdf") {
  RngStream rng(11, 1, 0, 0, 0);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::uint32_t V = 1 + rep % 6;
    std::vector<double> deltas(V);
    for (auto& d : deltas) d = 0.05 + rng.uniform();
    const auto tm = from_deltas(deltas);
    const double rate = std::exp(6.0 * rng.uniform() - 3.0);

    double total = 0.0;
    for (std::uint32_t v = 0; v <= V; ++v) {
      const double p = pmf(rate, v, tm);
      REQUIRE(p >= 0.0);
      REQUIRE(p <= 1.0);
      total += p;
      const double lower = v == 0 ? 0.0 : cdf(rate, v - 1, tm);
      REQUIRE(pmf(rate, v, tm) ==
              doctest::Approx(cdf(rate, v, tm) - lower).epsilon(1e-10));
    }
    REQUIRE(total == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(cdf(rate, V, tm) == 1.0);
  }
}

TEST_CASE("log pmf agrees with the direct pmf and survives tiny rates") {
  const auto tm = from_deltas({0.5, 0.3, 0.2});
  for (const double rate : {1e-300, 1e-12, 1e-4, 0.3, 2.0, 50.0})
    for (std::uint32_t v = 0; v <= 3; ++v) {
      const double ll = log_lik(rate, v, tm);
      REQUIRE(std::isfinite(ll));
      const double p = pmf(rate, v, tm);
      if (p > 1e-290)
        REQUIRE(ll == doctest::Approx(std::log(p)).epsilon(1e-9));
    }
  // At vanishing rate the level-v mass approaches rate * delta_v, a regime
  // where exp-difference arithmetic loses everything.
  const double ll = log_lik(1e-8, 1, tm);
  CHECK(ll == doctest::Approx(std::log(1e-8 * 0.5)).epsilon(1e-7));
}

TEST_CASE("single-level model reduces to the Bernoulli-Poisson link exactly") {
  const auto tm = from_deltas({1.0});
  for (const double rate : {1e-9, 0.01, 0.5, 1.0, 3.0, 40.0}) {
    CHECK(pmf(rate, 0, tm) == std::exp(-rate));
    CHECK(pmf(rate, 1, tm) == -std::expm1(-rate));
    CHECK(cdf(rate, 0, tm) == std::exp(-rate));
  }
}

TEST_CASE("quantization maps intensities through the boundary chain") {
  const auto tm = from_deltas({1.0, 1.0, 1.0});  // gamma = 3,2,1,0
  CHECK(quantize(0.4, tm) == 1);    // 0.4*3 >= 1 but 0.4*2 < 1
  CHECK(quantize(1e-9, tm) == 0);
  CHECK(quantize(5.0, tm) == 3);
  CHECK(quantize(0.2, tm) == 0);    // 0.2*3 < 1
  CHECK(quantize(1.0 / 3, tm) == 1);  // boundary: x*gamma_0 == 1 exactly
  CHECK(quantize(0.5, tm) == 2);      // x*gamma_1 == 1 exactly
  CHECK(quantize(1.0, tm) == 3);      // x*gamma_2 == 1 exactly
  CHECK(quantize(0.9999, tm) == 2);

  // Monotone in x.
  const auto tm2 = from_deltas({0.7, 0.2, 0.4, 0.1});
  std::uint32_t prev = 0;
  for (double x = 1e-6; x < 100.0; x *= 1.27) {
    const auto v = quantize(x, tm2);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(prev == 4);
}

TEST_CASE("latent counts marginalize back to the observed-level pmf") {
  // Summing the joint over the count recovers the level probability:
  // sum_n (rate*delta_y)^n exp(-rate*gamma_{y-1}) / n! = pmf(y).
  const auto tm = from_deltas({0.6, 0.25, 0.15});
  for (const double rate : {0.05, 0.7, 3.0, 12.0})
    for (std::uint32_t y = 1; y <= 3; ++y) {
      const double log_base = -rate * tm.gamma[y - 1];
      double sum = 0.0;
      double log_term = std::log(rate * tm.delta[y - 1]);
      double log_fact = 0.0;
      for (int n = 1; n <= 200; ++n) {
        log_fact += std::log(static_cast<double>(n));
        sum += std::exp(log_base + n * log_term - log_fact);
      }
      REQUIRE(sum == doctest::Approx(pmf(rate, y, tm)).epsilon(1e-12));
    }
}

TEST_CASE("latent count sampler hits the truncated-Poisson mean") {
  const auto tm = from_deltas({0.6, 0.25, 0.15});
  RngStream rng(5, 1, 0, 1, 0);
  CHECK(sample_latent_count(0, 2.0, tm, rng) == 0);

  const double rate = 4.0;           // rate * delta_1 = 2.4
  const double lam = rate * tm.delta[0];
  double sum = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const auto c = sample_latent_count(1, rate, tm, rng);
    REQUIRE(c >= 1);
    sum += static_cast<double>(c);
  }
  CHECK(std::abs(sum / n - lam / -std::expm1(-lam)) < 0.01);
}

TEST_CASE("gap re-estimation maximizes the expected complete log-likelihood") {
  // The objective separates per level: f_l(d) = num_l log d - den_l d,
  // maximized at num_l/den_l. No point of a 10^4-point log grid may do
  // better than the closed form beyond roundoff.
  RngStream rng(17, 1, 0, 2, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::uint32_t V = 1 + rep % 5;
    ThresholdStats stats;
    stats.num.resize(V);
    stats.den.resize(V);
    for (std::uint32_t l = 0; l < V; ++l) {
      stats.num[l] = std::floor(rng.uniform() * 500.0) + 1.0;
      stats.den[l] = 10.0 + 990.0 * rng.uniform();
    }
    const auto tm = em_update(stats);
    for (std::uint32_t l = 0; l < V; ++l) {
      const double d_hat = tm.delta[l];
      const double f_hat =
          stats.num[l] * std::log(d_hat) - stats.den[l] * d_hat;
      for (int g = 0; g < 10000; ++g) {
        const double d = std::exp(-14.0 + 18.0 * (g / 9999.0));
        const double f = stats.num[l] * std::log(d) - stats.den[l] * d;
        REQUIRE(f <= f_hat + 1e-9 * std::abs(f_hat));
      }
    }
  }
}

TEST_CASE("gap re-estimation floors empty levels and rejects bad masses") {
  ThresholdStats stats;
  stats.num = {0.0, 5.0};
  stats.den = {100.0, 50.0};
  const auto tm = em_update(stats);
  CHECK(tm.delta[0] == 1e-12);
  CHECK(tm.delta[1] == doctest::Approx(0.1).epsilon(1e-15));

  ThresholdStats bad;
  bad.num = {1.0};
  bad.den = {0.0};
  CHECK_THROWS_AS(em_update(bad), EmptyDenominator);
  bad.den = {-3.0};
  CHECK_THROWS_AS(em_update(bad), EmptyDenominator);
}

TEST_CASE("log1mexp is accurate on both sides of its split") {
  CHECK(log1mexp(1e-10) ==
        doctest::Approx(std::log(1e-10) - 5e-11).epsilon(1e-9));
  CHECK(log1mexp(50.0) == doctest::Approx(-std::exp(-50.0)).epsilon(1e-9));
  CHECK(log1mexp(0.6931471805599453) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(std::exp(log1mexp(0.3)) ==
        doctest::Approx(1.0 - std::exp(-0.3)).epsilon(1e-12));
}
