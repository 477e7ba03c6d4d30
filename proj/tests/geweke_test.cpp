#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "oggbn/ogfa.hpp"

using namespace oggbn;

// Joint-distribution check of the sweep kernel: the forward sampler draws
// (state, data) from the generative model; the successive-conditional chain
// alternates data-given-state redraws with one sweep of state-given-data.
// If the sweep leaves the posterior invariant, every statistic of
// (state, data) has the same mean under both samplers. Run with the exact
// pieces: sequential preference scan, exact exposure, loading tilt
// correction, fixed thresholds.

namespace {

constexpr std::size_t kUsers = 6;
constexpr std::size_t kItems = 5;
constexpr std::uint32_t kComm = 2;
constexpr std::uint32_t kLevels = 3;

struct Stats {
  double theta_mean = 0.0;
  double theta_sq = 0.0;
  double c_user_mean = 0.0;
  double nnz = 0.0;
  double level_sum = 0.0;
  double edges = 0.0;
};

constexpr std::size_t kNumStats = 6;

std::vector<double> flatten(const Stats& s) {
  return {s.theta_mean, s.theta_sq, s.c_user_mean, s.nnz, s.level_sum,
          s.edges};
}

const char* stat_name(std::size_t j) {
  static const char* names[kNumStats] = {"theta_mean", "theta_sq",
                                         "c_user_mean", "nnz",
                                         "level_sum",  "edges"};
  return names[j];
}

Stats measure(const Matrix& theta, const std::vector<double>& c_user,
              const OrdinalMatrix& Y, const AdjacencyGraph& A) {
  Stats s;
  for (double v : theta.storage()) {
    s.theta_mean += v;
    s.theta_sq += v * v;
  }
  s.theta_mean /= static_cast<double>(theta.size());
  s.theta_sq /= static_cast<double>(theta.size());
  for (double v : c_user) s.c_user_mean += v;
  s.c_user_mean /= static_cast<double>(c_user.size());
  s.nnz = static_cast<double>(Y.nnz());
  for (std::size_t u = 0; u < Y.n_users(); ++u)
    for (auto l : Y.row_levels(u)) s.level_sum += static_cast<double>(l);
  s.edges = static_cast<double>(A.n_edges());
  return s;
}

struct Accumulator {
  std::vector<std::vector<double>> rows;
  void add(const Stats& s) { rows.push_back(flatten(s)); }

  std::vector<double> mean() const {
    std::vector<double> m(kNumStats, 0.0);
    for (const auto& r : rows)
      for (std::size_t j = 0; j < kNumStats; ++j) m[j] += r[j];
    for (auto& v : m) v /= static_cast<double>(rows.size());
    return m;
  }

  // Standard error of the mean from independent draws.
  std::vector<double> se_iid() const {
    const auto m = mean();
    std::vector<double> v(kNumStats, 0.0);
    for (const auto& r : rows)
      for (std::size_t j = 0; j < kNumStats; ++j) {
        const double d = r[j] - m[j];
        v[j] += d * d;
      }
    const auto n = static_cast<double>(rows.size());
    std::vector<double> se(kNumStats);
    for (std::size_t j = 0; j < kNumStats; ++j)
      se[j] = std::sqrt(v[j] / (n - 1.0) / n);
    return se;
  }

  // Batch-means standard error for the autocorrelated chain.
  std::vector<double> se_batch(std::size_t n_batches) const {
    const std::size_t n = rows.size();
    const std::size_t b = n / n_batches;
    std::vector<std::vector<double>> bm(n_batches,
                                        std::vector<double>(kNumStats, 0.0));
    for (std::size_t i = 0; i < n_batches * b; ++i)
      for (std::size_t j = 0; j < kNumStats; ++j)
        bm[i / b][j] += rows[i][j] / static_cast<double>(b);
    std::vector<double> grand(kNumStats, 0.0);
    for (const auto& r : bm)
      for (std::size_t j = 0; j < kNumStats; ++j) grand[j] += r[j];
    for (auto& v : grand) v /= static_cast<double>(n_batches);
    std::vector<double> se(kNumStats, 0.0);
    for (const auto& r : bm)
      for (std::size_t j = 0; j < kNumStats; ++j) {
        const double d = r[j] - grand[j];
        se[j] += d * d;
      }
    for (auto& v : se)
      v = std::sqrt(v / static_cast<double>(n_batches - 1) /
                    static_cast<double>(n_batches));
    return se;
  }
};

}  // namespace

TEST_CASE("forward and successive-conditional samplers agree") {
  Hyper hyper;
  hyper.r = 1.0;
  hyper.gamma0 = 1.0;
  hyper.c0 = 1.0;
  hyper.eta = 0.3;
  hyper.e0 = 3.0;
  hyper.f0 = 3.0;
  const std::vector<double> deltas = {0.5, 0.3, 0.2};

  const std::size_t n_rounds = 50000;
  const std::size_t burn = 2000;

  Accumulator fwd;
  for (std::size_t round = 0; round < n_rounds; ++round) {
    const auto sim = simulate(kUsers, kItems, kComm, kLevels, hyper, deltas,
                              900000 + round);
    fwd.add(measure(sim.theta_star, sim.c_user_star, sim.ratings, sim.graph));
  }

  SweepOptions opts;
  opts.workers = 1;
  opts.theta_scan = ThetaScan::Sequential;
  opts.exposure = ExposureMode::Exact;
  opts.phi_mh = true;
  opts.update_thresholds = false;

  OgfaState s = ogfa_init(kUsers, kItems, kComm, kLevels, hyper, 123);
  s.tm = from_deltas(deltas);
  Accumulator chain;
  for (std::size_t round = 0; round < n_rounds + burn; ++round) {
    auto [Y, A] = sample_observations(s, 777, round);
    if (round >= burn) chain.add(measure(s.theta, s.c_user, Y, A));
    gibbs_sweep(Y, A, s, 778, opts);
  }

  const auto mf = fwd.mean();
  const auto sef = fwd.se_iid();
  const auto mc = chain.mean();
  const auto sec = chain.se_batch(50);
  for (std::size_t j = 0; j < kNumStats; ++j) {
    const double se = std::sqrt(sef[j] * sef[j] + sec[j] * sec[j]);
    const double z = (mf[j] - mc[j]) / se;
    std::printf("%-12s forward %10.5f +- %.5f   chain %10.5f +- %.5f   z %+.2f\n",
                stat_name(j), mf[j], sef[j], mc[j], sec[j], z);
    CHECK(std::abs(z) < 4.0);
  }
}
