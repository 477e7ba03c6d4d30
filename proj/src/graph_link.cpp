#include "oggbn/graph_link.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oggbn/errors.hpp"
#include "oggbn/parallel.hpp"

namespace oggbn {

double edge_rate(std::span<const double> theta_a,
                 std::span<const double> theta_b, std::span<const double> u) {
  double rate = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k)
    rate += (theta_a[k] * theta_b[k]) * u[k];
  return rate;
}

EdgeCounts sample_edge_counts(const AdjacencyGraph& g, const Matrix& theta,
                              std::span<const double> u, std::uint64_t seed,
                              std::uint32_t layer, std::uint64_t sweep,
                              const SweepOptions& opts) {
  const std::size_t U = g.n_users();
  const std::size_t K = u.size();
  EdgeCounts counts;
  counts.K = static_cast<std::uint32_t>(K);
  counts.edge_list = g.edges();
  counts.edge_total.assign(counts.edge_list.size(), 0);
  counts.user_comm.assign(U * K, 0);
  counts.comm_total.assign(K, 0);

  parallel_for(counts.edge_list.size(), opts.workers, [&](std::size_t e) {
    const auto [a, b] = counts.edge_list[e];
    std::vector<double> w(K);
    double rate = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      w[k] = (theta(a, k) * theta(b, k)) * u[k];
      rate += w[k];
    }
    if (!(rate > 0.0))
      throw ZeroRateEdge("edge (" + std::to_string(a) + "," +
                         std::to_string(b) + ") has zero rate");
    // Stream follows the unordered pair under any user relabeling.
    const std::uint64_t ta = opts.user_tag(a), tb = opts.user_tag(b);
    const std::uint64_t unit = std::min(ta, tb) * U + std::max(ta, tb);
    RngStream rng = make_stream(seed, Phase::EdgeAug, layer, unit, sweep);
    const std::uint64_t total = sample_ztp(rate, rng);
    counts.edge_total[e] = total;
    std::vector<std::uint64_t> split(K);
    multinomial_thin(total, w, rng, split);
    for (std::size_t k = 0; k < K; ++k) {
      if (split[k] == 0) continue;
      atomic_add(counts.user_comm[a * K + k], split[k]);
      atomic_add(counts.user_comm[b * K + k], split[k]);
      atomic_add(counts.comm_total[k], split[k]);
    }
  });
  return counts;
}

namespace {

// Rate contribution c0 + sum_{u<v} theta_uk theta_vk for every community.
std::vector<double> pair_sums(const Matrix& theta) {
  const auto colsum = stable_colsums(theta);
  const auto colsq = stable_colsums_squared(theta);
  std::vector<double> out(colsum.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = 0.5 * (colsum[k] * colsum[k] - colsq[k]);
  return out;
}

}  // namespace

double sample_community_scale(std::size_t k, const EdgeCounts& counts,
                              const Matrix& theta, double gamma0, double c0,
                              RngStream& rng) {
  const double shape = gamma0 / static_cast<double>(counts.K) +
                       static_cast<double>(counts.comm_total[k]);
  const double rate = c0 + pair_sums(theta)[k];
  return sample_gamma(shape, 1.0 / rate, rng);
}

void sample_community_scales(std::vector<double>& u, const EdgeCounts& counts,
                             const Matrix& theta, double gamma0, double c0,
                             std::uint64_t seed, std::uint32_t layer,
                             std::uint64_t sweep, const SweepOptions& opts) {
  (void)opts;
  const auto pairs = pair_sums(theta);
  const double shape0 = gamma0 / static_cast<double>(counts.K);
  for (std::size_t k = 0; k < u.size(); ++k) {
    RngStream rng = make_stream(seed, Phase::CommScale, layer, k, sweep);
    const double shape = shape0 + static_cast<double>(counts.comm_total[k]);
    u[k] = sample_gamma(shape, 1.0 / (c0 + pairs[k]), rng);
  }
}

}  // namespace oggbn
