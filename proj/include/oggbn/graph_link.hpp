#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "oggbn/matrix.hpp"
#include "oggbn/options.hpp"
#include "oggbn/rng.hpp"
#include "oggbn/sparse.hpp"

namespace oggbn {

// Latent Poisson counts behind the binary edges of one graph. Each unordered
// edge carries one total and one per-community split, shared by both
// endpoints' aggregates; absent pairs carry an implicit zero.
struct EdgeCounts {
  std::uint32_t K = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list;  // u < v
  std::vector<std::uint64_t> edge_total;  // aligned with edge_list
  std::vector<std::uint64_t> user_comm;   // U*K, row-major: counts at (u,k)
  std::vector<std::uint64_t> comm_total;  // K

  std::uint64_t at(std::size_t u, std::size_t k) const {
    return user_comm[u * K + k];
  }
};

// Sum over communities of theta_ak * theta_bk * u_k. The endpoint product is
// taken first so the value does not depend on which endpoint is named first.
double edge_rate(std::span<const double> theta_a,
                 std::span<const double> theta_b, std::span<const double> u);

// For every observed edge: total ~ zero-truncated Poisson at edge_rate, then
// a multinomial split across communities with weights theta*theta*u.
// Parallel over edges; each edge draws from its own stream keyed by the
// (remapped) endpoint pair. Throws ZeroRateEdge on a dead edge.
EdgeCounts sample_edge_counts(const AdjacencyGraph& g, const Matrix& theta,
                              std::span<const double> u, std::uint64_t seed,
                              std::uint32_t layer, std::uint64_t sweep,
                              const SweepOptions& opts);

// Conditional for one community scale: shape gamma0/K + total split count,
// rate c0 + sum over all unordered user pairs of theta_uk*theta_vk. The pair
// sum reduces to (colsum^2 - colsum_of_squares)/2, so no pair enumeration.
double sample_community_scale(std::size_t k, const EdgeCounts& counts,
                              const Matrix& theta, double gamma0, double c0,
                              RngStream& rng);

// All K scales with per-community streams; column reductions are computed
// once with order-free sums.
void sample_community_scales(std::vector<double>& u, const EdgeCounts& counts,
                             const Matrix& theta, double gamma0, double c0,
                             std::uint64_t seed, std::uint32_t layer,
                             std::uint64_t sweep, const SweepOptions& opts);

}  // namespace oggbn
