#pragma once

#include <cstdint>
#include <vector>

#include "oggbn/ogfa.hpp"

namespace oggbn {

// T-layer hierarchy. Layer t holds user preferences theta[t] (U x K_t),
// community scales u[t], a per-user rate hyper c_rate[t], and a social graph
// equal to the (t+1)-th boolean power of the base graph. phi[0] (I x K_0)
// loads items onto leaf communities; phi[t] (K_{t-1} x K_t) for t >= 1 loads
// layer-(t-1) communities onto layer-t communities, every column a simplex.
// The top layer's prior shape is the vector r.
struct DeepState {
  std::vector<Matrix> theta;
  std::vector<Matrix> phi;
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> c_rate;
  std::vector<double> r;
  ThresholdModel tm;
  Hyper hyper;
  std::vector<std::uint32_t> widths;
  std::uint64_t sweep = 0;

  unsigned depth() const { return static_cast<unsigned>(widths.size()); }
  std::size_t n_users() const { return theta.empty() ? 0 : theta[0].rows(); }
  std::size_t n_items() const { return phi.empty() ? 0 : phi[0].rows(); }
};

// Per-sweep latent bookkeeping. x[t] is the count evidence for theta[t]
// (splits arriving from below plus that layer's graph counts); crt_split[t]
// aggregates the upward table splits from layer t into layer t+1
// (K_t x K_{t+1}, row-major); exposure[t] is the full linear coefficient of
// theta[t] in its conditional rate as of augmentation time.
struct DeepCounts {
  RatingCounts rating;
  std::vector<EdgeCounts> edges;
  std::vector<std::vector<std::uint64_t>> x;
  std::vector<Matrix> exposure;
  std::vector<std::vector<std::uint64_t>> crt_split;
};

// Ancestral prior draw, top layer first. Throws BadDimensions.
DeepState deep_init(std::size_t n_users, std::size_t n_items,
                    const std::vector<std::uint32_t>& widths, std::uint32_t V,
                    const Hyper& hyper, std::uint64_t seed);

// Boolean powers 1..T of the base graph.
std::vector<AdjacencyGraph> build_layer_graphs(const AdjacencyGraph& a,
                                               unsigned T);

// Augments ratings and every layer's edges, then propagates counts upward:
// table draws against each entry's prior shape, split across the layer
// above's communities. Also records each layer's exposure.
DeepCounts upward_pass(const OrdinalMatrix& Y,
                       const std::vector<AdjacencyGraph>& graphs,
                       const DeepState& s, std::uint64_t seed,
                       const SweepOptions& opts);

// Resamples loadings, then preferences and scales top-down against
// exposures rebuilt from the new loadings, then the rate hypers.
void downward_pass(const OrdinalMatrix& Y,
                   const std::vector<AdjacencyGraph>& graphs,
                   const DeepCounts& counts, DeepState& s, std::uint64_t seed,
                   const SweepOptions& opts);

// upward_pass + downward_pass + threshold re-estimation. With one layer this
// runs the exact call sequence of the shallow gibbs_sweep.
void deep_sweep(const OrdinalMatrix& Y,
                const std::vector<AdjacencyGraph>& graphs, DeepState& s,
                std::uint64_t seed, const SweepOptions& opts);

// Item-space footprint of community k at 1-based layer l: the composition
// of loading maps below l applied to that community's column. Sums to 1.
// Throws IndexOutOfRange.
std::vector<double> project_community(const DeepState& s, unsigned l,
                                      std::size_t k);

}  // namespace oggbn
