#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "oggbn/graph_link.hpp"
#include "oggbn/matrix.hpp"
#include "oggbn/options.hpp"
#include "oggbn/rng.hpp"
#include "oggbn/sparse.hpp"
#include "oggbn/thresholds.hpp"

namespace oggbn {

// Joint factorization state: user preferences theta (U x K), item loadings
// phi (I x K, every column a simplex over items), community scales u,
// top-level shapes r, per-user rate hypers c_user, and the ordinal
// thresholds. The rating intensity of cell (u,i) is dot(theta_u, phi_i).
struct OgfaState {
  Matrix theta;
  Matrix phi;
  std::vector<double> u;
  std::vector<double> r;
  std::vector<double> c_user;
  ThresholdModel tm;
  Hyper hyper;
  std::uint64_t sweep = 0;

  std::size_t n_users() const { return theta.rows(); }
  std::size_t n_items() const { return phi.rows(); }
  std::uint32_t k_comm() const { return static_cast<std::uint32_t>(theta.cols()); }
};

// Latent rating counts of one sweep. Cell counts follow the training
// matrix's row-major nonzero order; aggregates are exact integer sums.
struct RatingCounts {
  std::uint32_t K = 0;
  std::vector<std::uint64_t> cell_n;     // per nonzero
  std::vector<std::uint64_t> user_comm;  // U*K
  std::vector<std::uint64_t> item_comm;  // I*K
  std::uint64_t total_n = 0;
  ThresholdStats stats;  // accumulated with this phase's intensities

  std::uint64_t user_at(std::size_t u, std::size_t k) const {
    return user_comm[u * K + k];
  }
  std::uint64_t item_at(std::size_t i, std::size_t k) const {
    return item_comm[i * K + k];
  }
};

// Prior draw of a full state; thresholds start at uniform gaps 1/V.
// Throws BadDimensions on any zero dimension.
OgfaState ogfa_init(std::size_t n_users, std::size_t n_items, std::uint32_t K,
                    std::uint32_t V, const Hyper& hyper, std::uint64_t seed);

// Latent count + per-community split for every training nonzero, plus the
// threshold statistics computed from the same intensities. Each cell draws
// from its own stream, so results are independent of worker count.
RatingCounts augment_ratings(const OrdinalMatrix& Y, const Matrix& theta,
                             const Matrix& phi, const ThresholdModel& tm,
                             std::uint64_t seed, std::uint32_t layer,
                             std::uint64_t sweep, const SweepOptions& opts);
inline RatingCounts augment_ratings(const OrdinalMatrix& Y, const OgfaState& s,
                                    std::uint64_t seed,
                                    const SweepOptions& opts) {
  return augment_ratings(Y, s.theta, s.phi, s.tm, seed, 0, s.sweep, opts);
}

// Per-(user,community) linear coefficient of the preference conditional's
// rate coming from the rating side. Exact mode: top boundary inverse plus
// each rated cell's deficit; Simplified mode: the constant 1.
Matrix rating_exposure(const OrdinalMatrix& Y, const Matrix& phi,
                       const ThresholdModel& tm, ExposureMode mode,
                       int workers);

// Dirichlet resampling of loading columns from count aggregates (rows*K,
// row-major). With tilt non-null, an independence Metropolis step corrects
// for the exposure tilt exp(-<column, tilt column>) on top of the Dirichlet.
void sample_phi_from_counts(std::span<const std::uint64_t> counts,
                            std::size_t rows, std::size_t K, double eta,
                            std::uint64_t seed, std::uint32_t layer,
                            std::uint64_t sweep, const SweepOptions& opts,
                            Matrix& phi, const Matrix* tilt = nullptr);

// Signed tilt of the loading conditional: tilt(i,k) = sum over raters of
// item i of theta_uk * (boundary inverse below the level - top boundary
// inverse). Identically zero when V=1.
Matrix phi_tilt_matrix(const OrdinalMatrix& Y, const Matrix& theta,
                       const ThresholdModel& tm, int workers);

void sample_phi(const RatingCounts& counts, const OrdinalMatrix& Y,
                OgfaState& s, std::uint64_t seed, const SweepOptions& opts);

// Gamma resampling of one preference matrix. shape0_mat (U x K) holds
// per-entry prior shapes when non-null, else shape0_vec (K) is broadcast.
// x holds the count evidence (U*K), q_below the non-graph exposure, u_sc the
// community scales, c_rate the per-user rate hypers. Frozen scan draws
// against start-of-phase column totals in parallel; Sequential updates the
// totals in place user by user.
void sample_theta_generic(Matrix& theta, const Matrix* shape0_mat,
                          std::span<const double> shape0_vec,
                          std::span<const std::uint64_t> x,
                          const Matrix& q_below, std::span<const double> u_sc,
                          std::span<const double> c_rate, std::uint64_t seed,
                          std::uint32_t layer, std::uint64_t sweep,
                          const SweepOptions& opts);

void sample_theta(const RatingCounts& counts, const EdgeCounts& edges,
                  const OrdinalMatrix& Y, OgfaState& s, std::uint64_t seed,
                  const SweepOptions& opts);

// Gamma-gamma resampling of per-user rate hypers: shape e0 + (row sum of
// shape_above, or shape_const when null), rate f0 + row sum of theta.
void resample_rate_hyper(std::vector<double>& c, const Matrix& theta,
                         const Matrix* shape_above, double shape_const,
                         double e0, double f0, std::uint64_t seed,
                         std::uint32_t layer, std::uint64_t sweep,
                         const SweepOptions& opts);

// One full pass: rating augmentation, edge augmentation, loadings,
// preferences, community scales, rate hypers, threshold re-estimation.
// Deterministic given (state, seed, options), independent of worker count.
void gibbs_sweep(const OrdinalMatrix& Y, const AdjacencyGraph& A,
                 OgfaState& s, std::uint64_t seed, const SweepOptions& opts);

struct SimData {
  OrdinalMatrix ratings;
  AdjacencyGraph graph;
  Matrix theta_star;
  Matrix phi_star;
  std::vector<double> u_star;
  std::vector<double> c_user_star;
  ThresholdModel tm_star;
};

// Forward draw of the generative model: priors, then each rating by
// quantizing intensity times multiplicative noise (noise = inverse of a unit
// exponential), then each edge by thresholding a pairwise Poisson count.
SimData simulate(std::size_t n_users, std::size_t n_items, std::uint32_t K,
                 std::uint32_t V, const Hyper& hyper,
                 const std::vector<double>& true_deltas, std::uint64_t seed);

// Redraw (ratings, graph) from an existing state; `round` separates the
// streams of successive redraws.
std::pair<OrdinalMatrix, AdjacencyGraph> sample_observations(
    const OgfaState& s, std::uint64_t seed, std::uint64_t round);

// Mean intensity over states at the requested (user, item) pairs.
// Throws EmptyStateList.
Matrix predict_scores(std::span<const OgfaState> states,
                      std::span<const std::uint32_t> users,
                      std::span<const std::uint32_t> items);

// Sum of ordinal log-likelihoods at the posterior-mean intensity and
// posterior-mean threshold gaps. Cells may carry level 0.
// Throws EmptyStateList.
double heldout_loglik(std::span<const RatingTriple> cells,
                      std::span<const OgfaState> states);

// Same sum against one explicit factorization (works for any model whose
// rating layer is theta * phi^T).
double heldout_loglik(std::span<const RatingTriple> cells, const Matrix& theta,
                      const Matrix& phi, const ThresholdModel& tm);

}  // namespace oggbn
