#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace oggbn {

// Deterministic, splittable random stream. A stream is addressed by
// (seed, phase, layer, unit, sweep); equal addresses yield equal sequences on
// every run regardless of how work is scheduled across threads. The generator
// is xoshiro256++ whose state is derived from the address with a splitmix64
// sponge, so nearby addresses give statistically unrelated streams.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t phase, std::uint32_t layer,
            std::uint64_t unit, std::uint64_t sweep);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit mantissa.
  double uniform();
  // Uniform in (0, 1); safe under log().
  double uniform_pos();

 private:
  std::uint64_t s_[4];
};

// Stream address space: one phase id per sampling phase so that streams of
// different phases never collide even at equal (layer, unit, sweep).
enum class Phase : std::uint32_t {
  InitUser = 1,    // per-user rate hyper + preference row
  InitPhi = 2,     // per-column loading draw
  InitScale = 3,   // per-community scale draw
  RatingAug = 4,   // per-cell latent rating counts
  EdgeAug = 5,     // per-edge latent graph counts
  Phi = 6,         // loading columns
  Theta = 7,       // preference rows
  CommScale = 8,   // community scales
  UserRate = 9,    // per-user rate hypers
  CrtTables = 10,  // upward table counts and their split
  SimRatings = 11, // forward simulation of ratings
  SimEdges = 12,   // forward simulation of edges
  DataSplit = 13,  // train/test shuffling
};

inline RngStream make_stream(std::uint64_t seed, Phase phase,
                             std::uint32_t layer, std::uint64_t unit,
                             std::uint64_t sweep) {
  return RngStream(seed, static_cast<std::uint32_t>(phase), layer, unit, sweep);
}

// Standard normal via Box-Muller (cosine branch, two uniforms per draw).
double sample_normal(RngStream& rng);

// Gamma(shape, scale). Marsaglia-Tsang for shape >= 1; shapes below 1 use the
// boost Gamma(a) = Gamma(a+1) * U^(1/a), evaluated in log space so draws stay
// strictly positive down to shape ~1e-3 (underflow clamps to DBL_MIN).
// Throws NonPositiveParameter on shape <= 0 or scale <= 0.
double sample_gamma(double shape, double scale, RngStream& rng);

// Dirichlet over alpha.size() coordinates (normalized gamma draws). Output
// sums to 1 within a few ulps. Throws NonPositiveParameter on any alpha <= 0.
void sample_dirichlet(std::span<const double> alpha, RngStream& rng,
                      std::span<double> out);
std::vector<double> sample_dirichlet(std::span<const double> alpha,
                                     RngStream& rng);

// Poisson(rate): sequential inversion below rate 10, transformed rejection
// (PTRS) above. Throws NonPositiveParameter on rate <= 0 or non-finite rate.
std::uint64_t sample_poisson(double rate, RngStream& rng);

// Zero-truncated Poisson(rate): cdf inversion below rate 5 (handles rates
// down to denormals; as rate -> 0 the draw is 1 almost surely), rejection of
// Poisson zeros above. Never returns 0.
std::uint64_t sample_ztp(double rate, RngStream& rng);

// Number of occupied tables in a Chinese-restaurant process with n customers
// and concentration r: sum of Bernoulli(r/(r+i-1)), i=1..n. Exact for
// n <= 10^4; above that a normal approximation with continuity correction
// (mean/variance via digamma/trigamma) is used, clamped to [1, n].
// n=0 returns 0. Throws NonPositiveParameter on r <= 0.
std::uint64_t sample_crt(std::uint64_t n, double r, RngStream& rng);

// Split n draws across weights.size() categories with probability w_k/sum(w).
// out receives counts that always sum to n. Throws AllZeroWeights when no
// weight is positive, NonPositiveParameter on negative weights.
void multinomial_thin(std::uint64_t n, std::span<const double> weights,
                      RngStream& rng, std::span<std::uint64_t> out);

double digamma(double x);
double trigamma(double x);

}  // namespace oggbn
