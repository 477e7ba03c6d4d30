#include "oggbn/rng.hpp"

#include <cassert>
#include <cfloat>
#include <cmath>
#include <cstring>

#include "oggbn/errors.hpp"

namespace oggbn {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t v, int k) {
  return (v << k) | (v >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint32_t phase,
                     std::uint32_t layer, std::uint64_t unit,
                     std::uint64_t sweep) {
  // Sponge: absorb each address word, then replace the state with the
  // splitmix64 permutation output before the next word. Without the full
  // scramble between words the state stays an xor/add function of the
  // address, and (unit, sweep) pairs with small cross-differences yield
  // identical streams a few sweeps apart, which correlates Gibbs sweeps.
  std::uint64_t x = seed;
  x = splitmix64(x);
  x ^= (static_cast<std::uint64_t>(phase) << 32) | layer;
  x = splitmix64(x);
  x ^= unit;
  x = splitmix64(x);
  x ^= sweep;
  s_[0] = splitmix64(x);
  s_[1] = splitmix64(x);
  s_[2] = splitmix64(x);
  s_[3] = splitmix64(x);
  // xoshiro's all-zero state is absorbing; splitmix output makes it
  // astronomically unlikely, but guard anyway.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[3] = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double sample_normal(RngStream& rng) {
  const double u1 = rng.uniform_pos();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

double sample_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw NonPositiveParameter("gamma shape/scale must be positive");
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a+1) * U^(1/a). log-space keeps the boost factor
    // positive for shapes down to ~1e-3 where U^(1/a) underflows directly.
    const double g = sample_gamma(shape + 1.0, 1.0, rng);
    const double log_boost = std::log(rng.uniform_pos()) / shape;
    double v = g * std::exp(log_boost);
    if (v < DBL_MIN) v = DBL_MIN;
    return v * scale;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v)))
      return d * v * scale;
  }
}

void sample_dirichlet(std::span<const double> alpha, RngStream& rng,
                      std::span<double> out) {
  assert(alpha.size() == out.size());
  double total = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    out[k] = sample_gamma(alpha[k], 1.0, rng);
    total += out[k];
  }
  if (total <= 0.0 || !std::isfinite(total)) {
    // All gamma draws underflowed; fall back to uniform over coordinates.
    const double p = 1.0 / static_cast<double>(alpha.size());
    for (auto& v : out) v = p;
    return;
  }
  for (auto& v : out) v /= total;
}

std::vector<double> sample_dirichlet(std::span<const double> alpha,
                                     RngStream& rng) {
  std::vector<double> out(alpha.size());
  sample_dirichlet(alpha, rng, out);
  return out;
}

namespace {

// Poisson via transformed rejection with squeeze (Hormann's PTRS), valid for
// rate >= 10.
std::uint64_t poisson_ptrs(double rate, RngStream& rng) {
  const double log_rate = std::log(rate);
  const double b = 0.931 + 2.53 * std::sqrt(rate);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform_pos();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + rate + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        k * log_rate - rate - std::lgamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

}  // namespace

std::uint64_t sample_poisson(double rate, RngStream& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw NonPositiveParameter("poisson rate must be positive and finite");
  if (rate < 10.0) {
    const double p0 = std::exp(-rate);
    double p = p0;
    double cdf = p;
    const double u = rng.uniform();
    std::uint64_t k = 0;
    while (u >= cdf) {
      ++k;
      p *= rate / static_cast<double>(k);
      cdf += p;
      if (k > 200) break;  // u in the far tail; cdf saturated in double.
    }
    return k;
  }
  return poisson_ptrs(rate, rng);
}

std::uint64_t sample_ztp(double rate, RngStream& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw NonPositiveParameter("ztp rate must be positive and finite");
  if (rate < 5.0) {
    // P(k) = rate^k / (k! * expm1(rate)), k >= 1. Inversion from k=1.
    double p = rate / std::expm1(rate);
    double cdf = p;
    const double u = rng.uniform();
    std::uint64_t k = 1;
    while (u >= cdf) {
      ++k;
      p *= rate / static_cast<double>(k);
      cdf += p;
      if (k > 200) break;
    }
    return k;
  }
  for (;;) {
    const std::uint64_t k = sample_poisson(rate, rng);
    if (k > 0) return k;
  }
}

std::uint64_t sample_crt(std::uint64_t n, double r, RngStream& rng) {
  if (!(r > 0.0)) throw NonPositiveParameter("crt concentration must be positive");
  if (n == 0) return 0;
  if (n <= 10000) {
    std::uint64_t tables = 0;
    for (std::uint64_t i = 1; i <= n; ++i) {
      const double p = r / (r + static_cast<double>(i) - 1.0);
      if (rng.uniform() < p) ++tables;
    }
    return tables;
  }
  const double dn = static_cast<double>(n);
  const double mu = r * (digamma(r + dn) - digamma(r));
  const double var = mu - r * r * (trigamma(r) - trigamma(r + dn));
  const double sd = std::sqrt(var > 0.0 ? var : 0.0);
  double draw = std::round(mu + sd * sample_normal(rng));
  if (draw < 1.0) draw = 1.0;
  if (draw > dn) draw = dn;
  return static_cast<std::uint64_t>(draw);
}

void multinomial_thin(std::uint64_t n, std::span<const double> weights,
                      RngStream& rng, std::span<std::uint64_t> out) {
  assert(weights.size() == out.size());
  for (auto& c : out) c = 0;
  if (n == 0) return;
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw NonPositiveParameter("multinomial weight is negative");
    total += w;
  }
  if (!(total > 0.0)) throw AllZeroWeights("multinomial weights sum to zero");
  // Per-draw categorical walk. Counts here are augmentation counts (small in
  // expectation), so O(n*K) beats the set-up cost of a binomial splitter.
  for (std::uint64_t t = 0; t < n; ++t) {
    double u = rng.uniform() * total;
    std::size_t k = 0;
    for (; k + 1 < weights.size(); ++k) {
      if (u < weights[k]) break;
      u -= weights[k];
    }
    ++out[k];
  }
}

double digamma(double x) {
  // Recurrence up to x >= 10, then the asymptotic series through 1/x^10;
  // the first omitted term is below 1e-13 there.
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

double trigamma(double x) {
  double result = 0.0;
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += inv * (1.0 + 0.5 * inv +
                   inv2 * (1.0 / 6.0 -
                           inv2 * (1.0 / 30.0 -
                                   inv2 * (1.0 / 42.0 -
                                           inv2 * (1.0 / 30.0 -
                                                   inv2 * 5.0 / 66.0)))));
  return result;
}

}  // namespace oggbn
