#pragma once

#include <cstdint>
#include <vector>

#include "oggbn/rng.hpp"

namespace oggbn {

// Cumulative link for ordinal levels 0..V under multiplicative noise with
// cdf F(x) = exp(-1/x). The level boundaries are carried as their inverses
// gamma_0 > ... > gamma_{V-1} > gamma_V = 0, so that
// P(y <= v | rate) = exp(-rate * gamma_v). delta_v = gamma_{v-1} - gamma_v
// is the per-level gap; every likelihood term factors through it.
struct ThresholdModel {
  std::uint32_t V = 0;
  std::vector<double> gamma;  // V+1 entries, gamma[V] == 0
  std::vector<double> delta;  // V entries, delta[v-1] = gap of level v
};

// Sufficient statistics for one threshold re-estimation step (index l-1
// holds level l):
//   num_l = sum of latent counts over cells rated exactly l,
//   den_l = sum of rates over cells rated at most l.
struct ThresholdStats {
  std::vector<double> num;
  std::vector<double> den;
};

// Builds gamma by suffix sums of the gaps. Throws NonPositiveDelta.
ThresholdModel from_deltas(const std::vector<double>& delta);

// P(y <= v | rate). Throws LevelOutOfRange.
double cdf(double rate, std::uint32_t v, const ThresholdModel& tm);

// P(y = v | rate). Throws LevelOutOfRange.
double pmf(double rate, std::uint32_t v, const ThresholdModel& tm);

// log pmf, stable for tiny rate*delta where the direct difference of
// exponentials cancels. Throws LevelOutOfRange.
double log_lik(double rate, std::uint32_t v, const ThresholdModel& tm);

// Level of a positive intensity x: smallest v with x * gamma_v < 1
// (equivalently x below the v-th boundary 1/gamma_v). Returns a value
// in {0..V}; the top level catches everything at or above 1/gamma_{V-1}.
std::uint32_t quantize(double x, const ThresholdModel& tm);

// Latent count behind an observed level: 0 for y=0, otherwise a
// zero-truncated Poisson with rate rate*delta_y. Throws LevelOutOfRange.
std::uint64_t sample_latent_count(std::uint32_t y, double rate,
                                  const ThresholdModel& tm, RngStream& rng);

// Closed-form maximizer of the expected complete log-likelihood:
// delta_l = num_l / den_l, floored at 1e-12 so gamma stays strictly
// decreasing. Throws EmptyDenominator.
ThresholdModel em_update(const ThresholdStats& stats);

// log(1 - exp(-x)) for x > 0 without cancellation at either end.
double log1mexp(double x);

}  // namespace oggbn
