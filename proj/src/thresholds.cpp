#include "oggbn/thresholds.hpp"

#include <cmath>
#include <string>

#include "oggbn/errors.hpp"

namespace oggbn {

namespace {

constexpr double kDeltaFloor = 1e-12;

void check_level(std::uint32_t v, const ThresholdModel& tm) {
  if (v > tm.V)
    throw LevelOutOfRange("level " + std::to_string(v) + " above V=" +
                          std::to_string(tm.V));
}

}  // namespace

double log1mexp(double x) {
  // Split at ln 2: expm1 is accurate for small x, log1p(-exp(-x)) above.
  return x > 0.6931471805599453 ? std::log1p(-std::exp(-x))
                                : std::log(-std::expm1(-x));
}

ThresholdModel from_deltas(const std::vector<double>& delta) {
  if (delta.empty()) throw NonPositiveDelta("need at least one level gap");
  ThresholdModel tm;
  tm.V = static_cast<std::uint32_t>(delta.size());
  for (std::size_t l = 0; l < delta.size(); ++l) {
    if (!(delta[l] > 0.0))
      throw NonPositiveDelta("gap for level " + std::to_string(l + 1) +
                             " must be positive");
  }
  tm.delta = delta;
  tm.gamma.assign(tm.V + 1, 0.0);
  for (std::uint32_t v = tm.V; v-- > 0;)
    tm.gamma[v] = tm.gamma[v + 1] + delta[v];
  return tm;
}

double cdf(double rate, std::uint32_t v, const ThresholdModel& tm) {
  check_level(v, tm);
  return std::exp(-rate * tm.gamma[v]);
}

double pmf(double rate, std::uint32_t v, const ThresholdModel& tm) {
  check_level(v, tm);
  if (v == 0) return std::exp(-rate * tm.gamma[0]);
  // exp(-rate*gamma_v) * (1 - exp(-rate*delta_v)); at v=V the first factor
  // is exactly 1 because gamma_V == 0.
  return std::exp(-rate * tm.gamma[v]) * (-std::expm1(-rate * tm.delta[v - 1]));
}

double log_lik(double rate, std::uint32_t v, const ThresholdModel& tm) {
  check_level(v, tm);
  if (v == 0) return -rate * tm.gamma[0];
  return -rate * tm.gamma[v] + log1mexp(rate * tm.delta[v - 1]);
}

std::uint32_t quantize(double x, const ThresholdModel& tm) {
  // Boundary v sits at 1/gamma_v; x*gamma_v < 1 avoids the division.
  for (std::uint32_t v = 0; v < tm.V; ++v)
    if (x * tm.gamma[v] < 1.0) return v;
  return tm.V;
}

std::uint64_t sample_latent_count(std::uint32_t y, double rate,
                                  const ThresholdModel& tm, RngStream& rng) {
  check_level(y, tm);
  if (y == 0) return 0;
  return sample_ztp(rate * tm.delta[y - 1], rng);
}

ThresholdModel em_update(const ThresholdStats& stats) {
  const std::size_t V = stats.num.size();
  std::vector<double> delta(V);
  for (std::size_t l = 0; l < V; ++l) {
    if (!(stats.den[l] > 0.0))
      throw EmptyDenominator("level " + std::to_string(l + 1) +
                             " has zero rate mass");
    delta[l] = stats.num[l] / stats.den[l];
    if (delta[l] < kDeltaFloor) delta[l] = kDeltaFloor;
  }
  return from_deltas(delta);
}

}  // namespace oggbn
