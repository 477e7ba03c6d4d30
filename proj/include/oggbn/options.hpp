#pragma once

#include <cstdint>
#include <vector>

namespace oggbn {

// Which per-(user,community) rating exposure enters the preference update.
// Exact carries each rated cell's true linear coefficient
// (boundary inverse of the level below the observation); Simplified uses the
// constant 1 that the loading simplex gives when every cell is treated as
// unrated. The two coincide when V=1 and the top boundary inverse is 1.
enum class ExposureMode { Exact, Simplified };

// Frozen: preference rows update against start-of-phase column totals
// (order-free, parallel). Sequential: in-place systematic scan with live
// totals (single-threaded; the exactness reference).
enum class ThetaScan { Frozen, Sequential };

struct Hyper {
  double r = 1.0;       // top-layer gamma shape, broadcast over communities
  double gamma0 = 1.0;  // total shape mass for community scales (gamma0/K each)
  double c0 = 1.0;      // rate hyper for community scales
  double eta = 0.05;    // Dirichlet concentration for loading columns
  double e0 = 1.0;      // shape hyper of the per-user rate
  double f0 = 1.0;      // rate hyper of the per-user rate
};

struct SweepOptions {
  int workers = 1;
  ExposureMode exposure = ExposureMode::Exact;
  ThetaScan theta_scan = ThetaScan::Frozen;
  bool update_thresholds = true;
  bool resample_user_rate = true;
  // Metropolis correction for the loading columns' exact conditional, which
  // is a Dirichlet tilted by the rated cells' exposure surplus. Off by
  // default: the tilt vanishes at V=1 and is small otherwise.
  bool phi_mh = false;
  // Relabeling of user stream ids (empty = identity). Lets a caller permute
  // users and keep each user's random draws attached to the user.
  std::vector<std::uint64_t> user_tags;

  std::uint64_t user_tag(std::size_t u) const {
    return user_tags.empty() ? u : user_tags[u];
  }
};

}  // namespace oggbn
