#include "oggbn/ogfa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oggbn/errors.hpp"
#include "oggbn/parallel.hpp"

namespace oggbn {

namespace {

// Guards against floating underflow of a mathematically positive prior
// shape; never reached with healthy state.
constexpr double kShapeFloor = 1e-300;

OgfaState draw_prior_state(std::size_t U, std::size_t I, std::uint32_t K,
                           const Hyper& hyper,
                           const std::vector<double>& deltas,
                           std::uint64_t seed) {
  OgfaState s;
  s.hyper = hyper;
  s.tm = from_deltas(deltas);
  s.r.assign(K, hyper.r);
  s.theta = Matrix(U, K);
  s.phi = Matrix(I, K);
  s.u.assign(K, 0.0);
  s.c_user.assign(U, 0.0);
  for (std::size_t u = 0; u < U; ++u) {
    RngStream rng = make_stream(seed, Phase::InitUser, 0, u, 0);
    s.c_user[u] = sample_gamma(hyper.e0, 1.0 / hyper.f0, rng);
    for (std::uint32_t k = 0; k < K; ++k)
      s.theta(u, k) = sample_gamma(s.r[k], 1.0 / s.c_user[u], rng);
  }
  std::vector<double> alpha(I, hyper.eta), col(I);
  for (std::uint32_t k = 0; k < K; ++k) {
    RngStream rng = make_stream(seed, Phase::InitPhi, 0, k, 0);
    sample_dirichlet(alpha, rng, col);
    for (std::size_t i = 0; i < I; ++i) s.phi(i, k) = col[i];
  }
  for (std::uint32_t k = 0; k < K; ++k) {
    RngStream rng = make_stream(seed, Phase::InitScale, 0, k, 0);
    s.u[k] = sample_gamma(hyper.gamma0 / K, 1.0 / hyper.c0, rng);
  }
  return s;
}

}  // namespace

OgfaState ogfa_init(std::size_t n_users, std::size_t n_items, std::uint32_t K,
                    std::uint32_t V, const Hyper& hyper, std::uint64_t seed) {
  if (n_users < 1 || n_items < 1 || K < 1 || V < 1)
    throw BadDimensions("all of users/items/communities/levels must be >= 1");
  const std::vector<double> deltas(V, 1.0 / V);
  return draw_prior_state(n_users, n_items, K, hyper, deltas, seed);
}

RatingCounts augment_ratings(const OrdinalMatrix& Y, const Matrix& theta,
                             const Matrix& phi, const ThresholdModel& tm,
                             std::uint64_t seed, std::uint32_t layer,
                             std::uint64_t sweep, const SweepOptions& opts) {
  const std::size_t U = Y.n_users();
  const std::size_t I = Y.n_items();
  const std::size_t K = theta.cols();
  const std::uint32_t V = tm.V;

  RatingCounts rc;
  rc.K = static_cast<std::uint32_t>(K);
  rc.cell_n.assign(Y.nnz(), 0);
  rc.user_comm.assign(U * K, 0);
  rc.item_comm.assign(I * K, 0);

  std::vector<std::uint64_t> num_acc(V, 0);
  Matrix level_rate(U, V);  // per-user intensity mass at each observed level

  // Cell offsets in row-major nonzero order.
  std::vector<std::size_t> row_start(U + 1, 0);
  for (std::size_t u = 0; u < U; ++u)
    row_start[u + 1] = row_start[u] + Y.row_items(u).size();

  parallel_for(U, opts.workers, [&](std::size_t u) {
    const auto items = Y.row_items(u);
    const auto levels = Y.row_levels(u);
    const auto theta_u = theta.row(u);
    std::vector<double> w(K);
    std::vector<std::uint64_t> split(K);
    for (std::size_t j = 0; j < items.size(); ++j) {
      const std::uint32_t i = items[j];
      const std::uint32_t y = levels[j];
      double lambda = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        w[k] = theta_u[k] * phi(i, k);
        lambda += w[k];
      }
      const std::uint64_t unit = opts.user_tag(u) * I + i;
      RngStream rng = make_stream(seed, Phase::RatingAug, layer, unit, sweep);
      const std::uint64_t n = sample_latent_count(y, lambda, tm, rng);
      rc.cell_n[row_start[u] + j] = n;
      multinomial_thin(n, w, rng, split);
      for (std::size_t k = 0; k < K; ++k) {
        if (split[k] == 0) continue;
        rc.user_comm[u * K + k] += split[k];  // row owned by this user
        atomic_add(rc.item_comm[i * K + k], split[k]);
      }
      atomic_add(num_acc[y - 1], n);
      level_rate(u, y - 1) += lambda;
    }
  });

  rc.total_n = std::accumulate(num_acc.begin(), num_acc.end(),
                               std::uint64_t{0});
  rc.stats.num.assign(V, 0.0);
  for (std::uint32_t l = 0; l < V; ++l)
    rc.stats.num[l] = static_cast<double>(num_acc[l]);

  // den_l = (total intensity over all U*I cells) - (intensity at levels > l).
  // The total collapses to sum_k colsum(theta)_k * colsum(phi)_k; per-level
  // masses reduce over users with order-free sums so user relabeling cannot
  // shift a bit.
  const auto theta_cols = stable_colsums(theta);
  const auto phi_cols = stable_colsums(phi);
  double total_rate = 0.0;
  for (std::size_t k = 0; k < K; ++k)
    total_rate += theta_cols[k] * phi_cols[k];
  const auto level_mass = stable_colsums(level_rate);
  rc.stats.den.assign(V, 0.0);
  double above = 0.0;
  for (std::uint32_t l = V; l-- > 0;) {
    rc.stats.den[l] = total_rate - above;
    above += level_mass[l];
  }
  return rc;
}

Matrix rating_exposure(const OrdinalMatrix& Y, const Matrix& phi,
                       const ThresholdModel& tm, ExposureMode mode,
                       int workers) {
  const std::size_t U = Y.n_users();
  const std::size_t K = phi.cols();
  Matrix q(U, K);
  const double base = mode == ExposureMode::Simplified ? 1.0 : tm.gamma[0];
  for (auto& v : q.storage()) v = base;
  if (mode == ExposureMode::Simplified) return q;
  parallel_for(U, workers, [&](std::size_t u) {
    const auto items = Y.row_items(u);
    const auto levels = Y.row_levels(u);
    for (std::size_t j = 0; j < items.size(); ++j) {
      // A cell rated y replaces its no-interaction coefficient gamma_0 with
      // gamma_{y-1}; the difference is exactly zero when V=1.
      const double coef = tm.gamma[levels[j] - 1] - tm.gamma[0];
      if (coef == 0.0) continue;
      const std::uint32_t i = items[j];
      for (std::size_t k = 0; k < K; ++k) q(u, k) += phi(i, k) * coef;
    }
  });
  return q;
}

Matrix phi_tilt_matrix(const OrdinalMatrix& Y, const Matrix& theta,
                       const ThresholdModel& tm, int workers) {
  const std::size_t I = Y.n_items();
  const std::size_t K = theta.cols();
  Matrix tilt(I, K);
  parallel_for(I, workers, [&](std::size_t i) {
    const auto users = Y.col_users(i);
    const auto levels = Y.col_levels(i);
    for (std::size_t j = 0; j < users.size(); ++j) {
      const double coef = tm.gamma[levels[j] - 1] - tm.gamma[0];
      if (coef == 0.0) continue;
      const std::uint32_t u = users[j];
      for (std::size_t k = 0; k < K; ++k) tilt(i, k) += theta(u, k) * coef;
    }
  });
  return tilt;
}

void sample_phi_from_counts(std::span<const std::uint64_t> counts,
                            std::size_t rows, std::size_t K, double eta,
                            std::uint64_t seed, std::uint32_t layer,
                            std::uint64_t sweep, const SweepOptions& opts,
                            Matrix& phi, const Matrix* tilt) {
  parallel_for(K, opts.workers, [&](std::size_t k) {
    RngStream rng = make_stream(seed, Phase::Phi, layer, k, sweep);
    std::vector<double> alpha(rows), col(rows);
    for (std::size_t i = 0; i < rows; ++i)
      alpha[i] = eta + static_cast<double>(counts[i * K + k]);
    sample_dirichlet(alpha, rng, col);
    if (tilt != nullptr) {
      // Independence Metropolis against the tilted target: the Dirichlet
      // part cancels, leaving the linear exposure term.
      double log_acc = 0.0;
      for (std::size_t i = 0; i < rows; ++i)
        log_acc += (phi(i, k) - col[i]) * (*tilt)(i, k);
      if (!(std::log(rng.uniform_pos()) < log_acc)) return;  // keep current
    }
    for (std::size_t i = 0; i < rows; ++i) phi(i, k) = col[i];
  });
}

void sample_phi(const RatingCounts& counts, const OrdinalMatrix& Y,
                OgfaState& s, std::uint64_t seed, const SweepOptions& opts) {
  Matrix tilt;
  const Matrix* tilt_ptr = nullptr;
  if (opts.phi_mh) {
    tilt = phi_tilt_matrix(Y, s.theta, s.tm, opts.workers);
    tilt_ptr = &tilt;
  }
  sample_phi_from_counts(counts.item_comm, s.n_items(), s.k_comm(),
                         s.hyper.eta, seed, 0, s.sweep, opts, s.phi, tilt_ptr);
}

void sample_theta_generic(Matrix& theta, const Matrix* shape0_mat,
                          std::span<const double> shape0_vec,
                          std::span<const std::uint64_t> x,
                          const Matrix& q_below, std::span<const double> u_sc,
                          std::span<const double> c_rate, std::uint64_t seed,
                          std::uint32_t layer, std::uint64_t sweep,
                          const SweepOptions& opts) {
  const std::size_t U = theta.rows();
  const std::size_t K = theta.cols();
  std::vector<double> totals = stable_colsums(theta);

  auto draw_row = [&](std::size_t u, RngStream& rng, auto&& read_current,
                      auto&& write) {
    for (std::size_t k = 0; k < K; ++k) {
      const double cur = read_current(u, k);
      double shape = (shape0_mat != nullptr ? (*shape0_mat)(u, k)
                                            : shape0_vec[k]) +
                     static_cast<double>(x[u * K + k]);
      if (shape < kShapeFloor) shape = kShapeFloor;
      const double rate =
          c_rate[u] + q_below(u, k) + u_sc[k] * (totals[k] - cur);
      write(u, k, sample_gamma(shape, 1.0 / rate, rng));
    }
  };

  if (opts.theta_scan == ThetaScan::Sequential) {
    for (std::size_t u = 0; u < U; ++u) {
      RngStream rng =
          make_stream(seed, Phase::Theta, layer, opts.user_tag(u), sweep);
      draw_row(
          u, rng, [&](std::size_t uu, std::size_t k) { return theta(uu, k); },
          [&](std::size_t uu, std::size_t k, double v) {
            totals[k] += v - theta(uu, k);
            theta(uu, k) = v;
          });
    }
    return;
  }
  Matrix next(U, K);
  parallel_for(U, opts.workers, [&](std::size_t u) {
    RngStream rng =
        make_stream(seed, Phase::Theta, layer, opts.user_tag(u), sweep);
    draw_row(
        u, rng, [&](std::size_t uu, std::size_t k) { return theta(uu, k); },
        [&](std::size_t uu, std::size_t k, double v) { next(uu, k) = v; });
  });
  theta = std::move(next);
}

void sample_theta(const RatingCounts& counts, const EdgeCounts& edges,
                  const OrdinalMatrix& Y, OgfaState& s, std::uint64_t seed,
                  const SweepOptions& opts) {
  const std::size_t U = s.n_users();
  const std::size_t K = s.k_comm();
  std::vector<std::uint64_t> x(U * K);
  for (std::size_t j = 0; j < x.size(); ++j)
    x[j] = counts.user_comm[j] + edges.user_comm[j];
  const Matrix q = rating_exposure(Y, s.phi, s.tm, opts.exposure, opts.workers);
  sample_theta_generic(s.theta, nullptr, s.r, x, q, s.u, s.c_user, seed, 0,
                       s.sweep, opts);
}

void resample_rate_hyper(std::vector<double>& c, const Matrix& theta,
                         const Matrix* shape_above, double shape_const,
                         double e0, double f0, std::uint64_t seed,
                         std::uint32_t layer, std::uint64_t sweep,
                         const SweepOptions& opts) {
  const std::size_t U = theta.rows();
  parallel_for(U, opts.workers, [&](std::size_t u) {
    double shape = e0;
    if (shape_above != nullptr) {
      const auto row = shape_above->row(u);
      for (double v : row) shape += v;
    } else {
      shape += shape_const;
    }
    double rate = f0;
    for (double v : theta.row(u)) rate += v;
    RngStream rng =
        make_stream(seed, Phase::UserRate, layer, opts.user_tag(u), sweep);
    c[u] = sample_gamma(shape, 1.0 / rate, rng);
  });
}

void gibbs_sweep(const OrdinalMatrix& Y, const AdjacencyGraph& A,
                 OgfaState& s, std::uint64_t seed, const SweepOptions& opts) {
  const RatingCounts rc = augment_ratings(Y, s, seed, opts);
  const EdgeCounts ec =
      sample_edge_counts(A, s.theta, s.u, seed, 0, s.sweep, opts);
  sample_phi(rc, Y, s, seed, opts);
  sample_theta(rc, ec, Y, s, seed, opts);
  sample_community_scales(s.u, ec, s.theta, s.hyper.gamma0, s.hyper.c0, seed,
                          0, s.sweep, opts);
  if (opts.resample_user_rate) {
    double r_total = 0.0;
    for (double v : s.r) r_total += v;
    resample_rate_hyper(s.c_user, s.theta, nullptr, r_total, s.hyper.e0,
                        s.hyper.f0, seed, 0, s.sweep, opts);
  }
  if (opts.update_thresholds) s.tm = em_update(rc.stats);
  ++s.sweep;
}

std::pair<OrdinalMatrix, AdjacencyGraph> sample_observations(
    const OgfaState& s, std::uint64_t seed, std::uint64_t round) {
  const std::size_t U = s.n_users();
  const std::size_t I = s.n_items();
  const std::size_t K = s.k_comm();
  std::vector<RatingTriple> triples;
  for (std::size_t u = 0; u < U; ++u) {
    RngStream rng = make_stream(seed, Phase::SimRatings, 0, u, round);
    const auto theta_u = s.theta.row(u);
    for (std::size_t i = 0; i < I; ++i) {
      double lambda = 0.0;
      for (std::size_t k = 0; k < K; ++k) lambda += theta_u[k] * s.phi(i, k);
      // Multiplicative noise with cdf exp(-1/x) is the inverse of a unit
      // exponential draw.
      const double noise = 1.0 / sample_gamma(1.0, 1.0, rng);
      const std::uint32_t y = quantize(lambda * noise, s.tm);
      if (y > 0)
        triples.push_back({static_cast<std::uint32_t>(u),
                           static_cast<std::uint32_t>(i), y});
    }
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t a = 0; a < U; ++a) {
    for (std::size_t b = a + 1; b < U; ++b) {
      RngStream rng = make_stream(seed, Phase::SimEdges, 0, a * U + b, round);
      const double rate = edge_rate(s.theta.row(a), s.theta.row(b), s.u);
      if (rate > 0.0 && sample_poisson(rate, rng) >= 1)
        edges.emplace_back(static_cast<std::uint32_t>(a),
                           static_cast<std::uint32_t>(b));
    }
  }
  return {build_ordinal(triples, U, I, s.tm.V),
          build_adjacency(edges, U)};
}

SimData simulate(std::size_t n_users, std::size_t n_items, std::uint32_t K,
                 std::uint32_t V, const Hyper& hyper,
                 const std::vector<double>& true_deltas, std::uint64_t seed) {
  if (n_users < 1 || n_items < 1 || K < 1 || V < 1 || true_deltas.size() != V)
    throw BadDimensions("bad simulation dimensions");
  OgfaState s = draw_prior_state(n_users, n_items, K, hyper, true_deltas, seed);
  auto [ratings, graph] = sample_observations(s, seed, 0);
  SimData d;
  d.ratings = std::move(ratings);
  d.graph = std::move(graph);
  d.theta_star = std::move(s.theta);
  d.phi_star = std::move(s.phi);
  d.u_star = std::move(s.u);
  d.c_user_star = std::move(s.c_user);
  d.tm_star = std::move(s.tm);
  return d;
}

Matrix predict_scores(std::span<const OgfaState> states,
                      std::span<const std::uint32_t> users,
                      std::span<const std::uint32_t> items) {
  if (states.empty()) throw EmptyStateList("no states to predict from");
  Matrix out(users.size(), items.size());
  for (const OgfaState& s : states) {
    for (std::size_t a = 0; a < users.size(); ++a) {
      const auto theta_u = s.theta.row(users[a]);
      for (std::size_t b = 0; b < items.size(); ++b) {
        double lambda = 0.0;
        for (std::size_t k = 0; k < theta_u.size(); ++k)
          lambda += theta_u[k] * s.phi(items[b], k);
        out(a, b) += lambda;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(states.size());
  for (auto& v : out.storage()) v *= inv;
  return out;
}

double heldout_loglik(std::span<const RatingTriple> cells,
                      std::span<const OgfaState> states) {
  if (states.empty()) throw EmptyStateList("no states to score with");
  const std::uint32_t V = states[0].tm.V;
  std::vector<double> mean_delta(V, 0.0);
  for (const OgfaState& s : states)
    for (std::uint32_t l = 0; l < V; ++l) mean_delta[l] += s.tm.delta[l];
  for (auto& d : mean_delta) d /= static_cast<double>(states.size());
  const ThresholdModel tm = from_deltas(mean_delta);

  double ll = 0.0;
  const double inv = 1.0 / static_cast<double>(states.size());
  for (const auto& cell : cells) {
    double lambda = 0.0;
    for (const OgfaState& s : states) {
      const auto theta_u = s.theta.row(cell.user);
      for (std::size_t k = 0; k < theta_u.size(); ++k)
        lambda += theta_u[k] * s.phi(cell.item, k);
    }
    ll += log_lik(lambda * inv, cell.level, tm);
  }
  return ll;
}

double heldout_loglik(std::span<const RatingTriple> cells, const Matrix& theta,
                      const Matrix& phi, const ThresholdModel& tm) {
  double ll = 0.0;
  for (const auto& cell : cells) {
    const auto theta_u = theta.row(cell.user);
    double lambda = 0.0;
    for (std::size_t k = 0; k < theta_u.size(); ++k)
      lambda += theta_u[k] * phi(cell.item, k);
    ll += log_lik(lambda, cell.level, tm);
  }
  return ll;
}

}  // namespace oggbn
