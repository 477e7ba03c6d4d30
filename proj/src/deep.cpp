#include "oggbn/deep.hpp"

#include <cmath>
#include <string>

#include "oggbn/errors.hpp"
#include "oggbn/parallel.hpp"

namespace oggbn {

namespace {

constexpr double kShapeFloor = 1e-300;

// (Phi^(t+1) theta^(t+1)_u)_k: prior shape of theta[t](u,k).
double prior_shape(const Matrix& phi_above, const Matrix& theta_above,
                   std::size_t u, std::size_t k) {
  const auto w = phi_above.row(k);
  const auto t = theta_above.row(u);
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * t[j];
  return s;
}

// Full conditional-rate coefficient of theta[t]: below-layer exposure plus
// this layer's all-pairs graph term at current values.
Matrix full_exposure(const Matrix& q_below, const Matrix& theta,
                     const std::vector<double>& u_sc) {
  const std::size_t U = theta.rows();
  const std::size_t K = theta.cols();
  const auto totals = stable_colsums(theta);
  Matrix a(U, K);
  for (std::size_t u = 0; u < U; ++u)
    for (std::size_t k = 0; k < K; ++k)
      a(u, k) = q_below(u, k) + u_sc[k] * (totals[k] - theta(u, k));
  return a;
}

// q_below of layer t+1 from layer t's full exposure: the table counts are
// Poisson in the layer-above shape times log(1 + exposure/rate-hyper).
Matrix lift_exposure(const Matrix& a_full, const std::vector<double>& c_rate,
                     const Matrix& phi_above, std::size_t K_next,
                     int workers) {
  const std::size_t U = a_full.rows();
  const std::size_t K = a_full.cols();
  Matrix q(U, K_next);
  parallel_for(U, workers, [&](std::size_t u) {
    for (std::size_t k = 0; k < K; ++k) {
      const double lifted = std::log1p(a_full(u, k) / c_rate[u]);
      if (lifted == 0.0) continue;
      for (std::size_t kn = 0; kn < K_next; ++kn)
        q(u, kn) += phi_above(k, kn) * lifted;
    }
  });
  return q;
}

}  // namespace

DeepState deep_init(std::size_t n_users, std::size_t n_items,
                    const std::vector<std::uint32_t>& widths, std::uint32_t V,
                    const Hyper& hyper, std::uint64_t seed) {
  const unsigned T = static_cast<unsigned>(widths.size());
  if (n_users < 1 || n_items < 1 || T < 1 || V < 1)
    throw BadDimensions("all of users/items/depth/levels must be >= 1");
  for (auto K : widths)
    if (K < 1) throw BadDimensions("layer width must be >= 1");

  DeepState s;
  s.hyper = hyper;
  s.widths = widths;
  s.tm = from_deltas(std::vector<double>(V, 1.0 / V));
  s.r.assign(widths[T - 1], hyper.r);
  s.theta.resize(T);
  s.phi.resize(T);
  s.u.resize(T);
  s.c_rate.resize(T);

  for (unsigned t = 0; t < T; ++t) {
    const std::size_t rows = t == 0 ? n_items : widths[t - 1];
    const std::size_t K = widths[t];
    s.phi[t] = Matrix(rows, K);
    std::vector<double> alpha(rows, hyper.eta), col(rows);
    for (std::size_t k = 0; k < K; ++k) {
      RngStream rng = make_stream(seed, Phase::InitPhi, t, k, 0);
      sample_dirichlet(alpha, rng, col);
      for (std::size_t i = 0; i < rows; ++i) s.phi[t](i, k) = col[i];
    }
    s.u[t].assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      RngStream rng = make_stream(seed, Phase::InitScale, t, k, 0);
      s.u[t][k] = sample_gamma(hyper.gamma0 / static_cast<double>(K),
                               1.0 / hyper.c0, rng);
    }
  }

  for (unsigned t = T; t-- > 0;) {
    const std::size_t K = widths[t];
    s.theta[t] = Matrix(n_users, K);
    s.c_rate[t].assign(n_users, 0.0);
    for (std::size_t u = 0; u < n_users; ++u) {
      RngStream rng = make_stream(seed, Phase::InitUser, t, u, 0);
      s.c_rate[t][u] = sample_gamma(hyper.e0, 1.0 / hyper.f0, rng);
      for (std::size_t k = 0; k < K; ++k) {
        // Every layer starts at the top-layer marginal. Cascading the fresh
        // sparse loadings into init shapes collapses most lower-layer rows
        // below double range, and an observed edge between two collapsed
        // rows has rate exactly 0 before any augmentation can feed counts.
        const double shape = t + 1 == T ? s.r[k] : hyper.r;
        s.theta[t](u, k) = sample_gamma(shape, 1.0 / s.c_rate[t][u], rng);
      }
    }
  }
  return s;
}

std::vector<AdjacencyGraph> build_layer_graphs(const AdjacencyGraph& a,
                                               unsigned T) {
  std::vector<AdjacencyGraph> graphs;
  graphs.reserve(T);
  for (unsigned t = 0; t < T; ++t) graphs.push_back(adjacency_power(a, t + 1));
  return graphs;
}

DeepCounts upward_pass(const OrdinalMatrix& Y,
                       const std::vector<AdjacencyGraph>& graphs,
                       const DeepState& s, std::uint64_t seed,
                       const SweepOptions& opts) {
  const unsigned T = s.depth();
  const std::size_t U = s.n_users();
  DeepCounts counts;
  counts.edges.resize(T);
  counts.x.resize(T);
  counts.exposure.resize(T);
  counts.crt_split.resize(T > 0 ? T - 1 : 0);

  counts.rating = augment_ratings(Y, s.theta[0], s.phi[0], s.tm, seed, 0,
                                  s.sweep, opts);
  counts.edges[0] =
      sample_edge_counts(graphs[0], s.theta[0], s.u[0], seed, 0, s.sweep, opts);
  const std::size_t K0 = s.widths[0];
  counts.x[0].assign(U * K0, 0);
  for (std::size_t j = 0; j < U * K0; ++j)
    counts.x[0][j] =
        counts.rating.user_comm[j] + counts.edges[0].user_comm[j];
  counts.exposure[0] = full_exposure(
      rating_exposure(Y, s.phi[0], s.tm, opts.exposure, opts.workers),
      s.theta[0], s.u[0]);

  for (unsigned t = 0; t + 1 < T; ++t) {
    const std::size_t Kt = s.widths[t];
    const std::size_t Kn = s.widths[t + 1];
    counts.crt_split[t].assign(Kt * Kn, 0);
    std::vector<std::uint64_t> from_below(U * Kn, 0);

    parallel_for(U, opts.workers, [&](std::size_t u) {
      RngStream rng =
          make_stream(seed, Phase::CrtTables, t, opts.user_tag(u), s.sweep);
      std::vector<double> w(Kn);
      std::vector<std::uint64_t> split(Kn);
      for (std::size_t k = 0; k < Kt; ++k) {
        const std::uint64_t n = counts.x[t][u * Kt + k];
        if (n == 0) continue;
        double shape = prior_shape(s.phi[t + 1], s.theta[t + 1], u, k);
        if (shape < kShapeFloor) shape = kShapeFloor;
        const std::uint64_t tables = sample_crt(n, shape, rng);
        for (std::size_t kn = 0; kn < Kn; ++kn)
          w[kn] = s.phi[t + 1](k, kn) * s.theta[t + 1](u, kn);
        multinomial_thin(tables, w, rng, split);
        for (std::size_t kn = 0; kn < Kn; ++kn) {
          if (split[kn] == 0) continue;
          atomic_add(counts.crt_split[t][k * Kn + kn], split[kn]);
          from_below[u * Kn + kn] += split[kn];  // row owned by this user
        }
      }
    });

    counts.edges[t + 1] = sample_edge_counts(graphs[t + 1], s.theta[t + 1],
                                             s.u[t + 1], seed, t + 1, s.sweep,
                                             opts);
    counts.x[t + 1].assign(U * Kn, 0);
    for (std::size_t j = 0; j < U * Kn; ++j)
      counts.x[t + 1][j] = from_below[j] + counts.edges[t + 1].user_comm[j];
    counts.exposure[t + 1] = full_exposure(
        lift_exposure(counts.exposure[t], s.c_rate[t], s.phi[t + 1], Kn,
                      opts.workers),
        s.theta[t + 1], s.u[t + 1]);
  }
  return counts;
}

void downward_pass(const OrdinalMatrix& Y,
                   const std::vector<AdjacencyGraph>& graphs,
                   const DeepCounts& counts, DeepState& s, std::uint64_t seed,
                   const SweepOptions& opts) {
  const unsigned T = s.depth();
  const std::size_t U = s.n_users();

  {
    Matrix tilt;
    const Matrix* tilt_ptr = nullptr;
    if (opts.phi_mh) {
      tilt = phi_tilt_matrix(Y, s.theta[0], s.tm, opts.workers);
      tilt_ptr = &tilt;
    }
    sample_phi_from_counts(counts.rating.item_comm, s.n_items(), s.widths[0],
                           s.hyper.eta, seed, 0, s.sweep, opts, s.phi[0],
                           tilt_ptr);
  }
  for (unsigned t = 0; t + 1 < T; ++t)
    sample_phi_from_counts(counts.crt_split[t], s.widths[t], s.widths[t + 1],
                           s.hyper.eta, seed, t + 1, s.sweep, opts,
                           s.phi[t + 1]);

  // Exposure chain against the fresh loadings; layer graph terms enter
  // inside the theta update itself.
  std::vector<Matrix> q_below(T);
  q_below[0] = rating_exposure(Y, s.phi[0], s.tm, opts.exposure, opts.workers);
  for (unsigned t = 0; t + 1 < T; ++t)
    q_below[t + 1] =
        lift_exposure(full_exposure(q_below[t], s.theta[t], s.u[t]),
                      s.c_rate[t], s.phi[t + 1], s.widths[t + 1],
                      opts.workers);

  for (unsigned t = T; t-- > 0;) {
    if (t + 1 == T) {
      sample_theta_generic(s.theta[t], nullptr, s.r, counts.x[t], q_below[t],
                           s.u[t], s.c_rate[t], seed, t, s.sweep, opts);
    } else {
      Matrix shape0(U, s.widths[t]);
      parallel_for(U, opts.workers, [&](std::size_t u) {
        for (std::size_t k = 0; k < s.widths[t]; ++k)
          shape0(u, k) = prior_shape(s.phi[t + 1], s.theta[t + 1], u, k);
      });
      sample_theta_generic(s.theta[t], &shape0, {}, counts.x[t], q_below[t],
                           s.u[t], s.c_rate[t], seed, t, s.sweep, opts);
    }
    sample_community_scales(s.u[t], counts.edges[t], s.theta[t],
                            s.hyper.gamma0, s.hyper.c0, seed, t, s.sweep,
                            opts);
  }

  if (opts.resample_user_rate) {
    for (unsigned t = 0; t < T; ++t) {
      if (t + 1 == T) {
        double r_total = 0.0;
        for (double v : s.r) r_total += v;
        resample_rate_hyper(s.c_rate[t], s.theta[t], nullptr, r_total,
                            s.hyper.e0, s.hyper.f0, seed, t, s.sweep, opts);
      } else {
        resample_rate_hyper(s.c_rate[t], s.theta[t], &s.theta[t + 1], 0.0,
                            s.hyper.e0, s.hyper.f0, seed, t, s.sweep, opts);
      }
    }
  }
  (void)graphs;
}

void deep_sweep(const OrdinalMatrix& Y,
                const std::vector<AdjacencyGraph>& graphs, DeepState& s,
                std::uint64_t seed, const SweepOptions& opts) {
  const DeepCounts counts = upward_pass(Y, graphs, s, seed, opts);
  downward_pass(Y, graphs, counts, s, seed, opts);
  if (opts.update_thresholds) s.tm = em_update(counts.rating.stats);
  ++s.sweep;
}

std::vector<double> project_community(const DeepState& s, unsigned l,
                                      std::size_t k) {
  if (l < 1 || l > s.depth())
    throw IndexOutOfRange("layer " + std::to_string(l) + " outside 1.." +
                          std::to_string(s.depth()));
  if (k >= s.widths[l - 1])
    throw IndexOutOfRange("community " + std::to_string(k) +
                          " outside layer of width " +
                          std::to_string(s.widths[l - 1]));
  std::vector<double> v(s.phi[l - 1].rows());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s.phi[l - 1](i, k);
  for (unsigned t = l - 1; t-- > 0;) {
    std::vector<double> next(s.phi[t].rows(), 0.0);
    for (std::size_t i = 0; i < next.size(); ++i) {
      const auto row = s.phi[t].row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * v[j];
      next[i] = acc;
    }
    v = std::move(next);
  }
  return v;
}

}  // namespace oggbn
