#include "mfclt/limitlaw.hpp"

#include "mfclt/parallel.hpp"

#include <cmath>

namespace mfclt {

namespace {

// Per-node inverse propagators and cloud means of b03, shared by all samples
// of one realization.
struct S0Context {
  std::vector<Eigen::MatrixXd> inv_propagator;
  std::vector<Vec> mean_b03;
};

S0Context make_s0_context(const ModelSpec& spec, const CommonFactorRealization& common) {
  const int L = common.steps();
  S0Context ctx;
  ctx.inv_propagator.resize(static_cast<std::size_t>(L) + 1);
  ctx.mean_b03.resize(static_cast<std::size_t>(L) + 1);
  for (int node = 0; node <= L; ++node) {
    const std::size_t s = static_cast<std::size_t>(node);
    if (spec.dim_y == 1) {
      ctx.inv_propagator[s] =
          Eigen::MatrixXd::Constant(1, 1, 1.0 / common.exp_integrator[s](0, 0));
    } else {
      ctx.inv_propagator[s] = common.exp_integrator[s].inverse();
    }
    ctx.mean_b03[s] = b03_cloud_mean(spec, common.y_path[s], common.view_at(node));
  }
  return ctx;
}

std::vector<Vec> s0_path_with_context(const ModelSpec& spec, const CommonFactorRealization& common,
                                      const S0Context& ctx, const ParticlePath& path) {
  const int L = common.steps();
  if (path.steps() != L) throw ConfigError("compute_s0_path: grid mismatch");
  const double dt = path.dt;

  // Trapezoidal rule on g_s = E_s^{-1} b03_centered(Y_s, mu_s, X_s), then
  // h_t = E_t * cumulative integral.
  std::vector<Vec> g(static_cast<std::size_t>(L) + 1);
  for (int node = 0; node <= L; ++node) {
    const std::size_t s = static_cast<std::size_t>(node);
    const Vec centered =
        spec.derivatives.b03(common.y_path[s], common.view_at(node), path.states[s]) -
        ctx.mean_b03[s];
    g[s] = ctx.inv_propagator[s] * centered;
  }
  std::vector<Vec> h(static_cast<std::size_t>(L) + 1);
  Vec integral = Vec::Zero(spec.dim_y);
  h[0] = integral;
  for (int node = 1; node <= L; ++node) {
    const std::size_t s = static_cast<std::size_t>(node);
    integral += 0.5 * dt * (g[s - 1] + g[s]);
    h[s] = common.exp_integrator[s] * integral;
  }
  return h;
}

}  // namespace

std::vector<Vec> compute_s0_path(const ModelSpec& spec, const CommonFactorRealization& common,
                                 const ParticlePath& path) {
  const S0Context ctx = make_s0_context(spec, common);
  return s0_path_with_context(spec, common, ctx, path);
}

void compute_s0_paths(const ModelSpec& spec, const CommonFactorRealization& common,
                      std::span<KernelPathSample> samples, int threads) {
  const S0Context ctx = make_s0_context(spec, common);
  parallel_for(static_cast<int>(samples.size()), threads, [&](int j) {
    auto& sample = samples[static_cast<std::size_t>(j)];
    sample.h_path = s0_path_with_context(spec, common, ctx, sample.path);
  });
}

Eigen::MatrixXd KernelMatrix::a_hat() const {
  return (g_brownian + g_jump).transpose() / static_cast<double>(size());
}

double KernelMatrix::frobenius_scale() const {
  return (g_brownian + g_jump).norm() / static_cast<double>(size());
}

KernelMatrix build_kernel_matrix(const ModelSpec& spec, const SimConfig& cfg,
                                 const CommonFactorRealization& common,
                                 std::span<const KernelPathSample> samples, int threads) {
  cfg.validate();
  const int m = static_cast<int>(samples.size());
  const int L = common.steps();
  if (m < 1) throw ConfigError("build_kernel_matrix: no samples");
  for (const auto& s : samples) {
    if (s.path.steps() != L || static_cast<int>(s.h_path.size()) != L + 1)
      throw ConfigError("build_kernel_matrix: sample grid mismatch or missing h_path");
  }

  KernelMatrix out;
  out.common_path_id = common.id;
  out.g_brownian = Eigen::MatrixXd::Zero(m, m);
  out.g_jump = Eigen::MatrixXd::Zero(m, m);

  // Node-major snapshots of the sample states and responses keep the inner
  // j-loops linear in memory.
  std::vector<Eigen::MatrixXd> states_at(static_cast<std::size_t>(L) + 1);
  std::vector<Eigen::MatrixXd> response_at(static_cast<std::size_t>(L) + 1);
  for (int node = 0; node <= L; ++node) {
    auto& st = states_at[static_cast<std::size_t>(node)];
    auto& rp = response_at[static_cast<std::size_t>(node)];
    st.resize(spec.dim_x, m);
    rp.resize(spec.dim_y, m);
    for (int j = 0; j < m; ++j) {
      st.col(j) = samples[static_cast<std::size_t>(j)].path.states[static_cast<std::size_t>(node)];
      rp.col(j) = samples[static_cast<std::size_t>(j)].h_path[static_cast<std::size_t>(node)];
    }
  }

  // Row i: all integrals run along sample i; the second argument sweeps j.
  parallel_for(m, threads, [&](int i) {
    const auto& wi = samples[static_cast<std::size_t>(i)];
    Eigen::VectorXd acc_b = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd acc_j = Eigen::VectorXd::Zero(m);
    Vec xt(spec.dim_x);

    for (int step = 0; step < L; ++step) {
      const std::size_t s = static_cast<std::size_t>(step);
      const Vec& xi = wi.path.states[s];
      const Vec& y = common.y_path[s];
      const MeasureView view = common.view_at(step);
      const Vec db = wi.path.brownian[s];
      const auto& st = states_at[s];
      const auto& rp = response_at[s];

      // Brownian part: f = b3_centered(x_i, y, nu, x_j) + b2(x_i, y, nu) h_j.
      Vec mean_b3 = Vec::Zero(spec.dim_x);
      for (int c = 0; c < view.count(); ++c)
        mean_b3 += spec.derivatives.b3(xi, y, view, view.point(c));
      mean_b3 /= static_cast<double>(view.count());
      const Mat b2 = spec.derivatives.b2(xi, y, view);
      const double centre_dot = mean_b3.dot(db);
      const Vec b2t_db = b2.transpose() * db;  // (b2 h_j) . db == h_j . (b2^T db)
      for (int j = 0; j < m; ++j) {
        xt = st.col(j);
        double fdot = spec.derivatives.b3(xi, y, view, xt).dot(db) - centre_dot;
        for (int c = 0; c < spec.dim_y; ++c) fdot += rp(c, j) * b2t_db[c];
        acc_b[j] += fdot;
      }

      // Compensator of the jump part: minus the gamma-integral of
      // d3_centered + h_j . d2, exact over atoms or by quadrature.
      if (!spec.gamma.is_zero()) {
        auto accumulate = [&](const Vec& mark, double weight) {
          double mean_d3 = 0.0;
          for (int c = 0; c < view.count(); ++c)
            mean_d3 += spec.derivatives.d3(xi, y, mark, view, view.point(c));
          mean_d3 /= static_cast<double>(view.count());
          const Vec d2 = spec.derivatives.d2(xi, y, mark, view);
          const double scale = weight * cfg.dt;
          for (int j = 0; j < m; ++j) {
            xt = st.col(j);
            double val = spec.derivatives.d3(xi, y, mark, view, xt) - mean_d3;
            for (int c = 0; c < spec.dim_y; ++c) val += rp(c, j) * d2[c];
            acc_j[j] -= scale * val;
          }
        };
        if (spec.gamma.is_atomic()) {
          for (const auto& [mark, weight] : spec.gamma.atoms) accumulate(mark, weight);
        } else {
          RngStream qstream(StreamKey{cfg.seed, common.id, static_cast<std::uint32_t>(i),
                                      static_cast<std::uint32_t>(step), Purpose::KernelQuadrature});
          const double w = spec.gamma.total_mass / cfg.gamma_quadrature;
          for (int q = 0; q < cfg.gamma_quadrature; ++q)
            accumulate(spec.gamma.sampler(qstream), w);
        }
      }
    }

    // Accepted jumps of sample i: (d3_centered + h_j . d2) / rate at the
    // frozen pre-step state.
    for (const auto& rec : wi.path.jumps) {
      if (!rec.accepted) continue;
      const std::size_t s = static_cast<std::size_t>(rec.step);
      const Vec& xi = wi.path.states[s];
      const Vec& y = common.y_path[s];
      const MeasureView view = common.view_at(rec.step);
      const auto& st = states_at[s];
      const auto& rp = response_at[s];
      double mean_d3 = 0.0;
      for (int c = 0; c < view.count(); ++c)
        mean_d3 += spec.derivatives.d3(xi, y, rec.cand.mark, view, view.point(c));
      mean_d3 /= static_cast<double>(view.count());
      const Vec d2 = spec.derivatives.d2(xi, y, rec.cand.mark, view);
      for (int j = 0; j < m; ++j) {
        xt = st.col(j);
        double val = spec.derivatives.d3(xi, y, rec.cand.mark, view, xt) - mean_d3;
        for (int c = 0; c < spec.dim_y; ++c) val += rp(c, j) * d2[c];
        acc_j[j] += val / rec.rate;
      }
    }

    out.g_brownian.row(i) = acc_b.transpose();
    out.g_jump.row(i) = acc_j.transpose();
  });

  return out;
}

ResolventSolution solve_resolvent(const KernelMatrix& matrix, Eigen::VectorXd phi_centered) {
  const int m = matrix.size();
  if (phi_centered.size() != m) throw ConfigError("solve_resolvent: size mismatch");
  const double mean = phi_centered.mean();
  if (std::abs(mean) > 1e-8 * (1.0 + phi_centered.norm()))
    throw ConfigError("solve_resolvent: phi values must be centered");

  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m) - matrix.a_hat();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12))
    throw NumericalError("solve_resolvent: operator singular to working precision (rcond = " +
                         std::to_string(rcond) + ")");
  ResolventSolution sol;
  sol.g = lu.solve(phi_centered);
  if (!sol.g.allFinite()) throw NumericalError("solve_resolvent: non-finite solution");
  sol.sigma = std::sqrt(sol.g.squaredNorm() / static_cast<double>(m));
  sol.rcond = rcond;
  return sol;
}

TraceDiagnostics trace_diagnostics(const KernelMatrix& matrix) {
  const int m = matrix.size();
  const double mm = static_cast<double>(m) * static_cast<double>(m);
  const Eigen::MatrixXd g = matrix.g_brownian + matrix.g_jump;
  TraceDiagnostics out;
  out.trace_a = g.trace() / static_cast<double>(m);
  out.trace_a2 = g.cwiseProduct(g.transpose()).sum() / mm;
  out.trace_cross = matrix.g_brownian.cwiseProduct(matrix.g_jump).sum() / mm;
  return out;
}

double bootstrap_sigma_se(const KernelMatrix& matrix, std::span<const double> phi_values,
                          int resamples, std::uint64_t seed, std::uint32_t rep, int threads) {
  const int m = matrix.size();
  if (static_cast<int>(phi_values.size()) != m)
    throw ConfigError("bootstrap_sigma_se: phi size mismatch");
  if (resamples < 2) throw ConfigError("bootstrap_sigma_se: need at least two resamples");

  std::vector<double> sigmas(static_cast<std::size_t>(resamples));
  parallel_for(resamples, threads, [&](int b) {
    RngStream stream(StreamKey{seed, rep, static_cast<std::uint32_t>(b), 0, Purpose::Bootstrap});
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (auto& v : idx) v = static_cast<int>(stream.next_u64() % static_cast<std::uint64_t>(m));

    KernelMatrix sub;
    sub.common_path_id = matrix.common_path_id;
    sub.g_brownian.resize(m, m);
    sub.g_jump.resize(m, m);
    Eigen::VectorXd phi(m);
    for (int r = 0; r < m; ++r) {
      phi[r] = phi_values[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
      for (int c = 0; c < m; ++c) {
        sub.g_brownian(r, c) = matrix.g_brownian(idx[static_cast<std::size_t>(r)],
                                                 idx[static_cast<std::size_t>(c)]);
        sub.g_jump(r, c) =
            matrix.g_jump(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
      }
    }
    phi.array() -= phi.mean();
    sigmas[static_cast<std::size_t>(b)] = solve_resolvent(sub, phi).sigma;
  });
  return stats::sample_std(sigmas);
}

std::vector<double> LimitLawEstimate::sigmas() const {
  std::vector<double> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(p.sigma);
  return out;
}

std::vector<double> LimitLawEstimate::weights() const {
  return std::vector<double>(paths.size(), 1.0 / static_cast<double>(paths.size()));
}

LimitLawEstimate predict_limit_mixture(const ModelSpec& spec, const SimConfig& cfg,
                                       const TestFunctional& phi, const PredictOptions& opts) {
  if (opts.common_paths < 1) throw ConfigError("predict_limit_mixture: need at least one path");
  if (opts.kernel_samples < 2) throw ConfigError("predict_limit_mixture: kernel_samples too small");

  LimitLawEstimate estimate;
  estimate.phi_id = phi.id;
  estimate.paths.resize(static_cast<std::size_t>(opts.common_paths));

  // Parallel across common paths when there are many, inside one otherwise.
  const bool outer = opts.common_paths >= 2 * opts.threads;
  const int outer_threads = outer ? opts.threads : 1;
  const int inner_threads = outer ? 1 : opts.threads;

  parallel_for(opts.common_paths, outer_threads, [&](int r) {
    const std::uint32_t rep = opts.rep_base + static_cast<std::uint32_t>(r);
    const CommonNoise noise = draw_common_noise(spec, cfg, rep);
    const CommonFactorRealization common =
        solve_common_and_law(spec, cfg, noise, rep, inner_threads);

    std::vector<KernelPathSample> samples(static_cast<std::size_t>(opts.kernel_samples));
    for_each_iid_given_common(spec, cfg, common, opts.kernel_samples, rep, 0, inner_threads,
                              [&](ParticlePath&& path, int j) {
                                samples[static_cast<std::size_t>(j)].path = std::move(path);
                              });
    compute_s0_paths(spec, common, samples, inner_threads);

    Eigen::VectorXd phi_vals(opts.kernel_samples);
    for (int j = 0; j < opts.kernel_samples; ++j) {
      samples[static_cast<std::size_t>(j)].phi_value =
          phi.eval(samples[static_cast<std::size_t>(j)].path);
      phi_vals[j] = samples[static_cast<std::size_t>(j)].phi_value;
    }

    CommonPathEstimate& est = estimate.paths[static_cast<std::size_t>(r)];
    est.common_path_id = common.id;
    est.nystrom_size = opts.kernel_samples;
    if (opts.m_phi_samples > 0) {
      const auto extra =
          estimate_m_phi(spec, cfg, phi, common, opts.m_phi_samples, rep, 0x40000000u,
                         inner_threads);
      est.m_hat = extra.mean;
      est.m_hat_se = extra.se;
    } else {
      std::vector<double> v(phi_vals.data(), phi_vals.data() + phi_vals.size());
      const auto ms = stats::mean_se(v);
      est.m_hat = ms.mean;
      est.m_hat_se = ms.se;
    }

    const KernelMatrix matrix = build_kernel_matrix(spec, cfg, common, samples, inner_threads);
    Eigen::VectorXd centered = phi_vals.array() - phi_vals.mean();
    const ResolventSolution sol = solve_resolvent(matrix, centered);
    est.sigma = sol.sigma;
    est.rcond = sol.rcond;
    est.traces = trace_diagnostics(matrix);
    if (opts.bootstrap_resamples > 1) {
      std::vector<double> raw(phi_vals.data(), phi_vals.data() + phi_vals.size());
      est.bootstrap_se = bootstrap_sigma_se(matrix, raw, opts.bootstrap_resamples, cfg.seed, rep,
                                            inner_threads);
    }
  });

  return estimate;
}

}  // namespace mfclt
