#pragma once

#include "mfclt/fluctuation.hpp"
#include "mfclt/simulate.hpp"

namespace mfclt {

/// One conditionally-i.i.d. sample path with its accumulated common-factor
/// response h_t = E_t int_0^t E_s^{-1} b03_centered(Y_s, mu_s, X_s) ds, the
/// ingredient the limit-law kernels need alongside the raw path.
struct KernelPathSample {
  ParticlePath path;
  std::vector<Vec> h_path;  // per node, dim_y
  double phi_value = 0.0;
};

/// Trapezoidal accumulation of h_t for one path on the realization grid.
std::vector<Vec> compute_s0_path(const ModelSpec& spec, const CommonFactorRealization& common,
                                 const ParticlePath& path);

/// Batch variant reusing the per-node cloud means across samples.
void compute_s0_paths(const ModelSpec& spec, const CommonFactorRealization& common,
                      std::span<KernelPathSample> samples, int threads = 1);

/// Nystrom discretisation of the limit-law integral operator on M sample
/// paths, Brownian and compensated-jump parts kept separate for the trace
/// diagnostics. entry(j,i) of the operator matrix is G(omega_i, omega_j)/M
/// where the stochastic integrals of G run along omega_i.
struct KernelMatrix {
  Eigen::MatrixXd g_brownian;  // M x M, raw G^1 values
  Eigen::MatrixXd g_jump;      // M x M, raw G^2 values
  std::uint32_t common_path_id = 0;

  int size() const { return static_cast<int>(g_brownian.rows()); }
  Eigen::MatrixXd a_hat() const;
  double frobenius_scale() const;  // Frobenius norm of a_hat
};

KernelMatrix build_kernel_matrix(const ModelSpec& spec, const SimConfig& cfg,
                                 const CommonFactorRealization& common,
                                 std::span<const KernelPathSample> samples, int threads = 1);

struct ResolventSolution {
  Eigen::VectorXd g;
  double sigma = 0.0;  // empirical L2 norm of g
  double rcond = 0.0;
};

/// Solves (I - A_hat) g = phi_centered by dense LU. phi_centered must have
/// zero mean. A matrix singular to working precision fails loudly with its
/// condition estimate; it signals insufficient sample size or a model bug
/// and is never regularised away.
ResolventSolution solve_resolvent(const KernelMatrix& matrix, Eigen::VectorXd phi_centered);

struct TraceDiagnostics {
  double trace_a = 0.0;
  double trace_a2 = 0.0;
  double trace_cross = 0.0;  // <brownian kernel, jump kernel> in L2(alpha x alpha)
};

/// All three vanish for the continuum operator; the Nystrom estimates decay
/// as the sample size grows and act as a consistency probe of the assembly.
TraceDiagnostics trace_diagnostics(const KernelMatrix& matrix);

/// Bootstrap standard error of sigma under resampling the M kernel paths.
double bootstrap_sigma_se(const KernelMatrix& matrix, std::span<const double> phi_values,
                          int resamples, std::uint64_t seed, std::uint32_t rep, int threads = 1);

struct CommonPathEstimate {
  std::uint32_t common_path_id = 0;
  double sigma = 0.0;
  double m_hat = 0.0;
  double m_hat_se = 0.0;
  TraceDiagnostics traces;
  double rcond = 0.0;
  double bootstrap_se = 0.0;
  int nystrom_size = 0;
};

struct LimitLawEstimate {
  std::vector<CommonPathEstimate> paths;
  std::string phi_id;

  std::vector<double> sigmas() const;
  std::vector<double> weights() const;  // uniform 1/R
};

struct PredictOptions {
  int common_paths = 1;        // R
  int kernel_samples = 200;    // M
  int m_phi_samples = 0;       // optional extra draws for the reported m_hat
  int bootstrap_resamples = 0;
  std::uint32_t rep_base = 0;
  int threads = 1;
};

/// Independent prediction of the fluctuation limit: for each of R fresh
/// common paths, draw M conditionally-i.i.d. samples, assemble the Nystrom
/// matrix, solve the resolvent and record sigma. The estimates define the
/// centred Gaussian mixture with uniform weights.
LimitLawEstimate predict_limit_mixture(const ModelSpec& spec, const SimConfig& cfg,
                                       const TestFunctional& phi, const PredictOptions& opts);

}  // namespace mfclt
