#pragma once

#include "mfclt/simulate.hpp"
#include "mfclt/stats.hpp"

#include <string>

namespace mfclt {

/// Real-valued square-integrable path functional entering the fluctuation
/// statistic. Presets: terminal state coordinate, time average of a
/// coordinate, smoothed terminal threshold indicator, capped-loss coordinate.
struct TestFunctional {
  std::string id;
  std::function<double(const ParticlePath&)> eval;
};

TestFunctional make_functional(const std::string& id,
                               const std::map<std::string, double>& params = {});

/// Monte Carlo estimate of the conditional mean of phi given the common path,
/// from mc_size fresh conditionally-i.i.d. draws. The standard error is
/// always propagated: it inflates downstream fluctuation variances by
/// se^2 * N and every report carries it.
stats::MeanSe estimate_m_phi(const ModelSpec& spec, const SimConfig& cfg,
                             const TestFunctional& phi, const CommonFactorRealization& common,
                             int mc_size, std::uint32_t rep, std::uint32_t id_offset = 0x40000000u,
                             int threads = 1);

struct FluctuationSample {
  double value = 0.0;
  int n_particles = 0;
  std::string phi_id;
  std::uint32_t common_path_id = 0;
  std::uint32_t replication_id = 0;
  double m_hat = 0.0;
  double m_hat_se = 0.0;
};

enum class FluctuationMode { pooled, conditional };

struct FluctuationOptions {
  int samples = 1;
  int m_phi_samples = 0;       // 0: use 100 * N
  std::uint32_t rep_base = 0;  // replication ids for common paths / particle noise
  int threads = 1;
};

/// sqrt(N) (mean_j phi(Z^j) - m_hat) over the interacting system.
/// pooled: every sample draws a fresh common path, solves the limit system on
/// the same noise, centres by its own m_hat. conditional: one common path is
/// fixed (rep_base), m_hat estimated once, and samples vary particle noise
/// only.
std::vector<FluctuationSample> fluctuation_ensemble(const ModelSpec& spec, const SimConfig& cfg,
                                                    const TestFunctional& phi,
                                                    FluctuationMode mode,
                                                    const FluctuationOptions& opts);

}  // namespace mfclt
