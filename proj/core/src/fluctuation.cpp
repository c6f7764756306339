#include "mfclt/fluctuation.hpp"

#include "mfclt/parallel.hpp"

#include <cmath>

namespace mfclt {

namespace {

double read_param(const std::map<std::string, double>& params, const std::string& key,
                  double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

TestFunctional make_functional(const std::string& id,
                               const std::map<std::string, double>& params) {
  TestFunctional phi;
  phi.id = id;
  const int coord = static_cast<int>(read_param(params, "coordinate", 0.0));
  if (id == "terminal_coordinate") {
    phi.eval = [coord](const ParticlePath& path) { return path.terminal()[coord]; };
  } else if (id == "time_average") {
    // Trapezoidal time integral of one coordinate, divided by the horizon.
    phi.eval = [coord](const ParticlePath& path) {
      const std::size_t L = path.states.size() - 1;
      double acc = 0.5 * (path.states.front()[coord] + path.states.back()[coord]);
      for (std::size_t node = 1; node < L; ++node) acc += path.states[node][coord];
      return acc / static_cast<double>(L);
    };
  } else if (id == "smooth_indicator") {
    const double threshold = read_param(params, "threshold", 0.0);
    const double width = read_param(params, "width", 0.25);
    if (width <= 0.0) throw ConfigError("smooth_indicator: width must be positive");
    phi.eval = [coord, threshold, width](const ParticlePath& path) {
      return 1.0 / (1.0 + std::exp(-(path.terminal()[coord] - threshold) / width));
    };
  } else if (id == "capped_loss") {
    const double cap = read_param(params, "cap", 1.0);
    const int c = static_cast<int>(read_param(params, "coordinate", 1.0));
    phi.eval = [c, cap](const ParticlePath& path) {
      return std::min(std::abs(path.terminal()[c]), cap);
    };
  } else {
    throw ConfigError("unknown test functional '" + id + "'");
  }
  return phi;
}

stats::MeanSe estimate_m_phi(const ModelSpec& spec, const SimConfig& cfg,
                             const TestFunctional& phi, const CommonFactorRealization& common,
                             int mc_size, std::uint32_t rep, std::uint32_t id_offset,
                             int threads) {
  if (mc_size < 2) throw ConfigError("estimate_m_phi: mc_size must be >= 2");
  std::vector<double> values(static_cast<std::size_t>(mc_size));
  for_each_iid_given_common(spec, cfg, common, mc_size, rep, id_offset, threads,
                            [&](ParticlePath&& path, int i) {
                              values[static_cast<std::size_t>(i)] = phi.eval(path);
                            });
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError("estimate_m_phi: non-finite functional value");
  return stats::mean_se(values);
}

std::vector<FluctuationSample> fluctuation_ensemble(const ModelSpec& spec, const SimConfig& cfg,
                                                    const TestFunctional& phi,
                                                    FluctuationMode mode,
                                                    const FluctuationOptions& opts) {
  cfg.validate();
  if (opts.samples < 1) throw ConfigError("fluctuation_ensemble: samples must be >= 1");
  const int n = cfg.n_particles;
  const int m2 = opts.m_phi_samples > 0 ? opts.m_phi_samples : 100 * n;
  // Centring-estimate noise inflates the sample variance by N/m2; keep the
  // inflation under one percent and record the standard error per sample.
  if (m2 < 100 * n)
    throw ConfigError("fluctuation_ensemble: m_phi_samples must be at least 100 * n_particles");
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  std::vector<FluctuationSample> out(static_cast<std::size_t>(opts.samples));

  auto system_average = [&](const NSystemPath& system) {
    double acc = 0.0;
    for (const auto& p : system.particles) acc += phi.eval(p);
    return acc / static_cast<double>(system.particles.size());
  };

  if (mode == FluctuationMode::conditional) {
    // One common path; its conditional mean is a fixed number, estimated once.
    const CommonNoise noise = draw_common_noise(spec, cfg, opts.rep_base);
    const CommonFactorRealization common =
        solve_common_and_law(spec, cfg, noise, opts.rep_base, opts.threads);
    const stats::MeanSe m_hat =
        estimate_m_phi(spec, cfg, phi, common, m2, opts.rep_base, 0x40000000u, opts.threads);
    parallel_for(opts.samples, opts.threads, [&](int s) {
      const std::uint32_t rep = opts.rep_base + 1 + static_cast<std::uint32_t>(s);
      const NSystemPath system = simulate_interacting(spec, cfg, noise, rep, 1);
      out[static_cast<std::size_t>(s)] = {sqrt_n * (system_average(system) - m_hat.mean),
                                          n,
                                          phi.id,
                                          common.id,
                                          rep,
                                          m_hat.mean,
                                          m_hat.se};
    });
    return out;
  }

  parallel_for(opts.samples, opts.threads, [&](int s) {
    const std::uint32_t rep = opts.rep_base + static_cast<std::uint32_t>(s);
    const CommonNoise noise = draw_common_noise(spec, cfg, rep);
    // The limit system is re-solved on the interacting system's own common
    // noise, so the centring is the conditional mean given that same noise.
    const CommonFactorRealization common = solve_common_and_law(spec, cfg, noise, rep, 1);
    const stats::MeanSe m_hat = estimate_m_phi(spec, cfg, phi, common, m2, rep, 0x40000000u, 1);
    const NSystemPath system = simulate_interacting(spec, cfg, noise, rep, 1);
    out[static_cast<std::size_t>(s)] = {sqrt_n * (system_average(system) - m_hat.mean),
                                        n,
                                        phi.id,
                                        common.id,
                                        rep,
                                        m_hat.mean,
                                        m_hat.se};
  });
  return out;
}

}  // namespace mfclt
