#include "mfclt/girsanov.hpp"

#include "mfclt/parallel.hpp"

#include <cmath>

namespace mfclt {

double GirsanovResult::h() const { return std::exp(j1 + j2); }

GirsanovResult compute_logH(const ModelSpec& spec, const SimConfig& cfg,
                            const CommonFactorRealization& common,
                            std::span<const ParticlePath> iid_paths, const EmpMeasurePath& emp,
                            std::span<const Vec> y_aux, int threads) {
  cfg.validate();
  const int L = cfg.steps();
  if (common.steps() != L || static_cast<int>(y_aux.size()) != L + 1 ||
      static_cast<int>(emp.cloud.size()) != L + 1)
    throw ConfigError("compute_logH: grid mismatch between inputs");
  const int n = static_cast<int>(iid_paths.size());

  std::vector<double> j1_terms(static_cast<std::size_t>(n), 0.0);
  std::vector<double> j2_terms(static_cast<std::size_t>(n), 0.0);

  parallel_for(n, threads, [&](int i) {
    const ParticlePath& path = iid_paths[static_cast<std::size_t>(i)];
    if (path.steps() != L) throw ConfigError("compute_logH: particle path grid mismatch");
    double drift_part = 0.0;
    double jump_part = 0.0;

    for (int step = 0; step < L; ++step) {
      const std::size_t s = static_cast<std::size_t>(step);
      const Vec& x = path.states[s];
      const MeasureView view_n = emp.view_at(step);
      const MeasureView view_lim = common.view_at(step);
      const Vec beta = spec.drift_b(x, y_aux[s], view_n) -
                       spec.drift_b(x, common.y_path[s], view_lim);
      drift_part += beta.dot(path.brownian[s]) - 0.5 * beta.squaredNorm() * cfg.dt;

      // Compensator: integral of the rate difference against gamma, exact for
      // atomic measures, otherwise mass-weighted quadrature with fresh marks.
      if (!spec.gamma.is_zero()) {
        auto rate_gap = [&](const Vec& h) {
          return spec.jump_rate_d(x, y_aux[s], view_n, h) -
                 spec.jump_rate_d(x, common.y_path[s], view_lim, h);
        };
        double integral = 0.0;
        if (spec.gamma.is_atomic()) {
          for (const auto& [mark, weight] : spec.gamma.atoms) integral += weight * rate_gap(mark);
        } else {
          RngStream qstream(StreamKey{cfg.seed, common.id, static_cast<std::uint32_t>(i),
                                      static_cast<std::uint32_t>(step),
                                      Purpose::CompensatorQuadrature});
          double acc = 0.0;
          for (int q = 0; q < cfg.gamma_quadrature; ++q) acc += rate_gap(spec.gamma.sampler(qstream));
          integral = spec.gamma.total_mass * acc / cfg.gamma_quadrature;
        }
        jump_part -= integral * cfg.dt;
      }
    }

    // Log rate ratio over the accepted jumps of this path; the stored rate is
    // exactly the thinning value, bounded below by rate_lower.
    for (const auto& rec : path.jumps) {
      if (!rec.accepted) continue;
      const std::size_t s = static_cast<std::size_t>(rec.step);
      const double rate_n =
          spec.jump_rate_d(path.states[s], y_aux[s], emp.view_at(rec.step), rec.cand.mark);
      if (!(rate_n > 0.0) || !(rec.rate > 0.0))
        throw NumericalError("compute_logH: nonpositive jump rate in log ratio");
      jump_part += std::log(rate_n / rec.rate);
    }

    j1_terms[static_cast<std::size_t>(i)] = drift_part;
    j2_terms[static_cast<std::size_t>(i)] = jump_part;
  });

  GirsanovResult out;
  for (int i = 0; i < n; ++i) {
    out.j1 += j1_terms[static_cast<std::size_t>(i)];
    out.j2 += j2_terms[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace mfclt
