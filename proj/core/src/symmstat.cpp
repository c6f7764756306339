#include "mfclt/symmstat.hpp"

#include "mfclt/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace mfclt {

double mwi_product(int k, double i1, double h_norm_sq) {
  if (k < 0) throw ConfigError("mwi_product: k must be nonnegative");
  if (h_norm_sq < 0.0) throw ConfigError("mwi_product: negative norm");
  if (k == 0) return 1.0;
  double acc = 0.0;
  double coeff_sign = 1.0;
  for (int j = 0; 2 * j <= k; ++j) {
    // C_{k,j} = k! / ((k-2j)! 2^j j!)
    double c = 1.0;
    for (int r = k - 2 * j + 1; r <= k; ++r) c *= r;  // k! / (k-2j)!
    for (int r = 1; r <= j; ++r) c /= 2.0 * r;        // / (2^j j!)
    acc += coeff_sign * c * std::pow(h_norm_sq, j) * std::pow(i1, k - 2 * j);
    coeff_sign = -coeff_sign;
  }
  return acc;
}

double product_symmetric_statistic(const ProductKernel& kernel, std::span<const double> samples,
                                   int k) {
  if (k < 0 || k > 3) throw ConfigError("product_symmetric_statistic: k must lie in [0,3]");
  if (k == 0) return 1.0;
  if (static_cast<int>(samples.size()) < k) return 0.0;
  double p1 = 0.0, p2 = 0.0, p3 = 0.0;
  for (double x : samples) {
    const double v = kernel.h(x);
    p1 += v;
    p2 += v * v;
    p3 += v * v * v;
  }
  switch (k) {
    case 1: return p1;
    case 2: return 0.5 * (p1 * p1 - p2);
    default: return (p1 * p1 * p1 - 3.0 * p1 * p2 + 2.0 * p3) / 6.0;
  }
}

std::vector<DmRow> dm_convergence_experiment(const ProductKernel& kernel, int k_max,
                                             const std::function<double(RngStream&)>& nu_sampler,
                                             const DmOptions& opts) {
  if (k_max < 1 || k_max > 3) throw ConfigError("dm_convergence_experiment: k_max must lie in [1,3]");
  if (opts.n_grid.empty()) throw ConfigError("dm_convergence_experiment: empty n grid");
  if (opts.reps < 10) throw ConfigError("dm_convergence_experiment: too few repetitions");

  // Degeneracy gate: the kernel must be conditionally centred under nu.
  {
    constexpr int kProbe = 100000;
    RngStream stream(StreamKey{opts.seed, 0, 0, 0, Purpose::Probe});
    std::vector<double> values(kProbe);
    for (auto& v : values) v = kernel.h(nu_sampler(stream));
    const auto ms = stats::mean_se(values);
    if (std::abs(ms.mean) > 5.0 * ms.se)
      throw ConfigError("dm_convergence_experiment: kernel is not degenerate (|mean| > 5 SE)");
  }

  std::vector<DmRow> rows;
  for (int k = 1; k <= k_max; ++k) {
    // Reference sample of I_k / k! driven by a Gaussian first-order integral.
    std::vector<double> reference(static_cast<std::size_t>(opts.reference_draws));
    const double sd = std::sqrt(kernel.h_norm_sq);
    double kfact = 1.0;
    for (int r = 2; r <= k; ++r) kfact *= r;
    parallel_for(opts.reference_draws, opts.threads, [&](int i) {
      RngStream stream(StreamKey{opts.seed, 1, static_cast<std::uint32_t>(i),
                                 static_cast<std::uint32_t>(k), Purpose::Experiment});
      reference[static_cast<std::size_t>(i)] =
          mwi_product(k, sd * stream.normal(), kernel.h_norm_sq) / kfact;
    });

    for (int n : opts.n_grid) {
      std::vector<double> statistics(static_cast<std::size_t>(opts.reps));
      const double scale = std::pow(static_cast<double>(n), -0.5 * k);
      parallel_for(opts.reps, opts.threads, [&](int r) {
        RngStream stream(StreamKey{opts.seed, 2 + static_cast<std::uint32_t>(k),
                                   static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(n),
                                   Purpose::Experiment});
        std::vector<double> draws(static_cast<std::size_t>(n));
        for (auto& d : draws) d = nu_sampler(stream);
        statistics[static_cast<std::size_t>(r)] =
            scale * product_symmetric_statistic(kernel, draws, k);
      });
      // Two-sample distance: correct even when the laws carry atoms.
      rows.push_back({k, n, opts.reps, stats::ks_two_sample(statistics, reference)});
    }
  }
  return rows;
}

}  // namespace mfclt
