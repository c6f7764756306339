// Acceptance suite: one pass/fail line per criterion, every tolerance pinned
// in code. Exit status is the number of failed criteria.

#include "mfclt/girsanov.hpp"
#include "mfclt/limitlaw.hpp"
#include "mfclt/parallel.hpp"
#include "mfclt/symmstat.hpp"

#include "config.hpp"
#include "pipelines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace mfclt;

namespace {

int g_threads = 1;
int g_failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s [%s] %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.5g", v);
  return buf;
}

SimConfig make_cfg(int n, int m_ens, double dt, double horizon, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_particles = n;
  cfg.ensemble_size = m_ens;
  cfg.dt = dt;
  cfg.horizon = horizon;
  cfg.seed = seed;
  return cfg;
}

stats::MeanSe mean_h_over_replications(const ModelSpec& spec, const SimConfig& cfg, int reps) {
  std::vector<double> density(static_cast<std::size_t>(reps));
  parallel_for(reps, g_threads, [&](int rep) {
    const auto r = static_cast<std::uint32_t>(rep);
    const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, r), r, 1);
    const auto paths = simulate_iid_given_common(spec, cfg, common, cfg.n_particles, r);
    const auto emp = EmpMeasurePath::from_paths(spec, paths);
    const auto y_aux = simulate_yN(spec, cfg, emp, common);
    density[static_cast<std::size_t>(rep)] = compute_logH(spec, cfg, common, paths, emp, y_aux).h();
  });
  return stats::mean_se(density);
}

// Criterion 1: martingale identity on the k=1 smooth-functional preset.
// N=20, ensemble 500, T=0.5, dt=0.005, 2000 replications; mean of the density
// within three standard errors of one; runtime under ten minutes.
void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  const ModelSpec spec = build_preset("example1");
  const SimConfig cfg = make_cfg(20, 500, 0.005, 0.5, 101);
  const auto ms = mean_h_over_replications(spec, cfg, 2000);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  // Runtime target is stated for eight cores; normalise by the worker count.
  const double core8_equiv = elapsed * g_threads / 8.0;
  const bool pass = std::abs(ms.mean - 1.0) <= 3.0 * ms.se && core8_equiv < 600.0;
  report("C1", pass,
         "martingale identity: mean H = " + num(ms.mean) + " (SE " + num(ms.se) + ", |err|/SE = " +
             num(std::abs(ms.mean - 1.0) / ms.se) + " <= 3), 2000 replications, " + num(elapsed) +
             " s wall (" + num(core8_equiv) + " s 8-core-equivalent < 600)");
}

// Criterion 2: decoupled preset, terminal coordinate. The kernel matrix is
// exactly zero, so the predicted sigma is the plain conditional deviation;
// it must match the pooled fluctuation std within 3% at N=200 and 2000
// samples, and the pooled law must pass a KS test against the single
// Gaussian at 0.05.
void criterion_2() {
  const ModelSpec spec = build_preset("decoupled");
  SimConfig cfg = make_cfg(200, 50, 0.01, 0.5, 202);

  const auto phi = make_functional("terminal_coordinate");
  PredictOptions popts;
  popts.common_paths = 10;
  popts.kernel_samples = 2000;
  popts.threads = g_threads;
  const auto estimate = predict_limit_mixture(spec, cfg, phi, popts);
  bool kernel_zero = true;
  double sigma_sq = 0.0;
  for (const auto& path : estimate.paths) {
    kernel_zero = kernel_zero && path.traces.trace_a == 0.0 && path.rcond == 1.0;
    sigma_sq += path.sigma * path.sigma;
  }
  const double sigma_pred = std::sqrt(sigma_sq / static_cast<double>(estimate.paths.size()));

  const int m2 = 100 * cfg.n_particles;
  FluctuationOptions fopts;
  fopts.samples = 2000;
  fopts.m_phi_samples = m2;
  fopts.threads = g_threads;
  const auto samples = fluctuation_ensemble(spec, cfg, phi, FluctuationMode::pooled, fopts);
  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) values[i] = samples[i].value;
  const double sample_std = stats::sample_std(values);

  // The centring estimate adds exactly N/m2 relative variance.
  const double sigma_infl = sigma_pred * std::sqrt(1.0 + static_cast<double>(cfg.n_particles) / m2);
  const double rel = std::abs(sigma_infl - sample_std) / sigma_infl;
  const double ks =
      stats::ks_statistic(values, [&](double x) { return stats::normal_cdf(x / sigma_infl); });
  const bool pass = kernel_zero && rel < 0.03 && ks < 0.05;
  report("C2", pass,
         "decoupled limit: predicted sigma = " + num(sigma_pred) + " (+centring -> " +
             num(sigma_infl) + "), sample std = " + num(sample_std) + ", rel gap = " + num(rel) +
             " < 0.03, KS = " + num(ks) + " < 0.05, kernel exactly zero = " +
             (kernel_zero ? "yes" : "no"));
}

// Criterion 3: conditional Gaussianity at one common path, N=400, 2000
// conditional samples against N(0, sigma_hat) with sigma_hat from the
// 800-sample Nystrom resolvent; KS below 1.63/sqrt(2000) + 0.05.
void criterion_3() {
  const ModelSpec spec = build_preset("example1");
  SimConfig cfg = make_cfg(400, 3200, 0.01, 0.5, 303);
  const auto phi = make_functional("terminal_coordinate");

  PredictOptions popts;
  popts.common_paths = 1;
  popts.kernel_samples = 800;
  popts.bootstrap_resamples = 30;
  popts.threads = g_threads;
  const auto estimate = predict_limit_mixture(spec, cfg, phi, popts);
  const double sigma = estimate.paths[0].sigma;

  FluctuationOptions fopts;
  fopts.samples = 2000;
  fopts.m_phi_samples = 2000000;
  fopts.threads = g_threads;
  const auto samples = fluctuation_ensemble(spec, cfg, phi, FluctuationMode::conditional, fopts);
  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) values[i] = samples[i].value;

  const double ks =
      stats::ks_statistic(values, [&](double x) { return stats::normal_cdf(x / sigma); });
  const double base = stats::kKsCritical99 / std::sqrt(2000.0);
  const double allowance = 0.05;  // discretization + Nystrom
  const bool pass = ks < base + allowance;
  report("C3", pass,
         "conditional Gaussianity: KS = " + num(ks) + " < " + num(base) + " + " + num(allowance) +
             " (allowance); sigma_hat = " + num(sigma) + " (bootstrap SE " +
             num(estimate.paths[0].bootstrap_se) + "), m_hat SE = " + num(samples[0].m_hat_se) +
             ", N=400, 2000 samples");
}

// Criterion 4: across 20 common paths the spread of sigma_hat must exceed
// three times its median within-path bootstrap SE (a genuinely random limit
// mixture). Strong common-coupling instance of the k=1 preset.
void criterion_4() {
  const ModelSpec spec = build_preset(
      "example1", {{"y0_sd", 0.8}, {"d_base", 0.2}, {"d_amp", 1.2}, {"d_wy", 1.5},
                   {"gamma0_mass", 1.5}, {"gamma0_size", 0.6}, {"b0_u", 0.9},
                   {"jump_size", 1.0}, {"x0_sd", 0.4}});
  SimConfig cfg = make_cfg(1, 400, 0.01, 0.5, 404);
  const auto phi = make_functional("terminal_coordinate");

  PredictOptions popts;
  popts.common_paths = 20;
  popts.kernel_samples = 800;
  popts.bootstrap_resamples = 30;
  popts.threads = g_threads;
  const auto estimate = predict_limit_mixture(spec, cfg, phi, popts);

  std::vector<double> sigmas = estimate.sigmas();
  std::vector<double> ses;
  for (const auto& path : estimate.paths) ses.push_back(path.bootstrap_se);
  std::sort(ses.begin(), ses.end());
  const double median_se = 0.5 * (ses[9] + ses[10]);
  const double spread = stats::sample_std(sigmas);
  const bool pass = spread > 3.0 * median_se;
  report("C4", pass,
         "mixture randomness: sigma spread over 20 paths = " + num(spread) +
             " > 3 x median bootstrap SE = 3 x " + num(median_se) + "; sigma range [" +
             num(*std::min_element(sigmas.begin(), sigmas.end())) + ", " +
             num(*std::max_element(sigmas.begin(), sigmas.end())) + "]");
}

// Criterion 5: the auxiliary common path converges to the limit path at rate
// 1/N in mean square: log-log slope over N in {25,...,400}, 500 replications,
// within -1 +- 0.25 and r^2 > 0.9.
void criterion_5() {
  const ModelSpec spec = build_preset("example1");
  const SimConfig cfg = make_cfg(1, 6000, 0.01, 0.5, 505);
  const std::vector<int> grid{25, 50, 100, 200, 400};
  const int reps = 500;

  std::vector<std::vector<double>> gaps(static_cast<std::size_t>(reps),
                                        std::vector<double>(grid.size(), 0.0));
  parallel_for(reps, g_threads, [&](int rep) {
    const auto r = static_cast<std::uint32_t>(rep);
    const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, r), r, 1);
    const auto paths = simulate_iid_given_common(spec, cfg, common, grid.back(), r);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto emp = EmpMeasurePath::from_paths(
          spec, std::span<const ParticlePath>(paths.data(), static_cast<std::size_t>(grid[g])));
      const auto y_aux = simulate_yN(spec, cfg, emp, common);
      gaps[static_cast<std::size_t>(rep)][g] = (y_aux.back() - common.y_path.back()).squaredNorm();
    }
  });
  std::vector<std::pair<double, double>> points;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (int rep = 0; rep < reps; ++rep) acc += gaps[static_cast<std::size_t>(rep)][g];
    points.emplace_back(static_cast<double>(grid[g]), acc / reps);
  }
  const auto fit = stats::loglog_slope(points);
  const bool pass = fit.slope > -1.25 && fit.slope < -0.75 && fit.r2 > 0.9;
  report("C5", pass,
         "auxiliary-path rate: slope = " + num(fit.slope) + " in [-1.25, -0.75], r^2 = " +
             num(fit.r2) + " > 0.9 (500 replications, N in {25..400})");
}

// Criterion 6: Nystrom traces of the squared operator and the cross term
// shrink from M=200 to M=800 in at least 4 of 5 seeds and sit below
// 5 M^{-1/2} x Frobenius scale at M=800.
void criterion_6() {
  const ModelSpec spec = build_preset("example1");
  int a2_decreases = 0, cross_decreases = 0;
  bool small_at_800 = true;
  std::string detail;
  for (std::uint32_t seed = 0; seed < 5; ++seed) {
    SimConfig cfg = make_cfg(1, 400, 0.01, 0.5, 600 + seed);
    const auto common =
        solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, seed), seed, g_threads);
    std::vector<KernelPathSample> samples(800);
    for_each_iid_given_common(spec, cfg, common, 800, seed, 0, g_threads,
                              [&](ParticlePath&& p, int i) {
                                samples[static_cast<std::size_t>(i)].path = std::move(p);
                              });
    compute_s0_paths(spec, common, samples, g_threads);

    const auto m200 = build_kernel_matrix(
        spec, cfg, common, std::span<const KernelPathSample>(samples.data(), 200), g_threads);
    const auto m800 = build_kernel_matrix(spec, cfg, common, samples, g_threads);
    const auto t200 = trace_diagnostics(m200);
    const auto t800 = trace_diagnostics(m800);
    if (std::abs(t800.trace_a2) < std::abs(t200.trace_a2)) ++a2_decreases;
    if (std::abs(t800.trace_cross) < std::abs(t200.trace_cross)) ++cross_decreases;
    const double bound = 5.0 / std::sqrt(800.0) * m800.frobenius_scale();
    if (std::abs(t800.trace_a2) >= bound || std::abs(t800.trace_cross) >= bound)
      small_at_800 = false;
    if (seed == 0)
      detail = "e.g. seed 0: |trace A^2| " + num(std::abs(t200.trace_a2)) + " -> " +
               num(std::abs(t800.trace_a2)) + ", bound " + num(bound);
  }
  const bool pass = a2_decreases >= 4 && cross_decreases >= 4 && small_at_800;
  report("C6", pass,
         "trace diagnostics: |trace A^2| decreased in " + std::to_string(a2_decreases) +
             "/5 seeds, cross trace in " + std::to_string(cross_decreases) +
             "/5, all within 5 M^{-1/2} x Frobenius at M=800: " +
             (small_at_800 ? "yes" : "no") + "; " + detail);
}

// Criterion 7: multiple Wiener integral suite. Isometry E[I_k^2] = k! v^k
// within three standard errors for k in {1,2,3}; degenerate-statistic
// convergence KS below 0.05 at n=2000 with 5000 repetitions for k in {1,2}.
void criterion_7() {
  const double v = 1.3;
  constexpr int kDraws = 1000000;
  bool isometry_ok = true;
  std::string iso_detail;
  double kfact = 1.0;
  std::vector<double> sq(kDraws);
  for (int k = 1; k <= 3; ++k) {
    kfact *= k;
    parallel_for(kDraws, g_threads, [&](int i) {
      RngStream stream(StreamKey{707, static_cast<std::uint32_t>(k),
                                 static_cast<std::uint32_t>(i), 0, Purpose::Experiment});
      const double val = mwi_product(k, std::sqrt(v) * stream.normal(), v);
      sq[static_cast<std::size_t>(i)] = val * val;
    });
    const auto ms = stats::mean_se(sq);
    const double target = kfact * std::pow(v, k);
    if (std::abs(ms.mean - target) > 3.0 * ms.se) isometry_ok = false;
    if (k == 2) iso_detail = "E[I_2^2] = " + num(ms.mean) + " vs " + num(target);
  }

  DmOptions dm;
  dm.n_grid = {2000};
  dm.reps = 5000;
  dm.reference_draws = 1000000;
  dm.seed = 708;
  dm.threads = g_threads;
  auto nu = [](RngStream& s) { return s.normal(); };

  ProductKernel ident;
  ident.h = [](double x) { return x; };
  ident.h_norm_sq = 1.0;
  const auto rows1 = dm_convergence_experiment(ident, 1, nu, dm);

  ProductKernel balanced;
  balanced.h = [](double x) {
    return (x >= 0.0 ? 1.0 : -1.0) * (1.0 + 0.1 * std::tanh(std::abs(x)));
  };
  {
    RngStream stream(StreamKey{709, 0, 0, 0, Purpose::Experiment});
    double acc = 0.0;
    for (int i = 0; i < 2000000; ++i) {
      const double b = balanced.h(stream.normal());
      acc += b * b;
    }
    balanced.h_norm_sq = acc / 2000000;
  }
  const auto rows2 = dm_convergence_experiment(balanced, 2, nu, dm);
  const double ks1 = rows1[0].ks;
  const double ks2 = rows2[1].ks;
  const bool pass = isometry_ok && ks1 < 0.05 && ks2 < 0.05;
  report("C7", pass,
         "symmetric statistics: isometry within 3 SE for k in {1,2,3} (" + iso_detail +
             "); degenerate-limit KS(k=1) = " + num(ks1) + ", KS(k=2) = " + num(ks2) +
             " both < 0.05 at n=2000, 5000 reps");
}

// Criterion 8: self-exciting default model with the intensity bounded away
// from zero. The loss-average fluctuations satisfy the law-of-total-variance
// inequality within Monte Carlo error, and the martingale and conditional
// Gaussianity checks re-run green at N=100.
void criterion_8() {
  const ParamMap params{{"lam_floor", 0.2}, {"lam_amp", 0.8}};
  const ModelSpec spec = build_preset("finance", params);
  const auto phi = make_functional("capped_loss");

  // (a) variance decomposition of sqrt(N)-scaled loss fluctuations.
  SimConfig vcfg = make_cfg(100, 800, 0.01, 0.5, 801);
  FluctuationOptions pooled;
  pooled.samples = 600;
  pooled.m_phi_samples = 10000;
  pooled.threads = g_threads;
  const auto pooled_samples =
      fluctuation_ensemble(spec, vcfg, phi, FluctuationMode::pooled, pooled);
  std::vector<double> pooled_values(pooled_samples.size());
  for (std::size_t i = 0; i < pooled_samples.size(); ++i)
    pooled_values[i] = pooled_samples[i].value;
  const double pooled_var = std::pow(stats::sample_std(pooled_values), 2);
  const double pooled_var_se =
      pooled_var * std::sqrt(2.0 / (static_cast<double>(pooled_values.size()) - 1.0));

  std::vector<double> cond_vars;
  for (std::uint32_t path = 0; path < 4; ++path) {
    FluctuationOptions cond;
    cond.samples = 150;
    cond.m_phi_samples = 10000;
    cond.rep_base = 0x10000u * (path + 1);
    cond.threads = g_threads;
    const auto cs = fluctuation_ensemble(spec, vcfg, phi, FluctuationMode::conditional, cond);
    std::vector<double> values(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) values[i] = cs[i].value;
    cond_vars.push_back(std::pow(stats::sample_std(values), 2));
  }
  const auto cond_ms = stats::mean_se(cond_vars);
  const double gap = pooled_var - cond_ms.mean;
  const double gap_se = std::sqrt(pooled_var_se * pooled_var_se + cond_ms.se * cond_ms.se);
  const bool lotv_ok = gap >= -3.0 * gap_se;

  // (b) martingale identity at N=100 on this preset.
  const SimConfig mcfg = make_cfg(100, 500, 0.005, 0.5, 802);
  const auto ms = mean_h_over_replications(spec, mcfg, 2000);
  const bool mart_ok = std::abs(ms.mean - 1.0) <= 3.0 * ms.se;

  // (c) conditional Gaussianity of the loss average at N=100.
  SimConfig ccfg = make_cfg(100, 1600, 0.01, 0.5, 803);
  PredictOptions popts;
  popts.common_paths = 1;
  popts.kernel_samples = 800;
  popts.bootstrap_resamples = 30;
  popts.threads = g_threads;
  const auto estimate = predict_limit_mixture(spec, ccfg, phi, popts);
  const double sigma = estimate.paths[0].sigma;
  FluctuationOptions fopts;
  fopts.samples = 2000;
  fopts.m_phi_samples = 1000000;
  fopts.threads = g_threads;
  const auto cond_samples =
      fluctuation_ensemble(spec, ccfg, phi, FluctuationMode::conditional, fopts);
  std::vector<double> cvals(cond_samples.size());
  for (std::size_t i = 0; i < cond_samples.size(); ++i) cvals[i] = cond_samples[i].value;
  const double ks =
      stats::ks_statistic(cvals, [&](double x) { return stats::normal_cdf(x / sigma); });
  const double threshold = stats::kKsCritical99 / std::sqrt(2000.0) + 0.05;
  const bool cond_ok = ks < threshold;

  const bool pass = lotv_ok && mart_ok && cond_ok;
  report("C8", pass,
         "default-contagion model: total-variance gap = " + num(gap) + " >= -3 x " + num(gap_se) +
             "; mean H = " + num(ms.mean) + " (SE " + num(ms.se) + "); conditional KS = " +
             num(ks) + " < " + num(threshold) + " (sigma_hat " + num(sigma) + ") at N=100");
}

// Criterion 9: identical config and seed with different thread counts yields
// byte-identical data files.
void criterion_9() {
  namespace fs = std::filesystem;
  const auto read = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  };
  const fs::path base = fs::temp_directory_path() / "mfclt_acceptance_det";
  fs::remove_all(base);

  cli::ExperimentConfig cfg = cli::parse_config_text(R"({
    "seed": 909,
    "model": {"preset": "example1"},
    "sim": {"n_particles": 30, "ensemble_size": 100, "dt": 0.01, "horizon": 0.25,
            "replication_count": 60},
    "phi": {"id": "terminal_coordinate"},
    "options": {"common_paths": 3, "kernel_samples": 100, "m_phi_samples": 3000,
                "bootstrap_resamples": 8}
  })");
  cfg.pipeline = "compare";

  cfg.output_dir = (base / "t1").string();
  cfg.threads = 1;
  cli::run_pipeline(cfg);
  cfg.output_dir = (base / "t8").string();
  cfg.threads = 8;
  cli::run_pipeline(cfg);

  bool identical = true;
  std::string bad;
  for (const char* name :
       {"samples.csv", "mixture.csv", "qq.csv", "predict.json", "compare.json", "manifest.json"}) {
    if (read(base / "t1" / name) != read(base / "t8" / name)) {
      identical = false;
      bad += std::string(" ") + name;
    }
  }
  report("C9", identical,
         identical ? std::string("determinism: compare pipeline byte-identical across "
                                 "--threads 1 and --threads 8 (6 files)")
                   : "determinism: files differ:" + bad);
}

}  // namespace

int main() {
  g_threads = default_thread_count();
  if (const char* env = std::getenv("MEANFIELD_CLT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) g_threads = n;
  }
  std::printf("acceptance suite, %d worker threads\n", g_threads);

  const auto start = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d of 9 criteria passed in %.1f s\n", 9 - g_failures, elapsed);
  return g_failures;
}
