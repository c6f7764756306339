#include "pipelines.hpp"

#include "mfclt/girsanov.hpp"
#include "mfclt/limitlaw.hpp"
#include "mfclt/parallel.hpp"
#include "mfclt/path_io.hpp"
#include "mfclt/symmstat.hpp"
#include "mfclt/version.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace mfclt::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int resolve_threads(const ExperimentConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("MEANFIELD_CLT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return default_thread_count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Output sink: CSVs carry a provenance preamble (rng algorithm, version,
/// seed, config hash) ahead of the header row; the manifest records every
/// file. No timestamps anywhere except run_info.json.
class Bundle {
 public:
  Bundle(const ExperimentConfig& cfg, int threads) : cfg_(cfg), threads_(threads) {
    fs::create_directories(cfg.output_dir);
  }

  // Empty header: the caller writes its own header row (e.g. path exports).
  std::ofstream csv(const std::string& name, const std::string& header) {
    std::ofstream os(path(name));
    if (!os) throw ConfigError("cannot write " + path(name));
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(cfg_.config_hash));
    os << "# rng=" << kRngAlgorithm << " version=" << kVersion << " seed=" << cfg_.seed
       << " config=fnv1a64:" << hash << "\n";
    if (!header.empty()) os << header << "\n";
    outputs_.push_back(name);
    return os;
  }

  void write_json(const std::string& name, const json& value) {
    std::ofstream os(path(name));
    if (!os) throw ConfigError("cannot write " + path(name));
    os << value.dump(2) << "\n";
    outputs_.push_back(name);
  }

  void note_output(const std::string& name) { outputs_.push_back(name); }

  std::string path(const std::string& name) const { return cfg_.output_dir + "/" + name; }
  int threads() const { return threads_; }

  void finalize() {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(cfg_.config_hash));
    json manifest;
    manifest["pipeline"] = cfg_.pipeline;
    manifest["seed"] = cfg_.seed;
    manifest["rng"] = kRngAlgorithm;
    manifest["version"] = kVersion;
    manifest["config_hash"] = std::string("fnv1a64:") + hash;
    manifest["outputs"] = outputs_;
    std::ofstream os(path("manifest.json"));
    os << manifest.dump(2) << "\n";

    // Wall-clock stamp lives apart so data files are byte-stable re-run to
    // re-run.
    const auto now = std::chrono::system_clock::now();
    json info;
    info["completed_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
    std::ofstream ios(path("run_info.json"));
    ios << info.dump(2) << "\n";
  }

 private:
  const ExperimentConfig& cfg_;
  int threads_;
  std::vector<std::string> outputs_;
};

json estimate_to_json(const CommonPathEstimate& est) {
  json j;
  j["common_path_id"] = est.common_path_id;
  j["sigma"] = est.sigma;
  j["m_hat"] = est.m_hat;
  j["m_hat_se"] = est.m_hat_se;
  j["trace_a"] = est.traces.trace_a;
  j["trace_a2"] = est.traces.trace_a2;
  j["trace_cross"] = est.traces.trace_cross;
  j["rcond"] = est.rcond;
  j["bootstrap_se"] = est.bootstrap_se;
  j["nystrom_size"] = est.nystrom_size;
  return j;
}

void write_mixture_csv(Bundle& bundle, const std::vector<double>& sigmas,
                       const std::vector<double>& weights, int grid) {
  double smax = 0.0;
  for (double s : sigmas) smax = std::max(smax, s);
  if (smax <= 0.0) smax = 1.0;
  auto os = bundle.csv("mixture.csv", "x [phi units],cdf [probability]");
  for (int i = 0; i < grid; ++i) {
    const double x = -4.0 * smax + 8.0 * smax * i / (grid - 1);
    os << fmt(x) << "," << fmt(stats::gaussian_mixture_cdf(sigmas, weights, x)) << "\n";
  }
}

void write_samples_csv(Bundle& bundle, std::span<const FluctuationSample> samples) {
  auto os = bundle.csv("samples.csv",
                       "value [sqrt(N) phi units],n_particles [count],phi_id,"
                       "common_path_id,replication_id,m_hat [phi units],m_hat_se [phi units]");
  for (const auto& s : samples) {
    os << fmt(s.value) << "," << s.n_particles << "," << s.phi_id << "," << s.common_path_id
       << "," << s.replication_id << "," << fmt(s.m_hat) << "," << fmt(s.m_hat_se) << "\n";
  }
}

void write_qq_csv(Bundle& bundle, std::vector<double> values, const std::vector<double>& sigmas,
                  const std::vector<double>& weights) {
  std::sort(values.begin(), values.end());
  auto os = bundle.csv("qq.csv", "theoretical_quantile [phi units],empirical_quantile [phi units]");
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double p = (static_cast<double>(i) + 0.5) / n;
    os << fmt(stats::gaussian_mixture_quantile(sigmas, weights, p)) << "," << fmt(values[i])
       << "\n";
  }
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

void pipeline_simulate(const ExperimentConfig& cfg, const ModelSpec& spec, Bundle& bundle) {
  for (int rep = 0; rep < cfg.sim.replication_count; ++rep) {
    const auto r = static_cast<std::uint32_t>(rep);
    const CommonNoise noise = draw_common_noise(spec, cfg.sim, r);
    const auto common = solve_common_and_law(spec, cfg.sim, noise, r, bundle.threads());
    const auto system = simulate_interacting(spec, cfg.sim, noise, r, bundle.threads());

    char name[64];
    std::snprintf(name, sizeof(name), "paths_r%04d.csv", rep);
    {
      auto os = bundle.csv(name, "");
      write_paths_csv(os, system.particles);
    }
    std::snprintf(name, sizeof(name), "bundle_r%04d.bin", rep);
    save_path_bundle(bundle.path(name), common, system.particles);
    bundle.note_output(name);
  }
  json summary;
  summary["replications"] = cfg.sim.replication_count;
  summary["n_particles"] = cfg.sim.n_particles;
  summary["steps"] = cfg.sim.steps();
  bundle.write_json("simulate.json", summary);
}

void pipeline_martingale(const ExperimentConfig& cfg, const ModelSpec& spec, Bundle& bundle) {
  const int reps = cfg.sim.replication_count;
  std::vector<GirsanovResult> results(static_cast<std::size_t>(reps));
  parallel_for(reps, bundle.threads(), [&](int rep) {
    const auto r = static_cast<std::uint32_t>(rep);
    const auto common =
        solve_common_and_law(spec, cfg.sim, draw_common_noise(spec, cfg.sim, r), r, 1);
    const auto paths = simulate_iid_given_common(spec, cfg.sim, common, cfg.sim.n_particles, r);
    const auto emp = EmpMeasurePath::from_paths(spec, paths);
    const auto y_aux = simulate_yN(spec, cfg.sim, emp, common);
    results[static_cast<std::size_t>(rep)] = compute_logH(spec, cfg.sim, common, paths, emp, y_aux);
  });

  std::vector<double> densities(results.size());
  {
    auto os = bundle.csv("girsanov.csv", "replication,j1 [log density],j2 [log density],h [density]");
    for (int rep = 0; rep < reps; ++rep) {
      const auto& g = results[static_cast<std::size_t>(rep)];
      densities[static_cast<std::size_t>(rep)] = g.h();
      os << rep << "," << fmt(g.j1) << "," << fmt(g.j2) << "," << fmt(g.h()) << "\n";
    }
  }
  const auto ms = stats::mean_se(densities);
  json report;
  report["replications"] = reps;
  report["mean_h"] = ms.mean;
  report["se_h"] = ms.se;
  report["abs_error"] = std::abs(ms.mean - 1.0);
  report["within_3se"] = std::abs(ms.mean - 1.0) <= 3.0 * ms.se;
  bundle.write_json("martingale.json", report);
}

void pipeline_fluctuate(const ExperimentConfig& cfg, const ModelSpec& spec,
                        const TestFunctional& phi, Bundle& bundle) {
  FluctuationOptions opts;
  opts.samples = cfg.sim.replication_count;
  opts.m_phi_samples = cfg.options.m_phi_samples;
  opts.threads = bundle.threads();
  const auto mode = cfg.options.mode == "conditional" ? FluctuationMode::conditional
                                                      : FluctuationMode::pooled;
  const auto samples = fluctuation_ensemble(spec, cfg.sim, phi, mode, opts);
  write_samples_csv(bundle, samples);

  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) values[i] = samples[i].value;
  const auto ms = stats::mean_se(values);
  json report;
  report["mode"] = cfg.options.mode;
  report["samples"] = static_cast<int>(samples.size());
  report["mean"] = ms.mean;
  report["sample_std"] = stats::sample_std(values);
  report["mean_m_hat_se"] = samples.empty() ? 0.0 : samples[0].m_hat_se;
  bundle.write_json("fluctuate.json", report);
}

LimitLawEstimate run_prediction(const ExperimentConfig& cfg, const ModelSpec& spec,
                                const TestFunctional& phi, Bundle& bundle, int common_paths) {
  PredictOptions opts;
  opts.common_paths = common_paths;
  opts.kernel_samples =
      cfg.options.kernel_samples > 0 ? cfg.options.kernel_samples : cfg.sim.ensemble_size;
  opts.m_phi_samples = cfg.options.m_phi_samples;
  opts.bootstrap_resamples = cfg.options.bootstrap_resamples;
  opts.threads = bundle.threads();
  const auto estimate = predict_limit_mixture(spec, cfg.sim, phi, opts);

  json report;
  report["phi_id"] = estimate.phi_id;
  report["common_paths"] = common_paths;
  report["kernel_samples"] = opts.kernel_samples;
  json paths = json::array();
  for (const auto& est : estimate.paths) paths.push_back(estimate_to_json(est));
  report["paths"] = paths;
  bundle.write_json("predict.json", report);
  write_mixture_csv(bundle, estimate.sigmas(), estimate.weights(), cfg.options.cdf_grid);
  return estimate;
}

void pipeline_predict(const ExperimentConfig& cfg, const ModelSpec& spec,
                      const TestFunctional& phi, Bundle& bundle) {
  run_prediction(cfg, spec, phi, bundle, cfg.options.common_paths);
}

void pipeline_compare(const ExperimentConfig& cfg, const ModelSpec& spec,
                      const TestFunctional& phi, Bundle& bundle) {
  const bool conditional = cfg.options.mode == "conditional";
  const auto estimate =
      run_prediction(cfg, spec, phi, bundle, conditional ? 1 : cfg.options.common_paths);
  const auto sigmas = estimate.sigmas();
  const auto weights = estimate.weights();

  FluctuationOptions opts;
  opts.samples = cfg.sim.replication_count;
  opts.m_phi_samples = cfg.options.m_phi_samples;
  opts.threads = bundle.threads();
  // Conditional comparisons reuse the predictor's common path (rep 0); the
  // pooled sample stream is decorrelated from the predictor's paths instead.
  opts.rep_base = conditional ? 0u : 0x40000000u;
  const auto samples = fluctuation_ensemble(
      spec, cfg.sim, phi, conditional ? FluctuationMode::conditional : FluctuationMode::pooled,
      opts);
  write_samples_csv(bundle, samples);

  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) values[i] = samples[i].value;
  const double ks = stats::ks_statistic(values, [&](double x) {
    return stats::gaussian_mixture_cdf(sigmas, weights, x);
  });
  write_qq_csv(bundle, values, sigmas, weights);

  json report;
  report["mode"] = cfg.options.mode;
  report["samples"] = static_cast<int>(values.size());
  report["ks"] = ks;
  report["ks_threshold_99"] = stats::kKsCritical99 / std::sqrt(static_cast<double>(values.size()));
  report["sample_std"] = stats::sample_std(values);
  report["mixture_sigmas"] = sigmas;
  bundle.write_json("compare.json", report);
}

void pipeline_symmstat(const ExperimentConfig& cfg, Bundle& bundle) {
  const int draws = cfg.options.reference_draws;

  // First- and second-order product kernels under a standard normal base
  // law: identity score, and an odd bounded score with near-constant modulus.
  ProductKernel ident;
  ident.h = [](double x) { return x; };
  ident.h_norm_sq = 1.0;
  ProductKernel balanced;
  balanced.h = [](double x) {
    return (x >= 0.0 ? 1.0 : -1.0) * (1.0 + 0.1 * std::tanh(std::abs(x)));
  };
  {
    RngStream stream(StreamKey{cfg.seed, 100, 0, 0, Purpose::Experiment});
    double acc = 0.0;
    for (int i = 0; i < 500000; ++i) {
      const double b = balanced.h(stream.normal());
      acc += b * b;
    }
    balanced.h_norm_sq = acc / 500000;
  }

  // Isometry: E[I_k^2] = k! |h|^{2k}.
  {
    auto os = bundle.csv("isometry.csv",
                         "k,estimate [moment],target [moment],se [moment]");
    std::vector<double> sq(static_cast<std::size_t>(draws));
    double kfact = 1.0;
    for (int k = 1; k <= 3; ++k) {
      kfact *= k;
      parallel_for(draws, bundle.threads(), [&](int i) {
        RngStream stream(StreamKey{cfg.seed, 200 + static_cast<std::uint32_t>(k),
                                   static_cast<std::uint32_t>(i), 0, Purpose::Experiment});
        const double i1 = stream.normal();
        const double v = mwi_product(k, i1, 1.0);
        sq[static_cast<std::size_t>(i)] = v * v;
      });
      const auto ms = stats::mean_se(sq);
      os << k << "," << fmt(ms.mean) << "," << fmt(kfact) << "," << fmt(ms.se) << "\n";
    }
  }

  DmOptions dm;
  dm.n_grid = cfg.options.n_grid.empty() ? std::vector<int>{500, 2000} : cfg.options.n_grid;
  dm.reps = cfg.options.reps;
  dm.reference_draws = draws;
  dm.seed = cfg.seed;
  dm.threads = bundle.threads();
  auto nu = [](RngStream& s) { return s.normal(); };

  std::vector<DmRow> rows = dm_convergence_experiment(ident, 1, nu, dm);
  for (const auto& row : dm_convergence_experiment(balanced, 2, nu, dm))
    if (row.k == 2) rows.push_back(row);
  auto os = bundle.csv("dm.csv", "k,n [sample size],reps,ks_distance");
  for (const auto& row : rows)
    os << row.k << "," << row.n << "," << row.reps << "," << fmt(row.ks) << "\n";
}

void pipeline_rates(const ExperimentConfig& cfg, const ModelSpec& spec, Bundle& bundle) {
  const std::vector<int> grid =
      cfg.options.n_grid.empty() ? std::vector<int>{25, 50, 100, 200, 400} : cfg.options.n_grid;
  const int reps = cfg.sim.replication_count;
  const int n_max = *std::max_element(grid.begin(), grid.end());

  // gaps[rep][g]: squared terminal gap between the auxiliary common path fed
  // by the first n sample paths and the limit path. Common random numbers
  // across the grid: prefixes of one path family per replication.
  std::vector<std::vector<double>> gaps(static_cast<std::size_t>(reps),
                                        std::vector<double>(grid.size(), 0.0));
  parallel_for(reps, bundle.threads(), [&](int rep) {
    const auto r = static_cast<std::uint32_t>(rep);
    const auto common =
        solve_common_and_law(spec, cfg.sim, draw_common_noise(spec, cfg.sim, r), r, 1);
    const auto paths = simulate_iid_given_common(spec, cfg.sim, common, n_max, r);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const int n = grid[g];
      const auto emp = EmpMeasurePath::from_paths(
          spec, std::span<const ParticlePath>(paths.data(), static_cast<std::size_t>(n)));
      const auto y_aux = simulate_yN(spec, cfg.sim, emp, common);
      gaps[static_cast<std::size_t>(rep)][g] = (y_aux.back() - common.y_path.back()).squaredNorm();
    }
  });

  std::vector<std::pair<double, double>> fit_points;
  {
    auto os = bundle.csv("rates.csv", "n [particles],mse [state^2],se [state^2]");
    for (std::size_t g = 0; g < grid.size(); ++g) {
      std::vector<double> column(static_cast<std::size_t>(reps));
      for (int rep = 0; rep < reps; ++rep)
        column[static_cast<std::size_t>(rep)] = gaps[static_cast<std::size_t>(rep)][g];
      const auto ms = stats::mean_se(column);
      fit_points.emplace_back(static_cast<double>(grid[g]), ms.mean);
      os << grid[g] << "," << fmt(ms.mean) << "," << fmt(ms.se) << "\n";
    }
  }
  const auto fit = stats::loglog_slope(fit_points);
  json report;
  report["slope"] = fit.slope;
  report["intercept"] = fit.intercept;
  report["r2"] = fit.r2;
  report["replications"] = reps;
  bundle.write_json("rates.json", report);
}

void pipeline_finance_demo(const ExperimentConfig& cfg, Bundle& bundle) {
  ExperimentConfig fin = cfg;
  fin.model_preset = "finance";
  const ModelSpec spec = build_preset("finance", fin.model_params);
  const TestFunctional phi =
      make_functional(cfg.phi_id == "terminal_coordinate" ? "capped_loss" : cfg.phi_id,
                      cfg.phi_params);

  // Pooled and conditional fluctuation ensembles of the loss average.
  FluctuationOptions pooled;
  pooled.samples = cfg.sim.replication_count;
  pooled.m_phi_samples = cfg.options.m_phi_samples;
  pooled.threads = bundle.threads();
  const auto pooled_samples =
      fluctuation_ensemble(spec, cfg.sim, phi, FluctuationMode::pooled, pooled);
  write_samples_csv(bundle, pooled_samples);

  std::vector<double> pooled_values(pooled_samples.size());
  for (std::size_t i = 0; i < pooled_samples.size(); ++i)
    pooled_values[i] = pooled_samples[i].value;
  const double pooled_var = std::pow(stats::sample_std(pooled_values), 2);

  constexpr int kConditionalPaths = 4;
  std::vector<double> cond_vars, cond_means;
  for (int path = 0; path < kConditionalPaths; ++path) {
    FluctuationOptions cond;
    cond.samples = std::max(cfg.sim.replication_count / kConditionalPaths, 2);
    cond.m_phi_samples = cfg.options.m_phi_samples;
    cond.rep_base = 0x20000000u + 0x10000u * static_cast<std::uint32_t>(path);
    cond.threads = bundle.threads();
    const auto cs = fluctuation_ensemble(spec, cfg.sim, phi, FluctuationMode::conditional, cond);
    std::vector<double> values(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) values[i] = cs[i].value;
    cond_vars.push_back(std::pow(stats::sample_std(values), 2));
    cond_means.push_back(stats::mean_se(values).mean);
  }
  const auto mean_cond_var = stats::mean_se(cond_vars);

  json report;
  report["pooled_samples"] = static_cast<int>(pooled_values.size());
  report["pooled_variance"] = pooled_var;
  report["mean_conditional_variance"] = mean_cond_var.mean;
  report["mean_conditional_variance_se"] = mean_cond_var.se;
  report["conditional_mean_spread"] =
      cond_means.size() > 1 ? std::pow(stats::sample_std(cond_means), 2) : 0.0;
  // Law of total variance: pooled >= mean conditional, within Monte Carlo
  // error of both estimates.
  const double pooled_se =
      pooled_var * std::sqrt(2.0 / (static_cast<double>(pooled_values.size()) - 1.0));
  report["total_variance_gap"] = pooled_var - mean_cond_var.mean;
  report["total_variance_gap_se"] =
      std::sqrt(pooled_se * pooled_se + mean_cond_var.se * mean_cond_var.se);
  bundle.write_json("finance.json", report);
}

}  // namespace

void run_pipeline(const ExperimentConfig& cfg) {
  if (cfg.pipeline.empty()) throw ConfigError("no pipeline selected");
  const int threads = resolve_threads(cfg);
  Bundle bundle(cfg, threads);

  const ModelSpec spec = build_preset(cfg.model_preset, cfg.model_params);
  const TestFunctional phi = make_functional(cfg.phi_id, cfg.phi_params);

  if (cfg.pipeline == "simulate") {
    pipeline_simulate(cfg, spec, bundle);
  } else if (cfg.pipeline == "martingale") {
    pipeline_martingale(cfg, spec, bundle);
  } else if (cfg.pipeline == "fluctuate") {
    pipeline_fluctuate(cfg, spec, phi, bundle);
  } else if (cfg.pipeline == "predict") {
    pipeline_predict(cfg, spec, phi, bundle);
  } else if (cfg.pipeline == "compare") {
    pipeline_compare(cfg, spec, phi, bundle);
  } else if (cfg.pipeline == "symmstat") {
    pipeline_symmstat(cfg, bundle);
  } else if (cfg.pipeline == "rates") {
    pipeline_rates(cfg, spec, bundle);
  } else if (cfg.pipeline == "finance-demo") {
    pipeline_finance_demo(cfg, bundle);
  } else {
    throw ConfigError("unknown pipeline '" + cfg.pipeline + "'");
  }

  bundle.finalize();
  if (cfg.pipeline == "fluctuate" || cfg.pipeline == "compare" || cfg.pipeline == "rates" ||
      cfg.pipeline == "predict") {
    emit_plots(cfg.output_dir);
  }
}

}  // namespace mfclt::cli
