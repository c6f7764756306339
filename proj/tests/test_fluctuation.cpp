#include <doctest.h>

#include "mfclt/fluctuation.hpp"

#include <cmath>

using namespace mfclt;

namespace {

SimConfig make_cfg(int n, int m, double dt, double horizon, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_particles = n;
  cfg.ensemble_size = m;
  cfg.dt = dt;
  cfg.horizon = horizon;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("functional presets evaluate as documented") {
  ParticlePath path;
  path.dt = 0.5;
  path.states.resize(3);
  for (int i = 0; i < 3; ++i) {
    path.states[static_cast<std::size_t>(i)].resize(2);
    path.states[static_cast<std::size_t>(i)][0] = i;       // 0, 1, 2
    path.states[static_cast<std::size_t>(i)][1] = -2.0 * i;
  }
  CHECK(make_functional("terminal_coordinate").eval(path) == doctest::Approx(2.0));
  CHECK(make_functional("terminal_coordinate", {{"coordinate", 1.0}}).eval(path) ==
        doctest::Approx(-4.0));
  // Trapezoid of 0,1,2 over two unit-weight steps / horizon.
  CHECK(make_functional("time_average").eval(path) == doctest::Approx(1.0));
  CHECK(make_functional("smooth_indicator", {{"threshold", 2.0}, {"width", 0.5}}).eval(path) ==
        doctest::Approx(0.5));
  CHECK(make_functional("capped_loss").eval(path) == doctest::Approx(1.0));
  CHECK_THROWS_AS(make_functional("nope"), ConfigError);
}

TEST_CASE("conditional mean estimate: constant functional and decoupled mean") {
  const ModelSpec spec = build_preset("decoupled");
  const SimConfig cfg = make_cfg(1, 50, 0.01, 0.3, 5);
  const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, 0), 0);

  TestFunctional constant{"const", [](const ParticlePath&) { return 3.75; }};
  const auto ms = estimate_m_phi(spec, cfg, constant, common, 100, 0);
  CHECK(ms.mean == doctest::Approx(3.75));
  CHECK(ms.se == doctest::Approx(0.0));

  CHECK_THROWS_AS(estimate_m_phi(spec, cfg, constant, common, 1, 0), ConfigError);

  // Zero-drift terminal coordinate has conditional mean E[X_0] = 0.
  const auto phi = make_functional("terminal_coordinate");
  const auto m = estimate_m_phi(spec, cfg, phi, common, 10000, 0, 0x40000000u, 4);
  CHECK(std::abs(m.mean) < 3.0 * m.se);
}

TEST_CASE("standard error scales like the inverse square root of the sample size") {
  const ModelSpec spec = build_preset("decoupled");
  const SimConfig cfg = make_cfg(1, 50, 0.01, 0.3, 6);
  const auto phi = make_functional("terminal_coordinate");
  constexpr int kReps = 50;
  std::vector<double> ratios(kReps);
  for (int r = 0; r < kReps; ++r) {
    const auto rep = static_cast<std::uint32_t>(r);
    const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, rep), rep);
    const auto coarse = estimate_m_phi(spec, cfg, phi, common, 500, rep, 0x40000000u);
    const auto fine = estimate_m_phi(spec, cfg, phi, common, 2000, rep, 0x50000000u);
    ratios[static_cast<std::size_t>(r)] = coarse.se / fine.se;
  }
  const auto ms = stats::mean_se(ratios);
  CHECK(std::abs(ms.mean - 2.0) < 0.2);
}

TEST_CASE("pooled fluctuations of the decoupled model reproduce the classical limit") {
  // X = X_0 + B: the statistic is exactly centred-normal with variance
  // Var(X_0) + T, inflated by the centring-estimate noise N/M2.
  const double horizon = 0.5;
  const ModelSpec spec = build_preset("decoupled");
  SimConfig cfg = make_cfg(50, 25, 0.01, horizon, 31);
  const auto phi = make_functional("terminal_coordinate");
  FluctuationOptions opts;
  opts.samples = 500;
  opts.m_phi_samples = 100 * cfg.n_particles;
  opts.threads = 4;
  const auto samples = fluctuation_ensemble(spec, cfg, phi, FluctuationMode::pooled, opts);
  REQUIRE(samples.size() == 500);

  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    values[i] = samples[i].value;
    CHECK(samples[i].n_particles == 50);
    CHECK(samples[i].phi_id == "terminal_coordinate");
    CHECK(samples[i].m_hat_se > 0.0);
  }
  const double sigma = std::sqrt((1.0 + horizon) * (1.0 + 50.0 / opts.m_phi_samples));
  const double ks =
      stats::ks_statistic(values, [sigma](double x) { return stats::normal_cdf(x / sigma); });
  CHECK(ks < stats::kKsCritical99 / std::sqrt(500.0) + 0.03);
}

TEST_CASE("conditional fluctuations: centred, tagged, single sample supported") {
  const ModelSpec spec = build_preset("example1");
  SimConfig cfg = make_cfg(60, 150, 0.01, 0.25, 33);
  const auto phi = make_functional("terminal_coordinate");
  FluctuationOptions opts;
  opts.samples = 300;
  opts.m_phi_samples = 30000;
  opts.rep_base = 9;
  opts.threads = 4;
  const auto samples = fluctuation_ensemble(spec, cfg, phi, FluctuationMode::conditional, opts);
  REQUIRE(samples.size() == 300);
  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    values[i] = samples[i].value;
    CHECK(samples[i].common_path_id == 9);
    CHECK(samples[i].m_hat == samples[0].m_hat);  // one shared centring
  }
  const auto ms = stats::mean_se(values);
  CHECK(std::abs(ms.mean) < 3.5 * ms.se);

  FluctuationOptions one;
  one.samples = 1;
  one.m_phi_samples = 6000;
  const auto single = fluctuation_ensemble(spec, cfg, phi, FluctuationMode::conditional, one);
  REQUIRE(single.size() == 1);
  CHECK(single[0].replication_id == 1);
}

TEST_CASE("law of total variance: pooled variance dominates the conditional-mean spread") {
  const ModelSpec spec = build_preset("example1");
  SimConfig cfg = make_cfg(30, 100, 0.01, 0.25, 35);
  const auto phi = make_functional("terminal_coordinate");

  FluctuationOptions pooled_opts;
  pooled_opts.samples = 240;
  pooled_opts.m_phi_samples = 3000;
  pooled_opts.threads = 4;
  const auto pooled = fluctuation_ensemble(spec, cfg, phi, FluctuationMode::pooled, pooled_opts);
  std::vector<double> pooled_values(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) pooled_values[i] = pooled[i].value;
  const double pooled_var = std::pow(stats::sample_std(pooled_values), 2);

  std::vector<double> cond_means;
  for (std::uint32_t path = 0; path < 4; ++path) {
    FluctuationOptions cond;
    cond.samples = 60;
    cond.m_phi_samples = 3000;
    cond.rep_base = 1000 + 100 * path;
    cond.threads = 4;
    const auto cs = fluctuation_ensemble(spec, cfg, phi, FluctuationMode::conditional, cond);
    std::vector<double> values(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) values[i] = cs[i].value;
    cond_means.push_back(stats::mean_se(values).mean);
  }
  const double mean_spread = std::pow(stats::sample_std(cond_means), 2);
  // Very loose: the spread of conditional means is an O(1/samples) object.
  CHECK(pooled_var > 0.25 * mean_spread);
}
