#include <doctest.h>

#include "mfclt/girsanov.hpp"
#include "mfclt/stats.hpp"

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

EmpMeasurePath emp_from_common(const CommonFactorRealization& common) {
  EmpMeasurePath emp;
  emp.cloud = common.cloud;
  emp.summaries = common.summaries;
  return emp;
}

}  // namespace

TEST_CASE("forcing the limit inputs gives a unit density") {
  const ModelSpec spec = build_preset("example1");
  const SimConfig cfg = make_cfg(8, 60, 0.01, 0.2, 3);
  const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, 0), 0);
  const auto paths = simulate_iid_given_common(spec, cfg, common, 8, 0);
  // Substitute the realization's own cloud and path for the N-dependent ones.
  const auto result =
      compute_logH(spec, cfg, common, paths, emp_from_common(common), common.y_path);
  CHECK(result.j1 == 0.0);
  CHECK(result.j2 == 0.0);
  CHECK(result.h() == 1.0);
}

TEST_CASE("decoupled model carries no change of measure at all") {
  const ModelSpec spec = build_preset("decoupled", {{"jump_mass", 1.0}});
  const SimConfig cfg = make_cfg(5, 40, 0.01, 0.2, 7);
  const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, 0), 0);
  const auto paths = simulate_iid_given_common(spec, cfg, common, 5, 0);
  const auto emp = EmpMeasurePath::from_paths(spec, paths);
  const auto y_aux = simulate_yN(spec, cfg, emp, common);
  const auto result = compute_logH(spec, cfg, common, paths, emp, y_aux);
  CHECK(result.j1 == 0.0);
  CHECK(result.j2 == 0.0);
}

TEST_CASE("pure-jump instance matches a direct Poisson likelihood ratio") {
  // No particle drift (so the Brownian part vanishes identically) and a
  // y-modulated intensity with a single unit atom: the exponent must equal
  // the log likelihood ratio of two inhomogeneous Poisson path laws with
  // piecewise-constant intensities, computed here from first principles.
  ModelSpec spec = build_preset("decoupled");
  spec.summary_count = 1;
  spec.summary_fn = [](const Eigen::MatrixXd& cloud, std::vector<double>& out) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < cloud.cols(); ++i) acc += std::tanh(cloud(0, i));
    out[0] = acc / static_cast<double>(cloud.cols());
  };
  spec.drift_b0 = [](const Vec&, const MeasureView& nu) {
    Vec out(1);
    out[0] = 0.8 * nu.summary(0);
    return out;
  };
  auto rate_fn = [](double y) { return 0.5 + 0.2 * std::tanh(y); };
  spec.jump_rate_d = [rate_fn](const Vec&, const Vec& y, const MeasureView&, const Vec&) {
    return rate_fn(y[0]);
  };
  Vec atom(1);
  atom[0] = 1.0;
  spec.gamma = SampleableMeasure::atomic(1, {{atom, 1.0}});
  spec.rate_lower = 0.3;
  spec.rate_upper = 0.8;

  const SimConfig cfg = make_cfg(6, 50, 0.1, 0.3, 11);  // three-step grid
  const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, 0), 0);
  const auto paths = simulate_iid_given_common(spec, cfg, common, 6, 0);
  const auto emp = EmpMeasurePath::from_paths(spec, paths);
  const auto y_aux = simulate_yN(spec, cfg, emp, common);
  const auto result = compute_logH(spec, cfg, common, paths, emp, y_aux);
  CHECK(result.j1 == 0.0);

  double expected = 0.0;
  for (const auto& path : paths) {
    for (const auto& rec : path.jumps) {
      if (!rec.accepted) continue;
      const std::size_t s = static_cast<std::size_t>(rec.step);
      expected += std::log(rate_fn(y_aux[s][0]) / rate_fn(common.y_path[s][0]));
    }
    for (int step = 0; step < cfg.steps(); ++step) {
      const std::size_t s = static_cast<std::size_t>(step);
      expected -= cfg.dt * (rate_fn(y_aux[s][0]) - rate_fn(common.y_path[s][0]));
    }
  }
  CHECK(result.j2 == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("martingale property: mean density near one at desk scale") {
  const ModelSpec spec = build_preset("example1");
  const SimConfig cfg = make_cfg(10, 120, 0.005, 0.25, 17);
  constexpr int kReps = 400;
  std::vector<double> density(kReps);
  for (int r = 0; r < kReps; ++r) {
    const auto rep = static_cast<std::uint32_t>(r);
    const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, rep), rep);
    const auto paths = simulate_iid_given_common(spec, cfg, common, cfg.n_particles, rep);
    const auto emp = EmpMeasurePath::from_paths(spec, paths);
    const auto y_aux = simulate_yN(spec, cfg, emp, common);
    density[static_cast<std::size_t>(r)] =
        compute_logH(spec, cfg, common, paths, emp, y_aux).h();
  }
  const auto ms = stats::mean_se(density);
  INFO("mean H = ", ms.mean, " +- ", ms.se);
  CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.se);
  for (double h : density) CHECK(h > 0.0);
}

TEST_CASE("doubling the compensator quadrature rate barely moves the result") {
  // Gaussian marks force the Monte Carlo compensator path.
  ModelSpec spec = build_preset("example1");
  spec.gamma = SampleableMeasure::gaussian(1, 0.8, 2.0);
  SimConfig cfg = make_cfg(10, 80, 0.01, 0.2, 19);
  const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, 0), 0);
  const auto paths = simulate_iid_given_common(spec, cfg, common, 10, 0);
  const auto emp = EmpMeasurePath::from_paths(spec, paths);
  const auto y_aux = simulate_yN(spec, cfg, emp, common);

  cfg.gamma_quadrature = 8;
  const auto coarse = compute_logH(spec, cfg, common, paths, emp, y_aux);
  cfg.gamma_quadrature = 16;
  const auto fine = compute_logH(spec, cfg, common, paths, emp, y_aux);
  CHECK(coarse.j1 == fine.j1);
  CHECK(std::abs(coarse.j2 - fine.j2) < 0.02);
}
