#include "mfclt/simulate.hpp"

#include "mfclt/parallel.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace mfclt {

int SimConfig::steps() const {
  return static_cast<int>(std::llround(horizon / dt));
}

void SimConfig::validate() const {
  if (dt <= 0.0) throw ConfigError("SimConfig: dt must be positive");
  if (horizon <= 0.0) throw ConfigError("SimConfig: horizon must be positive");
  const int L = steps();
  if (L < 1 || std::abs(L * dt - horizon) > 1e-9 * std::max(1.0, horizon))
    throw ConfigError("SimConfig: horizon must be an integral multiple of dt");
  if (n_particles < 1) throw ConfigError("SimConfig: n_particles must be >= 1");
  if (ensemble_size < 1) throw ConfigError("SimConfig: ensemble_size must be >= 1");
  if (replication_count < 1) throw ConfigError("SimConfig: replication_count must be >= 1");
  if (gamma_quadrature < 1) throw ConfigError("SimConfig: gamma_quadrature must be >= 1");
}

namespace {

// Grid interval of a candidate time: t in (step*dt, (step+1)*dt].
int step_of(double t, double dt, int last_step) {
  const int s = static_cast<int>(std::ceil(t / dt)) - 1;
  return std::clamp(s, 0, last_step);
}

void check_finite(const Vec& v, const char* what, std::uint32_t rep, int particle, int step) {
  if (!v.allFinite())
    throw NumericalError(std::string(what) + " produced a non-finite value (replication " +
                         std::to_string(rep) + ", particle " + std::to_string(particle) +
                         ", step " + std::to_string(step) + ")");
}

struct StreamTriple {
  Purpose init, brownian, prm;
};

constexpr StreamTriple kSystemStreams{Purpose::InitSystem, Purpose::BrownianSystem,
                                      Purpose::PrmSystem};
constexpr StreamTriple kEnsembleStreams{Purpose::InitEnsemble, Purpose::BrownianEnsemble,
                                        Purpose::PrmEnsemble};
constexpr StreamTriple kConditionalStreams{Purpose::InitConditional, Purpose::BrownianConditional,
                                           Purpose::PrmConditional};

ParticlePath init_particle_path(const ModelSpec& spec, const SimConfig& cfg, std::uint32_t rep,
                                std::uint32_t label, const StreamTriple& streams) {
  const int L = cfg.steps();
  ParticlePath path;
  path.dt = cfg.dt;
  path.states.resize(static_cast<std::size_t>(L) + 1);
  {
    RngStream stream(StreamKey{cfg.seed, rep, label, 0, streams.init});
    path.states[0] = spec.init_mu0(stream);
  }
  path.brownian =
      brownian_increments(StreamKey{cfg.seed, rep, label, 0, streams.brownian}, cfg.dt, L,
                          spec.dim_x);
  for (const auto& cand : sample_prm_candidates(StreamKey{cfg.seed, rep, label, 0, streams.prm},
                                                spec.gamma, spec.rate_upper, cfg.horizon)) {
    path.jumps.push_back({cand, step_of(cand.t, cfg.dt, L - 1), 0.0, false});
  }
  return path;
}

// One Euler step of a single particle against frozen (y, nu): drift and
// diffusion from the left state, then every candidate in the interval tested
// against that same left state, accepted marks added.
void step_particle(const ModelSpec& spec, ParticlePath& path, int step, const Vec& y,
                   const MeasureView& view, std::size_t& jump_cursor, std::uint32_t rep,
                   int particle) {
  const Vec& x = path.states[static_cast<std::size_t>(step)];
  Vec next = x + spec.drift_b(x, y, view) * path.dt +
             spec.sigma * path.brownian[static_cast<std::size_t>(step)];
  while (jump_cursor < path.jumps.size() && path.jumps[jump_cursor].step == step) {
    auto& rec = path.jumps[jump_cursor];
    rec.rate = spec.jump_rate_d(x, y, view, rec.cand.mark);
    rec.accepted = rec.cand.u <= rec.rate;
    if (rec.accepted) next += rec.cand.mark;
    ++jump_cursor;
  }
  check_finite(next, "particle update", rep, particle, step);
  path.states[static_cast<std::size_t>(step) + 1] = next;
}

}  // namespace

CommonNoise draw_common_noise(const ModelSpec& spec, const SimConfig& cfg, std::uint32_t rep) {
  cfg.validate();
  CommonNoise noise;
  noise.id = rep;
  {
    RngStream stream(StreamKey{cfg.seed, rep, 0, 0, Purpose::InitCommon});
    noise.y0 = spec.init_rho0(stream);
  }
  noise.brownian0 = brownian_increments(StreamKey{cfg.seed, rep, 0, 0, Purpose::BrownianCommon},
                                        cfg.dt, cfg.steps(), spec.dim_y);
  noise.candidates0 = sample_prm_candidates(StreamKey{cfg.seed, rep, 0, 0, Purpose::PrmCommon},
                                            spec.gamma0, spec.rate_upper, cfg.horizon);
  return noise;
}

namespace {

std::vector<JumpRecord> accept_common_jumps(const ModelSpec& spec, const SimConfig& cfg,
                                            const CommonNoise& noise) {
  std::vector<JumpRecord> out;
  const int last = cfg.steps() - 1;
  for (const auto& cand : noise.candidates0) {
    JumpRecord rec{cand, step_of(cand.t, cfg.dt, last), spec.jump_rate_d0(cand.mark), false};
    rec.accepted = cand.u <= rec.rate;
    out.push_back(std::move(rec));
  }
  return out;
}

// Shared driver for the interacting system and the conditional-law ensemble:
// n particles plus the common factor co-evolve against the system's own
// cloud. Optionally tracks clouds/summaries per node and the b02 propagator.
struct CoupledRun {
  std::vector<ParticlePath> particles;
  std::vector<Vec> y_path;
  std::vector<JumpRecord> jumps0;
  std::vector<Eigen::MatrixXd> clouds;
  std::vector<std::vector<double>> summaries;
  std::vector<Eigen::MatrixXd> propagator;
};

CoupledRun run_coupled(const ModelSpec& spec, const SimConfig& cfg, int n,
                       const CommonNoise& noise, std::uint32_t rep, const StreamTriple& streams,
                       bool with_propagator, int threads,
                       std::span<const std::uint32_t> particle_labels) {
  cfg.validate();
  const int L = cfg.steps();
  if (!particle_labels.empty() && static_cast<int>(particle_labels.size()) != n)
    throw ConfigError("particle label count does not match particle count");

  CoupledRun run;
  run.particles.resize(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](int i) {
    const std::uint32_t label =
        particle_labels.empty() ? static_cast<std::uint32_t>(i) : particle_labels[i];
    run.particles[static_cast<std::size_t>(i)] =
        init_particle_path(spec, cfg, rep, label, streams);
  });

  run.y_path.resize(static_cast<std::size_t>(L) + 1);
  run.y_path[0] = noise.y0;
  run.jumps0 = accept_common_jumps(spec, cfg, noise);

  run.clouds.resize(static_cast<std::size_t>(L) + 1);
  run.summaries.resize(static_cast<std::size_t>(L) + 1);
  if (with_propagator) {
    run.propagator.resize(static_cast<std::size_t>(L) + 1);
    run.propagator[0] = Eigen::MatrixXd::Identity(spec.dim_y, spec.dim_y);
  }

  std::vector<std::size_t> jump_cursor(static_cast<std::size_t>(n), 0);
  std::size_t common_cursor = 0;

  for (int step = 0; step <= L; ++step) {
    auto& cloud = run.clouds[static_cast<std::size_t>(step)];
    cloud.resize(spec.dim_x, n);
    for (int i = 0; i < n; ++i)
      cloud.col(i) = run.particles[static_cast<std::size_t>(i)].states[static_cast<std::size_t>(step)];
    spec.fill_summaries(cloud, run.summaries[static_cast<std::size_t>(step)]);
    if (step == L) break;

    const MeasureView view{&cloud, run.summaries[static_cast<std::size_t>(step)]};
    const Vec y = run.y_path[static_cast<std::size_t>(step)];

    parallel_for(n, threads, [&](int i) {
      step_particle(spec, run.particles[static_cast<std::size_t>(i)], step, y, view,
                    jump_cursor[static_cast<std::size_t>(i)], rep, i);
    });

    Vec ynext = y + spec.drift_b0(y, view) * cfg.dt +
                spec.sigma0 * noise.brownian0[static_cast<std::size_t>(step)];
    while (common_cursor < run.jumps0.size() && run.jumps0[common_cursor].step == step) {
      if (run.jumps0[common_cursor].accepted) ynext += run.jumps0[common_cursor].cand.mark;
      ++common_cursor;
    }
    check_finite(ynext, "common factor update", rep, -1, step);
    run.y_path[static_cast<std::size_t>(step) + 1] = ynext;

    if (with_propagator) {
      const Mat b02 = spec.derivatives.b02(y, view);
      Eigen::MatrixXd incr;
      if (spec.dim_y == 1) {
        incr = Eigen::MatrixXd::Constant(1, 1, std::exp(b02(0, 0) * cfg.dt));
      } else {
        incr = (Eigen::MatrixXd(b02) * cfg.dt).exp();
      }
      // The commuting-family assumption turns the time-ordered exponential
      // into a plain product of per-step exponentials.
      run.propagator[static_cast<std::size_t>(step) + 1] =
          incr * run.propagator[static_cast<std::size_t>(step)];
    }
  }
  return run;
}

}  // namespace

NSystemPath simulate_interacting(const ModelSpec& spec, const SimConfig& cfg,
                                 const CommonNoise& noise, std::uint32_t rep, int threads,
                                 std::span<const std::uint32_t> particle_labels) {
  CoupledRun run = run_coupled(spec, cfg, cfg.n_particles, noise, rep, kSystemStreams,
                               /*with_propagator=*/false, threads, particle_labels);
  NSystemPath out;
  out.particles = std::move(run.particles);
  out.u_path = std::move(run.y_path);
  out.jumps0 = std::move(run.jumps0);
  out.noise = noise;
  return out;
}

CommonFactorRealization solve_common_and_law(const ModelSpec& spec, const SimConfig& cfg,
                                             const CommonNoise& noise, std::uint32_t rep,
                                             int threads) {
  CoupledRun run = run_coupled(spec, cfg, cfg.ensemble_size, noise, rep, kEnsembleStreams,
                               /*with_propagator=*/true, threads, {});
  CommonFactorRealization common;
  common.noise = noise;
  common.y_path = std::move(run.y_path);
  common.jumps0 = std::move(run.jumps0);
  common.cloud = std::move(run.clouds);
  common.summaries = std::move(run.summaries);
  common.exp_integrator = std::move(run.propagator);
  common.id = noise.id;
  return common;
}

void for_each_iid_given_common(const ModelSpec& spec, const SimConfig& cfg,
                               const CommonFactorRealization& common, int count, std::uint32_t rep,
                               std::uint32_t id_offset, int threads,
                               const std::function<void(ParticlePath&&, int)>& sink) {
  cfg.validate();
  if (count < 0) throw ConfigError("simulate_iid_given_common: negative count");
  const int L = cfg.steps();
  if (common.steps() != L) throw ConfigError("common realization grid does not match SimConfig");

  parallel_for(count, threads, [&](int i) {
    ParticlePath path = init_particle_path(spec, cfg, rep,
                                           id_offset + static_cast<std::uint32_t>(i),
                                           kConditionalStreams);
    std::size_t cursor = 0;
    for (int step = 0; step < L; ++step) {
      const MeasureView view = common.view_at(step);
      step_particle(spec, path, step, common.y_path[static_cast<std::size_t>(step)], view, cursor,
                    rep, i);
    }
    sink(std::move(path), i);
  });
}

std::vector<ParticlePath> simulate_iid_given_common(const ModelSpec& spec, const SimConfig& cfg,
                                                    const CommonFactorRealization& common,
                                                    int count, std::uint32_t rep,
                                                    std::uint32_t id_offset, int threads) {
  std::vector<ParticlePath> out(static_cast<std::size_t>(count));
  for_each_iid_given_common(spec, cfg, common, count, rep, id_offset, threads,
                            [&out](ParticlePath&& path, int i) {
                              out[static_cast<std::size_t>(i)] = std::move(path);
                            });
  return out;
}

EmpMeasurePath EmpMeasurePath::from_paths(const ModelSpec& spec,
                                          std::span<const ParticlePath> paths) {
  if (paths.empty()) throw ConfigError("EmpMeasurePath: no paths");
  const std::size_t nodes = paths[0].states.size();
  EmpMeasurePath emp;
  emp.cloud.resize(nodes);
  emp.summaries.resize(nodes);
  for (std::size_t node = 0; node < nodes; ++node) {
    auto& cloud = emp.cloud[node];
    cloud.resize(spec.dim_x, static_cast<Eigen::Index>(paths.size()));
    for (Eigen::Index i = 0; i < cloud.cols(); ++i)
      cloud.col(i) = paths[static_cast<std::size_t>(i)].states[node];
    spec.fill_summaries(cloud, emp.summaries[node]);
  }
  return emp;
}

std::vector<Vec> simulate_yN(const ModelSpec& spec, const SimConfig& cfg, const EmpMeasurePath& emp,
                             const CommonFactorRealization& common) {
  cfg.validate();
  const int L = cfg.steps();
  if (static_cast<int>(emp.cloud.size()) != L + 1)
    throw ConfigError("simulate_yN: empirical measure grid does not match SimConfig");
  if (common.steps() != L) throw ConfigError("simulate_yN: common realization grid mismatch");

  std::vector<Vec> y(static_cast<std::size_t>(L) + 1);
  y[0] = common.noise.y0;
  std::size_t cursor = 0;
  for (int step = 0; step < L; ++step) {
    const MeasureView view = emp.view_at(step);
    Vec next = y[static_cast<std::size_t>(step)] +
               spec.drift_b0(y[static_cast<std::size_t>(step)], view) * cfg.dt +
               spec.sigma0 * common.noise.brownian0[static_cast<std::size_t>(step)];
    while (cursor < common.jumps0.size() && common.jumps0[cursor].step == step) {
      if (common.jumps0[cursor].accepted) next += common.jumps0[cursor].cand.mark;
      ++cursor;
    }
    check_finite(next, "auxiliary common update", common.id, -1, step);
    y[static_cast<std::size_t>(step) + 1] = next;
  }
  return y;
}

}  // namespace mfclt
