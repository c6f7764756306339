#pragma once

#include "mfclt/model.hpp"

#include <cstdint>
#include <functional>

namespace mfclt {

struct SimConfig {
  int n_particles = 1;     // N, size of the interacting system
  int ensemble_size = 100; // M, conditional-law ensemble given one common path
  double dt = 0.01;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  int replication_count = 1;
  int gamma_quadrature = 8;  // samples per node for non-atomic compensator integrals

  int steps() const;
  void validate() const;
};

/// One PRM candidate together with its acceptance test: the rate value the
/// thinning used and whether the level fell below it. The pre-step grid node
/// whose (frozen) state entered the test is recorded for later kernel and
/// likelihood evaluations along the same path.
struct JumpRecord {
  PrmCandidate cand;
  int step = 0;
  double rate = 0.0;
  bool accepted = false;
};

struct ParticlePath {
  double dt = 0.0;
  std::vector<Vec> states;     // L+1 grid nodes
  std::vector<Vec> brownian;   // L increments, exactly as consumed
  std::vector<JumpRecord> jumps;

  int steps() const { return static_cast<int>(brownian.size()); }
  const Vec& terminal() const { return states.back(); }
};

/// Raw common-factor noise (initial point, Brownian increments, PRM
/// candidates). Drawing it separately lets the interacting system and the
/// limit system share one realisation, which is what couples the fluctuation
/// statistic to its own centring.
struct CommonNoise {
  Vec y0;
  std::vector<Vec> brownian0;
  std::vector<PrmCandidate> candidates0;
  std::uint32_t id = 0;
};

/// Solved common factor plus the M-particle conditional-law ensemble sharing
/// its noise: Y path, accepted common jumps, per-node cloud and summaries,
/// and the propagator exp(int b02 dt) needed by the limit-law kernels.
struct CommonFactorRealization {
  CommonNoise noise;
  std::vector<Vec> y_path;
  std::vector<JumpRecord> jumps0;
  std::vector<Eigen::MatrixXd> cloud;           // per node, dim_x x M
  std::vector<std::vector<double>> summaries;   // per node
  std::vector<Eigen::MatrixXd> exp_integrator;  // per node, m x m
  std::uint32_t id = 0;

  int steps() const { return static_cast<int>(y_path.size()) - 1; }
  MeasureView view_at(int node) const {
    return {&cloud[static_cast<std::size_t>(node)], summaries[static_cast<std::size_t>(node)]};
  }
};

/// Empirical measure path of a finite particle family, cached per node.
struct EmpMeasurePath {
  std::vector<Eigen::MatrixXd> cloud;
  std::vector<std::vector<double>> summaries;

  MeasureView view_at(int node) const {
    return {&cloud[static_cast<std::size_t>(node)], summaries[static_cast<std::size_t>(node)]};
  }
  static EmpMeasurePath from_paths(const ModelSpec& spec, std::span<const ParticlePath> paths);
};

struct NSystemPath {
  std::vector<ParticlePath> particles;
  std::vector<Vec> u_path;          // common factor of the interacting system
  std::vector<JumpRecord> jumps0;
  CommonNoise noise;
};

CommonNoise draw_common_noise(const ModelSpec& spec, const SimConfig& cfg, std::uint32_t rep);

/// Euler/thinning run of the N-particle interacting system coupled to the
/// given common noise. Per step: the empirical measure and all states are
/// frozen at the left node; drift and diffusion are applied once; candidates
/// inside the step are tested against the frozen state and accepted marks
/// added. Optional labels re-key the per-particle streams (exchangeability).
NSystemPath simulate_interacting(const ModelSpec& spec, const SimConfig& cfg,
                                 const CommonNoise& noise, std::uint32_t rep, int threads = 1,
                                 std::span<const std::uint32_t> particle_labels = {});

/// Limit system given one common path: the same interacting scheme with M
/// ensemble particles whose own cloud stands in for the conditional law, plus
/// the matrix propagator exp(int_0^t b02(Y_s, mu_s) ds) integrated per step.
CommonFactorRealization solve_common_and_law(const ModelSpec& spec, const SimConfig& cfg,
                                             const CommonNoise& noise, std::uint32_t rep,
                                             int threads = 1);

/// n fresh conditionally-i.i.d. particles stepped against the frozen
/// (Y, mu) of the realization. id_offset separates caller families sharing
/// one replication id.
std::vector<ParticlePath> simulate_iid_given_common(const ModelSpec& spec, const SimConfig& cfg,
                                                    const CommonFactorRealization& common,
                                                    int count, std::uint32_t rep,
                                                    std::uint32_t id_offset = 0, int threads = 1);

/// Streaming variant: paths are handed to the sink (indexed, possibly from
/// worker threads) instead of being accumulated.
void for_each_iid_given_common(const ModelSpec& spec, const SimConfig& cfg,
                               const CommonFactorRealization& common, int count, std::uint32_t rep,
                               std::uint32_t id_offset, int threads,
                               const std::function<void(ParticlePath&&, int)>& sink);

/// Auxiliary common equation driven by a supplied empirical-measure path and
/// the SAME common noise as the realization. The mark-only jump rate makes
/// the accepted common jump set identical to the realization's.
std::vector<Vec> simulate_yN(const ModelSpec& spec, const SimConfig& cfg,
                             const EmpMeasurePath& emp, const CommonFactorRealization& common);

}  // namespace mfclt
