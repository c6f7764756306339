#pragma once

#include "mfclt/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace mfclt {

inline constexpr const char* kRngAlgorithm = "philox4x32-10";

/// Philox 4x32 counter-based generator, 10 rounds. One block maps a 128-bit
/// counter and 64-bit key to four 32-bit words; distinct (counter, key) pairs
/// give statistically independent outputs, which is what makes parallel
/// simulation reproducible without shared generator state.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key);
};

/// Substream labels. Distinct tuples address independent streams; the same
/// tuple reproduces the same draws regardless of thread schedule.
enum class Purpose : std::uint32_t {
  InitCommon = 1,
  BrownianCommon,
  PrmCommon,
  InitSystem,
  BrownianSystem,
  PrmSystem,
  InitEnsemble,
  BrownianEnsemble,
  PrmEnsemble,
  InitConditional,
  BrownianConditional,
  PrmConditional,
  CompensatorQuadrature,
  KernelQuadrature,
  Bootstrap,
  Experiment,
  Probe,
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t replication = 0;
  std::uint32_t particle = 0;
  std::uint32_t step = 0;
  Purpose purpose = Purpose::Experiment;
};

/// Buffered stream of variates for one StreamKey. Draws are sequential within
/// the stream; the block index occupies the low 24 bits of the last counter
/// word (the purpose tag sits above it), giving ~64M 32-bit words per stream.
class RngStream {
 public:
  explicit RngStream(const StreamKey& key);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0,1) with 53-bit resolution.
  double uniform();
  /// Uniform on (0,1], safe as a log argument.
  double uniform_pos();
  /// Standard normal (Box-Muller, pairs cached).
  double normal();
  double exponential(double rate);

 private:
  void refill();

  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 2> key_;
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffer_pos_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_normal_ = false;
};

/// i.i.d. Gaussian increments, mean zero, covariance dt * I_dim.
std::vector<Vec> brownian_increments(const StreamKey& key, double dt, int steps, int dim);

/// One candidate point of a Poisson random measure restricted to the level
/// slab [0, rate_upper]; a candidate becomes a jump when its level u lies
/// below the state-dependent rate evaluated at the mark.
struct PrmCandidate {
  double t = 0.0;
  Vec mark;
  double u = 0.0;
};

/// Candidates on [0, horizon]: arrival times are homogeneous Poisson with
/// intensity rate_upper * total_mass, marks follow the normalised measure and
/// levels are uniform on [0, rate_upper]. Sorted by time.
std::vector<PrmCandidate> sample_prm_candidates(const StreamKey& key,
                                                const SampleableMeasure& measure,
                                                double rate_upper, double horizon);

}  // namespace mfclt
