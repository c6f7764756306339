#include "mfclt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mfclt {

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::array<std::uint32_t, 4> next = {
        static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
        static_cast<std::uint32_t>(p1),
        static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
        static_cast<std::uint32_t>(p0),
    };
    ctr = next;
  }
  return ctr;
}

RngStream::RngStream(const StreamKey& key) {
  counter_ = {key.replication, key.particle, key.step,
              static_cast<std::uint32_t>(key.purpose) << 24};
  key_ = {static_cast<std::uint32_t>(key.seed), static_cast<std::uint32_t>(key.seed >> 32)};
}

void RngStream::refill() {
  auto ctr = counter_;
  ctr[3] |= (block_ & 0x00FFFFFFu);
  buffer_ = Philox4x32::block(ctr, key_);
  ++block_;
  buffer_pos_ = 0;
}

std::uint32_t RngStream::next_u32() {
  if (buffer_pos_ >= 4) refill();
  return buffer_[buffer_pos_++];
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  spare_normal_ = r * std::sin(theta);
  has_spare_normal_ = true;
  return r * std::cos(theta);
}

double RngStream::exponential(double rate) {
  return -std::log(uniform_pos()) / rate;
}

std::vector<Vec> brownian_increments(const StreamKey& key, double dt, int steps, int dim) {
  if (dim <= 0) throw ConfigError("brownian_increments: dim must be positive");
  if (dt <= 0.0) throw ConfigError("brownian_increments: dt must be positive");
  RngStream stream(key);
  const double sd = std::sqrt(dt);
  std::vector<Vec> out(static_cast<std::size_t>(std::max(steps, 0)));
  for (auto& inc : out) {
    inc.resize(dim);
    for (int c = 0; c < dim; ++c) inc[c] = sd * stream.normal();
  }
  return out;
}

std::vector<PrmCandidate> sample_prm_candidates(const StreamKey& key,
                                                const SampleableMeasure& measure,
                                                double rate_upper, double horizon) {
  std::vector<PrmCandidate> out;
  if (measure.is_zero()) return out;
  if (rate_upper <= 0.0) throw ConfigError("sample_prm_candidates: rate_upper must be positive");
  if (horizon <= 0.0) throw ConfigError("sample_prm_candidates: horizon must be positive");

  RngStream stream(key);
  const double intensity = rate_upper * measure.total_mass;
  double t = stream.exponential(intensity);
  while (t <= horizon) {
    PrmCandidate cand;
    cand.t = t;
    cand.mark = measure.sampler(stream);
    cand.u = rate_upper * stream.uniform();
    out.push_back(std::move(cand));
    t += stream.exponential(intensity);
  }
  return out;
}

SampleableMeasure SampleableMeasure::zero(int dim) {
  SampleableMeasure m;
  m.dim = dim;
  return m;
}

SampleableMeasure SampleableMeasure::atomic(int dim, std::vector<std::pair<Vec, double>> atoms) {
  SampleableMeasure m;
  m.dim = dim;
  double mass = 0.0, moment = 0.0;
  for (const auto& [point, weight] : atoms) {
    mass += weight;
    moment += weight * point.squaredNorm();
  }
  m.total_mass = mass;
  m.second_moment = mass > 0.0 ? moment / mass : 0.0;
  m.atoms = std::move(atoms);
  m.sampler = [atoms = m.atoms, mass](RngStream& stream) -> Vec {
    double level = stream.uniform() * mass;
    for (const auto& [point, weight] : atoms) {
      level -= weight;
      if (level <= 0.0) return point;
    }
    return atoms.back().first;
  };
  return m;
}

SampleableMeasure SampleableMeasure::two_point(double size, double mass) {
  Vec up(1), down(1);
  up[0] = size;
  down[0] = -size;
  return atomic(1, {{up, mass / 2.0}, {down, mass / 2.0}});
}

SampleableMeasure SampleableMeasure::gaussian(int dim, double sd, double mass) {
  SampleableMeasure m;
  m.dim = dim;
  m.total_mass = mass;
  m.second_moment = static_cast<double>(dim) * sd * sd;
  m.sampler = [dim, sd](RngStream& stream) -> Vec {
    Vec point(dim);
    for (int c = 0; c < dim; ++c) point[c] = sd * stream.normal();
    return point;
  };
  return m;
}

}  // namespace mfclt
