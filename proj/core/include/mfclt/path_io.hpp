#pragma once

#include "mfclt/simulate.hpp"

#include <iosfwd>
#include <string>

namespace mfclt {

/// Versioned binary cache of one common-path realization plus a batch of
/// particle paths with their retained noise, for kernel-stage reuse without
/// re-simulation. Little-endian doubles; header carries magic + version.
void save_path_bundle(const std::string& file, const CommonFactorRealization& common,
                      std::span<const ParticlePath> paths);

struct PathBundle {
  CommonFactorRealization common;
  std::vector<ParticlePath> paths;
};

PathBundle load_path_bundle(const std::string& file);

/// Node-major CSV of particle states: node, t, particle, x0..x{d-1}.
void write_paths_csv(std::ostream& os, std::span<const ParticlePath> paths);

}  // namespace mfclt
