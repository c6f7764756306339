#pragma once

#include "mfclt/simulate.hpp"

namespace mfclt {

/// Change-of-measure exponent between the conditionally-i.i.d. system and the
/// interacting one, evaluated along simulated paths. j1 collects the drift
/// part (stochastic integrals of the drift difference against the retained
/// Brownian increments, minus half its quadratic variation); j2 collects the
/// jump part (log rate ratios over accepted jumps minus the rate-difference
/// compensator). exp(j1 + j2) has mean one, which is the primary cross-check
/// between the two systems.
struct GirsanovResult {
  double j1 = 0.0;
  double j2 = 0.0;
  double h() const;
};

/// iid_paths must come from simulate_iid_given_common with retained noise;
/// emp is their own empirical-measure path and y_aux the auxiliary common
/// path solved against it (simulate_yN).
GirsanovResult compute_logH(const ModelSpec& spec, const SimConfig& cfg,
                            const CommonFactorRealization& common,
                            std::span<const ParticlePath> iid_paths, const EmpMeasurePath& emp,
                            std::span<const Vec> y_aux, int threads = 1);

}  // namespace mfclt
