#pragma once

#include "mfclt/model.hpp"
#include "mfclt/simulate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mfclt::cli {

inline const std::vector<std::string> kPipelines = {
    "simulate", "martingale", "fluctuate", "predict",
    "compare",  "symmstat",   "finance-demo", "rates"};

/// Pipeline-specific knobs; every field has a default so configs stay short.
struct PipelineOptions {
  std::string mode = "pooled";  // fluctuate/compare: pooled | conditional
  int m_phi_samples = 0;        // 0: fluctuation default (100 N)
  int kernel_samples = 0;       // 0: use sim.ensemble_size
  int common_paths = 20;
  int bootstrap_resamples = 40;
  std::vector<int> n_grid;      // rates / symmstat grids
  int reps = 2000;              // symmstat repetitions per grid point
  int reference_draws = 500000;
  int cdf_grid = 201;
};

struct ExperimentConfig {
  std::string pipeline;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int threads = 0;  // 0: decide at run time
  std::string model_preset = "decoupled";
  ParamMap model_params;
  SimConfig sim;
  std::string phi_id = "terminal_coordinate";
  std::map<std::string, double> phi_params;
  PipelineOptions options;

  std::string canonical_json;  // normalised dump, hashed into the manifest
  std::uint64_t config_hash = 0;
};

/// Parses and schema-validates a config file; unknown keys anywhere are
/// rejected. Overrides are dotted-path assignments ("sim.dt=0.0025",
/// "model.preset=finance") applied before validation.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

/// Same, from an in-memory JSON text (tests).
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides = {});

std::uint64_t fnv1a64(const std::string& text);

}  // namespace mfclt::cli
