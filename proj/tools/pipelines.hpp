#pragma once

#include "config.hpp"

namespace mfclt::cli {

/// Executes the configured pipeline, writing CSV/JSON artifacts plus a
/// manifest into cfg.output_dir. Throws ConfigError for validation problems
/// (exit 2) and NumericalError for numerical failures (exit 3).
void run_pipeline(const ExperimentConfig& cfg);

/// Writes self-contained plot scripts next to a pipeline's CSV outputs.
/// Fails listing every expected file that is missing.
void emit_plots(const std::string& bundle_dir);

}  // namespace mfclt::cli
