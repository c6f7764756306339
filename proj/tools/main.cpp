#include "pipelines.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and fluctuation analysis of weakly interacting jump-diffusions "
               "with a common factor"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::vector<std::string> overrides;
  long long seed_override = -1;
  int threads_override = 0;
  std::string plots_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--out", out_override, "override the output directory");
    sub->add_option("--threads", threads_override,
                    "worker threads (0: MEANFIELD_CLT_THREADS or hardware)");
    sub->add_option("--override", overrides,
                    "dotted-path config override, e.g. sim.dt=0.0025 (repeatable)");
  };

  for (const auto& name : mfclt::cli::kPipelines) add_common(app.add_subcommand(name));
  app.add_subcommand("emit-plots", "write plot scripts for an existing output bundle")
      ->add_option("dir", plots_dir, "bundle directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    if (sub->get_name() == "emit-plots") {
      mfclt::cli::emit_plots(plots_dir);
      return kExitOk;
    }
    auto cfg = mfclt::cli::load_config(config_path, overrides);
    cfg.pipeline = sub->get_name();
    if (seed_override >= 0) {
      cfg.seed = static_cast<std::uint64_t>(seed_override);
      cfg.sim.seed = cfg.seed;
    }
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (threads_override > 0) cfg.threads = threads_override;
    mfclt::cli::run_pipeline(cfg);
    return kExitOk;
  } catch (const mfclt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const mfclt::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return kExitNumerical;
  }
}
