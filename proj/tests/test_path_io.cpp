#include <doctest.h>

#include "mfclt/path_io.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace mfclt;

TEST_CASE("path bundle round trip is exact") {
  const ModelSpec spec = build_preset("example1");
  SimConfig cfg;
  cfg.n_particles = 3;
  cfg.ensemble_size = 20;
  cfg.dt = 0.01;
  cfg.horizon = 0.1;
  cfg.seed = 41;
  const auto common = solve_common_and_law(spec, cfg, draw_common_noise(spec, cfg, 0), 0);
  const auto paths = simulate_iid_given_common(spec, cfg, common, 3, 0);

  const auto file = std::filesystem::temp_directory_path() / "mfclt_bundle_test.bin";
  save_path_bundle(file.string(), common, paths);
  const auto loaded = load_path_bundle(file.string());
  std::filesystem::remove(file);

  REQUIRE(loaded.paths.size() == paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    CHECK(loaded.paths[i].dt == paths[i].dt);
    REQUIRE(loaded.paths[i].states.size() == paths[i].states.size());
    for (std::size_t n = 0; n < paths[i].states.size(); ++n)
      CHECK(loaded.paths[i].states[n] == paths[i].states[n]);
    REQUIRE(loaded.paths[i].jumps.size() == paths[i].jumps.size());
    for (std::size_t n = 0; n < paths[i].jumps.size(); ++n) {
      CHECK(loaded.paths[i].jumps[n].cand.t == paths[i].jumps[n].cand.t);
      CHECK(loaded.paths[i].jumps[n].rate == paths[i].jumps[n].rate);
      CHECK(loaded.paths[i].jumps[n].accepted == paths[i].jumps[n].accepted);
    }
  }
  REQUIRE(loaded.common.y_path.size() == common.y_path.size());
  for (std::size_t n = 0; n < common.y_path.size(); ++n)
    CHECK(loaded.common.y_path[n] == common.y_path[n]);
  for (std::size_t n = 0; n < common.cloud.size(); ++n)
    CHECK(loaded.common.cloud[n] == common.cloud[n]);

  CHECK_THROWS_AS(load_path_bundle("/nonexistent/mfclt.bin"), ConfigError);
}

TEST_CASE("csv export carries headers with units") {
  const ModelSpec spec = build_preset("decoupled");
  SimConfig cfg;
  cfg.n_particles = 2;
  cfg.ensemble_size = 2;
  cfg.dt = 0.05;
  cfg.horizon = 0.1;
  cfg.seed = 1;
  const auto system = simulate_interacting(spec, cfg, draw_common_noise(spec, cfg, 0), 0);
  std::ostringstream os;
  write_paths_csv(os, system.particles);
  const std::string text = os.str();
  CHECK(text.find("node,t [model time],particle,x0 [state]") == 0);
  // 3 nodes x 2 particles data rows + header.
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  CHECK(lines == 7);
}
