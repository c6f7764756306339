#include "config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace mfclt::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&key](const char* a) { return key == a; }) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

std::map<std::string, double> read_param_map(const json& obj, const std::string& where) {
  std::map<std::string, double> out;
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!value.is_number()) throw ConfigError(where + "." + key + " must be a number");
    out[key] = value.get<double>();
  }
  return out;
}

void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like path.to.key=value: '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;  // bare strings need no quotes on the command line
  }

  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("empty key component in override '" + assignment + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

ExperimentConfig parse_config(json root) {
  reject_unknown(root, {"pipeline", "seed", "output_dir", "threads", "model", "sim", "phi",
                        "options"},
                 "config");
  ExperimentConfig cfg;

  if (root.contains("pipeline")) {
    cfg.pipeline = root["pipeline"].get<std::string>();
    if (std::find(kPipelines.begin(), kPipelines.end(), cfg.pipeline) == kPipelines.end())
      throw ConfigError("unknown pipeline '" + cfg.pipeline + "'");
  }
  if (root.contains("seed")) cfg.seed = root["seed"].get<std::uint64_t>();
  if (root.contains("output_dir")) cfg.output_dir = root["output_dir"].get<std::string>();
  if (root.contains("threads")) cfg.threads = root["threads"].get<int>();

  if (root.contains("model")) {
    const auto& model = root["model"];
    reject_unknown(model, {"preset", "params"}, "model");
    if (model.contains("preset")) cfg.model_preset = model["preset"].get<std::string>();
    if (model.contains("params")) cfg.model_params = read_param_map(model["params"], "model.params");
  }

  cfg.sim.seed = cfg.seed;
  if (root.contains("sim")) {
    const auto& sim = root["sim"];
    reject_unknown(sim,
                   {"n_particles", "ensemble_size", "dt", "horizon", "replication_count",
                    "gamma_quadrature"},
                   "sim");
    if (sim.contains("n_particles")) cfg.sim.n_particles = sim["n_particles"].get<int>();
    if (sim.contains("ensemble_size")) cfg.sim.ensemble_size = sim["ensemble_size"].get<int>();
    if (sim.contains("dt")) cfg.sim.dt = sim["dt"].get<double>();
    if (sim.contains("horizon")) cfg.sim.horizon = sim["horizon"].get<double>();
    if (sim.contains("replication_count"))
      cfg.sim.replication_count = sim["replication_count"].get<int>();
    if (sim.contains("gamma_quadrature"))
      cfg.sim.gamma_quadrature = sim["gamma_quadrature"].get<int>();
  }
  cfg.sim.validate();

  if (root.contains("phi")) {
    const auto& phi = root["phi"];
    reject_unknown(phi, {"id", "params"}, "phi");
    if (phi.contains("id")) cfg.phi_id = phi["id"].get<std::string>();
    if (phi.contains("params")) cfg.phi_params = read_param_map(phi["params"], "phi.params");
  }

  if (root.contains("options")) {
    const auto& opt = root["options"];
    reject_unknown(opt,
                   {"mode", "m_phi_samples", "kernel_samples", "common_paths",
                    "bootstrap_resamples", "n_grid", "reps", "reference_draws", "cdf_grid"},
                   "options");
    if (opt.contains("mode")) {
      cfg.options.mode = opt["mode"].get<std::string>();
      if (cfg.options.mode != "pooled" && cfg.options.mode != "conditional")
        throw ConfigError("options.mode must be 'pooled' or 'conditional'");
    }
    if (opt.contains("m_phi_samples")) cfg.options.m_phi_samples = opt["m_phi_samples"].get<int>();
    if (opt.contains("kernel_samples"))
      cfg.options.kernel_samples = opt["kernel_samples"].get<int>();
    if (opt.contains("common_paths")) cfg.options.common_paths = opt["common_paths"].get<int>();
    if (opt.contains("bootstrap_resamples"))
      cfg.options.bootstrap_resamples = opt["bootstrap_resamples"].get<int>();
    if (opt.contains("n_grid")) {
      if (!opt["n_grid"].is_array()) throw ConfigError("options.n_grid must be an array");
      for (const auto& v : opt["n_grid"]) cfg.options.n_grid.push_back(v.get<int>());
    }
    if (opt.contains("reps")) cfg.options.reps = opt["reps"].get<int>();
    if (opt.contains("reference_draws"))
      cfg.options.reference_draws = opt["reference_draws"].get<int>();
    if (opt.contains("cdf_grid")) cfg.options.cdf_grid = opt["cdf_grid"].get<int>();
  }

  cfg.canonical_json = root.dump(2);
  cfg.config_hash = fnv1a64(cfg.canonical_json);
  return cfg;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& o : overrides) apply_override(root, o);
  try {
    return parse_config(std::move(root));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_config_text(text, overrides);
}

}  // namespace mfclt::cli
