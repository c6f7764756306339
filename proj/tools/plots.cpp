#include "pipelines.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace mfclt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_script(const fs::path& dir, const std::string& name, const std::string& body) {
  std::ofstream os(dir / name);
  if (!os) throw ConfigError("cannot write " + (dir / name).string());
  os << "#!/usr/bin/env python3\n"
     << "# Self-contained plot script; run from this directory.\n"
     << "import csv\n"
     << "import matplotlib\n"
     << "matplotlib.use(\"Agg\")\n"
     << "import matplotlib.pyplot as plt\n\n"
     << "def load(name):\n"
     << "    with open(name) as f:\n"
     << "        rows = [r for r in csv.reader(l for l in f if not l.startswith(\"#\"))]\n"
     << "    return rows[0], rows[1:]\n\n"
     << body;
}

const char* kHistogramBody = R"PY(header, rows = load("samples.csv")
values = [float(r[0]) for r in rows]
fig, ax = plt.subplots(figsize=(7, 4.5))
ax.hist(values, bins=60, density=True, alpha=0.6, label="fluctuation samples")
try:
    mheader, mrows = load("mixture.csv")
    xs = [float(r[0]) for r in mrows]
    cdf = [float(r[1]) for r in mrows]
    pdf = [(cdf[i + 1] - cdf[i - 1]) / (xs[i + 1] - xs[i - 1]) for i in range(1, len(xs) - 1)]
    ax.plot(xs[1:-1], pdf, "r-", lw=2, label="predicted mixture")
except FileNotFoundError:
    pass
ax.set_xlabel("scaled fluctuation")
ax.set_ylabel("density")
ax.legend()
fig.tight_layout()
fig.savefig("histogram.png", dpi=150)
print("wrote histogram.png")
)PY";

const char* kMixtureBody = R"PY(header, rows = load("mixture.csv")
xs = [float(r[0]) for r in rows]
cdf = [float(r[1]) for r in rows]
fig, ax = plt.subplots(figsize=(7, 4.5))
ax.plot(xs, cdf, lw=2)
ax.set_xlabel("scaled fluctuation")
ax.set_ylabel("predicted mixture CDF")
fig.tight_layout()
fig.savefig("mixture.png", dpi=150)
print("wrote mixture.png")
)PY";

const char* kQqBody = R"PY(header, rows = load("qq.csv")
theo = [float(r[0]) for r in rows]
emp = [float(r[1]) for r in rows]
fig, ax = plt.subplots(figsize=(5.5, 5.5))
ax.plot(theo, emp, ".", ms=3)
lo, hi = min(theo + emp), max(theo + emp)
ax.plot([lo, hi], [lo, hi], "k--", lw=1)
ax.set_xlabel("predicted quantile")
ax.set_ylabel("sample quantile")
fig.tight_layout()
fig.savefig("qq.png", dpi=150)
print("wrote qq.png")
)PY";

const char* kRatesBody = R"PY(import json
header, rows = load("rates.csv")
ns = [float(r[0]) for r in rows]
mse = [float(r[1]) for r in rows]
with open("rates.json") as f:
    fit = json.load(f)
fig, ax = plt.subplots(figsize=(6, 4.5))
ax.loglog(ns, mse, "o-", label="terminal gap MSE")
ref = [mse[0] * ns[0] / n for n in ns]
ax.loglog(ns, ref, "k--", label="slope -1 reference")
ax.set_xlabel("N")
ax.set_ylabel("MSE")
ax.set_title("fitted slope %.3f (r2 %.3f)" % (fit["slope"], fit["r2"]))
ax.legend()
fig.tight_layout()
fig.savefig("rates.png", dpi=150)
print("wrote rates.png")
)PY";

}  // namespace

void emit_plots(const std::string& bundle_dir) {
  const fs::path dir(bundle_dir);
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw ConfigError("emit_plots: missing " + manifest_path.string() +
                      " (expected a pipeline output bundle)");
  json manifest;
  {
    std::ifstream is(manifest_path);
    is >> manifest;
  }
  const std::string pipeline = manifest.value("pipeline", "");

  struct Template {
    std::vector<std::string> inputs;
    std::string script;
    const char* body;
  };
  std::vector<Template> templates;
  if (pipeline == "fluctuate") {
    templates.push_back({{"samples.csv"}, "plot_histogram.py", kHistogramBody});
  } else if (pipeline == "compare") {
    templates.push_back({{"samples.csv", "mixture.csv"}, "plot_histogram.py", kHistogramBody});
    templates.push_back({{"qq.csv"}, "plot_qq.py", kQqBody});
  } else if (pipeline == "predict") {
    templates.push_back({{"mixture.csv"}, "plot_mixture.py", kMixtureBody});
  } else if (pipeline == "rates") {
    templates.push_back({{"rates.csv", "rates.json"}, "plot_rates.py", kRatesBody});
  } else {
    return;  // nothing to plot for this pipeline
  }

  std::string missing;
  for (const auto& t : templates)
    for (const auto& input : t.inputs)
      if (!fs::exists(dir / input)) missing += (missing.empty() ? "" : ", ") + input;
  if (!missing.empty())
    throw ConfigError("emit_plots: missing expected files in " + bundle_dir + ": " + missing);

  for (const auto& t : templates) write_script(dir, t.script, t.body);
}

}  // namespace mfclt::cli
