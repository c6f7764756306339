#include "mfclt/path_io.hpp"

#include <cstring>
#include <fstream>
#include <ostream>

namespace mfclt {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'C', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& file) : os_(file, std::ios::binary) {
    if (!os_) throw ConfigError("cannot open '" + file + "' for writing");
  }
  void u32(std::uint32_t v) { os_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void f64(double v) { os_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void vec(const Vec& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void vecs(const std::vector<Vec>& vs) {
    u32(static_cast<std::uint32_t>(vs.size()));
    for (const auto& v : vs) vec(v);
  }
  void matrix(const Eigen::MatrixXd& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) f64(m(r, c));
  }
  void jumps(const std::vector<JumpRecord>& js) {
    u32(static_cast<std::uint32_t>(js.size()));
    for (const auto& j : js) {
      f64(j.cand.t);
      vec(j.cand.mark);
      f64(j.cand.u);
      u32(static_cast<std::uint32_t>(j.step));
      f64(j.rate);
      u32(j.accepted ? 1u : 0u);
    }
  }
  void done() {
    os_.flush();
    if (!os_) throw ConfigError("write failure on path bundle");
  }

 private:
  std::ofstream os_;
};

class Reader {
 public:
  explicit Reader(const std::string& file) : is_(file, std::ios::binary) {
    if (!is_) throw ConfigError("cannot open '" + file + "' for reading");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    is_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  double f64() {
    double v;
    is_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  Vec vec() {
    const auto n = u32();
    Vec v(static_cast<Eigen::Index>(n));
    for (std::uint32_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = f64();
    return v;
  }
  std::vector<Vec> vecs() {
    const auto n = u32();
    std::vector<Vec> out(n);
    for (auto& v : out) v = vec();
    return out;
  }
  Eigen::MatrixXd matrix() {
    const auto rows = u32();
    const auto cols = u32();
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t c = 0; c < cols; ++c)
      for (std::uint32_t r = 0; r < rows; ++r) m(r, c) = f64();
    return m;
  }
  std::vector<JumpRecord> jumps() {
    const auto n = u32();
    std::vector<JumpRecord> out(n);
    for (auto& j : out) {
      j.cand.t = f64();
      j.cand.mark = vec();
      j.cand.u = f64();
      j.step = static_cast<int>(u32());
      j.rate = f64();
      j.accepted = u32() != 0;
    }
    return out;
  }
  void check() {
    if (!is_) throw ConfigError("truncated or corrupt path bundle");
  }

 private:
  std::ifstream is_;
};

void write_particle(Writer& w, const ParticlePath& p) {
  w.f64(p.dt);
  w.vecs(p.states);
  w.vecs(p.brownian);
  w.jumps(p.jumps);
}

ParticlePath read_particle(Reader& r) {
  ParticlePath p;
  p.dt = r.f64();
  p.states = r.vecs();
  p.brownian = r.vecs();
  p.jumps = r.jumps();
  return p;
}

}  // namespace

void save_path_bundle(const std::string& file, const CommonFactorRealization& common,
                      std::span<const ParticlePath> paths) {
  Writer w(file);
  std::uint32_t magic;
  std::memcpy(&magic, kMagic, 4);
  w.u32(magic);
  w.u32(kFormatVersion);

  w.u32(common.id);
  w.u32(common.noise.id);
  w.vec(common.noise.y0);
  w.vecs(common.noise.brownian0);
  w.u32(static_cast<std::uint32_t>(common.noise.candidates0.size()));
  for (const auto& c : common.noise.candidates0) {
    w.f64(c.t);
    w.vec(c.mark);
    w.f64(c.u);
  }
  w.vecs(common.y_path);
  w.jumps(common.jumps0);
  w.u32(static_cast<std::uint32_t>(common.cloud.size()));
  for (const auto& m : common.cloud) w.matrix(m);
  w.u32(static_cast<std::uint32_t>(common.summaries.size()));
  for (const auto& s : common.summaries) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    for (double v : s) w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(common.exp_integrator.size()));
  for (const auto& m : common.exp_integrator) w.matrix(m);

  w.u32(static_cast<std::uint32_t>(paths.size()));
  for (const auto& p : paths) write_particle(w, p);
  w.done();
}

PathBundle load_path_bundle(const std::string& file) {
  Reader r(file);
  std::uint32_t magic_expect;
  std::memcpy(&magic_expect, kMagic, 4);
  if (r.u32() != magic_expect) throw ConfigError("not a path bundle: bad magic");
  const auto version = r.u32();
  if (version != kFormatVersion)
    throw ConfigError("unsupported path bundle version " + std::to_string(version));

  PathBundle bundle;
  auto& common = bundle.common;
  common.id = r.u32();
  common.noise.id = r.u32();
  common.noise.y0 = r.vec();
  common.noise.brownian0 = r.vecs();
  const auto ncand = r.u32();
  common.noise.candidates0.resize(ncand);
  for (auto& c : common.noise.candidates0) {
    c.t = r.f64();
    c.mark = r.vec();
    c.u = r.f64();
  }
  common.y_path = r.vecs();
  common.jumps0 = r.jumps();
  common.cloud.resize(r.u32());
  for (auto& m : common.cloud) m = r.matrix();
  common.summaries.resize(r.u32());
  for (auto& s : common.summaries) {
    s.resize(r.u32());
    for (auto& v : s) v = r.f64();
  }
  common.exp_integrator.resize(r.u32());
  for (auto& m : common.exp_integrator) m = r.matrix();

  bundle.paths.resize(r.u32());
  for (auto& p : bundle.paths) p = read_particle(r);
  return bundle;
}

void write_paths_csv(std::ostream& os, std::span<const ParticlePath> paths) {
  if (paths.empty()) return;
  const int dim = static_cast<int>(paths[0].states[0].size());
  os << "node,t [model time],particle";
  for (int c = 0; c < dim; ++c) os << ",x" << c << " [state]";
  os << "\n";
  char buf[400];
  for (std::size_t node = 0; node < paths[0].states.size(); ++node) {
    for (std::size_t i = 0; i < paths.size(); ++i) {
      int len = std::snprintf(buf, sizeof(buf), "%zu,%.17g,%zu", node,
                              static_cast<double>(node) * paths[i].dt, i);
      for (int c = 0; c < dim; ++c)
        len += std::snprintf(buf + len, sizeof(buf) - static_cast<std::size_t>(len), ",%.17g",
                             paths[i].states[node][c]);
      os << buf << "\n";
    }
  }
}

}  // namespace mfclt
