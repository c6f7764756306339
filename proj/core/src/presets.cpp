#include "mfclt/model.hpp"

#include <cmath>
#include <set>

namespace mfclt {

namespace {

double sech2(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

/// Key-checked parameter lookup: every preset consumes its known keys and
/// rejects the rest, so typos in configs fail loudly.
class Params {
 public:
  explicit Params(const ParamMap& map) : map_(map) {}

  double get(const std::string& key, double fallback) {
    consumed_.insert(key);
    const auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
  }

  void finish(const std::string& preset) const {
    for (const auto& [key, value] : map_) {
      if (!consumed_.count(key))
        throw ConfigError("unknown parameter '" + key + "' for preset '" + preset + "'");
    }
  }

 private:
  const ParamMap& map_;
  std::set<std::string> consumed_;
};

std::function<Vec(RngStream&)> gaussian_init(int dim, double sd) {
  return [dim, sd](RngStream& stream) {
    Vec v(dim);
    for (int c = 0; c < dim; ++c) v[c] = sd * stream.normal();
    return v;
  };
}

ModelDerivatives zero_derivatives(int d, int m) {
  ModelDerivatives der;
  der.b2 = [d, m](const Vec&, const Vec&, const MeasureView&) { return Mat::Zero(d, m); };
  der.b3 = [d](const Vec&, const Vec&, const MeasureView&, const Vec&) { return Vec::Zero(d); };
  der.b02 = [m](const Vec&, const MeasureView&) { return Mat::Zero(m, m); };
  der.b03 = [m](const Vec&, const MeasureView&, const Vec&) { return Vec::Zero(m); };
  der.d2 = [m](const Vec&, const Vec&, const Vec&, const MeasureView&) { return Vec::Zero(m); };
  der.d3 = [](const Vec&, const Vec&, const Vec&, const MeasureView&, const Vec&) { return 0.0; };
  return der;
}

ModelSpec build_decoupled(Params& p) {
  ModelSpec spec;
  spec.preset_id = "decoupled";
  spec.dim_x = 1;
  spec.dim_y = 1;
  const double rate = p.get("rate", 1.0);
  const double jump_mass = p.get("jump_mass", 0.0);
  const double jump_size = p.get("jump_size", 1.0);
  const double x0_sd = p.get("x0_sd", 1.0);
  const double y0_sd = p.get("y0_sd", 1.0);
  if (rate <= 0.0) throw ConfigError("decoupled: rate must be positive");

  spec.drift_b = [](const Vec& x, const Vec&, const MeasureView&) { return Vec::Zero(x.size()); };
  spec.drift_b0 = [](const Vec& y, const MeasureView&) { return Vec::Zero(y.size()); };
  spec.sigma = Mat::Identity(1, 1);
  spec.sigma0 = Mat::Identity(1, 1);
  spec.jump_rate_d = [rate](const Vec&, const Vec&, const MeasureView&, const Vec&) { return rate; };
  spec.jump_rate_d0 = [](const Vec&) { return 0.0; };
  spec.gamma = jump_mass > 0.0 ? SampleableMeasure::two_point(jump_size, jump_mass)
                               : SampleableMeasure::zero(1);
  spec.gamma0 = SampleableMeasure::zero(1);
  spec.rate_lower = rate;
  spec.rate_upper = std::max({rate, 1.0, std::sqrt(jump_mass) * std::abs(jump_size)});
  spec.derivatives = zero_derivatives(1, 1);
  spec.init_mu0 = gaussian_init(1, x0_sd);
  spec.init_rho0 = gaussian_init(1, y0_sd);
  spec.summary_count = 0;
  return spec;
}

// Measure dependence through k functionals f_i = tanh(scale_i x + shift_i);
// the drift/rate base functions are smooth bounded maps of (x, y, u_1..u_k)
// so the expansion family is their exact partial-derivative family.
ModelSpec build_example1(Params& p) {
  ModelSpec spec;
  spec.preset_id = "example1";
  spec.dim_x = 1;
  spec.dim_y = 1;

  const int k = static_cast<int>(p.get("k", 1.0));
  if (k < 1 || k > 8) throw ConfigError("example1: k must lie in [1,8]");
  std::vector<double> fscale(k), fshift(k);
  for (int i = 0; i < k; ++i) {
    fscale[i] = p.get("f" + std::to_string(i + 1) + "_scale", 1.0);
    fshift[i] = p.get("f" + std::to_string(i + 1) + "_shift", 0.5 * i);
  }
  const double bx = p.get("b_x", 0.25);
  const double by = p.get("b_y", 0.5);
  const double bu = p.get("b_u", 0.5);
  const double b0y = p.get("b0_y", -0.5);
  const double b0u = p.get("b0_u", 0.8);
  const double d_base = p.get("d_base", 0.3);
  const double d_amp = p.get("d_amp", 0.6);
  const double dwx = p.get("d_wx", 0.0);
  const double dwy = p.get("d_wy", 1.0);
  const double dwu = p.get("d_wu", 1.0);
  const double jump_mass = p.get("jump_mass", 2.0);
  const double jump_size = p.get("jump_size", 0.8);
  const double gamma0_mass = p.get("gamma0_mass", 1.0);
  const double gamma0_size = p.get("gamma0_size", 0.4);
  const double d0_rate = p.get("d0_rate", 0.6);
  const double x0_sd = p.get("x0_sd", 0.5);
  const double y0_sd = p.get("y0_sd", 0.3);
  if (d_base <= 0.0) throw ConfigError("example1: d_base must be positive (rate floor)");
  if (d_amp < 0.0) throw ConfigError("example1: d_amp must be nonnegative");
  if (jump_mass < 0.0 || gamma0_mass < 0.0) throw ConfigError("example1: negative jump mass");

  spec.summary_count = k;
  spec.summary_fn = [k, fscale, fshift](const Eigen::MatrixXd& cloud, std::vector<double>& out) {
    const Eigen::Index n = cloud.cols();
    for (int i = 0; i < k; ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) acc += std::tanh(fscale[i] * cloud(0, j) + fshift[i]);
      out[static_cast<std::size_t>(i)] = acc / static_cast<double>(n);
    }
  };
  auto f_at = [fscale, fshift](int i, double x) { return std::tanh(fscale[i] * x + fshift[i]); };
  auto mean_summary = [k](const MeasureView& view) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += std::tanh(view.summary(i));
    return acc;
  };

  spec.drift_b = [bx, by, bu, k, mean_summary](const Vec& x, const Vec& y, const MeasureView& nu) {
    Vec out(1);
    out[0] = bx * std::tanh(x[0]) + by * std::tanh(y[0]) + (bu / k) * mean_summary(nu);
    return out;
  };
  spec.drift_b0 = [b0y, b0u, k, mean_summary](const Vec& y, const MeasureView& nu) {
    Vec out(1);
    out[0] = b0y * std::tanh(y[0]) + (b0u / k) * mean_summary(nu);
    return out;
  };
  spec.sigma = Mat::Identity(1, 1);
  spec.sigma0 = Mat::Identity(1, 1);

  auto rate_arg = [dwx, dwy, dwu, k](const Vec& x, const Vec& y, const MeasureView& nu) {
    double w = dwx * x[0] + dwy * y[0];
    for (int i = 0; i < k; ++i) w += (dwu / k) * nu.summary(i);
    return w;
  };
  spec.jump_rate_d = [d_base, d_amp, rate_arg](const Vec& x, const Vec& y, const MeasureView& nu,
                                               const Vec&) {
    return d_base + 0.5 * d_amp * (1.0 + std::tanh(rate_arg(x, y, nu)));
  };
  spec.jump_rate_d0 = [d0_rate](const Vec&) { return d0_rate; };

  spec.gamma = jump_mass > 0.0 ? SampleableMeasure::two_point(jump_size, jump_mass)
                               : SampleableMeasure::zero(1);
  spec.gamma0 = gamma0_mass > 0.0 ? SampleableMeasure::two_point(gamma0_size, gamma0_mass)
                                  : SampleableMeasure::zero(1);
  spec.rate_lower = d_base;
  const double bound_b = std::abs(bx) + std::abs(by) + std::abs(bu);
  const double bound_b0 = std::abs(b0y) + std::abs(b0u);
  spec.rate_upper =
      std::max({d_base + d_amp, d0_rate + 1e-9, bound_b, bound_b0, 1.0,
                std::sqrt(jump_mass) * std::abs(jump_size),
                std::sqrt(gamma0_mass) * std::abs(gamma0_size)});

  ModelDerivatives der;
  der.b2 = [by](const Vec&, const Vec& y, const MeasureView&) {
    Mat m(1, 1);
    m(0, 0) = by * sech2(y[0]);
    return m;
  };
  der.b3 = [bu, k, f_at](const Vec&, const Vec&, const MeasureView& nu, const Vec& xt) {
    Vec out(1);
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += sech2(nu.summary(i)) * f_at(i, xt[0]);
    out[0] = (bu / k) * acc;
    return out;
  };
  der.b02 = [b0y](const Vec& y, const MeasureView&) {
    Mat m(1, 1);
    m(0, 0) = b0y * sech2(y[0]);
    return m;
  };
  der.b03 = [b0u, k, f_at](const Vec&, const MeasureView& nu, const Vec& xt) {
    Vec out(1);
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += sech2(nu.summary(i)) * f_at(i, xt[0]);
    out[0] = (b0u / k) * acc;
    return out;
  };
  der.d2 = [d_amp, dwy, rate_arg](const Vec& x, const Vec& y, const Vec&, const MeasureView& nu) {
    Vec out(1);
    out[0] = 0.5 * d_amp * sech2(rate_arg(x, y, nu)) * dwy;
    return out;
  };
  der.d3 = [d_amp, dwu, k, rate_arg, f_at](const Vec& x, const Vec& y, const Vec&,
                                           const MeasureView& nu, const Vec& xt) {
    const double common = 0.5 * d_amp * sech2(rate_arg(x, y, nu)) * (dwu / k);
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += f_at(i, xt[0]);
    return common * acc;
  };
  spec.derivatives = std::move(der);
  spec.init_mu0 = gaussian_init(1, x0_sd);
  spec.init_rho0 = gaussian_init(1, y0_sd);
  return spec;
}

// Pair-interaction coefficients b(x,y,nu) = <bt(x,y,.), nu> etc. The measure
// enters through a genuinely two-argument kernel, so every evaluation walks
// the cloud; stepping is O(N^2) and must be acknowledged via allow_dense=1.
ModelSpec build_example2(Params& p) {
  ModelSpec spec;
  spec.preset_id = "example2";
  spec.dim_x = 1;
  spec.dim_y = 1;

  if (p.get("allow_dense", 0.0) == 0.0)
    throw ConfigError("example2: pair-interaction stepping is O(N^2); set allow_dense=1 to opt in");
  const double bt = p.get("b_t", 0.4);
  const double bi = p.get("b_i", 0.4);
  const double b0y = p.get("b0_y", -0.4);
  const double b0i = p.get("b0_i", 0.6);
  const double d_base = p.get("d_base", 0.4);
  const double d_amp = p.get("d_amp", 0.3);
  const double jump_mass = p.get("jump_mass", 1.0);
  const double jump_size = p.get("jump_size", 0.6);
  const double x0_sd = p.get("x0_sd", 1.0);
  const double y0_sd = p.get("y0_sd", 0.5);
  if (d_base <= 0.0) throw ConfigError("example2: d_base must be positive");

  // Pair kernels; y-coupling deliberately entangled with the second argument.
  auto btilde = [bt, bi](double x, double y, double xp) {
    return bt * std::tanh(y) * (1.0 + 0.5 * std::tanh(xp)) + bi * std::tanh(xp - x);
  };
  auto btilde_y = [bt](double /*x*/, double y, double xp) {
    return bt * sech2(y) * (1.0 + 0.5 * std::tanh(xp));
  };
  auto b0tilde = [b0y, b0i](double y, double xp) {
    return b0y * std::tanh(y) + b0i * std::tanh(xp);
  };
  auto b0tilde_y = [b0y](double y, double /*xp*/) { return b0y * sech2(y); };
  auto dtilde = [d_base, d_amp](double /*x*/, double y, double xp, double /*h*/) {
    return d_base + 0.5 * d_amp * (1.0 + std::tanh(y + xp));
  };
  auto dtilde_y = [d_amp](double /*x*/, double y, double xp, double /*h*/) {
    return 0.5 * d_amp * sech2(y + xp);
  };

  auto cloud_mean = [](const MeasureView& nu, const std::function<double(double)>& g) {
    double acc = 0.0;
    const int n = nu.count();
    for (int i = 0; i < n; ++i) acc += g(nu.point(i)[0]);
    return acc / static_cast<double>(n);
  };

  spec.drift_b = [btilde, cloud_mean](const Vec& x, const Vec& y, const MeasureView& nu) {
    Vec out(1);
    out[0] = cloud_mean(nu, [&](double xp) { return btilde(x[0], y[0], xp); });
    return out;
  };
  spec.drift_b0 = [b0tilde, cloud_mean](const Vec& y, const MeasureView& nu) {
    Vec out(1);
    out[0] = cloud_mean(nu, [&](double xp) { return b0tilde(y[0], xp); });
    return out;
  };
  spec.sigma = Mat::Identity(1, 1);
  spec.sigma0 = Mat::Identity(1, 1);
  spec.jump_rate_d = [dtilde, cloud_mean](const Vec& x, const Vec& y, const MeasureView& nu,
                                          const Vec& h) {
    return cloud_mean(nu, [&](double xp) { return dtilde(x[0], y[0], xp, h[0]); });
  };
  spec.jump_rate_d0 = [](const Vec&) { return 0.0; };
  spec.gamma = jump_mass > 0.0 ? SampleableMeasure::two_point(jump_size, jump_mass)
                               : SampleableMeasure::zero(1);
  spec.gamma0 = SampleableMeasure::zero(1);
  spec.rate_lower = d_base;
  spec.rate_upper = std::max({d_base + d_amp, 1.0, std::abs(bt) * 1.5 + std::abs(bi),
                              std::abs(b0y) + std::abs(b0i),
                              std::sqrt(jump_mass) * std::abs(jump_size)});

  ModelDerivatives der;
  der.b2 = [btilde_y, cloud_mean](const Vec& x, const Vec& y, const MeasureView& nu) {
    Mat m(1, 1);
    m(0, 0) = cloud_mean(nu, [&](double xp) { return btilde_y(x[0], y[0], xp); });
    return m;
  };
  der.b3 = [btilde](const Vec& x, const Vec& y, const MeasureView&, const Vec& xt) {
    Vec out(1);
    out[0] = btilde(x[0], y[0], xt[0]);
    return out;
  };
  der.b02 = [b0tilde_y, cloud_mean](const Vec& y, const MeasureView& nu) {
    Mat m(1, 1);
    m(0, 0) = cloud_mean(nu, [&](double xp) { return b0tilde_y(y[0], xp); });
    return m;
  };
  der.b03 = [b0tilde](const Vec& y, const MeasureView&, const Vec& xt) {
    Vec out(1);
    out[0] = b0tilde(y[0], xt[0]);
    return out;
  };
  der.d2 = [dtilde_y, cloud_mean](const Vec& x, const Vec& y, const Vec& h, const MeasureView& nu) {
    Vec out(1);
    out[0] = cloud_mean(nu, [&](double xp) { return dtilde_y(x[0], y[0], xp, h[0]); });
    return out;
  };
  der.d3 = [dtilde](const Vec& x, const Vec& y, const Vec& h, const MeasureView&, const Vec& xt) {
    return dtilde(x[0], y[0], xt[0], h[0]);
  };
  spec.derivatives = std::move(der);
  spec.init_mu0 = gaussian_init(1, x0_sd);
  spec.init_rho0 = gaussian_init(1, y0_sd);
  spec.summary_count = 0;
  return spec;
}

// Self-exciting default model: state z = (firm factor x, default counter y),
// common factor u, running loss average l = <zeta(y), nu>. Defaults arrive as
// unit jumps in the counter at intensity lambda(x, y, u, l) with a strictly
// positive floor; only the factor coordinate diffuses.
ModelSpec build_finance(Params& p) {
  ModelSpec spec;
  spec.preset_id = "finance";
  spec.dim_x = 2;
  spec.dim_y = 1;

  const double bxc = p.get("b_x", 0.3);
  const double buc = p.get("b_u", 0.5);
  const double blc = p.get("b_l", 0.5);
  const double b0u = p.get("b0_u", -0.4);
  const double b0l = p.get("b0_l", 0.8);
  const double lam_floor = p.get("lam_floor", 0.1);
  const double lam_amp = p.get("lam_amp", 0.6);
  const double lam_wx = p.get("lam_wx", 0.3);
  const double lam_wu = p.get("lam_wu", 1.0);
  const double lam_wl = p.get("lam_wl", 1.0);
  const double x0_sd = p.get("x0_sd", 1.0);
  const double u0_sd = p.get("u0_sd", 0.3);
  const bool smooth_zeta = p.get("smooth_zeta", 0.0) != 0.0;
  if (lam_floor <= 0.0)
    throw ConfigError("finance: default intensity must be bounded away from 0 (lam_floor > 0)");
  if (lam_amp < 0.0) throw ConfigError("finance: lam_amp must be nonnegative");

  auto zeta = [smooth_zeta](double y) {
    return smooth_zeta ? std::tanh(std::abs(y)) : std::min(std::abs(y), 1.0);
  };

  spec.summary_count = 1;
  spec.summary_fn = [zeta](const Eigen::MatrixXd& cloud, std::vector<double>& out) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < cloud.cols(); ++j) acc += zeta(cloud(1, j));
    out[0] = acc / static_cast<double>(cloud.cols());
  };

  spec.drift_b = [bxc, buc, blc](const Vec& x, const Vec& y, const MeasureView& nu) {
    Vec out(2);
    out[0] = bxc * std::tanh(x[0]) + buc * std::tanh(y[0]) + blc * std::tanh(nu.summary(0));
    out[1] = 0.0;
    return out;
  };
  spec.drift_b0 = [b0u, b0l](const Vec& y, const MeasureView& nu) {
    Vec out(1);
    out[0] = b0u * std::tanh(y[0]) + b0l * std::tanh(nu.summary(0));
    return out;
  };
  spec.sigma = Mat::Zero(2, 2);
  spec.sigma(0, 0) = 1.0;
  spec.sigma0 = Mat::Identity(1, 1);

  auto lam_arg = [lam_wx, lam_wu, lam_wl](const Vec& x, const Vec& y, const MeasureView& nu) {
    return lam_wx * std::tanh(x[0]) + lam_wu * y[0] + lam_wl * nu.summary(0);
  };
  spec.jump_rate_d = [lam_floor, lam_amp, lam_arg](const Vec& x, const Vec& y,
                                                   const MeasureView& nu, const Vec&) {
    return lam_floor + 0.5 * lam_amp * (1.0 + std::tanh(lam_arg(x, y, nu)));
  };
  spec.jump_rate_d0 = [](const Vec&) { return 0.0; };

  Vec default_mark(2);
  default_mark << 0.0, 1.0;
  spec.gamma = SampleableMeasure::atomic(2, {{default_mark, 1.0}});
  spec.gamma0 = SampleableMeasure::zero(1);
  spec.rate_lower = lam_floor;
  spec.rate_upper = std::max({lam_floor + lam_amp, 1.0, std::abs(bxc) + std::abs(buc) + std::abs(blc),
                              std::abs(b0u) + std::abs(b0l)});

  ModelDerivatives der;
  der.b2 = [buc](const Vec&, const Vec& y, const MeasureView&) {
    Mat m = Mat::Zero(2, 1);
    m(0, 0) = buc * sech2(y[0]);
    return m;
  };
  der.b3 = [blc, zeta](const Vec&, const Vec&, const MeasureView& nu, const Vec& xt) {
    Vec out = Vec::Zero(2);
    out[0] = blc * sech2(nu.summary(0)) * zeta(xt[1]);
    return out;
  };
  der.b02 = [b0u](const Vec& y, const MeasureView&) {
    Mat m(1, 1);
    m(0, 0) = b0u * sech2(y[0]);
    return m;
  };
  der.b03 = [b0l, zeta](const Vec&, const MeasureView& nu, const Vec& xt) {
    Vec out(1);
    out[0] = b0l * sech2(nu.summary(0)) * zeta(xt[1]);
    return out;
  };
  der.d2 = [lam_amp, lam_wu, lam_arg](const Vec& x, const Vec& y, const Vec&,
                                      const MeasureView& nu) {
    Vec out(1);
    out[0] = 0.5 * lam_amp * sech2(lam_arg(x, y, nu)) * lam_wu;
    return out;
  };
  der.d3 = [lam_amp, lam_wl, lam_arg, zeta](const Vec& x, const Vec& y, const Vec&,
                                            const MeasureView& nu, const Vec& xt) {
    return 0.5 * lam_amp * sech2(lam_arg(x, y, nu)) * lam_wl * zeta(xt[1]);
  };
  spec.derivatives = std::move(der);

  spec.init_mu0 = [x0_sd](RngStream& stream) {
    Vec v(2);
    v[0] = x0_sd * stream.normal();
    v[1] = 0.0;
    return v;
  };
  spec.init_rho0 = gaussian_init(1, u0_sd);
  return spec;
}

}  // namespace

ModelSpec build_preset(const std::string& name, const ParamMap& params) {
  Params p(params);
  ModelSpec spec;
  if (name == "decoupled") {
    spec = build_decoupled(p);
  } else if (name == "example1") {
    spec = build_example1(p);
  } else if (name == "example2") {
    spec = build_example2(p);
  } else if (name == "finance") {
    spec = build_finance(p);
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  p.finish(name);
  return spec;
}

}  // namespace mfclt
