#include "mfclt/model.hpp"

#include <cmath>

namespace mfclt {

namespace {

struct ProbePoint {
  Vec x;
  Vec y;
  Vec h;
  Vec k;
};

struct ProbeCloud {
  Eigen::MatrixXd points;
  std::vector<double> summaries;
  MeasureView view(const ModelSpec& spec) {
    spec.fill_summaries(points, summaries);
    return {&points, summaries};
  }
};

// Fixed bounded-Lipschitz probe functionals, used as a measure-distance proxy
// when the preset declares no summary family of its own.
double probe_functional(int r, double x) { return std::tanh(x - (r - 1)); }
constexpr int kProbeFunctionals = 3;

double measure_gap(const ModelSpec& spec, const MeasureView& a, const MeasureView& b) {
  double gap = 0.0;
  if (spec.summary_count > 0) {
    for (int i = 0; i < spec.summary_count; ++i)
      gap = std::max(gap, std::abs(a.summary(i) - b.summary(i)));
    return gap;
  }
  for (int r = 0; r < kProbeFunctionals; ++r) {
    double ma = 0.0, mb = 0.0;
    for (int i = 0; i < a.count(); ++i) ma += probe_functional(r, a.point(i)[0]);
    for (int i = 0; i < b.count(); ++i) mb += probe_functional(r, b.point(i)[0]);
    gap = std::max(gap, std::abs(ma / a.count() - mb / b.count()));
  }
  return gap;
}

Eigen::MatrixXd draw_cloud(const ModelSpec& spec, RngStream& stream, int size) {
  Eigen::MatrixXd cloud(spec.dim_x, size);
  for (int i = 0; i < size; ++i) cloud.col(i) = spec.init_mu0(stream);
  return cloud;
}

Eigen::MatrixXd jitter_cloud(const Eigen::MatrixXd& cloud, RngStream& stream, double scale) {
  Eigen::MatrixXd out = cloud;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index r = 0; r < out.rows(); ++r) out(r, j) += scale * stream.normal();
  return out;
}

}  // namespace

ValidationReport validate_model(const ModelSpec& spec, int probes, std::uint64_t stream_seed) {
  if (probes < 1) throw ConfigError("validate_model: probes must be >= 1");
  ValidationReport report;
  auto add = [&report](std::string id, bool pass, double stat, std::string detail) {
    report.checks.push_back({std::move(id), pass, stat, std::move(detail)});
  };

  try {
    RngStream stream(StreamKey{stream_seed, 0, 0, 0, Purpose::Probe});
    constexpr int kCloudSize = 64;

    std::vector<ProbePoint> pts(static_cast<std::size_t>(probes));
    for (auto& p : pts) {
      p.x = spec.init_mu0(stream);
      p.y = spec.init_rho0(stream);
      for (int c = 0; c < p.y.size(); ++c) p.y[c] += 0.5 * stream.normal();
      p.h = spec.gamma.is_zero() ? Vec(Vec::Zero(spec.dim_x)) : spec.gamma.sampler(stream);
      p.k = spec.gamma0.is_zero() ? Vec(Vec::Zero(spec.dim_y)) : spec.gamma0.sampler(stream);
    }
    ProbeCloud base{draw_cloud(spec, stream, kCloudSize), {}};
    MeasureView base_view = base.view(spec);

    // Rate bounds (floor and thinning ceiling), plus the state-free common rate.
    {
      double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0, d0max = 0.0;
      for (const auto& p : pts) {
        const double d = spec.jump_rate_d(p.x, p.y, base_view, p.h);
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
        d0max = std::max(d0max, spec.jump_rate_d0(p.k));
      }
      add("rate_lower", dmin >= spec.rate_lower - 1e-12, dmin,
          dmin >= spec.rate_lower - 1e-12 ? "min observed particle jump rate"
                                          : "rate_lower violated");
      add("rate_upper", dmax <= spec.rate_upper + 1e-12, dmax,
          "max observed particle jump rate vs rate_upper");
      add("rate_d0", d0max >= 0.0 && d0max < spec.rate_upper, d0max,
          "common jump rate in [0, rate_upper)");
    }

    // Jump-measure second moments, estimated from fresh draws.
    for (const auto* m : {&spec.gamma, &spec.gamma0}) {
      const char* id = (m == &spec.gamma) ? "gamma_second_moment" : "gamma0_second_moment";
      if (m->is_zero()) {
        add(id, true, 0.0, "zero measure");
        continue;
      }
      double acc = 0.0;
      constexpr int kDraws = 4096;
      for (int i = 0; i < kDraws; ++i) acc += m->sampler(stream).squaredNorm();
      const double total = m->total_mass * acc / kDraws;
      add(id, total <= spec.rate_upper * spec.rate_upper * (1.0 + 1e-2) + 1e-12, total,
          "mass * E|mark|^2 vs rate_upper^2");
    }

    // Diffusions are constant matrices by construction; check finiteness.
    add("sigma_constant", spec.sigma.allFinite() && spec.sigma0.allFinite(),
        spec.sigma.norm() + spec.sigma0.norm(), "state-independent diffusion matrices");

    // Lipschitz ratio estimates (probe pairs; max observed ratio, not a proof).
    {
      double ratio_b = 0.0, ratio_b0 = 0.0;
      RngStream jstream(StreamKey{stream_seed, 1, 0, 0, Purpose::Probe});
      for (int i = 0; i + 1 < probes; i += 2) {
        const auto& p = pts[static_cast<std::size_t>(i)];
        const auto& q = pts[static_cast<std::size_t>(i + 1)];
        ProbeCloud other{jitter_cloud(base.points, jstream, 0.3), {}};
        MeasureView other_view = other.view(spec);
        const double dz = std::sqrt((p.x - q.x).squaredNorm() + (p.y - q.y).squaredNorm());
        const double gap = dz + measure_gap(spec, base_view, other_view);
        if (gap < 1e-9) continue;
        ratio_b = std::max(ratio_b, (spec.drift_b(p.x, p.y, base_view) -
                                     spec.drift_b(q.x, q.y, other_view))
                                            .norm() /
                                        gap);
        ratio_b0 = std::max(ratio_b0, (spec.drift_b0(p.y, base_view) -
                                       spec.drift_b0(q.y, other_view))
                                              .norm() /
                                          gap);
      }
      const double cap = 20.0 * std::max(1.0, spec.rate_upper);
      add("b_lipschitz", std::isfinite(ratio_b) && ratio_b <= cap, ratio_b,
          "max |b(z,nu)-b(z',nu')| / (|z-z'| + measure gap)");
      add("b0_lipschitz", std::isfinite(ratio_b0) && ratio_b0 <= cap, ratio_b0,
          "max |b0(y,nu)-b0(y',nu')| / (|y-y'| + measure gap)");
    }

    // Commutativity of the b02 family (vacuous for a one-dimensional factor).
    {
      double worst = 0.0;
      if (spec.dim_y > 1) {
        for (int i = 0; i + 1 < probes; i += 2) {
          const Mat a = spec.derivatives.b02(pts[static_cast<std::size_t>(i)].y, base_view);
          const Mat b = spec.derivatives.b02(pts[static_cast<std::size_t>(i + 1)].y, base_view);
          worst = std::max(worst, (a * b - b * a).norm());
        }
      }
      add("b02_commute", worst <= 1e-10, worst, "commutator norm of b02 pairs");
    }

    // Quadratic remainders of the expansion family: the residual after
    // removing the first-order terms must be dominated by
    // |y'-y|^2 + max_f <f, nu'-nu>^2 with a stable fitted constant.
    {
      double fit_b = 0.0, fit_b0 = 0.0, fit_d = 0.0;
      double probe_b = 0.0, probe_b0 = 0.0, probe_d = 0.0;  // vs optional analytic residuals
      bool have_probe = spec.derivatives.theta_b || spec.derivatives.theta_b0 ||
                        spec.derivatives.theta_d;
      RngStream rstream(StreamKey{stream_seed, 2, 0, 0, Purpose::Probe});
      const double scales[] = {0.02, 0.1, 0.4};
      for (int i = 0; i < probes; ++i) {
        const auto& p = pts[static_cast<std::size_t>(i)];
        const double scale = scales[i % 3];
        Vec yp = p.y;
        for (int c = 0; c < yp.size(); ++c) yp[c] += scale * rstream.normal();
        ProbeCloud pert{jitter_cloud(base.points, rstream, scale), {}};
        MeasureView pert_view = pert.view(spec);

        // First-order measure pairing against the signed difference nu' - nu.
        auto pair_b3 = [&](const Vec& x, const Vec& y) {
          Vec acc = Vec::Zero(spec.dim_x);
          for (int j = 0; j < pert_view.count(); ++j)
            acc += spec.derivatives.b3(x, y, base_view, pert_view.point(j));
          for (int j = 0; j < base_view.count(); ++j)
            acc -= spec.derivatives.b3(x, y, base_view, base_view.point(j));
          return Vec(acc / base_view.count());
        };
        auto pair_b03 = [&](const Vec& y) {
          Vec acc = Vec::Zero(spec.dim_y);
          for (int j = 0; j < pert_view.count(); ++j)
            acc += spec.derivatives.b03(y, base_view, pert_view.point(j));
          for (int j = 0; j < base_view.count(); ++j)
            acc -= spec.derivatives.b03(y, base_view, base_view.point(j));
          return Vec(acc / base_view.count());
        };
        auto pair_d3 = [&](const Vec& x, const Vec& y, const Vec& h) {
          double acc = 0.0;
          for (int j = 0; j < pert_view.count(); ++j)
            acc += spec.derivatives.d3(x, y, h, base_view, pert_view.point(j));
          for (int j = 0; j < base_view.count(); ++j)
            acc -= spec.derivatives.d3(x, y, h, base_view, base_view.point(j));
          return acc / base_view.count();
        };

        double fgap = 0.0;
        if (spec.summary_count > 0) {
          for (int s = 0; s < spec.summary_count; ++s)
            fgap = std::max(fgap, std::abs(pert_view.summary(s) - base_view.summary(s)));
        } else {
          fgap = measure_gap(spec, base_view, pert_view);
        }
        const double bound = (yp - p.y).squaredNorm() + fgap * fgap;
        if (bound < 1e-12) continue;

        const Vec theta_b = spec.drift_b(p.x, yp, pert_view) - spec.drift_b(p.x, p.y, base_view) -
                            spec.derivatives.b2(p.x, p.y, base_view) * (yp - p.y) -
                            pair_b3(p.x, p.y);
        const Vec theta_b0 = spec.drift_b0(yp, pert_view) - spec.drift_b0(p.y, base_view) -
                             spec.derivatives.b02(p.y, base_view) * (yp - p.y) - pair_b03(p.y);
        const double theta_d =
            spec.jump_rate_d(p.x, yp, pert_view, p.h) - spec.jump_rate_d(p.x, p.y, base_view, p.h) -
            (yp - p.y).dot(spec.derivatives.d2(p.x, p.y, p.h, base_view)) -
            pair_d3(p.x, p.y, p.h);
        fit_b = std::max(fit_b, theta_b.norm() / bound);
        fit_b0 = std::max(fit_b0, theta_b0.norm() / bound);
        fit_d = std::max(fit_d, std::abs(theta_d) / bound);

        if (spec.derivatives.theta_b)
          probe_b = std::max(probe_b, (theta_b - spec.derivatives.theta_b(p.x, p.y, yp, base_view,
                                                                          pert_view))
                                          .norm());
        if (spec.derivatives.theta_b0)
          probe_b0 = std::max(probe_b0, (theta_b0 - spec.derivatives.theta_b0(p.y, yp, base_view,
                                                                              pert_view))
                                            .norm());
        if (spec.derivatives.theta_d)
          probe_d = std::max(probe_d,
                             std::abs(theta_d - spec.derivatives.theta_d(p.x, p.y, yp, base_view,
                                                                         pert_view, p.h)));
      }
      constexpr double kRemainderCap = 50.0;
      add("theta_b_remainder", std::isfinite(fit_b) && fit_b <= kRemainderCap, fit_b,
          "fitted quadratic-remainder constant for b");
      add("theta_b0_remainder", std::isfinite(fit_b0) && fit_b0 <= kRemainderCap, fit_b0,
          "fitted quadratic-remainder constant for b0");
      add("theta_d_remainder", std::isfinite(fit_d) && fit_d <= kRemainderCap, fit_d,
          "fitted quadratic-remainder constant for d");
      if (have_probe)
        add("theta_probes", std::max({probe_b, probe_b0, probe_d}) <= 1e-8,
            std::max({probe_b, probe_b0, probe_d}),
            "computed residuals vs analytic residual probes");
    }
  } catch (const std::exception& e) {
    add("evaluator_failure", false, 0.0, e.what());
  }

  return report;
}

}  // namespace mfclt
