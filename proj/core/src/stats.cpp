#include "mfclt/stats.hpp"

#include "mfclt/types.hpp"

#include <algorithm>
#include <cmath>

namespace mfclt::stats {

double normal_cdf(double x) {
  // Abramowitz-Stegun 26.2.17: Phi(x) = 1 - phi(x)(b1 t + ... + b5 t^5),
  // t = 1/(1 + p x), valid for x >= 0; |error| < 7.5e-8.
  constexpr double p = 0.2316419;
  constexpr double b1 = 0.319381530;
  constexpr double b2 = -0.356563782;
  constexpr double b3 = 1.781477937;
  constexpr double b4 = -1.821255978;
  constexpr double b5 = 1.330274429;
  const double ax = std::abs(x);
  const double t = 1.0 / (1.0 + p * ax);
  const double poly = t * (b1 + t * (b2 + t * (b3 + t * (b4 + t * b5))));
  const double pdf = std::exp(-0.5 * ax * ax) / std::sqrt(2.0 * M_PI);
  const double upper = pdf * poly;
  return x >= 0.0 ? 1.0 - upper : upper;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must lie in (0,1)");
  // Acklam's piecewise rational approximation.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement against the exact erfc-based CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

MeanSe mean_se(std::span<const double> samples) {
  if (samples.empty()) throw ConfigError("mean_se: empty sample");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  if (samples.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

double sample_std(std::span<const double> samples) {
  if (samples.size() < 2) throw ConfigError("sample_std: need at least two samples");
  const auto ms = mean_se(samples);
  return ms.se * std::sqrt(static_cast<double>(samples.size()));
}

Ecdf::Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
  if (sorted_.empty()) throw ConfigError("Ecdf: empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ConfigError("ks_statistic: empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    const double hi = static_cast<double>(i + 1) / n - f;
    const double lo = f - static_cast<double>(i) / n;
    sup = std::max({sup, std::abs(hi), std::abs(lo)});
  }
  return sup;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t ia = 0, ib = 0;
  double sup = 0.0;
  while (ia < sa.size() && ib < sb.size()) {
    const double v = std::min(sa[ia], sb[ib]);
    while (ia < sa.size() && sa[ia] <= v) ++ia;
    while (ib < sb.size() && sb[ib] <= v) ++ib;
    sup = std::max(sup, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  return sup;
}

double gaussian_mixture_cdf(std::span<const double> sigmas, std::span<const double> weights,
                            double x) {
  if (sigmas.size() != weights.size() || sigmas.empty())
    throw ConfigError("gaussian_mixture_cdf: sigmas/weights size mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("gaussian_mixture_cdf: negative weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-12) throw ConfigError("gaussian_mixture_cdf: weights must sum to 1");
  double acc = 0.0;
  for (std::size_t r = 0; r < sigmas.size(); ++r) {
    if (sigmas[r] < 0.0) throw ConfigError("gaussian_mixture_cdf: negative sigma");
    if (sigmas[r] == 0.0) {
      acc += weights[r] * (x >= 0.0 ? 1.0 : 0.0);
    } else {
      acc += weights[r] * normal_cdf(x / sigmas[r]);
    }
  }
  return acc;
}

double gaussian_mixture_quantile(std::span<const double> sigmas, std::span<const double> weights,
                                 double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("gaussian_mixture_quantile: p must lie in (0,1)");
  double smax = 0.0;
  for (double s : sigmas) smax = std::max(smax, s);
  if (smax == 0.0) return 0.0;
  double lo = -smax * 10.0, hi = smax * 10.0;
  while (gaussian_mixture_cdf(sigmas, weights, lo) > p) lo *= 2.0;
  while (gaussian_mixture_cdf(sigmas, weights, hi) < p) hi *= 2.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    (gaussian_mixture_cdf(sigmas, weights, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

LineFit loglog_slope(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 2) throw ConfigError("loglog_slope: need at least two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  const double n = static_cast<double>(pairs.size());
  for (const auto& [nv, v] : pairs) {
    if (nv <= 0.0 || v <= 0.0) throw ConfigError("loglog_slope: values must be positive");
    const double x = std::log(nv);
    const double y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double vxx = sxx - sx * sx / n;
  const double vxy = sxy - sx * sy / n;
  const double vyy = syy - sy * sy / n;
  if (vxx <= 0.0) throw ConfigError("loglog_slope: degenerate abscissae");
  LineFit fit;
  fit.slope = vxy / vxx;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.r2 = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
  return fit;
}

}  // namespace mfclt::stats
