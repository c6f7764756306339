#pragma once

#include <functional>
#include <span>
#include <vector>

namespace mfclt::stats {

// Asymptotic Kolmogorov-Smirnov thresholds: reject at level alpha when the
// statistic exceeds c(alpha)/sqrt(n).
inline constexpr double kKsCritical99 = 1.63;  // alpha ~ 0.01
inline constexpr double kKsCritical95 = 1.36;  // alpha ~ 0.05

/// Standard normal CDF via the Abramowitz-Stegun 26.2.17 rational
/// approximation, |error| < 7.5e-8.
double normal_cdf(double x);

/// Standard normal quantile (Acklam's rational approximation, refined with
/// one Halley step; relative error well below 1e-9).
double normal_quantile(double p);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> samples);
double sample_std(std::span<const double> samples);

/// Right-continuous empirical CDF.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> samples);
  double operator()(double x) const;
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

/// sup_i max(|F_hat(x_i) - F(x_i)|, |F_hat(x_i-) - F(x_i)|) over the samples.
/// Assumes a continuous reference CDF.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

/// Two-sample statistic sup_x |F_a(x) - F_b(x)| with both CDFs taken
/// right-continuous, which handles atoms correctly (identical atomic samples
/// have distance zero).
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// CDF of the centered Gaussian mixture sum_r w_r N(0, sigma_r^2); a zero
/// sigma contributes a unit step at the origin.
double gaussian_mixture_cdf(std::span<const double> sigmas, std::span<const double> weights,
                            double x);

/// Quantile of the same mixture by bisection.
double gaussian_mixture_quantile(std::span<const double> sigmas, std::span<const double> weights,
                                 double p);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares on (log n, log value); values must be positive.
LineFit loglog_slope(std::span<const std::pair<double, double>> pairs);

}  // namespace mfclt::stats
