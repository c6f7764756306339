#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfclt {

// State dimensions stay tiny (particle state and common factor), so all
// small vectors/matrices use fixed-capacity Eigen types: dynamic size,
// stack storage, no heap traffic in the stepping loops.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RngStream;  // rng.hpp

/// View of a probability measure on the particle state space as coefficient
/// evaluators see it: a uniformly weighted point cloud (one column per point)
/// plus optional per-step cached summaries <f_1,nu>,...,<f_k,nu> so that
/// presets depending on the measure only through a few functionals can step
/// in O(N) instead of O(N^2).
struct MeasureView {
  const Eigen::MatrixXd* points = nullptr;  // dim x count, column = support point
  std::span<const double> summaries;

  int count() const { return points ? static_cast<int>(points->cols()) : 0; }
  auto point(int i) const { return points->col(i); }
  double summary(int i) const { return summaries[static_cast<std::size_t>(i)]; }
};

/// Finite measure with a sampler for its normalisation. When the measure is
/// purely atomic the atoms are listed explicitly and integrals against it are
/// evaluated exactly instead of by Monte Carlo.
struct SampleableMeasure {
  int dim = 1;
  double total_mass = 0.0;
  double second_moment = 0.0;  // E|xi|^2 under the normalised law
  std::function<Vec(RngStream&)> sampler;
  std::vector<std::pair<Vec, double>> atoms;  // weights sum to total_mass

  bool is_zero() const { return total_mass <= 0.0; }
  bool is_atomic() const { return !atoms.empty(); }

  static SampleableMeasure zero(int dim);
  static SampleableMeasure atomic(int dim, std::vector<std::pair<Vec, double>> atoms);
  /// Symmetric two-point measure at +/-size scaled to the given mass.
  static SampleableMeasure two_point(double size, double mass);
  static SampleableMeasure gaussian(int dim, double sd, double mass);
};

inline Eigen::MatrixXd make_cloud(std::span<const Vec> points) {
  if (points.empty()) return {};
  Eigen::MatrixXd cloud(points[0].size(), static_cast<Eigen::Index>(points.size()));
  for (Eigen::Index i = 0; i < cloud.cols(); ++i) cloud.col(i) = points[static_cast<std::size_t>(i)];
  return cloud;
}

}  // namespace mfclt
