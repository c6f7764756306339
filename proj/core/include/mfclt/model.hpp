#pragma once

#include "mfclt/rng.hpp"
#include "mfclt/types.hpp"

#include <map>
#include <optional>
#include <string>

namespace mfclt {

/// First-order expansion family of the coefficients in the common-factor
/// direction (y) and the measure direction (a signed-measure pairing against
/// x~), with quadratic remainders. Presets supply these analytically.
struct ModelDerivatives {
  // d x m matrix: sensitivity of the particle drift to the common factor.
  std::function<Mat(const Vec& x, const Vec& y, const MeasureView&)> b2;
  // Pairing kernel of the particle drift against the measure argument.
  std::function<Vec(const Vec& x, const Vec& y, const MeasureView&, const Vec& xt)> b3;
  // m x m matrix: sensitivity of the common drift to the common factor.
  std::function<Mat(const Vec& y, const MeasureView&)> b02;
  std::function<Vec(const Vec& y, const MeasureView&, const Vec& xt)> b03;
  // Jump-rate sensitivities, same roles.
  std::function<Vec(const Vec& x, const Vec& y, const Vec& h, const MeasureView&)> d2;
  std::function<double(const Vec& x, const Vec& y, const Vec& h, const MeasureView&, const Vec& xt)>
      d3;

  // Optional analytic remainder probes, validation only.
  std::function<Vec(const Vec& x, const Vec& y, const Vec& yp, const MeasureView&,
                    const MeasureView&)>
      theta_b;
  std::function<Vec(const Vec& y, const Vec& yp, const MeasureView&, const MeasureView&)> theta_b0;
  std::function<double(const Vec& x, const Vec& y, const Vec& yp, const MeasureView&,
                       const MeasureView&, const Vec& h)>
      theta_d;
};

/// Full coefficient data model for one weakly interacting jump-diffusion
/// with a common factor: particle drift b, common drift b0, constant
/// diffusions, thinning rate densities d and d0 against the finite jump
/// measures gamma/gamma0, initial laws, and the derivative family.
struct ModelSpec {
  int dim_x = 1;  // particle state dimension d
  int dim_y = 1;  // common factor dimension m

  std::function<Vec(const Vec& x, const Vec& y, const MeasureView&)> drift_b;
  std::function<Vec(const Vec& y, const MeasureView&)> drift_b0;
  Mat sigma;   // d x d, state independent
  Mat sigma0;  // m x m, state independent
  std::function<double(const Vec& x, const Vec& y, const MeasureView&, const Vec& h)> jump_rate_d;
  std::function<double(const Vec& k)> jump_rate_d0;  // depends on the mark only
  SampleableMeasure gamma;   // marks of particle jumps
  SampleableMeasure gamma0;  // marks of common-factor jumps
  double rate_lower = 0.0;   // epsilon: rate_lower <= d <= rate_upper everywhere
  double rate_upper = 0.0;   // also the thinning level slab height
  ModelDerivatives derivatives;
  std::function<Vec(RngStream&)> init_mu0;
  std::function<Vec(RngStream&)> init_rho0;

  /// Cached per-step measure summaries (empty count means none); evaluators
  /// that depend on the measure only through these read view.summaries.
  std::function<void(const Eigen::MatrixXd& cloud, std::vector<double>& out)> summary_fn;
  int summary_count = 0;

  std::string preset_id;

  void fill_summaries(const Eigen::MatrixXd& cloud, std::vector<double>& out) const {
    out.resize(static_cast<std::size_t>(summary_count));
    if (summary_count > 0) summary_fn(cloud, out);
  }
};

/// Centered pairing kernels: value at xt minus the cloud average. These are
/// the kernels actually entering the limit-law operators.
Vec b3_centered(const ModelSpec& spec, const Vec& x, const Vec& y, const MeasureView& view,
                const Vec& xt);
Vec b03_centered(const ModelSpec& spec, const Vec& y, const MeasureView& view, const Vec& xt);
double d3_centered(const ModelSpec& spec, const Vec& x, const Vec& y, const Vec& h,
                   const MeasureView& view, const Vec& xt);
Vec b03_cloud_mean(const ModelSpec& spec, const Vec& y, const MeasureView& view);

using ParamMap = std::map<std::string, double>;

/// Built-in presets:
///   decoupled - no interaction at all (derivative family identically zero);
///   example1  - coefficients depend on the measure through functionals
///               <f_1,nu>,...,<f_k,nu> of a bounded Lipschitz family;
///   example2  - coefficients are measure integrals of pair interaction
///               kernels, stepped in O(N^2) (requires params["allow_dense"]);
///   finance   - two-component state (firm factor, default counter) with a
///               default intensity coupled to the running loss average.
ModelSpec build_preset(const std::string& name, const ParamMap& params = {});

struct ValidationCheck {
  std::string id;
  bool pass = false;
  double statistic = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_pass() const;
  std::string to_json() const;
};

/// Numerical probe of the structural conditions: rate bounds, jump-measure
/// second moments, Lipschitz ratios, diffusion constancy, commutativity of
/// b02, and the quadratic-remainder bounds of the derivative family. Random
/// probes only; the report carries max observed ratios, never a proof.
ValidationReport validate_model(const ModelSpec& spec, int probes, std::uint64_t stream_seed);

}  // namespace mfclt
