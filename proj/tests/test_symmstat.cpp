#include <doctest.h>

#include "mfclt/symmstat.hpp"

#include <cmath>

using namespace mfclt;

TEST_CASE("mwi product kernel polynomial values") {
  CHECK(mwi_product(0, 3.0, 2.0) == doctest::Approx(1.0));
  CHECK(mwi_product(1, 3.0, 2.0) == doctest::Approx(3.0));
  // k=2: x^2 - v; k=3: x^3 - 3 v x; k=4: x^4 - 6 v x^2 + 3 v^2.
  for (double x : {-1.5, 0.0, 0.4, 2.0}) {
    for (double v : {0.5, 1.0, 2.0}) {
      CHECK(mwi_product(2, x, v) == doctest::Approx(x * x - v));
      CHECK(mwi_product(3, x, v) == doctest::Approx(x * x * x - 3.0 * v * x));
      CHECK(mwi_product(4, x, v) ==
            doctest::Approx(x * x * x * x - 6.0 * v * x * x + 3.0 * v * v));
    }
  }
  CHECK_THROWS_AS(mwi_product(-1, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(mwi_product(2, 0.0, -1.0), ConfigError);
}

TEST_CASE("symmetric statistic enumeration") {
  const std::function<double(std::span<const double>)> prod2 =
      [](std::span<const double> args) { return args[0] * args[1]; };
  std::vector<double> pts{1.0, 2.0, -3.0};
  CHECK(symmetric_statistic<double>(prod2, pts, 2) == doctest::Approx(-7.0));  // 2 - 3 - 6

  const std::function<double(std::span<const double>)> sum1 =
      [](std::span<const double> args) { return args[0]; };
  CHECK(symmetric_statistic<double>(sum1, pts, 1) == doctest::Approx(0.0));

  // n < k gives zero.
  std::vector<double> one{5.0};
  CHECK(symmetric_statistic<double>(prod2, one, 2) == 0.0);
  CHECK_THROWS_AS(symmetric_statistic<double>(prod2, pts, 4), ConfigError);
}

TEST_CASE("product statistic agrees with enumeration") {
  ProductKernel kernel;
  kernel.h = [](double x) { return std::tanh(x) - 0.1; };
  RngStream stream(StreamKey{3, 0, 0, 0, Purpose::Experiment});
  std::vector<double> pts(40);
  for (auto& p : pts) p = stream.normal();
  for (int k = 1; k <= 3; ++k) {
    const std::function<double(std::span<const double>)> prod =
        [&kernel](std::span<const double> args) {
          double acc = 1.0;
          for (double a : args) acc *= kernel.h(a);
          return acc;
        };
    CHECK(product_symmetric_statistic(kernel, pts, k) ==
          doctest::Approx(symmetric_statistic<double>(prod, pts, k)).epsilon(1e-10));
  }
}

TEST_CASE("mwi isometry and orthogonality by Monte Carlo") {
  // E[I_k^2] = k! v^k for product kernels; distinct orders uncorrelated.
  const double v = 1.3;
  constexpr int kDraws = 1000000;
  std::vector<std::vector<double>> ik(4, std::vector<double>(kDraws));
  RngStream stream(StreamKey{8, 0, 0, 0, Purpose::Experiment});
  for (int i = 0; i < kDraws; ++i) {
    const double i1 = std::sqrt(v) * stream.normal();
    for (int k = 1; k <= 3; ++k)
      ik[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = mwi_product(k, i1, v);
  }
  double kfact = 1.0;
  for (int k = 1; k <= 3; ++k) {
    kfact *= k;
    std::vector<double> sq(kDraws);
    for (int i = 0; i < kDraws; ++i) {
      const double val = ik[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      sq[static_cast<std::size_t>(i)] = val * val;
    }
    const auto ms = stats::mean_se(sq);
    CHECK(std::abs(ms.mean - kfact * std::pow(v, k)) < 3.0 * ms.se);
  }
  for (int j = 1; j <= 3; ++j) {
    for (int k = j + 1; k <= 3; ++k) {
      std::vector<double> prod(kDraws);
      for (int i = 0; i < kDraws; ++i)
        prod[static_cast<std::size_t>(i)] =
            ik[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] *
            ik[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      const auto ms = stats::mean_se(prod);
      CHECK(std::abs(ms.mean) < 3.0 * ms.se);
    }
  }
}

TEST_CASE("generating identity: truncated series tracks the exponential") {
  // |sum_{k<=6} t^k/k! I_k - exp(t I_1 - t^2 v / 2)| has L1 norm bounded by
  // the L2 tail sqrt(sum_{k>=7} t^{2k} v^k / k!).
  const double v = 1.0, t = 1.0;
  double tail_sq = 0.0;
  double kfact = 720.0;
  for (int k = 7; k <= 40; ++k) {
    kfact *= k;
    tail_sq += std::pow(t * t * v, k) / kfact;
  }
  const double tail = std::sqrt(tail_sq);

  constexpr int kDraws = 400000;
  std::vector<double> absdiff(kDraws);
  RngStream stream(StreamKey{11, 0, 0, 0, Purpose::Experiment});
  for (int i = 0; i < kDraws; ++i) {
    const double i1 = std::sqrt(v) * stream.normal();
    double series = 0.0, tk = 1.0, fact = 1.0;
    for (int k = 0; k <= 6; ++k) {
      if (k > 0) {
        tk *= t;
        fact *= k;
      }
      series += tk / fact * mwi_product(k, i1, v);
    }
    absdiff[static_cast<std::size_t>(i)] =
        std::abs(series - std::exp(t * i1 - 0.5 * t * t * v));
  }
  const auto ms = stats::mean_se(absdiff);
  CHECK(ms.mean <= tail + 3.0 * ms.se);
}

TEST_CASE("degenerate convergence harness: trivial and error cases") {
  // Constant-zero kernel: statistic and limit are both point masses at zero.
  ProductKernel zero;
  zero.h = [](double) { return 0.0; };
  zero.h_norm_sq = 0.0;
  DmOptions opts;
  opts.n_grid = {50};
  opts.reps = 200;
  opts.reference_draws = 2000;
  opts.seed = 5;
  const auto rows =
      dm_convergence_experiment(zero, 1, [](RngStream& s) { return s.normal(); }, opts);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].ks == doctest::Approx(0.0));

  // Non-degenerate kernel is rejected.
  ProductKernel shifted;
  shifted.h = [](double x) { return x + 1.0; };
  shifted.h_norm_sq = 2.0;
  CHECK_THROWS_AS(
      dm_convergence_experiment(shifted, 1, [](RngStream& s) { return s.normal(); }, opts),
      ConfigError);
}

TEST_CASE("degenerate convergence harness: first and second order limits") {
  DmOptions opts;
  opts.n_grid = {400};
  opts.reps = 1500;
  opts.reference_draws = 200000;
  opts.seed = 13;
  opts.threads = 4;

  // First order with the identity score under a standard normal base law.
  ProductKernel ident;
  ident.h = [](double x) { return x; };
  ident.h_norm_sq = 1.0;
  auto rows = dm_convergence_experiment(ident, 1, [](RngStream& s) { return s.normal(); }, opts);
  CHECK(rows[0].ks < 0.05);

  // Second order with a bounded near-unit-modulus score (odd by symmetry, so
  // degenerate), which keeps the sample norm concentrated and the limit
  // chi-square transform sharp.
  ProductKernel balanced;
  balanced.h = [](double x) {
    return (x >= 0.0 ? 1.0 : -1.0) * (1.0 + 0.1 * std::tanh(std::abs(x)));
  };
  {
    // Exact second moment under the base law: E[(1 + 0.1 tanh|Z|)^2].
    RngStream stream(StreamKey{17, 0, 0, 0, Purpose::Experiment});
    double acc = 0.0;
    constexpr int kNorm = 2000000;
    for (int i = 0; i < kNorm; ++i) {
      const double b = balanced.h(stream.normal());
      acc += b * b;
    }
    balanced.h_norm_sq = acc / kNorm;
  }
  auto rows2 =
      dm_convergence_experiment(balanced, 2, [](RngStream& s) { return s.normal(); }, opts);
  REQUIRE(rows2.size() == 2);
  CHECK(rows2[1].k == 2);
  CHECK(rows2[1].ks < 0.05);
}
