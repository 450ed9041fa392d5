#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deconv/kernels.hpp"
#include "deconv/lse.hpp"
#include "deconv/mixture.hpp"

namespace deconv::asymptotics {

/// Local features of the truth at x0 entering the bounds and constants.
struct LocalQuantities {
  double x0 = 0.0;
  double f0 = 0.0;
  double f0_prime = 0.0;  // negative
  double s0_pp = 0.0;     // -f0_prime
  double g0 = 0.0;
  double k0 = 0.0;

  /// Throws InvalidArgument unless f0 > 0, f0' < 0, s0'' = -f0' > 0, g0 > 0, k0 > 0.
  void validate() const;
};

/// Needs an analytic truth with a density derivative. g0 comes from
/// quadrature of the convolution at tolerance 1e-9.
LocalQuantities local_quantities(const ConcaveCDF& truth, const NoiseKernel& kernel, double x0);

double minimax_bound_T1(const LocalQuantities& q);
double minimax_bound_T2(const LocalQuantities& q);

struct LseConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};
LseConstants lse_constants(const LocalQuantities& q);

/// F_eps: F0 with its graph replaced on [x0 - c_eps*eps, x0 + eps] by the
/// two tangent lines at the interval ends, c_eps making it continuous.
struct Perturbation {
  ConcaveCDF cdf;
  double x0 = 0.0;
  double eps = 0.0;
  double c_eps = 0.0;
  double left = 0.0;   // x0 - c_eps * eps
  double middle = 0.0; // x0 - eps
  double right = 0.0;  // x0 + eps
};

/// Throws PerturbationInfeasible when no continuous concave F_eps exists
/// with c_eps in [1, 10].
Perturbation perturb(const ConcaveCDF& F0, double x0, double eps);

/// H(g, h) = (1/2 int (sqrt h - sqrt g)^2)^{1/2} over [lo, hi] (hi may be inf).
double hellinger(const RealFn& g, const RealFn& h, double lo, double hi,
                 std::span<const double> breakpoints = {}, double tol = 1e-10);

/// H(g_eps, g0)^2 computed from the difference g_eps - g0, which is
/// integrated directly over the perturbed window to avoid cancellation.
double perturbation_hellinger_sq(const ConcaveCDF& F0, const NoiseKernel& kernel, const Perturbation& pert);

/// 2 k0^2 f0'^2 / (5 g0), the limit of H(g_eps, g0)^2 / eps^5.
double hellinger_constant(const LocalQuantities& q);

struct HellingerStudy {
  std::vector<double> eps;
  std::vector<double> ratio;  // H^2 / eps^5
  double extrapolated = 0.0;  // polynomial extrapolation of ratio to eps = 0
  double constant = 0.0;
};
HellingerStudy hellinger_modulus(const ConcaveCDF& F0, const NoiseKernel& kernel, double x0,
                                 std::span<const double> eps);

struct RateStudyConfig {
  ConcaveCDF truth;
  NoiseKernel kernel;
  double x0 = 1.0;
  std::vector<std::size_t> n_grid{200, 800, 3200};
  std::size_t replications = 100;
  std::uint64_t base_seed = 20260101;
  double tol = 1e-10;
  ReciprocalOptions recip{};
  int workers = 0;  // 0: OpenMP default
  std::size_t bootstrap = 200;
  /// A priori bands around the theoretical slopes -2/5 and -1/5.
  std::array<double, 2> value_band{-0.55, -0.25};
  std::array<double, 2> derivative_band{-0.35, -0.05};

  void validate() const;
};

struct RateRow {
  std::size_t n = 0;
  double median_value_error = 0.0;
  double median_derivative_error = 0.0;
  std::size_t reps = 0;
  std::size_t failures = 0;
};

struct RateStudyResult {
  std::vector<RateRow> rows;
  double value_slope = 0.0;
  double derivative_slope = 0.0;
  std::array<double, 2> value_slope_ci{};       // bootstrap 95% band
  std::array<double, 2> derivative_slope_ci{};
  /// Per grid point, per replication (NaN for failed replications).
  std::vector<std::vector<double>> value_errors;
  std::vector<std::vector<double>> derivative_errors;
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Runs the replications concurrently; each replication's RNG stream is
/// keyed by (base seed, n, replication index). Throws NotConverged when more
/// than 10% of the replications at some n fail.
RateStudyResult rate_study(const RateStudyConfig& cfg);

}  // namespace deconv::asymptotics
