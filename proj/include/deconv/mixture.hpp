#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "deconv/kernels.hpp"

namespace deconv {

/// F = sum_j weights_j F_{support_j}, F_theta the uniform[0, theta] CDF.
struct MixtureCDF {
  std::vector<double> support;  // strictly increasing, positive
  std::vector<double> weights;  // nonnegative, summing to 1
};

/// Closed-form concave CDF with explicit density and quantile.
struct AnalyticCDF {
  std::string name;
  RealFn cdf;
  RealFn density;
  RealFn quantile;
  std::optional<RealFn> density_derivative;
  double right_endpoint = 0.0;
  /// Points where the density is not smooth; used to split quadratures.
  std::vector<double> breakpoints;
};

class ConcaveCDF {
 public:
  /// Merges duplicate support points (summing weights) and validates.
  static ConcaveCDF mixture(std::vector<double> support, std::vector<double> weights);
  static ConcaveCDF analytic(AnalyticCDF parts);

  bool is_mixture() const { return std::holds_alternative<MixtureCDF>(repr_); }
  const MixtureCDF& as_mixture() const;
  const AnalyticCDF& as_analytic() const;

  double F(double x) const;
  /// Right-continuous density.
  double f(double x) const;
  double s(double x) const { return 1.0 - F(x); }
  double quantile(double u) const;
  double right_endpoint() const;
  std::vector<double> breakpoints() const;

 private:
  explicit ConcaveCDF(std::variant<MixtureCDF, AnalyticCDF> repr) : repr_(std::move(repr)) {}
  std::variant<MixtureCDF, AnalyticCDF> repr_;
};

/// F(x) = min(sqrt(x/5), 1).
ConcaveCDF make_sqrt5();

double eval_F(const ConcaveCDF& cdf, double x);
double eval_f(const ConcaveCDF& cdf, double x);
double eval_s(const ConcaveCDF& cdf, double x);

/// g_theta(z) = (K(z) - K(z - theta)) / theta.
double basis_density(const NoiseKernel& kernel, double theta, double z);

/// g_F(z) = int k(z - x) dF(x): closed form for mixtures, quadrature for
/// analytic truths.
double eval_g(const ConcaveCDF& cdf, const NoiseKernel& kernel, double z);

/// g_F(z) by direct quadrature of int k(z - x) f(x) dx, for any variant.
double eval_g_quadrature(const ConcaveCDF& cdf, const NoiseKernel& kernel, double z,
                         double tol = 1e-12);

struct ConcavityCheck {
  bool ok = true;
  std::string detail;
};

/// Grid scan of F(0) = 0, F(end) = 1, monotonicity, midpoint concavity and
/// a nonincreasing density.
ConcavityCheck check_concave_cdf(const ConcaveCDF& cdf, int points = 401, double tol = 1e-10);

/// Sorted positive observations with a record of where they came from.
class Sample {
 public:
  /// Sorts; rejects empty input and nonpositive or nonfinite values.
  explicit Sample(std::vector<double> observations, std::optional<std::uint64_t> seed = {});

  const std::vector<double>& observations() const { return obs_; }
  std::size_t size() const { return obs_.size(); }
  double min() const { return obs_.front(); }
  double max() const { return obs_.back(); }
  const std::optional<std::uint64_t>& seed() const { return seed_; }

  /// Distinct values and their multiplicities divided by n.
  void distinct(std::vector<double>& values, std::vector<double>& weights) const;

 private:
  std::vector<double> obs_;
  std::optional<std::uint64_t> seed_;
};

/// Z = X + eps with X ~ cdf and eps ~ kernel, both by inversion. The RNG
/// stream is keyed by (seed, stream) so independent replications can share
/// a base seed.
Sample sample(const ConcaveCDF& cdf, const NoiseKernel& kernel, std::size_t n,
              std::uint64_t seed, std::uint64_t stream = 0);

/// Draws of X only; used by the Kolmogorov-Smirnov sanity check.
std::vector<double> sample_x(const ConcaveCDF& cdf, std::size_t n, std::uint64_t seed,
                             std::uint64_t stream = 0);

}  // namespace deconv
