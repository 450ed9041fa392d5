#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deconv/compute.hpp"

namespace deconv {

using RealFn = std::function<double(double)>;

/// Analytic reciprocal kernel p and its primitive p_bar, both zero on t < 0.
struct ClosedFormReciprocal {
  RealFn p;
  RealFn p_bar;
};

/// Bounded nonincreasing noise density k on [0, inf) with k(0+) = k0.
/// Immutable after construction.
class NoiseKernel {
 public:
  struct Parts {
    std::string name;
    double k0 = 0.0;
    RealFn density;
    RealFn primitive;
    RealFn quantile;  // inverse of the primitive, for sampling
    std::optional<RealFn> kappa;
    std::optional<double> kappa_lipschitz;
    double support_bound = std::numeric_limits<double>::infinity();
    std::optional<ClosedFormReciprocal> closed_form_p;
  };

  explicit NoiseKernel(Parts parts);

  const std::string& name() const { return parts_.name; }
  double k0() const { return parts_.k0; }
  double support_bound() const { return parts_.support_bound; }
  bool has_kappa() const { return parts_.kappa.has_value(); }
  const std::optional<double>& kappa_lipschitz() const { return parts_.kappa_lipschitz; }
  const std::optional<ClosedFormReciprocal>& closed_form_p() const { return parts_.closed_form_p; }

  /// k(x); 0 for x < 0 and k(0) = k0.
  double density(double x) const;
  /// K(x) = int_0^x k.
  double primitive(double x) const;
  /// kappa(x) = -k'(x); throws MissingKappa when the kernel has none.
  double kappa(double x) const;
  /// K^{-1}(u) for u in (0, 1).
  double quantile(double u) const;

 private:
  Parts parts_;
};

NoiseKernel make_exponential();
NoiseKernel make_uniform01();
NoiseKernel make_triangular();
/// Kernel given by a kappa sample table (piecewise linear kappa) and k0.
/// k and K are the exact integrals of the interpolant; k vanishes past the
/// last table node, where it must already have decreased to zero.
NoiseKernel make_custom(std::span<const double> x, std::span<const double> kappa, double k0,
                        std::string name = "custom");

struct KernelCheck {
  bool nonincreasing = true;
  bool mass_one = true;
  bool kappa_consistent = true;
  double max_kappa_residual = 0.0;
  bool ok() const { return nonincreasing && mass_one && kappa_consistent; }
};

/// Sampled scan of the kernel invariants on [0, upper].
KernelCheck check_kernel(const NoiseKernel& kernel, double upper = 20.0, int points = 2001,
                         double tol = 1e-6);

struct ReciprocalOptions {
  double h = 1e-3;
  double horizon = 10.0;
  double magnitude_cap = 1e8;
  bool use_closed_form = true;
  /// Richardson combination of the h and h/2 trapezoid solutions.
  bool extrapolate = true;
  compute::Exec exec = compute::Exec::parallel;
};

/// Reciprocal kernel p with p * k = x 1_{[0,inf)}, in closed form or as a
/// uniform table. Tabulated p is linear between nodes and p_bar is its
/// exact (piecewise quadratic) primitive. Immutable and shareable.
class ReciprocalKernel {
 public:
  static ReciprocalKernel analytic(double k0, ClosedFormReciprocal form);
  static ReciprocalKernel tabulated(double k0, double h, std::vector<double> ell);

  double k0() const { return k0_; }
  bool is_tabulated() const { return !form_.has_value(); }
  /// +inf for the analytic form.
  double horizon() const;
  double step() const { return h_; }
  std::span<const double> ell() const { return ell_; }

  double p(double t) const;
  double p_bar(double t) const;

 private:
  ReciprocalKernel() = default;
  void require_in_horizon(double t) const;

  double k0_ = 1.0;
  std::optional<ClosedFormReciprocal> form_;
  double h_ = 0.0;
  std::vector<double> ell_;
  std::vector<double> p_nodes_;
  std::vector<double> pbar_nodes_;
};

/// Returns the closed form when the kernel has one (and the options allow
/// it); otherwise solves the second-kind equation for ell. Throws
/// MissingKappa when neither route is available, DivergentSolve when the
/// table blows past the magnitude cap.
ReciprocalKernel solve_reciprocal(const NoiseKernel& kernel, const ReciprocalOptions& options = {});

double eval_p(const ReciprocalKernel& recip, double t);
double eval_p_bar(const ReciprocalKernel& recip, double t);

/// (p * k)(t) by quadrature, split at the kernel and table breakpoints.
double convolve_p_k(const ReciprocalKernel& recip, const NoiseKernel& kernel, double t);

}  // namespace deconv
