#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "deconv/compute.hpp"
#include "deconv/kernels.hpp"
#include "deconv/mixture.hpp"

namespace deconv::lse {

/// <s_a, s_b> for s_theta(x) = (1 - x/theta)_+: with a <= b, a/2 - a^2/(6b).
double inner_ss(double a, double b);

/// U_n(x) = x - (p * dG_n)(x) for a fixed sample and reciprocal kernel.
class UnProcess {
 public:
  UnProcess(const Sample& sample, ReciprocalKernel recip);

  std::size_t n() const { return n_; }
  const std::vector<double>& values() const { return z_; }
  const std::vector<double>& weights() const { return w_; }
  const ReciprocalKernel& recip() const { return recip_; }

  double Un(double x) const;
  /// Y_n(theta) = int_0^theta U_n = theta^2/2 - (1/n) sum p_bar((theta - Z_i)_+).
  double Yn(double theta) const;
  std::vector<double> Yn(std::span<const double> thetas, compute::Exec exec) const;

 private:
  std::size_t n_;
  std::vector<double> z_;
  std::vector<double> w_;
  ReciprocalKernel recip_;
};

double eval_Un(const UnProcess& proc, double x);
double eval_Yn(const UnProcess& proc, double theta);
/// <s_theta, dU_n> = Y_n(theta) / theta.
double inner_sU(const UnProcess& proc, double theta);

/// Q_n(sum_j alpha_j s_{theta_j}) through the Gram quantities.
double qn(std::span<const double> support, std::span<const double> weights, const UnProcess& proc);

struct Options {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  compute::Exec exec = compute::Exec::parallel;
  /// Single starting support point; must be an observed value. Defaults to
  /// the largest observation.
  std::optional<double> start;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double objective = 0.0;
  std::size_t support_size = 0;
  std::size_t removed = 0;
};

struct CharEntry {
  double theta = 0.0;
  double value = 0.0;  // H_n(theta; s) - Y_n(theta)
  bool kink = false;
};

struct LseFit {
  std::vector<double> support;
  std::vector<double> weights;
  double objective = 0.0;
  std::vector<CharEntry> char_table;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> log;

  double s(double x) const;
  /// Right derivative of the piecewise-linear survival estimate.
  double s_right_derivative(double x) const;
  double F(double x) const { return 1.0 - s(x); }
  ConcaveCDF estimate() const { return ConcaveCDF::mixture(support, weights); }
};

/// Minimizes Q_n over the convex hull of {s_theta : theta observed}.
/// Returns converged = false when max_iter is hit.
LseFit fit_lse(const UnProcess& proc, const Options& options = {});
LseFit fit_lse(const Sample& sample, const ReciprocalKernel& recip, const Options& options = {});

/// theta -> H_n(theta; s) - Y_n(theta) over the distinct observations plus
/// extra_grid, with H_n built from the piecewise-linear form of s.
std::vector<CharEntry> lse_char(std::span<const double> support, std::span<const double> weights,
                                const UnProcess& proc, const std::vector<double>& extra_grid = {});
std::vector<CharEntry> lse_char(const LseFit& fit, const UnProcess& proc,
                                const std::vector<double>& extra_grid = {});

}  // namespace deconv::lse
