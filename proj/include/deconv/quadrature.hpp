#pragma once

#include <functional>
#include <span>
#include <vector>

namespace deconv::quad {

using Integrand = std::function<double(double)>;

/// Integral of f over [a, b] (b may be +inf) split at the given interior
/// breakpoints. Tanh-sinh on finite pieces tolerates integrable endpoint
/// singularities and kinks placed at breakpoints. Throws QuadratureFailure
/// when the estimated error exceeds max(tol, tol * |result|) by 100x.
double integrate(const Integrand& f, double a, double b, std::span<const double> breakpoints = {},
                 double tol = 1e-10);

/// Adaptive Gauss-Kronrod on one smooth finite piece.
double integrate_smooth(const Integrand& f, double a, double b, double tol = 1e-12);

/// Sorted, deduplicated breakpoints strictly inside (a, b).
std::vector<double> clip_breakpoints(std::vector<double> points, double a, double b);

}  // namespace deconv::quad
