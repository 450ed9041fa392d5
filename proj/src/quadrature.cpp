#include "deconv/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "deconv/error.hpp"

namespace deconv::quad {

namespace {

void check(double result, double err, double tol, double a, double b) {
  if (!std::isfinite(result) || err > 100.0 * std::max(tol, tol * std::abs(result))) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "error estimate %.3g (result %.6g) on [%.9g, %.9g]", err, result, a, b);
    fail(ErrorCode::QuadratureFailure, buf);
  }
}

double finite_piece(const Integrand& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);
  double err = 0.0;
  double l1 = 0.0;
  double result = integrator.integrate([&](double x) { return f(x); }, a, b, tol, &err, &l1);
  check(result, err, tol, a, b);
  return result;
}

double tail_piece(const Integrand& f, double a, double tol) {
  static thread_local boost::math::quadrature::exp_sinh<double> integrator(9);
  double err = 0.0;
  double l1 = 0.0;
  auto g = [&](double x) { return f(x); };
  double result = integrator.integrate(g, a, std::numeric_limits<double>::infinity(), tol, &err, &l1);
  check(result, err, tol, a, std::numeric_limits<double>::infinity());
  return result;
}

}  // namespace

std::vector<double> clip_breakpoints(std::vector<double> points, double a, double b) {
  std::erase_if(points, [&](double x) { return !(x > a && x < b) || !std::isfinite(x); });
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

double integrate(const Integrand& f, double a, double b, std::span<const double> breakpoints,
                 double tol) {
  if (!(b > a)) return 0.0;
  auto cuts = clip_breakpoints({breakpoints.begin(), breakpoints.end()}, a, b);
  double total = 0.0;
  double left = a;
  for (double c : cuts) {
    total += finite_piece(f, left, c, tol);
    left = c;
  }
  if (std::isinf(b)) {
    total += tail_piece(f, left, tol);
  } else {
    total += finite_piece(f, left, b, tol);
  }
  return total;
}

double integrate_smooth(const Integrand& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  double result =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, tol, &err);
  check(result, err, tol, a, b);
  return result;
}

}  // namespace deconv::quad
