#include "deconv/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "deconv/error.hpp"
#include "deconv/quadrature.hpp"

namespace deconv::asymptotics {

void LocalQuantities::validate() const {
  if (!(f0 > 0.0) || !(f0_prime < 0.0) || !(s0_pp > 0.0) || !(g0 > 0.0) || !(k0 > 0.0)) {
    fail(ErrorCode::InvalidArgument,
         "local quantities need f0 > 0, f0' < 0, s0'' > 0, g0 > 0 and k0 > 0");
  }
  if (std::abs(s0_pp + f0_prime) > 1e-12 * std::abs(f0_prime)) {
    fail(ErrorCode::InvalidArgument, "s0'' must equal -f0'");
  }
}

LocalQuantities local_quantities(const ConcaveCDF& truth, const NoiseKernel& kernel, double x0) {
  const auto& parts = truth.as_analytic();
  if (!parts.density_derivative) {
    fail(ErrorCode::InvalidArgument, "truth '" + parts.name + "' has no density derivative");
  }
  LocalQuantities q;
  q.x0 = x0;
  q.f0 = truth.f(x0);
  q.f0_prime = (*parts.density_derivative)(x0);
  q.s0_pp = -q.f0_prime;
  q.g0 = eval_g_quadrature(truth, kernel, x0, 1e-9);
  q.k0 = kernel.k0();
  q.validate();
  return q;
}

double minimax_bound_T1(const LocalQuantities& q) {
  constexpr double e = std::numbers::e;
  return 0.125 * std::pow(std::abs(q.f0_prime) * q.g0 * q.g0 / (100.0 * e * e * std::pow(q.k0, 4)), 0.2);
}

double minimax_bound_T2(const LocalQuantities& q) {
  constexpr double e = std::numbers::e;
  return 0.25 * std::pow(std::pow(std::abs(q.f0_prime), 3) * q.g0 / (4.0 * e * q.k0 * q.k0), 0.2);
}

LseConstants lse_constants(const LocalQuantities& q) {
  LseConstants c;
  c.c1 = std::pow(24.0 * std::pow(q.k0, 4) / (q.g0 * q.g0 * q.s0_pp), 0.2);
  c.c2 = std::pow(24.0 / q.s0_pp, 0.6) * std::pow(q.k0 * q.k0 / q.g0, 0.2);
  return c;
}

Perturbation perturb(const ConcaveCDF& F0, double x0, double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::PerturbationInfeasible, "eps must be positive");
  const double right = x0 + eps;
  const double middle = x0 - eps;
  if (!(right < F0.right_endpoint())) {
    fail(ErrorCode::PerturbationInfeasible, "x0 + eps leaves the support of F0");
  }
  const double F_right = F0.F(right);
  const double f_right = F0.f(right);
  // F0(x0 - c eps) + (c - 1) eps f0(x0 - c eps) = F0(x0 + eps) - 2 eps f0(x0 + eps)
  auto residual = [&](double c) {
    const double a = x0 - c * eps;
    return F0.F(a) + (c - 1.0) * eps * F0.f(a) - (F_right - 2.0 * eps * f_right);
  };
  constexpr double lo = 1.0;
  constexpr double hi = 10.0;
  if (!(x0 - hi * eps > 0.0)) fail(ErrorCode::PerturbationInfeasible, "x0 - 10 eps is not positive");
  const double r_lo = residual(lo);
  const double r_hi = residual(hi);
  if (!(r_lo * r_hi < 0.0)) {
    fail(ErrorCode::PerturbationInfeasible, "continuity equation has no root for c in [1, 10]");
  }
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t max_iter = 200;
  auto [c_lo, c_hi] = boost::math::tools::bisect(residual, lo, hi, tol, max_iter);
  const double c = 0.5 * (c_lo + c_hi);
  if (std::abs(residual(c)) > 1e-10) {
    fail(ErrorCode::PerturbationInfeasible, "continuity residual above 1e-10");
  }
  const double left = x0 - c * eps;
  const double F_left = F0.F(left);
  const double f_left = F0.f(left);
  if (!(f_left >= f_right)) fail(ErrorCode::PerturbationInfeasible, "tangent slopes break concavity");

  const auto& base = F0.as_analytic();
  AnalyticCDF parts;
  parts.name = base.name + "-perturbed";
  parts.right_endpoint = base.right_endpoint;
  parts.cdf = [=](double x) {
    if (x < left || x > right) return F0.F(x);
    if (x <= middle) return F_left + (x - left) * f_left;
    return F_right + (x - right) * f_right;
  };
  parts.density = [=](double x) {
    if (x < left || x >= right) return F0.f(x);
    return x < middle ? f_left : f_right;
  };
  parts.density_derivative = [=](double x) {
    if (x < left || x >= right) return base.density_derivative ? (*base.density_derivative)(x) : 0.0;
    return 0.0;
  };
  const double F_mid = F_left + (middle - left) * f_left;
  parts.quantile = [=](double u) {
    if (u < F_left || u > F_right) return F0.quantile(u);
    if (u <= F_mid) return left + (u - F_left) / f_left;
    return right + (u - F_right) / f_right;
  };
  parts.breakpoints = base.breakpoints;
  parts.breakpoints.insert(parts.breakpoints.end(), {left, middle, right});
  auto cdf = ConcaveCDF::analytic(std::move(parts));
  auto check = check_concave_cdf(cdf, 801, 1e-12);
  if (!check.ok) fail(ErrorCode::PerturbationInfeasible, check.detail);
  return Perturbation{cdf, x0, eps, c, left, middle, right};
}

double hellinger(const RealFn& g, const RealFn& h, double lo, double hi,
                 std::span<const double> breakpoints, double tol) {
  auto integrand = [&](double x) {
    const double d = std::sqrt(std::max(h(x), 0.0)) - std::sqrt(std::max(g(x), 0.0));
    return d * d;
  };
  const double sq = 0.5 * quad::integrate(integrand, lo, hi, breakpoints, tol);
  return std::sqrt(std::max(sq, 0.0));
}

double perturbation_hellinger_sq(const ConcaveCDF& F0, const NoiseKernel& kernel, const Perturbation& pert) {
  const double bound = kernel.support_bound();
  // g_eps(z) - g0(z) = int_left^min(z, right) k(z - u) (f_eps(u) - f0(u)) du; the
  // integrand is analytic on each piece once split at the kernel edge.
  auto diff = [&](double z) {
    double total = 0.0;
    // (start, end, tangent slope) of the two linear pieces of F_eps
    const std::array<std::array<double, 3>, 2> pieces{{{pert.left, pert.middle, F0.f(pert.left)},
                                                       {pert.middle, pert.right, F0.f(pert.right)}}};
    for (const auto& piece : pieces) {
      const double a = piece[0];
      const double b = std::min(piece[1], z);
      if (!(b > a)) continue;
      const double level = piece[2];
      auto integrand = [&](double u) { return kernel.density(z - u) * (level - F0.f(u)); };
      const double edge = z - bound;
      using Rule = boost::math::quadrature::gauss<double, 30>;
      if (edge > a && edge < b) {
        total += Rule::integrate(integrand, a, edge) + Rule::integrate(integrand, edge, b);
      } else {
        total += Rule::integrate(integrand, a, b);
      }
    }
    return total;
  };
  auto integrand = [&](double z) {
    const double d = diff(z);
    if (d == 0.0) return 0.0;
    const double g0 = eval_g_quadrature(F0, kernel, z, 1e-9);
    const double root_sum = std::sqrt(g0) + std::sqrt(std::max(g0 + d, 0.0));
    return d * d / (root_sum * root_sum);
  };
  std::vector<double> cuts{pert.middle, pert.right, F0.right_endpoint()};
  if (std::isfinite(bound)) {
    cuts.insert(cuts.end(), {pert.left + bound, pert.middle + bound, pert.right + bound});
  }
  const double hi = std::isfinite(bound) ? pert.right + bound : std::numeric_limits<double>::infinity();
  return 0.5 * quad::integrate(integrand, pert.left, hi, cuts, 1e-9);
}

double hellinger_constant(const LocalQuantities& q) {
  return 2.0 * q.k0 * q.k0 * q.f0_prime * q.f0_prime / (5.0 * q.g0);
}

HellingerStudy hellinger_modulus(const ConcaveCDF& F0, const NoiseKernel& kernel, double x0,
                                 std::span<const double> eps) {
  HellingerStudy out;
  out.constant = hellinger_constant(local_quantities(F0, kernel, x0));
  for (double e : eps) {
    const auto pert = perturb(F0, x0, e);
    out.eps.push_back(e);
    out.ratio.push_back(perturbation_hellinger_sq(F0, kernel, pert) / std::pow(e, 5));
  }
  // Neville extrapolation of the interpolating polynomial to eps = 0.
  std::vector<double> table = out.ratio;
  const std::size_t n = table.size();
  for (std::size_t level = 1; level < n; ++level) {
    for (std::size_t i = 0; i + level < n; ++i) {
      const double xi = out.eps[i];
      const double xj = out.eps[i + level];
      table[i] = (xj * table[i] - xi * table[i + 1]) / (xj - xi);
    }
  }
  out.extrapolated = n == 0 ? 0.0 : table[0];
  return out;
}

void RateStudyConfig::validate() const {
  if (n_grid.empty()) fail(ErrorCode::InvalidArgument, "rate study needs a nonempty n grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) fail(ErrorCode::InvalidArgument, "rate study sample sizes must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) fail(ErrorCode::InvalidArgument, "rate study n grid must increase");
  }
  if (replications < 1) fail(ErrorCode::InvalidArgument, "rate study needs at least one replication");
  if (!(x0 > 0.0)) fail(ErrorCode::InvalidArgument, "x0 must be positive");
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

namespace {

double median_of(std::vector<double> v) {
  std::erase_if(v, [](double x) { return std::isnan(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::array<double, 2> percentile_band(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.025), at(0.975)};
}

}  // namespace

RateStudyResult rate_study(const RateStudyConfig& cfg) {
  cfg.validate();
  const double s0 = cfg.truth.s(cfg.x0);
  const double s0_prime = -cfg.truth.f(cfg.x0);
  const std::size_t grid = cfg.n_grid.size();
  const std::size_t reps = cfg.replications;

  RateStudyResult out;
  out.value_errors.assign(grid, std::vector<double>(reps, std::numeric_limits<double>::quiet_NaN()));
  out.derivative_errors = out.value_errors;

  const auto total = static_cast<std::ptrdiff_t>(grid * reps);
  const int threads = cfg.workers > 0 ? cfg.workers : 0;
  auto replicate = [&](std::ptrdiff_t job) {
    const std::size_t gi = static_cast<std::size_t>(job) / reps;
    const std::size_t r = static_cast<std::size_t>(job) % reps;
    const std::size_t n = cfg.n_grid[gi];
    try {
      const auto data = sample(cfg.truth, cfg.kernel, n, cfg.base_seed, (static_cast<std::uint64_t>(n) << 24) | r);
      auto ropts = cfg.recip;
      ropts.horizon = data.max() + 1.0;
      ropts.exec = compute::Exec::serial;
      lse::Options lopts;
      lopts.tol = cfg.tol;
      lopts.exec = compute::Exec::serial;
      const auto fit = lse::fit_lse(data, solve_reciprocal(cfg.kernel, ropts), lopts);
      if (!fit.converged) return;
      out.value_errors[gi][r] = std::abs(fit.s(cfg.x0) - s0);
      out.derivative_errors[gi][r] = std::abs(fit.s_right_derivative(cfg.x0) - s0_prime);
    } catch (const Error&) {
      // recorded as a failure (NaN)
    }
  };
  if (threads > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t job = 0; job < total; ++job) replicate(job);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t job = 0; job < total; ++job) replicate(job);
  }

  std::vector<double> ns, med_v, med_d;
  for (std::size_t gi = 0; gi < grid; ++gi) {
    RateRow row;
    row.n = cfg.n_grid[gi];
    row.reps = reps;
    row.failures = static_cast<std::size_t>(
        std::count_if(out.value_errors[gi].begin(), out.value_errors[gi].end(), [](double x) { return std::isnan(x); }));
    if (10 * row.failures > reps) {
      fail(ErrorCode::NotConverged, std::to_string(row.failures) + " of " + std::to_string(reps) +
                                        " replications failed at n = " + std::to_string(row.n));
    }
    row.median_value_error = median_of(out.value_errors[gi]);
    row.median_derivative_error = median_of(out.derivative_errors[gi]);
    out.rows.push_back(row);
    ns.push_back(static_cast<double>(row.n));
    med_v.push_back(row.median_value_error);
    med_d.push_back(row.median_derivative_error);
  }
  if (grid >= 2) {
    out.value_slope = loglog_slope(ns, med_v);
    out.derivative_slope = loglog_slope(ns, med_d);
    // Bootstrap over replications within each n, on a fixed stream.
    std::mt19937_64 engine(cfg.base_seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<double> boot_v, boot_d;
    for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
      std::vector<double> bv(grid), bd(grid);
      for (std::size_t gi = 0; gi < grid; ++gi) {
        std::vector<double> rv(reps), rd(reps);
        for (std::size_t r = 0; r < reps; ++r) {
          const auto pick = static_cast<std::size_t>(engine() % reps);
          rv[r] = out.value_errors[gi][pick];
          rd[r] = out.derivative_errors[gi][pick];
        }
        bv[gi] = median_of(rv);
        bd[gi] = median_of(rd);
      }
      boot_v.push_back(loglog_slope(ns, bv));
      boot_d.push_back(loglog_slope(ns, bd));
    }
    if (!boot_v.empty()) {
      out.value_slope_ci = percentile_band(boot_v);
      out.derivative_slope_ci = percentile_band(boot_d);
    }
  }
  return out;
}

}  // namespace deconv::asymptotics
