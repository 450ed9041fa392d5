#include "deconv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "deconv/error.hpp"

namespace deconv {

NoiseKernel::NoiseKernel(Parts parts) : parts_(std::move(parts)) {
  if (!(parts_.k0 > 0.0) || !std::isfinite(parts_.k0)) {
    fail(ErrorCode::InvalidArgument, "kernel k0 must be positive and finite");
  }
  if (!parts_.density || !parts_.primitive || !parts_.quantile) {
    fail(ErrorCode::InvalidArgument, "kernel needs density, primitive and quantile");
  }
}

double NoiseKernel::density(double x) const {
  if (x < 0.0) return 0.0;
  if (x == 0.0) return parts_.k0;
  return parts_.density(x);
}

double NoiseKernel::primitive(double x) const {
  if (x <= 0.0) return 0.0;
  return parts_.primitive(x);
}

double NoiseKernel::kappa(double x) const {
  if (!parts_.kappa) fail(ErrorCode::MissingKappa, "kernel '" + parts_.name + "' has no kappa");
  if (x < 0.0) return 0.0;
  return (*parts_.kappa)(x);
}

double NoiseKernel::quantile(double u) const { return parts_.quantile(u); }

NoiseKernel make_exponential() {
  NoiseKernel::Parts parts;
  parts.name = "exponential";
  parts.k0 = 1.0;
  parts.density = [](double x) { return std::exp(-x); };
  parts.primitive = [](double x) { return -std::expm1(-x); };
  parts.quantile = [](double u) { return -std::log1p(-u); };
  parts.kappa = [](double x) { return std::exp(-x); };
  parts.kappa_lipschitz = 1.0;
  parts.closed_form_p = ClosedFormReciprocal{
      [](double t) { return t < 0.0 ? 0.0 : 1.0 + t; },
      [](double t) { return t <= 0.0 ? 0.0 : t + 0.5 * t * t; }};
  return NoiseKernel(std::move(parts));
}

NoiseKernel make_uniform01() {
  NoiseKernel::Parts parts;
  parts.name = "uniform01";
  parts.k0 = 1.0;
  parts.density = [](double x) { return x <= 1.0 ? 1.0 : 0.0; };
  parts.primitive = [](double x) { return std::min(x, 1.0); };
  parts.quantile = [](double u) { return u; };
  parts.support_bound = 1.0;
  // kappa is a point mass at 1; only the closed form is available.
  parts.closed_form_p = ClosedFormReciprocal{
      [](double t) { return t < 0.0 ? 0.0 : 1.0 + std::floor(t); },
      [](double t) {
        if (t <= 0.0) return 0.0;
        const double m = std::floor(t);
        return 0.5 * m * (m + 1.0) + (1.0 + m) * (t - m);
      }};
  return NoiseKernel(std::move(parts));
}

NoiseKernel make_triangular() {
  NoiseKernel::Parts parts;
  parts.name = "triangular";
  parts.k0 = 2.0;
  parts.density = [](double x) { return x <= 1.0 ? 2.0 * (1.0 - x) : 0.0; };
  parts.primitive = [](double x) { return x >= 1.0 ? 1.0 : 2.0 * x - x * x; };
  parts.quantile = [](double u) { return 1.0 - std::sqrt(1.0 - u); };
  parts.kappa = [](double x) { return x <= 1.0 ? 2.0 : 0.0; };
  parts.support_bound = 1.0;
  return NoiseKernel(std::move(parts));
}

namespace {

// Piecewise-linear kappa with exact k and K on every cell.
struct CustomTable {
  std::vector<double> x, kappa, k, K;

  std::size_t cell(double t) const {
    auto it = std::upper_bound(x.begin(), x.end(), t);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - x.begin() - 1, 0));
  }
  double slope(std::size_t j) const { return (kappa[j + 1] - kappa[j]) / (x[j + 1] - x[j]); }

  double kappa_at(double t) const {
    if (t >= x.back()) return 0.0;
    const auto j = cell(t);
    return kappa[j] + slope(j) * (t - x[j]);
  }
  double k_at(double t) const {
    if (t >= x.back()) return 0.0;
    const auto j = cell(t);
    const double d = t - x[j];
    return std::max(0.0, k[j] - kappa[j] * d - 0.5 * slope(j) * d * d);
  }
  double K_at(double t) const {
    if (t >= x.back()) return K.back();
    const auto j = cell(t);
    const double d = t - x[j];
    return K[j] + k[j] * d - 0.5 * kappa[j] * d * d - slope(j) * d * d * d / 6.0;
  }
};

}  // namespace

NoiseKernel make_custom(std::span<const double> x, std::span<const double> kappa, double k0,
                        std::string name) {
  if (x.size() != kappa.size() || x.size() < 2) {
    fail(ErrorCode::InvalidArgument, "kappa table needs at least two (x, kappa) rows");
  }
  if (x.front() != 0.0) fail(ErrorCode::InvalidArgument, "kappa table must start at x = 0");
  auto table = std::make_shared<CustomTable>();
  table->x.assign(x.begin(), x.end());
  table->kappa.assign(kappa.begin(), kappa.end());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(kappa[j] >= 0.0)) fail(ErrorCode::InvalidArgument, "kappa must be nonnegative");
    if (j > 0 && !(x[j] > x[j - 1])) fail(ErrorCode::InvalidArgument, "kappa table x must increase");
  }
  table->k.assign(x.size(), k0);
  table->K.assign(x.size(), 0.0);
  for (std::size_t j = 0; j + 1 < x.size(); ++j) {
    const double d = x[j + 1] - x[j];
    const double s = table->slope(j);
    table->k[j + 1] = table->k[j] - table->kappa[j] * d - 0.5 * s * d * d;
    table->K[j + 1] = table->K[j] + table->k[j] * d - 0.5 * table->kappa[j] * d * d - s * d * d * d / 6.0;
  }
  if (table->k.back() > 1e-6 * k0 || table->k.back() < -1e-6 * k0) {
    fail(ErrorCode::InvalidArgument, "kappa table must integrate k down to zero at its last node");
  }
  if (std::abs(table->K.back() - 1.0) > 1e-3) {
    fail(ErrorCode::InvalidArgument,
         "kernel mass " + std::to_string(table->K.back()) + " differs from 1");
  }

  NoiseKernel::Parts parts;
  parts.name = std::move(name);
  parts.k0 = k0;
  parts.density = [table](double t) { return table->k_at(t); };
  parts.primitive = [table](double t) { return table->K_at(t) / table->K.back(); };
  parts.kappa = [table](double t) { return table->kappa_at(t); };
  parts.support_bound = table->x.back();
  parts.quantile = [table](double u) {
    const double target = u * table->K.back();
    auto residual = [&](double t) { return table->K_at(t) - target; };
    boost::math::tools::eps_tolerance<double> tol(50);
    auto [lo, hi] = boost::math::tools::bisect(residual, 0.0, table->x.back(), tol);
    return 0.5 * (lo + hi);
  };
  return NoiseKernel(std::move(parts));
}

KernelCheck check_kernel(const NoiseKernel& kernel, double upper, int points, double tol) {
  KernelCheck out;
  const double step = upper / (points - 1);
  double prev_k = kernel.density(0.0);
  double prev_K = 0.0;
  // Running trapezoid of kappa for the k0 - int kappa identity.
  double kappa_int = 0.0;
  double prev_kappa = kernel.has_kappa() ? kernel.kappa(0.0) : 0.0;
  for (int i = 1; i < points; ++i) {
    const double x = i * step;
    const double k = kernel.density(x);
    const double K = kernel.primitive(x);
    if (k > prev_k + tol || k < 0.0) out.nonincreasing = false;
    if (K < prev_K - tol) out.mass_one = false;
    prev_k = k;
    prev_K = K;
    if (kernel.has_kappa()) {
      // Fine sub-stepping keeps the trapezoid honest across kappa jumps.
      constexpr int sub = 16;
      const double h = step / sub;
      for (int s = 1; s <= sub; ++s) {
        const double kap = kernel.kappa(x - step + s * h);
        if (kap < 0.0) out.kappa_consistent = false;
        kappa_int += 0.5 * h * (prev_kappa + kap);
        prev_kappa = kap;
      }
      const double residual = std::abs(kernel.k0() - kappa_int - k);
      out.max_kappa_residual = std::max(out.max_kappa_residual, residual);
    }
  }
  if (std::abs(kernel.primitive(upper) - 1.0) > 1e-6) out.mass_one = false;
  // Jumps in kappa cost O(step/sub) in the trapezoid.
  if (out.max_kappa_residual > std::max(tol, 4.0 * step)) out.kappa_consistent = false;
  return out;
}

ReciprocalKernel ReciprocalKernel::analytic(double k0, ClosedFormReciprocal form) {
  ReciprocalKernel r;
  r.k0_ = k0;
  r.form_ = std::move(form);
  return r;
}

ReciprocalKernel ReciprocalKernel::tabulated(double k0, double h, std::vector<double> ell) {
  if (ell.size() < 2 || !(h > 0.0)) fail(ErrorCode::InvalidArgument, "reciprocal table too small");
  ReciprocalKernel r;
  r.k0_ = k0;
  r.h_ = h;
  r.ell_ = std::move(ell);
  const std::size_t n = r.ell_.size();
  r.p_nodes_.resize(n);
  r.pbar_nodes_.resize(n);
  r.p_nodes_[0] = 1.0 / k0;
  r.pbar_nodes_[0] = 0.0;
  for (std::size_t j = 1; j < n; ++j) {
    r.p_nodes_[j] = r.p_nodes_[j - 1] + 0.5 * h * (r.ell_[j - 1] + r.ell_[j]);
    r.pbar_nodes_[j] = r.pbar_nodes_[j - 1] + 0.5 * h * (r.p_nodes_[j - 1] + r.p_nodes_[j]);
  }
  return r;
}

double ReciprocalKernel::horizon() const {
  if (form_) return std::numeric_limits<double>::infinity();
  return h_ * static_cast<double>(ell_.size() - 1);
}

void ReciprocalKernel::require_in_horizon(double t) const {
  const double T = horizon();
  if (t > T * (1.0 + 1e-12)) {
    fail(ErrorCode::OutOfHorizon,
         "t = " + std::to_string(t) + " beyond reciprocal horizon " + std::to_string(T));
  }
}

double ReciprocalKernel::p(double t) const {
  if (t < 0.0) return 0.0;
  if (form_) return form_->p(t);
  require_in_horizon(t);
  const double pos = t / h_;
  const auto j = std::min(static_cast<std::size_t>(pos), p_nodes_.size() - 2);
  const double frac = pos - static_cast<double>(j);
  return p_nodes_[j] + frac * (p_nodes_[j + 1] - p_nodes_[j]);
}

double ReciprocalKernel::p_bar(double t) const {
  if (t <= 0.0) return 0.0;
  if (form_) return form_->p_bar(t);
  require_in_horizon(t);
  const double pos = t / h_;
  const auto j = std::min(static_cast<std::size_t>(pos), p_nodes_.size() - 2);
  const double d = t - static_cast<double>(j) * h_;
  const double slope = (p_nodes_[j + 1] - p_nodes_[j]) / h_;
  return pbar_nodes_[j] + p_nodes_[j] * d + 0.5 * slope * d * d;
}

ReciprocalKernel solve_reciprocal(const NoiseKernel& kernel, const ReciprocalOptions& options) {
  if (options.use_closed_form && kernel.closed_form_p()) {
    return ReciprocalKernel::analytic(kernel.k0(), *kernel.closed_form_p());
  }
  if (!kernel.has_kappa()) {
    fail(ErrorCode::MissingKappa,
         "kernel '" + kernel.name() + "' has neither kappa nor a closed-form reciprocal");
  }
  if (!(options.h > 0.0) || !(options.horizon > 0.0)) {
    fail(ErrorCode::InvalidArgument, "reciprocal solve needs h > 0 and horizon > 0");
  }
  const auto nodes = std::max<std::size_t>(
      static_cast<std::size_t>(std::ceil(options.horizon / options.h - 1e-9)) + 1, 2);
  auto march = [&](std::size_t count, double h) {
    // Jumps of kappa that land on a node enter the trapezoid at their midpoint value.
    const double delta = 1e-9 * h;
    std::vector<double> kappa(count);
    kappa[0] = kernel.kappa(0.0);
    for (std::size_t j = 1; j < count; ++j) {
      const double t = static_cast<double>(j) * h;
      kappa[j] = 0.5 * (kernel.kappa(t - delta) + kernel.kappa(t + delta));
    }
    return compute::volterra_trapezoid(kappa, kernel.k0(), h, options.magnitude_cap, options.exec);
  };
  auto ell = march(nodes, options.h);
  if (options.extrapolate) {
    const auto fine = march(2 * nodes - 1, 0.5 * options.h);
    for (std::size_t j = 0; j < nodes; ++j) ell[j] = (4.0 * fine[2 * j] - ell[j]) / 3.0;
  }
  return ReciprocalKernel::tabulated(kernel.k0(), options.h, std::move(ell));
}

double eval_p(const ReciprocalKernel& recip, double t) { return recip.p(t); }
double eval_p_bar(const ReciprocalKernel& recip, double t) { return recip.p_bar(t); }

double convolve_p_k(const ReciprocalKernel& recip, const NoiseKernel& kernel, double t) {
  if (t <= 0.0) return 0.0;
  // Cells on which p is polynomial (table cells, or 1/64 slices whose
  // endpoints include the integer jumps of the uniform closed form),
  // refined at the kernel support edge.
  const double w = recip.is_tabulated() ? recip.step() : 1.0 / 64.0;
  std::vector<double> cuts;
  const auto ncells = static_cast<std::size_t>(std::ceil(t / w - 1e-12));
  cuts.reserve(ncells + 2);
  for (std::size_t j = 0; j < ncells; ++j) cuts.push_back(static_cast<double>(j) * w);
  cuts.push_back(t);
  const double edge = t - kernel.support_bound();
  if (edge > 0.0) {
    cuts.push_back(edge);
    std::sort(cuts.begin(), cuts.end());
  }
  auto integrand = [&](double u) { return recip.p(u) * kernel.density(t - u); };
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
    if (cuts[j + 1] > cuts[j]) {
      total += boost::math::quadrature::gauss<double, 7>::integrate(integrand, cuts[j], cuts[j + 1]);
    }
  }
  return total;
}

}  // namespace deconv
