#include "deconv/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "deconv/error.hpp"
#include "deconv/quadrature.hpp"

namespace deconv {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Uniform on the open interval (0, 1), identical on every platform.
double open_uniform(std::mt19937_64& engine) {
  return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
}

double draw_x(const ConcaveCDF& cdf, std::mt19937_64& engine) {
  if (cdf.is_mixture()) {
    const auto& mix = cdf.as_mixture();
    const double u = open_uniform(engine);
    double acc = 0.0;
    std::size_t j = 0;
    for (; j + 1 < mix.weights.size(); ++j) {
      acc += mix.weights[j];
      if (u < acc) break;
    }
    return mix.support[j] * open_uniform(engine);
  }
  return cdf.quantile(open_uniform(engine));
}

}  // namespace

ConcaveCDF ConcaveCDF::mixture(std::vector<double> support, std::vector<double> weights) {
  if (support.empty() || support.size() != weights.size()) {
    fail(ErrorCode::InvalidArgument, "mixture needs matching, nonempty support and weights");
  }
  std::vector<std::size_t> order(support.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return support[a] < support[b]; });
  MixtureCDF mix;
  for (auto i : order) {
    if (!(support[i] > 0.0) || !std::isfinite(support[i])) {
      fail(ErrorCode::InvalidArgument, "mixture support points must be positive and finite");
    }
    if (!(weights[i] >= 0.0)) fail(ErrorCode::InvalidArgument, "mixture weights must be nonnegative");
    if (!mix.support.empty() && mix.support.back() == support[i]) {
      mix.weights.back() += weights[i];
    } else {
      mix.support.push_back(support[i]);
      mix.weights.push_back(weights[i]);
    }
  }
  const double total = std::accumulate(mix.weights.begin(), mix.weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    fail(ErrorCode::InvalidArgument, "mixture weights sum to " + std::to_string(total));
  }
  for (double& w : mix.weights) w /= total;
  return ConcaveCDF(std::move(mix));
}

ConcaveCDF ConcaveCDF::analytic(AnalyticCDF parts) {
  if (!parts.cdf || !parts.density || !parts.quantile || !(parts.right_endpoint > 0.0)) {
    fail(ErrorCode::InvalidArgument, "analytic CDF needs F, f, quantile and a right endpoint");
  }
  return ConcaveCDF(std::move(parts));
}

const MixtureCDF& ConcaveCDF::as_mixture() const {
  if (!is_mixture()) fail(ErrorCode::InvalidArgument, "CDF is not a mixture");
  return std::get<MixtureCDF>(repr_);
}

const AnalyticCDF& ConcaveCDF::as_analytic() const {
  if (is_mixture()) fail(ErrorCode::InvalidArgument, "CDF is not analytic");
  return std::get<AnalyticCDF>(repr_);
}

double ConcaveCDF::F(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= right_endpoint()) return 1.0;
  if (const auto* mix = std::get_if<MixtureCDF>(&repr_)) {
    double acc = 0.0;
    for (std::size_t j = 0; j < mix->support.size(); ++j) {
      acc += mix->weights[j] * std::min(x / mix->support[j], 1.0);
    }
    return acc;
  }
  return std::get<AnalyticCDF>(repr_).cdf(x);
}

double ConcaveCDF::f(double x) const {
  if (x < 0.0 || x >= right_endpoint()) return 0.0;
  if (const auto* mix = std::get_if<MixtureCDF>(&repr_)) {
    double acc = 0.0;
    for (std::size_t j = 0; j < mix->support.size(); ++j) {
      if (x < mix->support[j]) acc += mix->weights[j] / mix->support[j];
    }
    return acc;
  }
  return std::get<AnalyticCDF>(repr_).density(x);
}

double ConcaveCDF::quantile(double u) const {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return right_endpoint();
  if (const auto* mix = std::get_if<MixtureCDF>(&repr_)) {
    // F is linear between consecutive support points.
    double left = 0.0;
    double f_left = 0.0;
    for (double theta : mix->support) {
      const double f_right = F(theta);
      if (u <= f_right) return left + (u - f_left) / (f_right - f_left) * (theta - left);
      left = theta;
      f_left = f_right;
    }
    return right_endpoint();
  }
  return std::get<AnalyticCDF>(repr_).quantile(u);
}

double ConcaveCDF::right_endpoint() const {
  if (const auto* mix = std::get_if<MixtureCDF>(&repr_)) return mix->support.back();
  return std::get<AnalyticCDF>(repr_).right_endpoint;
}

std::vector<double> ConcaveCDF::breakpoints() const {
  if (const auto* mix = std::get_if<MixtureCDF>(&repr_)) return mix->support;
  auto points = std::get<AnalyticCDF>(repr_).breakpoints;
  points.push_back(right_endpoint());
  return points;
}

ConcaveCDF make_sqrt5() {
  AnalyticCDF parts;
  parts.name = "sqrt5";
  parts.cdf = [](double x) { return x <= 0.0 ? 0.0 : std::min(std::sqrt(x / 5.0), 1.0); };
  parts.density = [](double x) { return (x <= 0.0 || x >= 5.0) ? 0.0 : 0.5 / std::sqrt(5.0 * x); };
  parts.quantile = [](double u) { return 5.0 * u * u; };
  parts.density_derivative = [](double x) {
    return (x <= 0.0 || x >= 5.0) ? 0.0 : -0.25 / (std::sqrt(5.0) * x * std::sqrt(x));
  };
  parts.right_endpoint = 5.0;
  return ConcaveCDF::analytic(std::move(parts));
}

double eval_F(const ConcaveCDF& cdf, double x) { return cdf.F(x); }
double eval_f(const ConcaveCDF& cdf, double x) { return cdf.f(x); }
double eval_s(const ConcaveCDF& cdf, double x) { return cdf.s(x); }

double basis_density(const NoiseKernel& kernel, double theta, double z) {
  if (z <= 0.0) return 0.0;
  return (kernel.primitive(z) - kernel.primitive(z - theta)) / theta;
}

double eval_g(const ConcaveCDF& cdf, const NoiseKernel& kernel, double z) {
  if (z <= 0.0) return 0.0;
  if (cdf.is_mixture()) {
    const auto& mix = cdf.as_mixture();
    double acc = 0.0;
    for (std::size_t j = 0; j < mix.support.size(); ++j) {
      acc += mix.weights[j] * basis_density(kernel, mix.support[j], z);
    }
    return acc;
  }
  return eval_g_quadrature(cdf, kernel, z, 1e-10);
}

double eval_g_quadrature(const ConcaveCDF& cdf, const NoiseKernel& kernel, double z, double tol) {
  if (z <= 0.0) return 0.0;
  const double upper = std::min(z, cdf.right_endpoint());
  auto cuts = cdf.breakpoints();
  cuts.push_back(z - kernel.support_bound());
  auto integrand = [&](double x) { return kernel.density(z - x) * cdf.f(x); };
  return quad::integrate(integrand, 0.0, upper, cuts, tol);
}

ConcavityCheck check_concave_cdf(const ConcaveCDF& cdf, int points, double tol) {
  ConcavityCheck out;
  auto flag = [&](const std::string& what) {
    if (out.ok) out.detail = what;
    out.ok = false;
  };
  const double end = cdf.right_endpoint();
  if (cdf.F(0.0) != 0.0) flag("F(0) != 0");
  if (std::abs(cdf.F(end) - 1.0) > tol) flag("F(right endpoint) != 1");
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) grid[i] = end * 1.1 * i / (points - 1);
  for (int i = 1; i < points; ++i) {
    if (cdf.F(grid[i]) < cdf.F(grid[i - 1]) - tol) flag("F decreases near x = " + std::to_string(grid[i]));
    if (grid[i - 1] > 0.0 && cdf.f(grid[i]) > cdf.f(grid[i - 1]) + tol) {
      flag("density increases near x = " + std::to_string(grid[i]));
    }
    if (cdf.f(grid[i]) < 0.0) flag("negative density");
  }
  for (int i = 0; i < points; i += 7) {
    for (int j = i + 2; j < points; j += 11) {
      const double mid = cdf.F(0.5 * (grid[i] + grid[j]));
      if (mid < 0.5 * (cdf.F(grid[i]) + cdf.F(grid[j])) - tol) {
        flag("midpoint concavity fails on [" + std::to_string(grid[i]) + ", " + std::to_string(grid[j]) + "]");
      }
    }
  }
  return out;
}

Sample::Sample(std::vector<double> observations, std::optional<std::uint64_t> seed)
    : obs_(std::move(observations)), seed_(seed) {
  if (obs_.empty()) fail(ErrorCode::InvalidArgument, "sample must contain at least one observation");
  for (double z : obs_) {
    if (!(z > 0.0) || !std::isfinite(z)) {
      fail(ErrorCode::InvalidArgument, "observations must be positive and finite");
    }
  }
  std::sort(obs_.begin(), obs_.end());
}

void Sample::distinct(std::vector<double>& values, std::vector<double>& weights) const {
  values.clear();
  weights.clear();
  const double unit = 1.0 / static_cast<double>(obs_.size());
  for (double z : obs_) {
    if (!values.empty() && values.back() == z) {
      weights.back() += unit;
    } else {
      values.push_back(z);
      weights.push_back(unit);
    }
  }
}

Sample sample(const ConcaveCDF& cdf, const NoiseKernel& kernel, std::size_t n, std::uint64_t seed,
              std::uint64_t stream) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "sample size must be at least 1");
  auto engine = make_engine(seed, stream);
  std::vector<double> z(n);
  for (auto& zi : z) {
    const double x = draw_x(cdf, engine);
    zi = x + kernel.quantile(open_uniform(engine));
  }
  return Sample(std::move(z), seed);
}

std::vector<double> sample_x(const ConcaveCDF& cdf, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  auto engine = make_engine(seed, stream);
  std::vector<double> x(n);
  for (auto& xi : x) xi = draw_x(cdf, engine);
  return x;
}

}  // namespace deconv
