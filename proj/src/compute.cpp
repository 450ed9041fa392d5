#include "deconv/compute.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deconv/error.hpp"
#include "deconv/lse.hpp"

namespace deconv::compute {

namespace {

constexpr std::ptrdiff_t kBlock = 2048;

// sum_{i=1}^{j-1} kappa[j-i] * ell[i]
double history_serial(std::span<const double> kappa, const std::vector<double>& ell,
                      std::ptrdiff_t j) {
  double acc = 0.0;
  for (std::ptrdiff_t i = 1; i < j; ++i) acc += kappa[j - i] * ell[i];
  return acc;
}

double history_blocked(std::span<const double> kappa, const std::vector<double>& ell,
                       std::ptrdiff_t j, std::vector<double>& partial) {
  const std::ptrdiff_t nblocks = (j - 1 + kBlock - 1) / kBlock;
  partial.assign(static_cast<std::size_t>(std::max<std::ptrdiff_t>(nblocks, 0)), 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nblocks; ++b) {
    const std::ptrdiff_t lo = 1 + b * kBlock;
    const std::ptrdiff_t hi = std::min(j, lo + kBlock);
    double acc = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) acc += kappa[j - i] * ell[i];
    partial[b] = acc;
  }
  double acc = 0.0;
  for (double p : partial) acc += p;
  return acc;
}

}  // namespace

std::vector<double> volterra_trapezoid(std::span<const double> kappa, double k0, double h,
                                       double cap, Exec exec) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(kappa.size());
  std::vector<double> ell(kappa.size(), 0.0);
  if (n == 0) return ell;
  const double k0sq = k0 * k0;
  const double diag = 1.0 - 0.5 * h * kappa[0] / k0;
  if (!(diag > 0.0)) fail(ErrorCode::DivergentSolve, "step too large for kernel: 1 - h*kappa(0)/(2k0) <= 0");
  ell[0] = kappa[0] / k0sq;
  std::vector<double> partial;
  for (std::ptrdiff_t j = 1; j < n; ++j) {
    // Blocking only pays once the history is long.
    const double hist = (exec == Exec::parallel && j > 2 * kBlock)
                            ? history_blocked(kappa, ell, j, partial)
                            : history_serial(kappa, ell, j);
    const double rhs = kappa[j] / k0sq + (h / k0) * (0.5 * kappa[j] * ell[0] + hist);
    ell[j] = rhs / diag;
    if (!std::isfinite(ell[j]) || std::abs(ell[j]) > cap) {
      fail(ErrorCode::DivergentSolve,
           "reciprocal table exceeded magnitude cap at node " + std::to_string(j));
    }
  }
  return ell;
}

Eigen::VectorXd column_dots(const Eigen::MatrixXd& g, const Eigen::VectorXd& v, Exec exec) {
  const std::ptrdiff_t m = g.cols();
  Eigen::VectorXd out(m);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < m; ++j) out[j] = g.col(j).dot(v);
  } else {
    for (std::ptrdiff_t j = 0; j < m; ++j) out[j] = g.col(j).dot(v);
  }
  return out;
}

Eigen::VectorXd column_square_dots(const Eigen::MatrixXd& g, const Eigen::VectorXd& u, Exec exec) {
  const std::ptrdiff_t m = g.cols();
  Eigen::VectorXd out(m);
  auto one = [&](std::ptrdiff_t j) { out[j] = g.col(j).cwiseAbs2().dot(u); };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < m; ++j) one(j);
  } else {
    for (std::ptrdiff_t j = 0; j < m; ++j) one(j);
  }
  return out;
}

std::vector<double> lse_directional(std::span<const double> candidates,
                                    std::span<const double> support,
                                    std::span<const double> alpha, std::span<const double> u,
                                    Exec exec) {
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(candidates.size());
  std::vector<double> out(candidates.size());
  auto one = [&](std::ptrdiff_t c) {
    double acc = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j) acc += alpha[j] * lse::inner_ss(candidates[c], support[j]);
    out[c] = acc - u[c];
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < m; ++c) one(c);
  } else {
    for (std::ptrdiff_t c = 0; c < m; ++c) one(c);
  }
  return out;
}

}  // namespace deconv::compute
