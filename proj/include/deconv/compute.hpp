#pragma once

// Data-parallel inner loops. Every kernel has a serial reference path and an
// OpenMP path selected by Exec. Parallel paths split work over output indices
// (or over fixed-size blocks for reductions), so their results do not depend
// on the number of threads.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace deconv::compute {

enum class Exec { serial, parallel };

/// Trapezoidal product integration, marching forward, for
///   ell(t) - int_0^t kappa(t-u)/k0 ell(u) du = kappa(t)/k0^2
/// on the grid t_j = j*h, with kappa sampled at the same nodes.
/// Throws DivergentSolve once |ell| exceeds cap.
std::vector<double> volterra_trapezoid(std::span<const double> kappa, double k0, double h,
                                       double cap, Exec exec);

/// out[j] = sum over z_i < theta_j of w_i * fn(theta_j - z_i), z sorted ascending.
template <class Fn>
void shifted_sums(std::span<const double> thetas, std::span<const double> z,
                  std::span<const double> w, const Fn& fn, std::span<double> out, Exec exec) {
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(thetas.size());
  auto one = [&](std::ptrdiff_t j) {
    double acc = 0.0;
    const double t = thetas[j];
    for (std::size_t i = 0; i < z.size() && z[i] < t; ++i) acc += w[i] * fn(t - z[i]);
    out[j] = acc;
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t j = 0; j < m; ++j) one(j);
  } else {
    for (std::ptrdiff_t j = 0; j < m; ++j) one(j);
  }
}

/// G(i, j) = fn(rows[i], cols[j]).
template <class Fn>
Eigen::MatrixXd tabulate(std::span<const double> rows, std::span<const double> cols,
                         const Fn& fn, Exec exec) {
  Eigen::MatrixXd g(rows.size(), cols.size());
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(cols.size());
  auto column = [&](std::ptrdiff_t j) {
    for (std::size_t i = 0; i < rows.size(); ++i) g(i, j) = fn(rows[i], cols[j]);
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < m; ++j) column(j);
  } else {
    for (std::ptrdiff_t j = 0; j < m; ++j) column(j);
  }
  return g;
}

/// out[j] = sum_i v[i] * G(i, j), i.e. G' v, one column per task.
Eigen::VectorXd column_dots(const Eigen::MatrixXd& g, const Eigen::VectorXd& v, Exec exec);

/// out[j] = sum_i u[i] * G(i, j)^2.
Eigen::VectorXd column_square_dots(const Eigen::MatrixXd& g, const Eigen::VectorXd& u, Exec exec);

/// Directional derivatives of the least squares objective for every
/// candidate: out[c] = sum_j alpha_j <s_{cand_c}, s_{support_j}> - u[c].
std::vector<double> lse_directional(std::span<const double> candidates,
                                    std::span<const double> support,
                                    std::span<const double> alpha, std::span<const double> u,
                                    Exec exec);

}  // namespace deconv::compute
