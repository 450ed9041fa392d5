#include "deconv/lse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "deconv/error.hpp"

namespace deconv::lse {

using compute::Exec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double inner_ss(double a, double b) {
  if (a > b) std::swap(a, b);
  if (!(a > 0.0)) return 0.0;
  return 0.5 * a - a * a / (6.0 * b);
}

UnProcess::UnProcess(const Sample& sample, ReciprocalKernel recip)
    : n_(sample.size()), recip_(std::move(recip)) {
  sample.distinct(z_, w_);
  if (recip_.horizon() < sample.max() - sample.min()) {
    // U_n on [0, Z_(n)] needs p up to Z_(n) - Z_(1); the fitter also needs
    // p_bar up to the same span.
    fail(ErrorCode::OutOfHorizon, "reciprocal horizon " + std::to_string(recip_.horizon()) +
                                      " shorter than the sample span");
  }
}

double UnProcess::Un(double x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < z_.size() && z_[i] <= x; ++i) acc += w_[i] * recip_.p(x - z_[i]);
  return x - acc;
}

double UnProcess::Yn(double theta) const {
  if (theta <= 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < z_.size() && z_[i] < theta; ++i) acc += w_[i] * recip_.p_bar(theta - z_[i]);
  return 0.5 * theta * theta - acc;
}

std::vector<double> UnProcess::Yn(std::span<const double> thetas, Exec exec) const {
  std::vector<double> sums(thetas.size());
  compute::shifted_sums(thetas, z_, w_, [this](double t) { return recip_.p_bar(t); }, sums, exec);
  std::vector<double> out(thetas.size());
  for (std::size_t j = 0; j < thetas.size(); ++j) {
    out[j] = thetas[j] <= 0.0 ? 0.0 : 0.5 * thetas[j] * thetas[j] - sums[j];
  }
  return out;
}

double eval_Un(const UnProcess& proc, double x) { return proc.Un(x); }
double eval_Yn(const UnProcess& proc, double theta) { return proc.Yn(theta); }

double inner_sU(const UnProcess& proc, double theta) {
  if (!(theta > 0.0)) return 0.0;
  return proc.Yn(theta) / theta;
}

double qn(std::span<const double> support, std::span<const double> weights, const UnProcess& proc) {
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    for (std::size_t j = 0; j < support.size(); ++j) quad += weights[i] * weights[j] * inner_ss(support[i], support[j]);
    lin += weights[i] * inner_sU(proc, support[i]);
  }
  return 0.5 * quad - lin;
}

double LseFit::s(double x) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < support.size(); ++j) acc += weights[j] * std::max(0.0, 1.0 - std::max(x, 0.0) / support[j]);
  return acc;
}

double LseFit::s_right_derivative(double x) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < support.size(); ++j) {
    if (x < support[j]) acc -= weights[j] / support[j];
  }
  return acc;
}

namespace {

// Minimizer of Q over the affine hull {sum alpha = 1} of the given support
// (indices into the candidate list), with alpha_1 eliminated.
VectorXd solve_on_support(const std::vector<std::size_t>& support, std::span<const double> theta,
                          std::span<const double> u) {
  const auto k = static_cast<Eigen::Index>(support.size());
  VectorXd alpha(k);
  if (k == 1) {
    alpha[0] = 1.0;
    return alpha;
  }
  const double t1 = theta[support[0]];
  const double g11 = inner_ss(t1, t1);
  MatrixXd A(k - 1, k - 1);
  VectorXd b(k - 1);
  for (Eigen::Index i = 1; i < k; ++i) {
    const double ti = theta[support[i]];
    const double g1i = inner_ss(t1, ti);
    for (Eigen::Index j = i; j < k; ++j) {
      const double tj = theta[support[j]];
      A(i - 1, j - 1) = g11 - g1i - inner_ss(t1, tj) + inner_ss(ti, tj);
      A(j - 1, i - 1) = A(i - 1, j - 1);
    }
    b[i - 1] = (g11 - g1i) - (u[support[0]] - u[support[i]]);
  }
  Eigen::LDLT<MatrixXd> ldlt(A);
  VectorXd x;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) x = ldlt.solve(b);
  if (x.size() != k - 1 || !x.allFinite()) x = A.completeOrthogonalDecomposition().solve(b);
  alpha.tail(k - 1) = x;
  alpha[0] = 1.0 - x.sum();
  return alpha;
}

double objective(const std::vector<std::size_t>& support, const std::vector<double>& alpha,
                 std::span<const double> theta, std::span<const double> u) {
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    for (std::size_t j = 0; j < support.size(); ++j) {
      quad += alpha[i] * alpha[j] * inner_ss(theta[support[i]], theta[support[j]]);
    }
    lin += alpha[i] * u[support[i]];
  }
  return 0.5 * quad - lin;
}

}  // namespace

LseFit fit_lse(const UnProcess& proc, const Options& options) {
  if (!(options.tol > 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be positive");
  const auto& theta = proc.values();
  const std::size_t m = theta.size();
  const auto yn = proc.Yn(theta, options.exec);
  std::vector<double> u(m);
  for (std::size_t c = 0; c < m; ++c) u[c] = yn[c] / theta[c];

  std::size_t first = m - 1;
  if (options.start) {
    auto it = std::find(theta.begin(), theta.end(), *options.start);
    if (it == theta.end()) fail(ErrorCode::InvalidArgument, "start point is not an observation");
    first = static_cast<std::size_t>(it - theta.begin());
  }
  // Support kept sorted by candidate index; alpha aligned with it.
  std::vector<std::size_t> support{first};
  std::vector<double> alpha{1.0};

  std::vector<IterationRecord> log;
  log.push_back({0, objective(support, alpha, theta, u), 1, 0});
  bool converged = false;
  std::size_t it = 0;
  std::vector<double> sup_theta;
  for (; it < options.max_iter; ++it) {
    sup_theta.clear();
    for (auto j : support) sup_theta.push_back(theta[j]);
    const auto c1 = compute::lse_directional(theta, sup_theta, alpha, u, options.exec);
    double threshold = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j) threshold += alpha[j] * c1[support[j]];

    std::size_t best = 0;
    for (std::size_t c = 1; c < m; ++c) {
      if (c1[c] < c1[best]) best = c;
    }
    if (c1[best] >= threshold - options.tol) {
      converged = true;
      break;
    }

    // Exact line search toward s_best gives a feasible start carrying weight
    // on the new point.
    double cross = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j) cross += alpha[j] * inner_ss(theta[best], sup_theta[j]);
    double ss = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      for (std::size_t j = 0; j < support.size(); ++j) ss += alpha[i] * alpha[j] * inner_ss(sup_theta[i], sup_theta[j]);
    }
    const double curvature = inner_ss(theta[best], theta[best]) - 2.0 * cross + ss;
    const double eps = curvature > 0.0 ? std::min(1.0, (threshold - c1[best]) / curvature) : 1.0;

    std::vector<double> start(alpha.size());
    for (std::size_t j = 0; j < alpha.size(); ++j) start[j] = (1.0 - eps) * alpha[j];
    auto pos = std::lower_bound(support.begin(), support.end(), best);
    const auto at = static_cast<std::size_t>(pos - support.begin());
    if (pos != support.end() && *pos == best) {
      start[at] += eps;
    } else {
      support.insert(pos, best);
      start.insert(start.begin() + static_cast<std::ptrdiff_t>(at), eps);
    }

    std::size_t removed = 0;
    for (;;) {
      const VectorXd x = solve_on_support(support, theta, u);
      if ((x.array() > 0.0).all()) {
        alpha.assign(x.data(), x.data() + x.size());
        break;
      }
      double t = 1.0;
      std::size_t drop = 0;
      for (std::size_t j = 0; j < support.size(); ++j) {
        if (x[j] <= 0.0) {
          const double tj = start[j] / (start[j] - x[j]);
          if (tj < t) {
            t = tj;
            drop = j;
          }
        }
      }
      for (std::size_t j = 0; j < support.size(); ++j) start[j] = std::max(0.0, start[j] + t * (x[j] - start[j]));
      support.erase(support.begin() + static_cast<std::ptrdiff_t>(drop));
      start.erase(start.begin() + static_cast<std::ptrdiff_t>(drop));
      const double total = std::accumulate(start.begin(), start.end(), 0.0);
      for (double& s : start) s /= total;
      ++removed;
    }
    log.push_back({it + 1, objective(support, alpha, theta, u), support.size(), removed});
  }

  LseFit fit;
  const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  for (std::size_t j = 0; j < support.size(); ++j) {
    fit.support.push_back(theta[support[j]]);
    fit.weights.push_back(alpha[j] / total);
  }
  fit.objective = qn(fit.support, fit.weights, proc);
  fit.iterations = it;
  fit.converged = converged;
  fit.log = std::move(log);
  fit.char_table = lse_char(fit, proc);
  return fit;
}

LseFit fit_lse(const Sample& sample, const ReciprocalKernel& recip, const Options& options) {
  return fit_lse(UnProcess(sample, recip), options);
}

std::vector<CharEntry> lse_char(std::span<const double> support, std::span<const double> weights,
                                const UnProcess& proc, const std::vector<double>& extra_grid) {
  // Piecewise-linear s on knots 0 = x_0 < support..., with exact running
  // integrals S1 = int_0^x s and S2 = int_0^x S1 at every knot.
  std::vector<double> knots{0.0};
  knots.insert(knots.end(), support.begin(), support.end());
  const std::size_t nk = knots.size();
  std::vector<double> value(nk), slope(nk, 0.0), s1(nk, 0.0), s2(nk, 0.0);
  for (std::size_t k = 0; k < nk; ++k) {
    double v = 0.0, sl = 0.0;
    for (std::size_t j = 0; j < support.size(); ++j) {
      if (knots[k] < support[j]) {
        v += weights[j] * (1.0 - knots[k] / support[j]);
        sl -= weights[j] / support[j];
      }
    }
    value[k] = v;
    slope[k] = sl;
  }
  double ss = 0.0;
  for (std::size_t k = 0; k + 1 < nk; ++k) {
    const double d = knots[k + 1] - knots[k];
    s1[k + 1] = s1[k] + value[k] * d + 0.5 * slope[k] * d * d;
    s2[k + 1] = s2[k] + s1[k] * d + 0.5 * value[k] * d * d + slope[k] * d * d * d / 6.0;
    ss += value[k] * value[k] * d + value[k] * slope[k] * d * d + slope[k] * slope[k] * d * d * d / 3.0;
  }
  double sdu = 0.0;
  for (std::size_t j = 0; j < support.size(); ++j) sdu += weights[j] * inner_sU(proc, support[j]);

  std::vector<double> thetas = proc.values();
  for (double t : extra_grid) {
    if (t > 0.0) thetas.push_back(t);
  }
  std::sort(thetas.begin(), thetas.end());
  thetas.erase(std::unique(thetas.begin(), thetas.end()), thetas.end());

  std::vector<CharEntry> out;
  out.reserve(thetas.size());
  for (double th : thetas) {
    auto k = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), th) - knots.begin()) - 1;
    const double d = th - knots[k];
    const double S2 = s2[k] + s1[k] * d + 0.5 * value[k] * d * d + slope[k] * d * d * d / 6.0;
    const double H = S2 - th * (ss - sdu);
    const bool kink = std::binary_search(support.begin(), support.end(), th);
    out.push_back({th, H - proc.Yn(th), kink});
  }
  return out;
}

std::vector<CharEntry> lse_char(const LseFit& fit, const UnProcess& proc, const std::vector<double>& extra_grid) {
  return lse_char(fit.support, fit.weights, proc, extra_grid);
}

}  // namespace deconv::lse
