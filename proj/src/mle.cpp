#include "deconv/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "deconv/error.hpp"

namespace deconv::mle {

using compute::Exec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd solve_spd(const MatrixXd& a, const VectorXd& b) {
  Eigen::LDLT<MatrixXd> ldlt(a);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    VectorXd x = ldlt.solve(b);
    if (x.allFinite()) return x;
  }
  return a.completeOrthogonalDecomposition().solve(b);
}

// -sum w log g + sum alpha; +inf when g vanishes at an observation.
double cone_objective(const VectorXd& g, const VectorXd& w, double mass) {
  double acc = mass;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0)) return std::numeric_limits<double>::infinity();
    acc -= w[i] * std::log(g[i]);
  }
  return acc;
}

std::vector<Eigen::Index> support_of(const VectorXd& alpha) {
  std::vector<Eigen::Index> s;
  for (Eigen::Index j = 0; j < alpha.size(); ++j) {
    if (alpha[j] > 0.0) s.push_back(j);
  }
  return s;
}

// Support reduction on the local quadratic model around gbar:
//   q(beta) = sum_j beta_j (1 - 2 a_j) + 1/2 beta' B beta,
//   B = G' diag(w / gbar^2) G,  a = G' (w / gbar).
// Starts from the feasible beta and returns the cone minimizer (to tol).
VectorXd inner_support_reduction(const MatrixXd& G, const VectorXd& u, const VectorXd& lin,
                                 const VectorXd& c2, VectorXd beta, double tol, Exec exec,
                                 std::size_t& steps) {
  const Eigen::Index m = G.cols();
  auto support = support_of(beta);
  const std::size_t max_steps = 10 * static_cast<std::size_t>(m) + 50;
  for (steps = 0; steps < max_steps; ++steps) {
    VectorXd gb = VectorXd::Zero(G.rows());
    for (auto j : support) gb += beta[j] * G.col(j);
    const VectorXd c1 = lin + compute::column_dots(G, u.cwiseProduct(gb), exec);

    Eigen::Index best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double score = c1[j] / std::sqrt(c2[j]);
      if (score < best_score) {  // strict: smallest theta wins ties
        best_score = score;
        best = j;
      }
    }
    if (best_score >= -tol) break;

    // Exact line minimization along the new direction gives a feasible
    // start with positive weight on the new point.
    VectorXd start = beta;
    start[best] += -c1[best] / c2[best];
    if (std::find(support.begin(), support.end(), best) == support.end()) {
      support.insert(std::upper_bound(support.begin(), support.end(), best), best);
    }

    while (!support.empty()) {
      const auto k = static_cast<Eigen::Index>(support.size());
      MatrixXd Gs(G.rows(), k);
      for (Eigen::Index c = 0; c < k; ++c) Gs.col(c) = G.col(support[c]);
      const MatrixXd B = Gs.transpose() * u.asDiagonal() * Gs;
      VectorXd rhs(k);
      for (Eigen::Index c = 0; c < k; ++c) rhs[c] = -lin[support[c]];
      const VectorXd x = solve_spd(B, rhs);

      if ((x.array() > 0.0).all()) {
        beta.setZero();
        for (Eigen::Index c = 0; c < k; ++c) beta[support[c]] = x[c];
        break;
      }
      // Walk from the feasible start toward x until the first weight hits 0.
      double t = 1.0;
      Eigen::Index drop = 0;
      for (Eigen::Index c = 0; c < k; ++c) {
        if (x[c] <= 0.0) {
          const double s0 = start[support[c]];
          const double tc = s0 / (s0 - x[c]);
          if (tc < t) {
            t = tc;
            drop = c;
          }
        }
      }
      for (Eigen::Index c = 0; c < k; ++c) {
        start[support[c]] += t * (x[c] - start[support[c]]);
      }
      start[support[drop]] = 0.0;
      for (auto j : support) start[j] = std::max(start[j], 0.0);
      support.erase(support.begin() + drop);
      beta = start;
    }
    support = support_of(beta);
  }
  return beta;
}

}  // namespace

double loglik(const ConcaveCDF& cdf, const Sample& sample, const NoiseKernel& kernel) {
  double acc = 0.0;
  for (double z : sample.observations()) {
    const double g = eval_g(cdf, kernel, z);
    if (!(g > 0.0)) {
      fail(ErrorCode::ZeroDensity, "g_F vanishes at observation " + std::to_string(z));
    }
    acc += std::log(g);
  }
  return acc / static_cast<double>(sample.size());
}

std::vector<SlackEntry> mle_char_slack(const ConcaveCDF& cdf, const Sample& sample,
                                       const NoiseKernel& kernel,
                                       const std::vector<double>& extra_grid) {
  std::vector<double> z, w;
  sample.distinct(z, w);
  std::vector<double> gF(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    gF[i] = eval_g(cdf, kernel, z[i]);
    if (!(gF[i] > 0.0)) fail(ErrorCode::ZeroDensity, "g_F vanishes at observation " + std::to_string(z[i]));
  }
  std::vector<double> thetas = z;
  for (double t : extra_grid) {
    if (t > 0.0) thetas.push_back(t);
  }
  std::sort(thetas.begin(), thetas.end());
  thetas.erase(std::unique(thetas.begin(), thetas.end()), thetas.end());

  std::vector<double> support;
  if (cdf.is_mixture()) support = cdf.as_mixture().support;
  std::vector<SlackEntry> out;
  out.reserve(thetas.size());
  for (double theta : thetas) {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) acc += w[i] * basis_density(kernel, theta, z[i]) / gF[i];
    out.push_back({theta, acc, std::binary_search(support.begin(), support.end(), theta)});
  }
  return out;
}

MleFit fit_mle(const Sample& sample, const NoiseKernel& kernel, const Options& options) {
  if (!(options.tol > 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be positive");
  std::vector<double> zs, ws;
  sample.distinct(zs, ws);
  const auto m = static_cast<Eigen::Index>(zs.size());
  const VectorXd w = Eigen::Map<const VectorXd>(ws.data(), m);
  const MatrixXd G = compute::tabulate(
      zs, zs, [&](double z, double theta) { return basis_density(kernel, theta, z); }, options.exec);

  VectorXd alpha = VectorXd::Zero(m);
  alpha[m - 1] = 1.0;
  VectorXd g = G.col(m - 1);
  double phi = cone_objective(g, w, 1.0);
  if (!std::isfinite(phi)) fail(ErrorCode::ZeroDensity, "initial iterate has zero density at an observation");

  std::vector<IterationRecord> log;
  bool converged = false;
  std::size_t it = 0;
  for (; it < options.max_iter; ++it) {
    const VectorXd v = w.cwiseQuotient(g);
    const VectorXd u = v.cwiseQuotient(g);
    const VectorXd a = compute::column_dots(G, v, options.exec);
    const VectorXd c2 = compute::column_square_dots(G, u, options.exec);

    bool optimal = true;
    for (Eigen::Index j = 0; j < m && optimal; ++j) {
      const double gap = 1.0 - a[j];
      if (gap / std::sqrt(c2[j]) < -options.tol) optimal = false;
      if (alpha[j] > 0.0 && std::abs(gap) > options.tol) optimal = false;
    }
    if (optimal) {
      converged = true;
      break;
    }

    const VectorXd lin = VectorXd::Ones(m) - 2.0 * a;
    std::size_t inner_steps = 0;
    const VectorXd beta =
        inner_support_reduction(G, u, lin, c2, alpha, 0.1 * options.tol, options.exec, inner_steps);

    // Backtracking on the cone objective; the iterate is renormalized after
    // each step so this is also ascent of the log likelihood.
    const VectorXd dir = beta - alpha;
    const VectorXd gdir = G * dir;
    double lambda = 1.0;
    bool accepted = false;
    VectorXd next_alpha, next_g;
    while (lambda >= 0x1.0p-30) {
      next_alpha = alpha + lambda * dir;
      next_g = g + lambda * gdir;
      if (cone_objective(next_g, w, next_alpha.sum()) <= phi) {
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      log.push_back({it + 1, 1.0 - phi, support_of(alpha).size(), 0.0, inner_steps});
      break;
    }
    for (Eigen::Index j = 0; j < m; ++j) next_alpha[j] = std::max(next_alpha[j], 0.0);
    const double mass = next_alpha.sum();
    alpha = next_alpha / mass;
    g = VectorXd::Zero(G.rows());
    for (auto j : support_of(alpha)) g += alpha[j] * G.col(j);
    phi = cone_objective(g, w, 1.0);
    log.push_back({it + 1, 1.0 - phi, support_of(alpha).size(), lambda, inner_steps});
  }

  std::vector<double> support, weights;
  for (auto j : support_of(alpha)) {
    support.push_back(zs[j]);
    weights.push_back(alpha[j]);
  }
  auto estimate = ConcaveCDF::mixture(support, weights);
  auto slack = mle_char_slack(estimate, sample, kernel);
  const double ll = loglik(estimate, sample, kernel);
  const auto& mix = estimate.as_mixture();
  return MleFit{estimate, mix.support, mix.weights, ll, std::move(slack), it, converged, std::move(log)};
}

}  // namespace deconv::mle
