#pragma once

#include <cstddef>
#include <vector>

#include "deconv/compute.hpp"
#include "deconv/mixture.hpp"

namespace deconv::mle {

struct Options {
  double tol = 1e-8;
  std::size_t max_iter = 500;
  compute::Exec exec = compute::Exec::parallel;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double loglik = 0.0;
  std::size_t support_size = 0;
  double step = 0.0;
  std::size_t inner_steps = 0;
};

struct SlackEntry {
  double theta = 0.0;
  double value = 0.0;
  bool support = false;
};

struct MleFit {
  ConcaveCDF estimate;
  std::vector<double> support;
  std::vector<double> weights;
  double loglik = 0.0;
  std::vector<SlackEntry> slack;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> log;
};

/// (1/n) sum_i log g_F(Z_i). Throws ZeroDensity when some g_F(Z_i) <= 0.
double loglik(const ConcaveCDF& cdf, const Sample& sample, const NoiseKernel& kernel);

/// Maximum likelihood over concave F with bend points in the observed
/// values. Returns converged = false (not an exception) when max_iter is hit.
MleFit fit_mle(const Sample& sample, const NoiseKernel& kernel, const Options& options = {});

/// theta -> (1/n) sum_i g_theta(Z_i) / g_F(Z_i) over the distinct
/// observations, plus any extra grid points, sorted by theta. Support points
/// of a mixture cdf are flagged.
std::vector<SlackEntry> mle_char_slack(const ConcaveCDF& cdf, const Sample& sample,
                                       const NoiseKernel& kernel,
                                       const std::vector<double>& extra_grid = {});

}  // namespace deconv::mle
