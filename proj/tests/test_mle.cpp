#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "deconv/error.hpp"
#include "deconv/mle.hpp"
#include "oracles.hpp"

namespace {

using namespace deconv;

double max_slack(const std::vector<mle::SlackEntry>& slack) {
  double m = -1.0;
  for (const auto& e : slack) m = std::max(m, e.value);
  return m;
}

double support_deviation(const std::vector<mle::SlackEntry>& slack) {
  double m = 0.0;
  for (const auto& e : slack) {
    if (e.support) m = std::max(m, std::abs(e.value - 1.0));
  }
  return m;
}

TEST(Loglik, Examples) {
  const auto k = make_exponential();
  const auto f1 = ConcaveCDF::mixture({1.0}, {1.0});
  EXPECT_NEAR(mle::loglik(f1, Sample({1.0}), k), std::log(1.0 - std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(mle::loglik(f1, Sample({1.0}), k), -0.45868, 1e-5);
  const auto far = ConcaveCDF::mixture({50.0}, {1.0});
  EXPECT_TRUE(std::isfinite(mle::loglik(far, Sample({0.5, 1.0}), k)));
  const double single = mle::loglik(f1, Sample({1.7}), k);
  EXPECT_NEAR(mle::loglik(f1, Sample({1.7, 1.7}), k), single, 1e-15);
}

TEST(Loglik, ZeroDensityUnderCompactKernel) {
  const auto left = ConcaveCDF::mixture({0.5}, {1.0});
  try {
    mle::loglik(left, Sample({3.0}), make_triangular());
    FAIL() << "expected ZeroDensity";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroDensity);
  }
}

TEST(FitMle, SingleObservationIsGlobalMaximizer) {
  const auto k = make_exponential();
  for (double z : {0.3, 1.0, 4.2}) {
    const auto fit = mle::fit_mle(Sample({z}), k);
    ASSERT_TRUE(fit.converged);
    EXPECT_EQ(fit.support, std::vector<double>{z});
    EXPECT_EQ(fit.weights, std::vector<double>{1.0});
    // g_theta(z) peaks at theta = z over all theta > 0.
    double best = 0.0, arg = 0.0;
    for (double theta = 1e-3; theta < 3 * z + 3; theta += 1e-3) {
      const double v = oracle::exp_basis(theta, z);
      if (v > best) {
        best = v;
        arg = theta;
      }
    }
    EXPECT_NEAR(arg, z, 2e-3);
    EXPECT_NEAR(fit.loglik, std::log(oracle::exp_basis(z, z)), 1e-12);
  }
}

TEST(FitMle, CharacterizationHolds) {
  for (const auto& k : {make_exponential(), make_triangular()}) {
    for (std::size_t n : {10u, 100u}) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = sample(make_sqrt5(), k, n, seed);
        const auto fit = mle::fit_mle(s, k);
        ASSERT_TRUE(fit.converged);
        EXPECT_LE(max_slack(fit.slack), 1.0 + 1e-6);
        EXPECT_LE(support_deviation(fit.slack), 1e-6);
        EXPECT_LE(max_slack(fit.slack), 1.0 + 10 * 1e-8);
        EXPECT_LE(support_deviation(fit.slack), 10 * 1e-8);
        for (double w : fit.weights) EXPECT_GT(w, 0.0);
        double sum = 0.0;
        for (double w : fit.weights) sum += w;
        EXPECT_NEAR(sum, 1.0, 1e-12);
        for (double theta : fit.support) {
          EXPECT_TRUE(std::binary_search(s.observations().begin(), s.observations().end(), theta));
        }
      }
    }
  }
}

TEST(FitMle, Ascent) {
  const auto k = make_triangular();
  const auto fit = mle::fit_mle(sample(make_sqrt5(), k, 100, 8), k);
  ASSERT_GE(fit.log.size(), 2u);
  for (std::size_t i = 1; i < fit.log.size(); ++i) EXPECT_GE(fit.log[i].loglik, fit.log[i - 1].loglik - 1e-15) << i;
  for (const auto& r : fit.log) EXPECT_LE(r.step, 1.0);
}

TEST(FitMle, SimplexGridOracle) {
  const auto k = make_exponential();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  for (int rep = 0; rep < 12; ++rep) {
    const std::size_t n = 1 + rep % 3;
    std::vector<double> z;
    for (std::size_t i = 0; i < n; ++i) z.push_back(u(rng));
    const Sample s(z);
    std::vector<double> values, weights;
    s.distinct(values, weights);
    Eigen::MatrixXd basis(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t j = 0; j < values.size(); ++j) basis(i, j) = oracle::exp_basis(values[j], values[i]);
    }
    const double best = oracle::simplex_grid_max(basis, weights);
    const auto fit = mle::fit_mle(s, k);
    ASSERT_TRUE(fit.converged);
    EXPECT_GE(fit.loglik, best - 1e-6) << rep;
    EXPECT_LE(fit.loglik, best + 1e-6) << rep;
  }
}

TEST(FitMle, PermutationInvariance) {
  const auto k = make_exponential();
  auto z = sample(make_sqrt5(), k, 60, 4).observations();
  const auto a = mle::fit_mle(Sample(z), k);
  std::mt19937_64 rng(1);
  std::shuffle(z.begin(), z.end(), rng);
  const auto b = mle::fit_mle(Sample(z), k);
  EXPECT_EQ(a.support, b.support);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.loglik, b.loglik);
}

TEST(FitMle, DuplicatesAreOneCandidate) {
  const auto k = make_exponential();
  const auto fit = mle::fit_mle(Sample({1.0, 1.0, 2.0}), k);
  ASSERT_TRUE(fit.converged);
  EXPECT_EQ(std::count_if(fit.slack.begin(), fit.slack.end(), [](const auto& e) { return e.theta == 1.0; }), 1);
}

TEST(FitMle, IterationCapReportsNotConverged) {
  const auto k = make_exponential();
  mle::Options opt;
  opt.max_iter = 1;
  const auto fit = mle::fit_mle(sample(make_sqrt5(), k, 100, 3), k, opt);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 1u);
}

TEST(FitMle, RejectsBadTolerance) {
  mle::Options opt;
  opt.tol = 0.0;
  EXPECT_THROW(mle::fit_mle(Sample({1.0}), make_exponential(), opt), Error);
}

TEST(Slack, OffGridIsReportedForTruth) {
  const auto k = make_exponential();
  const auto s = sample(make_sqrt5(), k, 30, 9);
  const auto fit = mle::fit_mle(s, k);
  std::vector<double> grid;
  for (double t = 0.05; t < s.max(); t += 0.05) grid.push_back(t);
  const auto table = mle::mle_char_slack(fit.estimate, s, k, grid);
  EXPECT_GT(table.size(), fit.slack.size());
  EXPECT_TRUE(std::is_sorted(table.begin(), table.end(), [](auto& a, auto& b) { return a.theta < b.theta; }));
  // The truth is not the maximizer; its table is computed but not bounded.
  const auto truth_table = mle::mle_char_slack(make_sqrt5(), s, k);
  EXPECT_EQ(truth_table.size(), fit.slack.size());
}

}  // namespace
