#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>
#include <omp.h>

#include "deconv/compute.hpp"
#include "deconv/error.hpp"
#include "deconv/lse.hpp"

namespace {

using namespace deconv;
using compute::Exec;

std::vector<double> triangular_kappa(std::size_t nodes, double h) {
  std::vector<double> k(nodes);
  for (std::size_t j = 0; j < nodes; ++j) k[j] = j * h <= 1.0 ? 2.0 : 0.0;
  return k;
}

TEST(Volterra, ConstantSolutionForExponential) {
  // kappa = exp(-t), k0 = 1 has ell = 1.
  const double h = 1e-3;
  std::vector<double> kappa(3001);
  for (std::size_t j = 0; j < kappa.size(); ++j) kappa[j] = std::exp(-static_cast<double>(j) * h);
  const auto ell = compute::volterra_trapezoid(kappa, 1.0, h, 1e8, Exec::serial);
  for (double v : ell) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(Volterra, SerialAndParallelAgree) {
  const double h = 1e-3;
  const auto kappa = triangular_kappa(12001, h);
  const auto serial = compute::volterra_trapezoid(kappa, 2.0, h, 1e8, Exec::serial);
  const auto parallel = compute::volterra_trapezoid(kappa, 2.0, h, 1e8, Exec::parallel);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t j = 0; j < serial.size(); ++j) {
    EXPECT_NEAR(parallel[j], serial[j], 1e-12 * (1.0 + std::abs(serial[j]))) << j;
  }
}

TEST(Volterra, ParallelIndependentOfThreadCount) {
  const double h = 1e-3;
  const auto kappa = triangular_kappa(9001, h);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = compute::volterra_trapezoid(kappa, 2.0, h, 1e8, Exec::parallel);
  omp_set_num_threads(4);
  const auto four = compute::volterra_trapezoid(kappa, 2.0, h, 1e8, Exec::parallel);
  omp_set_num_threads(saved);
  EXPECT_EQ(one, four);
}

TEST(Volterra, CapAndStepGuards) {
  const auto kappa = triangular_kappa(101, 0.1);
  EXPECT_THROW(compute::volterra_trapezoid(kappa, 2.0, 0.1, 0.5, Exec::serial), Error);
  EXPECT_THROW(compute::volterra_trapezoid(kappa, 0.5, 1.0, 1e8, Exec::serial), Error);
  EXPECT_TRUE(compute::volterra_trapezoid({}, 1.0, 0.1, 1e8, Exec::serial).empty());
}

class Kernels : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.01, 6.0);
    z.resize(700);
    for (double& x : z) x = u(rng);
    std::sort(z.begin(), z.end());
    w.assign(z.size(), 1.0 / z.size());
    thetas.resize(333);
    for (double& x : thetas) x = u(rng);
  }
  std::vector<double> z, w, thetas;
};

TEST_F(Kernels, ShiftedSumsMatch) {
  std::vector<double> a(thetas.size()), b(thetas.size());
  auto fn = [](double t) { return t + 0.5 * t * t; };
  compute::shifted_sums(thetas, z, w, fn, a, Exec::serial);
  compute::shifted_sums(thetas, z, w, fn, b, Exec::parallel);
  EXPECT_EQ(a, b);
  double direct = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < thetas[0]) direct += w[i] * fn(thetas[0] - z[i]);
  }
  EXPECT_NEAR(a[0], direct, 1e-14);
}

TEST_F(Kernels, TabulateAndDotsMatch) {
  auto fn = [](double r, double c) { return std::exp(-std::abs(r - c)) / c; };
  const auto gs = compute::tabulate(z, thetas, fn, Exec::serial);
  const auto gp = compute::tabulate(z, thetas, fn, Exec::parallel);
  EXPECT_EQ(gs, gp);
  EXPECT_EQ(gs(5, 7), fn(z[5], thetas[7]));
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(z.size()), 0.0, 1.0);
  const auto ds = compute::column_dots(gs, v, Exec::serial);
  EXPECT_EQ(ds, compute::column_dots(gs, v, Exec::parallel));
  EXPECT_NEAR((ds - gs.transpose() * v).norm(), 0.0, 1e-10);
  const auto qs = compute::column_square_dots(gs, v, Exec::serial);
  EXPECT_EQ(qs, compute::column_square_dots(gs, v, Exec::parallel));
  EXPECT_NEAR((qs - gs.cwiseAbs2().transpose() * v).norm(), 0.0, 1e-10);
}

TEST_F(Kernels, LseDirectionalMatches) {
  const std::vector<double> support{thetas[0], thetas[1], thetas[2]};
  const std::vector<double> alpha{0.2, 0.3, 0.5};
  std::vector<double> u(thetas.size(), 0.1);
  const auto s = compute::lse_directional(thetas, support, alpha, u, Exec::serial);
  EXPECT_EQ(s, compute::lse_directional(thetas, support, alpha, u, Exec::parallel));
  double expect = -0.1;
  for (int j = 0; j < 3; ++j) expect += alpha[j] * lse::inner_ss(thetas[4], support[j]);
  EXPECT_NEAR(s[4], expect, 1e-15);
}

}  // namespace
