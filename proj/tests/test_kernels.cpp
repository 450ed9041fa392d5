#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "deconv/error.hpp"
#include "deconv/kernels.hpp"
#include "oracles.hpp"

namespace {

using namespace deconv;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidArgument;
}

ReciprocalKernel solved(const NoiseKernel& k, double h = 1e-3, double horizon = 10.0) {
  ReciprocalOptions opt;
  opt.h = h;
  opt.horizon = horizon;
  opt.use_closed_form = false;
  return solve_reciprocal(k, opt);
}

double convolve(const ReciprocalKernel& r, const NoiseKernel& k, double t) {
  return oracle::convolve_pieces([&](double u) { return eval_p(r, u); }, [&](double x) { return k.density(x); }, t,
                                 1e-3);
}

TEST(Exponential, Examples) {
  const auto k = make_exponential();
  EXPECT_NEAR(k.primitive(1.0), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_EQ(k.density(0.0), 1.0);
  EXPECT_NEAR(k.kappa(0.7), std::exp(-0.7), 1e-15);
  const auto r = solve_reciprocal(k);
  EXPECT_FALSE(r.is_tabulated());
  EXPECT_EQ(eval_p(r, 1.0), 2.0);
  EXPECT_EQ(eval_p(r, 3.0), 4.0);
  EXPECT_EQ(eval_p(r, -1.0), 0.0);
  EXPECT_EQ(eval_p_bar(r, 2.0), 4.0);
  EXPECT_EQ(eval_p_bar(r, 0.0), 0.0);
}

TEST(Uniform01, Examples) {
  const auto k = make_uniform01();
  const auto r = solve_reciprocal(k);
  EXPECT_EQ(eval_p(r, 2.5), 3.0);
  EXPECT_EQ(eval_p(r, 0.0), 1.0);
  EXPECT_EQ(eval_p(r, 0.999), 1.0);
  EXPECT_EQ(eval_p_bar(r, 2.0), 3.0);
  EXPECT_EQ(k.primitive(0.5), 0.5);
  EXPECT_FALSE(k.has_kappa());
}

TEST(Uniform01, VolterraSolveNeedsKappa) {
  EXPECT_EQ(code_of([] { solved(make_uniform01()); }), ErrorCode::MissingKappa);
  EXPECT_EQ(code_of([] { make_uniform01().kappa(0.5); }), ErrorCode::MissingKappa);
}

TEST(Uniform01, ClosedFormIsFloorStep) {
  const auto r = solve_reciprocal(make_uniform01());
  for (double t = 0.0; t < 10.0; t += 0.0137) EXPECT_EQ(eval_p(r, t), 1.0 + std::floor(t));
}

TEST(Triangular, Examples) {
  const auto k = make_triangular();
  EXPECT_EQ(k.density(0.0), 2.0);
  EXPECT_NEAR(k.primitive(1.0), 1.0, 1e-15);
  EXPECT_EQ(k.kappa(0.5), 2.0);
  EXPECT_FALSE(k.closed_form_p().has_value());
  const auto r = solve_reciprocal(k);
  EXPECT_TRUE(r.is_tabulated());
  EXPECT_NEAR(eval_p(r, 0.0), 0.5, 1e-12);
}

TEST(Triangular, AgreesWithFirstKindCollocation) {
  const auto k = make_triangular();
  const auto r = solved(k);
  const double H = 0.02;
  const std::size_t nodes = 201;
  const auto ref = oracle::first_kind_collocation([&](double x) { return k.density(x); }, k.k0(), H, nodes, 1.0);
  double worst = 0.0;
  for (std::size_t j = 0; j < nodes; ++j) worst = std::max(worst, std::abs(eval_p(r, j * H) - ref[j]));
  EXPECT_LE(worst, 1e-4);
}

TEST(Triangular, LinearAsymptote) {
  // Laplace transform of the triangular kernel gives p(t) - t -> 1/3.
  const auto r = solved(make_triangular(), 1e-3, 12.0);
  EXPECT_NEAR(eval_p(r, 10.0) - 10.0, 1.0 / 3.0, 1e-4);
  EXPECT_NEAR(eval_p(r, 12.0) / 12.0, 1.0, 0.03);
}

TEST(Reciprocal, VolterraMatchesExponentialClosedForm) {
  const auto r = solved(make_exponential());
  double worst = 0.0;
  for (double t = 0.0; t <= 10.0; t += 1e-3 / 3.0) worst = std::max(worst, std::abs(eval_p(r, t) - (1.0 + t)));
  EXPECT_LE(worst, 1e-6);
  double worst_bar = 0.0;
  for (double t = 0.0; t <= 10.0; t += 0.01) worst_bar = std::max(worst_bar, std::abs(eval_p_bar(r, t) - (t + 0.5 * t * t)));
  EXPECT_LE(worst_bar, 1e-5);
}

TEST(Reciprocal, ConvolutionIdentity) {
  const double h = 1e-3;
  for (const auto& k : {make_exponential(), make_triangular()}) {
    const auto r = solved(k, h);
    for (double t = 0.0; t <= 10.0; t += 0.37) EXPECT_NEAR(convolve(r, k, t), t, 10 * h) << k.name() << " t=" << t;
  }
  const auto u = make_uniform01();
  const auto ru = solve_reciprocal(u);
  for (double t = 0.0; t <= 10.0; t += 0.37) EXPECT_NEAR(convolve(ru, u, t), t, 10 * h) << "uniform t=" << t;
}

TEST(Reciprocal, Monotone) {
  for (const auto& k : {make_exponential(), make_triangular()}) {
    const auto r = solved(k);
    double prev = eval_p(r, 0.0);
    for (double t = 0.0; t <= 10.0; t += 0.0031) {
      const double v = eval_p(r, t);
      EXPECT_GE(v, prev - 1e-12) << k.name() << " t=" << t;
      prev = v;
    }
    for (double l : r.ell()) EXPECT_GE(l, -1e-9);
  }
}

TEST(Reciprocal, K0Consistency) {
  const auto exact = solve_reciprocal(make_exponential());
  EXPECT_EQ(eval_p(exact, 0.0) * 1.0, 1.0);
  for (const auto& k : {make_exponential(), make_triangular()}) {
    const double h = 1e-3;
    const auto r = solved(k, h);
    // Lip(ell) is bounded by kappa's size; both kernels have |ell'| <= 4.
    EXPECT_NEAR(eval_p(r, 0.0) * k.k0(), 1.0, 4 * h);
  }
}

TEST(Reciprocal, PBarIsPrimitiveOfInterpolant) {
  const auto r = solved(make_triangular(), 0.01, 5.0);
  for (double t : {0.003, 0.5, 1.0, 1.2345, 3.7, 5.0}) {
    std::vector<double> cuts{0.0, t};
    for (int j = 1; j * 0.01 < t; ++j) cuts.push_back(j * 0.01);
    const double q = oracle::integrate_pieces([&](double u) { return eval_p(r, u); }, cuts);
    EXPECT_NEAR(eval_p_bar(r, t), q, 1e-10) << t;
  }
}

TEST(Reciprocal, OutOfHorizon) {
  const auto r = solved(make_triangular(), 1e-2, 3.0);
  EXPECT_EQ(code_of([&] { eval_p(r, 3.5); }), ErrorCode::OutOfHorizon);
  EXPECT_EQ(code_of([&] { eval_p_bar(r, 3.5); }), ErrorCode::OutOfHorizon);
  EXPECT_NO_THROW(eval_p(r, 3.0));
  EXPECT_EQ(eval_p(r, -2.0), 0.0);
  EXPECT_EQ(eval_p_bar(r, -2.0), 0.0);
}

TEST(Reciprocal, DivergentSolve) {
  ReciprocalOptions opt;
  opt.use_closed_form = false;
  // ell = 1 everywhere for exponential noise.
  opt.magnitude_cap = 0.5;
  opt.h = 1e-2;
  EXPECT_EQ(code_of([&] { solve_reciprocal(make_exponential(), opt); }), ErrorCode::DivergentSolve);
  opt.magnitude_cap = 1e8;
  opt.h = 3.0;
  EXPECT_EQ(code_of([&] { solve_reciprocal(make_exponential(), opt); }), ErrorCode::DivergentSolve);
}

TEST(Reciprocal, InvalidOptions) {
  ReciprocalOptions opt;
  opt.use_closed_form = false;
  opt.h = -1.0;
  EXPECT_EQ(code_of([&] { solve_reciprocal(make_triangular(), opt); }), ErrorCode::InvalidArgument);
  opt.h = 1e-3;
  opt.horizon = 0.0;
  EXPECT_EQ(code_of([&] { solve_reciprocal(make_triangular(), opt); }), ErrorCode::InvalidArgument);
}

TEST(Kernel, InvariantsHold) {
  for (const auto& k : {make_exponential(), make_uniform01(), make_triangular()}) {
    const auto check = check_kernel(k, 40.0);
    EXPECT_TRUE(check.ok()) << k.name();
    EXPECT_EQ(k.density(-0.1), 0.0);
    EXPECT_EQ(k.primitive(0.0), 0.0);
    double prev = 0.0;
    for (double x = 0.0; x < 30.0; x += 0.05) {
      EXPECT_GE(k.primitive(x), prev);
      prev = k.primitive(x);
    }
    EXPECT_NEAR(k.primitive(40.0), 1.0, 1e-12);
  }
}

TEST(Kernel, QuantileInvertsPrimitive) {
  for (const auto& k : {make_exponential(), make_uniform01(), make_triangular()}) {
    for (double u = 0.01; u < 1.0; u += 0.07) EXPECT_NEAR(k.primitive(k.quantile(u)), u, 1e-12) << k.name();
  }
}

TEST(Custom, TriangularTableReproducesBuiltin) {
  const std::vector<double> x{0.0, 0.5, 1.0};
  const std::vector<double> kappa{2.0, 2.0, 2.0};
  const auto c = make_custom(x, kappa, 2.0);
  const auto t = make_triangular();
  for (double z = 0.0; z < 1.5; z += 0.013) {
    EXPECT_NEAR(c.density(z), t.density(z), 1e-12) << z;
    EXPECT_NEAR(c.primitive(z), t.primitive(z), 1e-12) << z;
  }
  EXPECT_TRUE(check_kernel(c, 3.0).ok());
  const auto rc = solved(c, 1e-3, 4.0);
  const auto rt = solved(t, 1e-3, 4.0);
  for (double z = 0.0; z <= 4.0; z += 0.1) EXPECT_NEAR(eval_p(rc, z), eval_p(rt, z), 1e-9);
}

TEST(Custom, RejectsInconsistentTable) {
  // kappa integrates to 1 but k0 = 2: k would not reach zero at the end.
  const std::vector<double> x{0.0, 1.0};
  const std::vector<double> kappa{1.0, 1.0};
  EXPECT_EQ(code_of([&] { make_custom(x, kappa, 2.0); }), ErrorCode::InvalidArgument);
  const std::vector<double> neg{1.0, -1.0};
  EXPECT_EQ(code_of([&] { make_custom(x, neg, 0.0); }), ErrorCode::InvalidArgument);
}

TEST(Kernel, KappaConsistentWithDensity) {
  for (const auto& k : {make_exponential(), make_triangular()}) {
    for (double x = 0.1; x < 5.0; x += 0.29) {
      const double integral = oracle::integrate([&](double u) { return k.kappa(u); }, 0.0, x, {1.0});
      EXPECT_NEAR(k.density(x), k.k0() - integral, 1e-10) << k.name() << " x=" << x;
    }
  }
}

}  // namespace
