#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "deconv/compute.hpp"
#include "deconv/kernels.hpp"
#include "deconv/lse.hpp"
#include "deconv/mixture.hpp"

using deconv::compute::Exec;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(1) ? Exec::parallel : Exec::serial; }

void BM_Volterra(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const double h = 10.0 / static_cast<double>(n - 1);
  std::vector<double> kappa(n);
  for (std::size_t j = 0; j < n; ++j) kappa[j] = std::exp(-static_cast<double>(j) * h);
  for (auto _ : state) {
    auto ell = deconv::compute::volterra_trapezoid(kappa, 1.0, h, 1e8, exec_of(state));
    benchmark::DoNotOptimize(ell.data());
  }
}
BENCHMARK(BM_Volterra)->ArgsProduct({{2001, 10001}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_Tabulate(benchmark::State& state) {
  const auto kernel = deconv::make_exponential();
  const auto data = deconv::sample(deconv::make_sqrt5(), kernel, static_cast<std::size_t>(state.range(0)), 1);
  const auto& z = data.observations();
  for (auto _ : state) {
    auto g = deconv::compute::tabulate(
        z, z, [&](double zi, double theta) { return deconv::basis_density(kernel, theta, zi); }, exec_of(state));
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_Tabulate)->ArgsProduct({{400, 1600}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_LseDirectional(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  std::vector<double> cand(m), u(m), support, alpha;
  for (std::size_t i = 0; i < m; ++i) {
    cand[i] = 0.01 + 10.0 * static_cast<double>(i) / static_cast<double>(m);
    u[i] = 0.1 * std::sin(static_cast<double>(i));
  }
  for (std::size_t j = 0; j < 20; ++j) {
    support.push_back(cand[j * m / 20]);
    alpha.push_back(1.0 / 20.0);
  }
  for (auto _ : state) {
    auto out = deconv::compute::lse_directional(cand, support, alpha, u, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_LseDirectional)->ArgsProduct({{10000, 100000}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_Yn(benchmark::State& state) {
  const auto kernel = deconv::make_triangular();
  const auto data = deconv::sample(deconv::make_sqrt5(), kernel, static_cast<std::size_t>(state.range(0)), 2);
  deconv::ReciprocalOptions o;
  o.horizon = data.max() + 1.0;
  const deconv::lse::UnProcess proc(data, deconv::solve_reciprocal(kernel, o));
  std::vector<double> thetas(2000);
  for (std::size_t i = 0; i < thetas.size(); ++i) thetas[i] = data.max() * static_cast<double>(i + 1) / 2000.0;
  for (auto _ : state) {
    auto y = proc.Yn(thetas, exec_of(state));
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Yn)->ArgsProduct({{1000, 4000}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
