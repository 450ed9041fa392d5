// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "deconv/asymptotics.hpp"
#include "deconv/cli.hpp"
#include "deconv/io.hpp"
#include "deconv/lse.hpp"
#include "deconv/mle.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace {

using namespace deconv;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "deconv");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_file(e.path());
  }
  return files;
}

// 1. Reciprocal kernels.
Outcome reciprocal_kernels() {
  ReciprocalOptions opt;
  opt.use_closed_form = false;
  const auto pe = solve_reciprocal(make_exponential(), opt);
  double exp_err = 0.0;
  for (double t = 0.0; t <= 10.0; t += 1e-4) exp_err = std::max(exp_err, std::abs(eval_p(pe, t) - (1.0 + t)));

  const auto pu = solve_reciprocal(make_uniform01());
  bool uniform_exact = true;
  for (double t = 0.0; t <= 10.0; t += 1e-3) uniform_exact = uniform_exact && eval_p(pu, t) == 1.0 + std::floor(t);

  const auto tri = make_triangular();
  const auto pt = solve_reciprocal(tri, opt);
  double tri_err = 0.0;
  for (double t = 0.0; t <= 10.0; t += 0.05) {
    const double conv = oracle::convolve_pieces([&](double u) { return eval_p(pt, u); },
                                                [&](double x) { return tri.density(x); }, t, opt.h);
    tri_err = std::max(tri_err, std::abs(conv - t));
  }
  return {exp_err <= 1e-6 && uniform_exact && tri_err <= 1e-2,
          "exponential max|p - (1+t)| " + num(exp_err) + ", uniform closed form exact " +
              (uniform_exact ? "yes" : "no") + ", triangular max|p*k - t| " + num(tri_err)};
}

struct Battery {
  NoiseKernel kernel;
  std::vector<Sample> samples;
};

std::vector<Battery> battery() {
  std::vector<Battery> out;
  for (const auto& k : {make_exponential(), make_triangular()}) {
    Battery b{k, {}};
    for (std::size_t n : {10u, 100u}) {
      for (std::uint64_t seed = 1; seed <= 20; ++seed) b.samples.push_back(sample(make_sqrt5(), k, n, seed, n));
    }
    out.push_back(std::move(b));
  }
  return out;
}

// 2. MLE characterization.
Outcome mle_characterization() {
  double worst = 0.0, worst_support = 0.0;
  std::size_t fits = 0, not_converged = 0;
  for (const auto& b : battery()) {
    for (const auto& s : b.samples) {
      mle::Options o;
      o.tol = 1e-8;
      const auto fit = mle::fit_mle(s, b.kernel, o);
      ++fits;
      if (!fit.converged) ++not_converged;
      for (const auto& e : fit.slack) {
        worst = std::max(worst, e.value - 1.0);
        if (e.support) worst_support = std::max(worst_support, std::abs(e.value - 1.0));
      }
    }
  }
  return {not_converged == 0 && worst <= 1e-6 && worst_support <= 1e-6,
          std::to_string(fits) + " fits, max slack - 1 = " + num(worst) + ", max |slack - 1| at support " +
              num(worst_support) + ", not converged " + std::to_string(not_converged)};
}

// 3. LSE characterization.
Outcome lse_characterization() {
  double worst = 0.0, worst_kink = 0.0;
  std::size_t fits = 0, not_converged = 0;
  for (const auto& b : battery()) {
    double top = 0.0;
    for (const auto& s : b.samples) top = std::max(top, s.max());
    ReciprocalOptions opt;
    opt.horizon = top + 1.0;
    const auto recip = solve_reciprocal(b.kernel, opt);
    for (const auto& s : b.samples) {
      lse::Options o;
      o.tol = 1e-10;
      const auto fit = lse::fit_lse(s, recip, o);
      ++fits;
      if (!fit.converged) ++not_converged;
      for (const auto& e : fit.char_table) {
        worst = std::min(worst, e.value);
        if (e.kink) worst_kink = std::max(worst_kink, std::abs(e.value));
      }
    }
  }
  return {not_converged == 0 && worst >= -1e-8 && worst_kink <= 1e-8,
          std::to_string(fits) + " fits, min(H_n - Y_n) = " + num(worst) + ", max |H_n - Y_n| at kinks " +
              num(worst_kink) + ", not converged " + std::to_string(not_converged)};
}

// 4. Oracle equivalence.
Outcome oracle_equivalence() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.02, 5.0);
  double lse_gap = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const bool uniform = rep % 2 == 1;
    const std::size_t n = 1 + rep % 6;
    std::vector<double> z(n);
    for (double& x : z) x = u(rng);
    const Sample s(z);
    const lse::UnProcess proc(s, solve_reciprocal(uniform ? make_uniform01() : make_exponential()));
    const auto fit = lse::fit_lse(proc);
    const auto& theta = proc.values();
    const auto m = static_cast<Eigen::Index>(theta.size());
    oracle::Fn pbar = [](double t) { return t + 0.5 * t * t; };
    if (uniform) {
      pbar = [](double t) {
        const double f = std::floor(t);
        return 0.5 * f * (f + 1.0) + (t - f) * (1.0 + f);
      };
    }
    Eigen::MatrixXd G(m, m);
    Eigen::VectorXd c(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) G(i, j) = oracle::ss_quadrature(theta[i], theta[j]);
      c[i] = oracle::Y(theta[i], z, pbar) / theta[i];
    }
    const auto ref = oracle::active_set_qp(G, c);
    for (Eigen::Index i = 0; i < m; ++i) {
      double w = 0.0;
      for (std::size_t j = 0; j < fit.support.size(); ++j) {
        if (fit.support[j] == theta[i]) w = fit.weights[j];
      }
      lse_gap = std::max(lse_gap, std::abs(w - ref.weights[i]));
    }
  }

  double mle_gap = 0.0;
  const auto k = make_exponential();
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rep % 3;
    std::vector<double> z(n);
    for (double& x : z) x = u(rng);
    const Sample s(z);
    std::vector<double> values, weights;
    s.distinct(values, weights);
    Eigen::MatrixXd basis(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t j = 0; j < values.size(); ++j) basis(i, j) = oracle::exp_basis(values[j], values[i]);
    }
    const double best = oracle::simplex_grid_max(basis, weights);
    const auto fit = mle::fit_mle(s, k);
    mle_gap = std::max(mle_gap, std::abs(fit.loglik - best));
  }
  return {lse_gap <= 1e-6 && mle_gap <= 1e-6,
          "50 LSE datasets (n <= 6) max weight gap " + num(lse_gap) + ", 50 MLE datasets (n <= 3) max loglik gap " +
              num(mle_gap)};
}

// 5. Uniqueness and determinism.
Outcome uniqueness() {
  double gap = 0.0;
  std::mt19937_64 rng(5);
  for (const auto& k : {make_exponential(), make_triangular()}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto z = sample(make_sqrt5(), k, 100, seed, 55).observations();
      ReciprocalOptions opt;
      opt.horizon = z.back() + 1.0;
      const auto recip = solve_reciprocal(k, opt);
      const auto base = lse::fit_lse(Sample(z), recip);
      auto compare = [&](const lse::LseFit& other) {
        for (std::size_t i = 0; i < z.size(); ++i) {
          double a = 0.0, b = 0.0;
          for (std::size_t j = 0; j < base.support.size(); ++j) {
            if (base.support[j] == z[i]) a = base.weights[j];
          }
          for (std::size_t j = 0; j < other.support.size(); ++j) {
            if (other.support[j] == z[i]) b = other.weights[j];
          }
          gap = std::max(gap, std::abs(a - b));
        }
      };
      std::shuffle(z.begin(), z.end(), rng);
      compare(lse::fit_lse(Sample(z), recip));
      for (std::size_t i : {0u, 33u, 71u}) {
        lse::Options o;
        o.start = z[i];
        compare(lse::fit_lse(Sample(z), recip, o));
      }
    }
  }

  TempDir dir;
  auto pipeline = [&] {
    const auto s = (dir / "run" / "s.txt").string();
    const auto out = (dir / "run").string();
    int status = cli_run({"gen", "--kernel", "exponential", "--n", "100", "--seed", "9", "-o", s});
    status |= cli_run({"fit", "--sample", s, "--out-dir", out});
    status |= cli_run({"verify", out + "/fit_mle.fit", out + "/fit_lse.fit"});
    status |= cli_run({"figures", "--out-dir", out + "/figures"});
    auto files = snapshot(dir / "run");
    fs::remove_all(dir / "run");
    return std::make_pair(status, files);
  };
  const auto first = pipeline();
  const auto second = pipeline();
  const bool stable = first.first == 0 && second.first == 0 && first.second == second.second;
  return {gap <= 1e-8 && stable, "max weight gap under permutation/start " + num(gap) + ", pipeline " +
                                     std::to_string(first.second.size()) + " files byte-stable " +
                                     (stable ? "yes" : "no")};
}

double sup_error(const std::function<double(double)>& F, const ConcaveCDF& truth, double hi,
                 const std::vector<double>& kinks) {
  std::vector<double> grid = kinks;
  for (int i = 0; i <= 4000; ++i) grid.push_back(hi * i / 4000.0);
  grid.push_back(5.0);
  double worst = 0.0;
  for (double x : grid) worst = std::max(worst, std::abs(F(x) - eval_F(truth, x)));
  return worst;
}

// 6. Consistency at desk scale.
Outcome consistency() {
  const auto truth = make_sqrt5();
  const auto k = make_exponential();
  const auto recip = solve_reciprocal(k);
  std::vector<double> med_mle, med_lse;
  for (std::size_t n : {10u, 100u, 1000u}) {
    std::vector<double> em, el;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto s = sample(truth, k, n, seed, 600 + n);
      const double hi = std::max(s.max(), 5.0) + 1.0;
      const auto m = mle::fit_mle(s, k);
      const auto l = lse::fit_lse(s, recip);
      em.push_back(sup_error([&](double x) { return eval_F(m.estimate, x); }, truth, hi, m.support));
      el.push_back(sup_error([&](double x) { return l.F(x); }, truth, hi, l.support));
    }
    med_mle.push_back(median(em));
    med_lse.push_back(median(el));
  }
  const bool ok = med_mle[0] > med_mle[1] && med_mle[1] > med_mle[2] && med_lse[0] > med_lse[1] &&
                  med_lse[1] > med_lse[2];
  return {ok, "median sup error MLE " + num(med_mle[0]) + " > " + num(med_mle[1]) + " > " + num(med_mle[2]) +
                  ", LSE " + num(med_lse[0]) + " > " + num(med_lse[1]) + " > " + num(med_lse[2])};
}

// 7. Rate verification.
Outcome rates() {
  asymptotics::RateStudyConfig cfg{make_sqrt5(), make_exponential()};
  const auto r = asymptotics::rate_study(cfg);
  const bool ok = r.value_slope >= -0.55 && r.value_slope <= -0.25 && r.derivative_slope >= -0.35 &&
                  r.derivative_slope <= -0.05;
  std::string medians;
  for (const auto& row : r.rows) {
    medians += " n=" + std::to_string(row.n) + ":" + num(row.median_value_error) + "/" +
               num(row.median_derivative_error);
  }
  return {ok, "value slope " + num(r.value_slope) + " in [-0.55, -0.25], derivative slope " +
                  num(r.derivative_slope) + " in [-0.35, -0.05];" + medians};
}

// 8. Hellinger modulus.
Outcome hellinger() {
  const std::vector<double> eps{0.05, 0.02, 0.01};
  const auto study = asymptotics::hellinger_modulus(make_sqrt5(), make_exponential(), 1.0, eps);
  const double rel = std::abs(study.extrapolated / study.constant - 1.0);
  const double c_eps = asymptotics::perturb(make_sqrt5(), 1.0, 1e-3).c_eps;
  return {rel <= 0.1 && std::abs(c_eps - 3.0) <= 0.1,
          "extrapolated H^2/eps^5 " + num(study.extrapolated, 6) + " vs constant " + num(study.constant, 6) +
              " (rel " + num(rel, 3) + "), c_eps(1e-3) = " + num(c_eps, 6)};
}

// 9. Figures.
Outcome figures() {
  TempDir dir;
  const std::string out = dir.path().string();
  const int status = cli_run({"figures", "--out-dir", out});
  std::size_t fig1_plots = 0, fig1_curves = 0, fig2_plots = 0, fig2_curves = 0;
  for (const char* n : {"_n10", "_n100"}) {
    for (const char* part : {"_true.txt", "_mle.txt", "_lse.txt"}) {
      fig1_curves += fs::exists(dir / (std::string("fig1") + n + part));
      fig2_curves += fs::exists(dir / (std::string("fig2") + n + part));
    }
    fig1_plots += fs::exists(dir / (std::string("fig1") + n + ".svg"));
    fig2_plots += fs::exists(dir / (std::string("fig2") + n + ".svg"));
  }
  const bool fig3 = fs::exists(dir / "fig3.svg") && fs::exists(dir / "fig3_mle_slack.txt") &&
                    fs::exists(dir / "fig3_lse_char.txt");
  double max_slack = -1.0, min_char = 1.0;
  std::size_t points = 0;
  if (fig3) {
    for (double v : io::read_curve(dir / "fig3_mle_slack.txt").second) max_slack = std::max(max_slack, v);
    const auto chr = io::read_curve(dir / "fig3_lse_char.txt").second;
    for (double v : chr) min_char = std::min(min_char, v);
    points = chr.size();
  }
  const bool ok = status == 0 && fig1_plots == 2 && fig1_curves == 6 && fig2_plots == 2 && fig2_curves == 6 &&
                  fig3 && max_slack <= 1.0 + 1e-6 && min_char >= -1e-8;
  return {ok, "figure 1: " + std::to_string(fig1_plots) + " plots, " + std::to_string(fig1_curves) +
                  " curves; figure 2: " + std::to_string(fig2_plots) + " plots, " + std::to_string(fig2_curves) +
                  " curves; figure 3 over " + std::to_string(points) + " points: max MLE slack " +
                  num(max_slack, 12) + ", min LSE H_n - Y_n " + num(min_char)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "reciprocal kernel", 5, reciprocal_kernels},
      {2, "MLE characterization", 30, mle_characterization},
      {3, "LSE characterization", 30, lse_characterization},
      {4, "oracle equivalence", 60, oracle_equivalence},
      {5, "uniqueness and determinism", 120, uniqueness},
      {6, "consistency", 300, consistency},
      {7, "rate verification", 900, rates},
      {8, "Hellinger modulus", 60, hellinger},
      {9, "figures", 60, figures},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (pass ? "PASS" : "FAIL") << "  " << o.detail
              << "  [" << num(secs, 3) << " s of " << num(c.budget_s, 3) << " s]\n"
              << std::flush;
  }
  return failures == 0 ? 0 : 1;
}
