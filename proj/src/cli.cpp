#include "deconv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deconv/asymptotics.hpp"
#include "deconv/error.hpp"
#include "deconv/io.hpp"
#include "deconv/kernels.hpp"
#include "deconv/lse.hpp"
#include "deconv/mixture.hpp"
#include "deconv/mle.hpp"
#include "deconv/svg.hpp"

namespace deconv::cli {

namespace fs = std::filesystem;

namespace {

constexpr auto kSerial = compute::Exec::serial;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double x, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

struct KernelFlags {
  std::string name = "exponential";
  std::string table;
  double k0 = 0.0;

  void attach(CLI::App* app) {
    app->add_option("--kernel", name, "exponential | uniform01 | triangular | custom");
    app->add_option("--kappa-table", table, "two-column (x, kappa) table for a custom kernel");
    app->add_option("--k0", k0, "k(0+) for a custom kernel");
  }
  io::KernelSpec spec() const {
    io::KernelSpec s;
    s.name = name;
    s.table = table;
    if (k0 > 0.0) s.k0 = k0;
    return s;
  }
};

struct FitFlags {
  std::string estimator = "both";
  double mle_tol = 1e-8;
  double lse_tol = 1e-10;
  std::size_t mle_max_iter = 500;
  std::size_t lse_max_iter = 10000;
  double recip_h = 1e-3;
  double recip_T = 0.0;
  int grid = 512;

  void attach(CLI::App* app, bool with_estimator) {
    if (with_estimator) {
      app->add_option("--estimator", estimator, "mle | lse | both")
          ->check(CLI::IsMember({"mle", "lse", "both"}));
    }
    app->add_option("--mle-tol", mle_tol, "MLE convergence tolerance")->check(CLI::PositiveNumber);
    app->add_option("--lse-tol", lse_tol, "LSE convergence tolerance")->check(CLI::PositiveNumber);
    app->add_option("--mle-max-iter", mle_max_iter, "MLE iteration cap")->check(CLI::PositiveNumber);
    app->add_option("--lse-max-iter", lse_max_iter, "LSE iteration cap")->check(CLI::PositiveNumber);
    app->add_option("--recip-h", recip_h, "reciprocal-kernel grid step")->check(CLI::PositiveNumber);
    app->add_option("--recip-T", recip_T, "reciprocal-kernel horizon (0: largest observation + 1)")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--grid", grid, "points of the evaluation grid for curves")->check(CLI::Range(2, 1000000));
  }
};

ReciprocalKernel reciprocal_for(const NoiseKernel& kernel, const Sample& sample, double h, double T) {
  ReciprocalOptions o;
  o.h = h;
  o.horizon = T > 0.0 ? T : sample.max() + 1.0;
  o.exec = kSerial;
  return solve_reciprocal(kernel, o);
}

/// `points` equispaced points on [lo, hi] merged with the kinks inside it.
std::vector<double> curve_grid(double lo, double hi, int points, const std::vector<double>& kinks) {
  std::vector<double> x(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) x[i] = lo + (hi - lo) * i / (points - 1);
  for (double k : kinks) {
    if (k >= lo && k <= hi) x.push_back(k);
  }
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  return x;
}

std::vector<double> evaluate_on(const std::vector<double>& x, const std::function<double(double)>& fn) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fn(x[i]);
  return y;
}

struct Fits {
  std::optional<mle::MleFit> mle;
  std::optional<lse::LseFit> lse;
  std::optional<lse::UnProcess> proc;
  std::optional<io::FitRecord> mle_record;
  std::optional<io::FitRecord> lse_record;
};

Fits run_fits(const Sample& sample, const NoiseKernel& kernel, const FitFlags& flags,
              const std::string& sample_ref, const std::string& kernel_desc) {
  Fits out;
  if (flags.estimator == "mle" || flags.estimator == "both") {
    mle::Options o;
    o.tol = flags.mle_tol;
    o.max_iter = flags.mle_max_iter;
    o.exec = kSerial;
    auto fit = mle::fit_mle(sample, kernel, o);
    io::FitRecord r;
    r.estimator = "mle";
    r.kernel = kernel_desc;
    r.sample = sample_ref;
    r.n = sample.size();
    r.converged = fit.converged;
    r.iterations = fit.iterations;
    r.objective = fit.loglik;
    r.support = fit.support;
    r.weights = fit.weights;
    for (const auto& e : fit.slack) r.table.push_back({e.theta, e.value, e.support});
    for (const auto& it : fit.log) {
      r.log.push_back("iter " + std::to_string(it.iteration) + " loglik " + io::format_double(it.loglik) +
                      " support " + std::to_string(it.support_size) + " step " + io::format_double(it.step) +
                      " inner " + std::to_string(it.inner_steps));
    }
    out.mle = std::move(fit);
    out.mle_record = std::move(r);
  }
  if (flags.estimator == "lse" || flags.estimator == "both") {
    auto recip = reciprocal_for(kernel, sample, flags.recip_h, flags.recip_T);
    const double h = recip.is_tabulated() ? recip.step() : 0.0;
    const double T = recip.horizon();
    out.proc.emplace(sample, std::move(recip));
    lse::Options o;
    o.tol = flags.lse_tol;
    o.max_iter = flags.lse_max_iter;
    o.exec = kSerial;
    auto fit = lse::fit_lse(*out.proc, o);
    io::FitRecord r;
    r.estimator = "lse";
    r.kernel = kernel_desc;
    r.sample = sample_ref;
    r.n = sample.size();
    r.converged = fit.converged;
    r.iterations = fit.iterations;
    r.objective = fit.objective;
    r.recip_h = h;
    r.recip_horizon = T;
    r.support = fit.support;
    r.weights = fit.weights;
    for (const auto& e : fit.char_table) r.table.push_back({e.theta, e.value, e.kink});
    for (const auto& it : fit.log) {
      r.log.push_back("iter " + std::to_string(it.iteration) + " objective " + io::format_double(it.objective) +
                      " support " + std::to_string(it.support_size) + " removed " + std::to_string(it.removed));
    }
    out.lse = std::move(fit);
    out.lse_record = std::move(r);
  }
  return out;
}

std::vector<double> table_column(const io::FitRecord& r, bool values) {
  std::vector<double> out;
  for (const auto& row : r.table) out.push_back(values ? row.value : row.theta);
  return out;
}

// ---------------------------------------------------------------- gen

int cmd_gen(const KernelFlags& kf, const std::string& truth_spec, std::size_t n, std::uint64_t seed,
            const std::string& output, std::ostream& out) {
  const auto spec = kf.spec();
  const auto kernel = io::make_kernel(spec);
  const auto truth = io::make_truth(truth_spec);
  const auto data = sample(truth, kernel, n, seed);
  io::write_sample(output, data, {io::describe(spec), truth_spec, n, seed});
  out << "wrote " << n << " observations to " << output << "\n";
  return kOk;
}

// ---------------------------------------------------------------- fit

int cmd_fit(const KernelFlags& kf, bool kernel_given, const FitFlags& flags, const std::string& sample_path,
            const std::string& out_dir, const std::string& prefix, std::ostream& out, std::ostream& err) {
  auto [data, header] = io::read_sample(sample_path);
  io::KernelSpec spec = kf.spec();
  if (header && !header->kernel.empty()) {
    const auto recorded = io::parse_kernel_description(header->kernel);
    if (kernel_given && io::describe(spec) != header->kernel) {
      throw UsageError("kernel '" + io::describe(spec) + "' does not match the sample header kernel '" +
                       header->kernel + "'");
    }
    spec = recorded;
  }
  const auto kernel = io::make_kernel(spec);
  const std::string desc = io::describe(spec);
  auto fits = run_fits(data, kernel, flags, sample_path, desc);

  const fs::path dir(out_dir);
  const auto grid = curve_grid(0.0, data.max() + 1.0, flags.grid, data.observations());
  bool all_converged = true;
  if (fits.mle) {
    io::write_fit(dir / (prefix + "_mle.fit"), *fits.mle_record);
    const auto& est = fits.mle->estimate;
    io::write_curve(dir / (prefix + "_mle_F.txt"), grid, evaluate_on(grid, [&](double x) { return est.F(x); }),
                    "x\tF_mle(x)");
    io::write_curve(dir / (prefix + "_mle_slack.txt"), table_column(*fits.mle_record, false),
                    table_column(*fits.mle_record, true), "theta\tslack(theta)");
    out << "mle: loglik " << fmt(fits.mle->loglik) << ", " << fits.mle->support.size() << " support points, "
        << fits.mle->iterations << " iterations, " << (fits.mle->converged ? "converged" : "NOT converged")
        << "\n";
    all_converged = all_converged && fits.mle->converged;
  }
  if (fits.lse) {
    io::write_fit(dir / (prefix + "_lse.fit"), *fits.lse_record);
    const auto& fit = *fits.lse;
    io::write_curve(dir / (prefix + "_lse_s.txt"), grid, evaluate_on(grid, [&](double x) { return fit.s(x); }),
                    "x\ts_lse(x)");
    io::write_curve(dir / (prefix + "_lse_F.txt"), grid, evaluate_on(grid, [&](double x) { return fit.F(x); }),
                    "x\tF_lse(x)");
    io::write_curve(dir / (prefix + "_lse_char.txt"), table_column(*fits.lse_record, false),
                    table_column(*fits.lse_record, true), "theta\tH_n(theta) - Y_n(theta)");
    out << "lse: Q_n " << fmt(fit.objective) << ", " << fit.support.size() << " support points, "
        << fit.iterations << " iterations, " << (fit.converged ? "converged" : "NOT converged") << "\n";
    all_converged = all_converged && fit.converged;
  }
  if (!all_converged) {
    err << "error: estimator did not converge; diagnostics written to " << dir.string() << "\n";
    return kNotConverged;
  }
  return kOk;
}

// ---------------------------------------------------------------- verify

struct VerifyFlags {
  double mle_tol = 1e-6;
  double lse_tol = 1e-8;
  std::string sample;
};

fs::path resolve_sample(const io::FitRecord& r, const fs::path& fit_path, const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  fs::path p(r.sample);
  if (p.is_relative() && !fs::exists(p) && fit_path.has_parent_path()) {
    const fs::path alt = fit_path.parent_path() / p;
    if (fs::exists(alt)) return alt;
  }
  return p;
}

bool verify_one(const fs::path& path, const VerifyFlags& flags, std::ostream& out) {
  const auto record = io::read_fit(path);
  auto [data, header] = io::read_sample(resolve_sample(record, path, flags.sample));
  const auto kernel = io::make_kernel(io::parse_kernel_description(record.kernel));
  std::vector<std::string> problems;
  double sum = 0.0;
  for (std::size_t j = 0; j < record.weights.size(); ++j) {
    sum += record.weights[j];
    if (record.weights[j] < 0.0) {
      problems.push_back("negative weight " + fmt(record.weights[j]) + " at theta = " + fmt(record.support[j]));
    }
  }
  if (std::abs(sum - 1.0) > 1e-9) problems.push_back("weights sum to " + fmt(sum, 17));

  std::ostringstream line;
  line << path.string() << " [" << record.estimator << "] ";
  if (record.estimator == "mle") {
    std::vector<double> w = record.weights;
    for (double& x : w) x = std::max(x, 0.0) / sum;
    const auto cdf = ConcaveCDF::mixture(record.support, w);
    const auto slack = mle::mle_char_slack(cdf, data, kernel);
    const mle::SlackEntry* worst = nullptr;
    const mle::SlackEntry* worst_support = nullptr;
    for (const auto& e : slack) {
      if (!worst || e.value > worst->value) worst = &e;
      if (e.support && (!worst_support || std::abs(e.value - 1.0) > std::abs(worst_support->value - 1.0))) {
        worst_support = &e;
      }
    }
    if (worst->value > 1.0 + flags.mle_tol) {
      problems.push_back("slack " + fmt(worst->value, 12) + " > 1 at theta = " + fmt(worst->theta));
    }
    if (worst_support && std::abs(worst_support->value - 1.0) > flags.mle_tol) {
      problems.push_back("support point theta = " + fmt(worst_support->theta) + " has slack " +
                         fmt(worst_support->value, 12) + " != 1");
    }
    if (!worst_support) problems.push_back("no support point lies on an observation");
    line << (problems.empty() ? "PASS" : "FAIL") << "  max slack " << fmt(worst->value, 12) << " at theta = "
         << fmt(worst->theta) << "; max |slack - 1| on support "
         << fmt(worst_support ? std::abs(worst_support->value - 1.0) : 0.0, 3) << " (tol " << fmt(flags.mle_tol, 3)
         << ")";
    // Off-grid slack is reported, not judged.
    std::vector<double> values, counts, refine;
    data.distinct(values, counts);
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      for (int k = 1; k < 4; ++k) refine.push_back(values[i] + 0.25 * k * (values[i + 1] - values[i]));
    }
    for (int k = 1; k <= 4; ++k) refine.push_back(values.back() + 0.25 * k);
    double off_grid = -std::numeric_limits<double>::infinity();
    for (const auto& e : mle::mle_char_slack(cdf, data, kernel, refine)) {
      if (std::binary_search(refine.begin(), refine.end(), e.theta)) off_grid = std::max(off_grid, e.value);
    }
    line << "; off-grid max slack " << fmt(off_grid, 12) << " (reported only)";
  } else {
    ReciprocalOptions o;
    if (std::isfinite(record.recip_horizon)) {
      o.h = record.recip_h;
      o.horizon = record.recip_horizon;
    }
    o.exec = kSerial;
    lse::UnProcess proc(data, solve_reciprocal(kernel, o));
    const auto table = lse::lse_char(record.support, record.weights, proc);
    const lse::CharEntry* worst = nullptr;
    const lse::CharEntry* worst_kink = nullptr;
    for (const auto& e : table) {
      if (!worst || e.value < worst->value) worst = &e;
      if (e.kink && (!worst_kink || std::abs(e.value) > std::abs(worst_kink->value))) worst_kink = &e;
    }
    if (worst->value < -flags.lse_tol) {
      problems.push_back("H_n - Y_n = " + fmt(worst->value, 6) + " < 0 at theta = " + fmt(worst->theta));
    }
    if (worst_kink && std::abs(worst_kink->value) > flags.lse_tol) {
      problems.push_back("kink theta = " + fmt(worst_kink->theta) + " has H_n - Y_n = " +
                         fmt(worst_kink->value, 6) + " != 0");
    }
    if (!worst_kink) problems.push_back("no kink lies on an observation");
    line << (problems.empty() ? "PASS" : "FAIL") << "  min H_n - Y_n " << fmt(worst->value, 6) << " at theta = "
         << fmt(worst->theta) << "; max |H_n - Y_n| at kinks "
         << fmt(worst_kink ? std::abs(worst_kink->value) : 0.0, 3) << " (tol " << fmt(flags.lse_tol, 3) << ")";
  }
  out << line.str() << "\n";
  for (const auto& p : problems) out << "  violation: " << p << "\n";
  return problems.empty();
}

int cmd_verify(const std::vector<std::string>& files, const VerifyFlags& flags, std::ostream& out) {
  bool all = true;
  for (const auto& f : files) all = verify_one(f, flags, out) && all;
  out << (all ? "PASS" : "FAIL") << ": " << files.size() << " fit file(s) checked\n";
  return all ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------- figures

struct FigureFlags {
  std::string out_dir = "figures";
  std::uint64_t seed = 20260101;
  std::string which = "all";
  std::string truth = "sqrt5";
};

svg::Series styled(std::vector<double> x, std::vector<double> y, const std::string& role) {
  svg::Series s;
  s.x = std::move(x);
  s.y = std::move(y);
  s.label = role;
  if (role == "True") {
    s.color = "red";
    s.dash = svg::kDotted;
    s.width = 2.0;
  } else if (role == "MLE") {
    s.color = "blue";
  } else {
    s.color = "black";
    s.dash = svg::kDashDot;
  }
  return s;
}

struct Panel {
  Sample data;
  Fits fits;
};

Panel figure_panel(const std::string& fig, const NoiseKernel& kernel, const ConcaveCDF& truth,
                   const std::string& truth_spec, std::size_t n, std::uint64_t seed, std::uint64_t stream,
                   const FitFlags& flags, const fs::path& dir, std::ostream& out) {
  const std::string stem = fig + "_n" + std::to_string(n);
  auto data = sample(truth, kernel, n, seed, stream);
  const std::string sample_name = stem + "_sample.txt";
  io::write_sample(dir / sample_name, data, {kernel.name(), truth_spec, n, seed});
  auto fits = run_fits(data, kernel, flags, sample_name, kernel.name());
  io::write_fit(dir / (stem + "_mle.fit"), *fits.mle_record);
  io::write_fit(dir / (stem + "_lse.fit"), *fits.lse_record);

  std::vector<double> kinks = fits.mle->support;
  kinks.insert(kinks.end(), fits.lse->support.begin(), fits.lse->support.end());
  kinks.push_back(truth.right_endpoint());
  const auto x = curve_grid(0.0, data.max() + 1.0, flags.grid, kinks);
  const auto y_true = evaluate_on(x, [&](double v) { return truth.F(v); });
  const auto y_mle = evaluate_on(x, [&](double v) { return fits.mle->estimate.F(v); });
  const auto y_lse = evaluate_on(x, [&](double v) { return fits.lse->F(v); });
  io::write_curve(dir / (stem + "_true.txt"), x, y_true, "x\tF(x)");
  io::write_curve(dir / (stem + "_mle.txt"), x, y_mle, "x\tF_mle(x)");
  io::write_curve(dir / (stem + "_lse.txt"), x, y_lse, "x\tF_lse(x)");

  svg::Plot plot;
  plot.title = "Deconvolution, " + kernel.name() + " noise, n = " + std::to_string(n);
  plot.xlabel = "x";
  plot.ylabel = "F(x)";
  plot.y_range = std::make_pair(0.0, 1.05);
  plot.series = {styled(x, y_true, "True"), styled(x, y_mle, "MLE"), styled(x, y_lse, "LSE")};
  svg::write(dir / (stem + ".svg"), plot);
  out << stem << ": MLE " << fits.mle->support.size() << " support points, LSE " << fits.lse->support.size()
      << " support points\n";
  return {std::move(data), std::move(fits)};
}

int cmd_figures(const FigureFlags& ff, const FitFlags& flags, std::ostream& out, std::ostream& err) {
  if (ff.which != "all" && ff.which != "1" && ff.which != "2" && ff.which != "3") {
    throw UsageError("--figure must be 1, 2, 3 or all");
  }
  const fs::path dir(ff.out_dir);
  fs::create_directories(dir);
  const auto truth = io::make_truth(ff.truth);
  const auto expo = make_exponential();
  const auto tri = make_triangular();
  bool converged = true;
  auto track = [&](const Panel& p) { converged = converged && p.fits.mle->converged && p.fits.lse->converged; };

  if (ff.which == "all" || ff.which == "1" || ff.which == "3") {
    auto small = figure_panel("fig1", expo, truth, ff.truth, 10, ff.seed, 110, flags, dir, out);
    track(small);
    if (ff.which != "3") track(figure_panel("fig1", expo, truth, ff.truth, 100, ff.seed, 1100, flags, dir, out));
    if (ff.which == "all" || ff.which == "3") {
      // Characterization curves of the n = 10 exponential panel.
      std::vector<double> theta;
      const double hi = small.data.max() + 1.0;
      for (double t : curve_grid(0.0, hi, flags.grid, small.data.observations())) {
        if (t > 0.0) theta.push_back(t);
      }
      const auto slack = mle::mle_char_slack(small.fits.mle->estimate, small.data, expo, theta);
      const auto chr = lse::lse_char(*small.fits.lse, *small.fits.proc, theta);
      std::vector<double> sx, sy, cx, cy;
      for (const auto& e : slack) {
        sx.push_back(e.theta);
        sy.push_back(e.value);
      }
      for (const auto& e : chr) {
        cx.push_back(e.theta);
        cy.push_back(e.value);
      }
      io::write_curve(dir / "fig3_mle_slack.txt", sx, sy, "theta\tint g_theta / g_F dG_n");
      io::write_curve(dir / "fig3_lse_char.txt", cx, cy, "theta\tH_n(theta) - Y_n(theta)");
      svg::Plot plot;
      plot.title = "Characterizations, exponential noise, n = 10";
      plot.xlabel = "theta";
      plot.reference_lines = {0.0, 1.0};
      plot.series = {styled(sx, sy, "MLE"), styled(cx, cy, "LSE")};
      svg::write(dir / "fig3.svg", plot);
      out << "fig3: max MLE slack " << fmt(*std::max_element(sy.begin(), sy.end()), 12) << ", min LSE H_n - Y_n "
          << fmt(*std::min_element(cy.begin(), cy.end()), 6) << "\n";
    }
  }
  if (ff.which == "all" || ff.which == "2") {
    track(figure_panel("fig2", tri, truth, ff.truth, 10, ff.seed, 210, flags, dir, out));
    track(figure_panel("fig2", tri, truth, ff.truth, 100, ff.seed, 2100, flags, dir, out));
  }
  if (!converged) {
    err << "error: an estimator did not converge; see the fit files in " << dir.string() << "\n";
    return kNotConverged;
  }
  return kOk;
}

// ---------------------------------------------------------------- rates

std::vector<std::size_t> parse_grid(const std::string& text) {
  std::vector<std::size_t> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw UsageError("empty entry in n grid '" + text + "'");
    item = item.substr(b, e - b + 1);
    if (item.find_first_not_of("0123456789") != std::string::npos) {
      throw UsageError("n grid entries must be positive integers, got '" + item + "'");
    }
    const auto v = std::stoull(item);
    if (v == 0) throw UsageError("n grid entries must be positive");
    if (!out.empty() && v <= out.back()) throw UsageError("n grid must be strictly increasing");
    out.push_back(v);
  }
  if (out.size() < 2) throw UsageError("n grid needs at least two sample sizes");
  return out;
}

struct RateFlags {
  std::string truth = "sqrt5";
  double x0 = 1.0;
  std::string grid = "200,800,3200";
  std::size_t reps = 100;
  std::uint64_t seed = 20260101;
  double tol = 1e-10;
  double recip_h = 1e-3;
  int workers = 0;
  std::size_t bootstrap = 200;
  std::string out_dir = "rates";
};

int cmd_rates(const KernelFlags& kf, const RateFlags& rf, std::ostream& out) {
  asymptotics::RateStudyConfig cfg{io::make_truth(rf.truth), io::make_kernel(kf.spec())};
  cfg.x0 = rf.x0;
  cfg.n_grid = parse_grid(rf.grid);
  cfg.replications = rf.reps;
  cfg.base_seed = rf.seed;
  cfg.tol = rf.tol;
  cfg.recip.h = rf.recip_h;
  cfg.workers = rf.workers;
  cfg.bootstrap = rf.bootstrap;
  const auto result = asymptotics::rate_study(cfg);
  const auto table = io::rate_table(result);
  const fs::path dir(rf.out_dir);
  io::write_atomic(dir / "rates.txt", io::format_rate_table(table));

  std::vector<double> ns, ev, ed, fv, fd;
  for (const auto& r : result.rows) {
    ns.push_back(static_cast<double>(r.n));
    ev.push_back(r.median_value_error);
    ed.push_back(r.median_derivative_error);
  }
  // Least-squares lines through the medians, for the plot.
  auto fitted = [&](const std::vector<double>& y, double slope) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      mx += std::log(ns[i]);
      my += std::log(y[i]);
    }
    mx /= static_cast<double>(ns.size());
    my /= static_cast<double>(ns.size());
    return evaluate_on(ns, [&](double n) { return std::exp(my + slope * (std::log(n) - mx)); });
  };
  svg::Plot plot;
  plot.title = "Median absolute error at x0 = " + fmt(rf.x0, 4) + " (log-log)";
  plot.xlabel = "n";
  plot.ylabel = "median error";
  plot.log_x = plot.log_y = true;
  svg::Series v{ns, ev, "value error", "blue", "", 1.5, true};
  svg::Series d{ns, ed, "derivative error", "black", "", 1.5, true};
  svg::Series vf{ns, fitted(ev, result.value_slope), "slope " + fmt(result.value_slope, 3), "blue", "6,4", 1.0};
  svg::Series df{ns, fitted(ed, result.derivative_slope), "slope " + fmt(result.derivative_slope, 3), "black",
                 "6,4", 1.0};
  plot.series = {v, vf, d, df};
  svg::write(dir / "rates.svg", plot);

  for (const auto& r : result.rows) {
    out << "n = " << r.n << ": median |s_n(x0) - s0(x0)| = " << fmt(r.median_value_error, 6)
        << ", median |s_n'(x0) - s0'(x0)| = " << fmt(r.median_derivative_error, 6) << ", failures " << r.failures
        << "/" << r.reps << "\n";
  }
  auto verdict = [](double s, const std::array<double, 2>& band) {
    return s >= band[0] && s <= band[1] ? "inside" : "outside";
  };
  out << "value slope " << fmt(result.value_slope, 4) << " (bootstrap 95% band [" << fmt(result.value_slope_ci[0], 4)
      << ", " << fmt(result.value_slope_ci[1], 4) << "]; target -0.4, " << verdict(result.value_slope, cfg.value_band)
      << " [" << cfg.value_band[0] << ", " << cfg.value_band[1] << "])\n";
  out << "derivative slope " << fmt(result.derivative_slope, 4) << " (bootstrap 95% band ["
      << fmt(result.derivative_slope_ci[0], 4) << ", " << fmt(result.derivative_slope_ci[1], 4)
      << "]; target -0.2, " << verdict(result.derivative_slope, cfg.derivative_band) << " ["
      << cfg.derivative_band[0] << ", " << cfg.derivative_band[1] << "])\n";
  return kOk;
}

// ---------------------------------------------------------------- bounds

struct BoundFlags {
  std::string truth = "sqrt5";
  double x0 = 1.0;
  std::optional<double> f0_prime;
  std::optional<double> g0;
  std::optional<double> k0;
};

int cmd_bounds(const KernelFlags& kf, const BoundFlags& bf, std::ostream& out) {
  asymptotics::LocalQuantities q;
  const bool explicit_mode = bf.f0_prime || bf.g0;
  if (explicit_mode) {
    if (!bf.f0_prime || !bf.g0 || !bf.k0) throw UsageError("--f0-prime, --g0 and --k0 must be given together");
    if (!(*bf.f0_prime < 0.0)) throw UsageError("--f0-prime must be negative");
    if (!(*bf.g0 > 0.0) || !(*bf.k0 > 0.0)) throw UsageError("--g0 and --k0 must be positive");
    q.x0 = bf.x0;
    q.f0_prime = *bf.f0_prime;
    q.s0_pp = -q.f0_prime;
    q.g0 = *bf.g0;
    q.k0 = *bf.k0;
  } else {
    q = asymptotics::local_quantities(io::make_truth(bf.truth), io::make_kernel(kf.spec()), bf.x0);
    out << "x0 = " << fmt(q.x0) << "\n";
    out << "f0 = " << fmt(q.f0) << "\n";
  }
  const auto c = asymptotics::lse_constants(q);
  out << "f0_prime = " << fmt(q.f0_prime) << "\n";
  out << "s0_pp = " << fmt(q.s0_pp) << "\n";
  out << "g0 = " << fmt(q.g0) << "\n";
  out << "k0 = " << fmt(q.k0) << "\n";
  out << "T1_bound = " << fmt(asymptotics::minimax_bound_T1(q)) << "\n";
  out << "T2_bound = " << fmt(asymptotics::minimax_bound_T2(q)) << "\n";
  out << "c1 = " << fmt(c.c1) << "\n";
  out << "c2 = " << fmt(c.c2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- config

/// Splices `--key=value` pairs from the config file right after the
/// subcommand token, so later command-line flags take precedence.
std::vector<std::string> expand_config(CLI::App& app, std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (!path) return args;
  const auto kv = io::parse_key_values(io::read_file(*path), *path);
  std::size_t pos = 0;
  CLI::App* sub = nullptr;
  for (; pos < args.size(); ++pos) {
    for (auto* s : app.get_subcommands([](CLI::App*) { return true; })) {
      if (s->get_name() == args[pos]) sub = s;
    }
    if (sub) break;
  }
  if (!sub) return args;
  std::vector<std::string> injected;
  for (const auto& [key, value] : kv) {
    if (key == "config") throw UsageError("config files cannot nest");
    bool known = false;
    for (auto* s : app.get_subcommands([](CLI::App*) { return true; })) {
      known = known || s->get_option_no_throw("--" + key) != nullptr;
    }
    if (!known) throw UsageError(*path + ": unknown key '" + key + "'");
    if (sub->get_option_no_throw("--" + key)) injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos) + 1, injected.begin(), injected.end());
  return args;
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotConverged:
    case ErrorCode::DivergentSolve:
    case ErrorCode::QuadratureFailure:
      return kNotConverged;
    default:
      return kUsage;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deconvolution estimators for concave distribution functions", "deconv"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config;

  // gen
  auto* gen = app.add_subcommand("gen", "draw a synthetic sample Z = X + eps");
  KernelFlags gen_kernel;
  gen_kernel.attach(gen);
  std::string gen_truth = "sqrt5";
  std::size_t gen_n = 0;
  std::uint64_t gen_seed = 1;
  std::string gen_output = "sample.txt";
  gen->add_option("--truth", gen_truth, "sqrt5 | mixture:theta:weight,...");
  gen->add_option("--n", gen_n, "sample size")
      ->required()
      ->check(CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max()));
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--output,-o", gen_output, "observation file (a .meta sidecar is written next to it)");
  gen->add_option("--config", config, "flat key = value file");

  // fit
  auto* fit = app.add_subcommand("fit", "fit the MLE and/or LSE to a sample file");
  KernelFlags fit_kernel;
  fit_kernel.attach(fit);
  FitFlags fit_flags;
  fit_flags.attach(fit, true);
  std::string fit_sample;
  std::string fit_dir = ".";
  std::string fit_prefix = "fit";
  fit->add_option("--sample", fit_sample, "observation file")->required();
  fit->add_option("--out-dir", fit_dir, "output directory");
  fit->add_option("--prefix", fit_prefix, "output file prefix");
  fit->add_option("--config", config, "flat key = value file");

  // verify
  auto* verify = app.add_subcommand("verify", "check the characterization of fitted results");
  std::vector<std::string> verify_files;
  VerifyFlags verify_flags;
  verify->add_option("files", verify_files, "fit result files")->required()->expected(1, -1)->multi_option_policy(
      CLI::MultiOptionPolicy::TakeAll);
  verify->add_option("--verify-mle-tol", verify_flags.mle_tol, "MLE slack tolerance")->check(CLI::PositiveNumber);
  verify->add_option("--verify-lse-tol", verify_flags.lse_tol, "LSE characterization tolerance")
      ->check(CLI::PositiveNumber);
  verify->add_option("--sample", verify_flags.sample, "override the sample path recorded in the fit file");
  verify->add_option("--config", config, "flat key = value file");

  // figures
  auto* figures = app.add_subcommand("figures", "reproduce the three figure layouts");
  FigureFlags fig_flags;
  FitFlags fig_fit;
  fig_fit.attach(figures, false);
  figures->add_option("--out-dir", fig_flags.out_dir, "output directory");
  figures->add_option("--seed", fig_flags.seed, "base seed");
  figures->add_option("--figure", fig_flags.which, "1 | 2 | 3 | all");
  figures->add_option("--truth", fig_flags.truth, "sqrt5 | mixture:theta:weight,...");
  figures->add_option("--config", config, "flat key = value file");

  // rates
  auto* rates = app.add_subcommand("rates", "Monte Carlo rate study of the LSE at x0");
  KernelFlags rate_kernel;
  rate_kernel.attach(rates);
  RateFlags rate_flags;
  rates->add_option("--truth", rate_flags.truth, "analytic truth (sqrt5)");
  rates->add_option("--x0", rate_flags.x0, "evaluation point")->check(CLI::PositiveNumber);
  rates->add_option("--n-grid", rate_flags.grid, "comma-separated increasing sample sizes");
  rates->add_option("--reps", rate_flags.reps, "replications per sample size")->check(CLI::PositiveNumber);
  rates->add_option("--seed", rate_flags.seed, "base seed");
  rates->add_option("--lse-tol", rate_flags.tol, "LSE tolerance")->check(CLI::PositiveNumber);
  rates->add_option("--recip-h", rate_flags.recip_h, "reciprocal-kernel grid step")->check(CLI::PositiveNumber);
  rates->add_option("--workers", rate_flags.workers, "worker threads (0: OpenMP default)")
      ->check(CLI::NonNegativeNumber);
  rates->add_option("--bootstrap", rate_flags.bootstrap, "bootstrap resamples for the slope band");
  rates->add_option("--out-dir", rate_flags.out_dir, "output directory");
  rates->add_option("--config", config, "flat key = value file");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "minimax lower bounds and LSE limit constants");
  KernelFlags bound_kernel;
  bound_kernel.attach(bounds);
  BoundFlags bound_flags;
  bounds->add_option("--truth", bound_flags.truth, "analytic truth (sqrt5)");
  bounds->add_option("--x0", bound_flags.x0, "evaluation point")->check(CLI::PositiveNumber);
  bounds->add_option("--f0-prime", bound_flags.f0_prime, "explicit f0'(x0) (negative)");
  bounds->add_option("--g0", bound_flags.g0, "explicit g0(x0)");
  bounds->add_option("--config", config, "flat key = value file");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_kernel, gen_truth, gen_n, gen_seed, gen_output, out);
    if (fit->parsed()) {
      const bool kernel_given = fit->get_option("--kernel")->count() > 0 ||
                                fit->get_option("--kappa-table")->count() > 0;
      return cmd_fit(fit_kernel, kernel_given, fit_flags, fit_sample, fit_dir, fit_prefix, out, err);
    }
    if (verify->parsed()) return cmd_verify(verify_files, verify_flags, out);
    if (figures->parsed()) return cmd_figures(fig_flags, fig_fit, out, err);
    if (rates->parsed()) return cmd_rates(rate_kernel, rate_flags, out);
    if (bounds->parsed()) {
      if (bound_kernel.k0 > 0.0) bound_flags.k0 = bound_kernel.k0;
      if (bound_flags.k0 && !bound_flags.f0_prime && !bound_flags.g0 && bound_kernel.name != "custom") {
        throw UsageError("--k0 without --f0-prime and --g0 only applies to a custom kernel");
      }
      return cmd_bounds(bound_kernel, bound_flags, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return status_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace deconv::cli
