#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deconv/asymptotics.hpp"
#include "deconv/kernels.hpp"
#include "deconv/mixture.hpp"

namespace deconv::io {

namespace fs = std::filesystem;

/// Shortest text that parses back to the same double.
std::string format_double(double x);
double parse_double(const std::string& text, const std::string& context);

/// Writes to a sibling temp file, then renames over the target.
void write_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

/// kernel = exponential | uniform01 | triangular | custom. A custom kernel
/// reads a two-column (x, kappa) table and needs k0.
struct KernelSpec {
  std::string name = "exponential";
  std::string table;
  std::optional<double> k0;
};
NoiseKernel make_kernel(const KernelSpec& spec);
std::string describe(const KernelSpec& spec);
KernelSpec parse_kernel_description(const std::string& text);

/// "sqrt5" or "mixture:theta:weight,theta:weight,...".
ConcaveCDF make_truth(const std::string& spec);

/// Sidecar metadata of an observation file.
struct SampleHeader {
  std::string kernel;
  std::string truth;
  std::size_t n = 0;
  std::optional<std::uint64_t> seed;
};

fs::path sidecar_path(const fs::path& observations);
void write_sample(const fs::path& path, const Sample& sample, const SampleHeader& header);
/// The sidecar is optional when reading.
std::pair<Sample, std::optional<SampleHeader>> read_sample(const fs::path& path);

/// Flat "key = value" text; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& context);

struct TableRow {
  double theta = 0.0;
  double value = 0.0;
  bool flag = false;  // support point (MLE) or kink (LSE)
};

/// On-disk fit result shared by both estimators.
struct FitRecord {
  std::string estimator;  // "mle" or "lse"
  std::string kernel;
  std::string sample;
  std::size_t n = 0;
  bool converged = false;
  std::size_t iterations = 0;
  double objective = 0.0;  // loglik (mle) or Q_n (lse)
  double recip_h = 0.0;
  double recip_horizon = 0.0;
  std::vector<double> support;
  std::vector<double> weights;
  std::vector<TableRow> table;
  std::vector<std::string> log;
};

std::string format_fit(const FitRecord& fit);
FitRecord parse_fit(const std::string& text);
void write_fit(const fs::path& path, const FitRecord& fit);
FitRecord read_fit(const fs::path& path);

/// Two-column delimited curve with '#' header comments.
void write_curve(const fs::path& path, const std::vector<double>& x, const std::vector<double>& y,
                 const std::string& comment = {});
std::pair<std::vector<double>, std::vector<double>> read_curve(const fs::path& path);

/// Rows (n, median value error, median derivative error, reps, failures)
/// followed by a "slopes" summary line.
struct RateTable {
  std::vector<asymptotics::RateRow> rows;
  double value_slope = 0.0;
  double derivative_slope = 0.0;
  std::array<double, 2> value_slope_ci{};
  std::array<double, 2> derivative_slope_ci{};
};

RateTable rate_table(const asymptotics::RateStudyResult& result);
std::string format_rate_table(const RateTable& table);
RateTable parse_rate_table(const std::string& text);

}  // namespace deconv::io
