#include "deconv/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "deconv/error.hpp"

namespace deconv::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) fail(ErrorCode::Io, "cannot format number");
  return std::string(buf, end);
}

double parse_double(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    fail(ErrorCode::Parse, context + ": not a number: '" + t + "'");
  }
  return value;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) fail(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::Io, "rename to " + path.string() + " failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

NoiseKernel make_kernel(const KernelSpec& spec) {
  if (spec.name == "exponential") return make_exponential();
  if (spec.name == "uniform01") return make_uniform01();
  if (spec.name == "triangular") return make_triangular();
  if (spec.name == "custom") {
    if (spec.table.empty() || !spec.k0) {
      fail(ErrorCode::InvalidArgument, "custom kernel needs a kappa table and k0");
    }
    std::vector<double> x, kappa;
    std::istringstream in(read_file(spec.table));
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      for (char& c : line) {
        if (c == ',' || c == ';') c = ' ';
      }
      const auto f = fields(line);
      if (f.empty()) continue;
      if (f.size() != 2) fail(ErrorCode::Parse, "kappa table rows need two columns");
      x.push_back(parse_double(f[0], "kappa table"));
      kappa.push_back(parse_double(f[1], "kappa table"));
    }
    return make_custom(x, kappa, *spec.k0, "custom");
  }
  fail(ErrorCode::InvalidArgument, "unknown kernel '" + spec.name + "'");
}

std::string describe(const KernelSpec& spec) {
  if (spec.name != "custom") return spec.name;
  return "custom:" + format_double(spec.k0.value_or(0.0)) + ":" + spec.table;
}

KernelSpec parse_kernel_description(const std::string& text) {
  KernelSpec spec;
  if (text.rfind("custom:", 0) == 0) {
    const auto rest = text.substr(7);
    const auto colon = rest.find(':');
    if (colon == std::string::npos) fail(ErrorCode::Parse, "bad custom kernel description '" + text + "'");
    spec.name = "custom";
    spec.k0 = parse_double(rest.substr(0, colon), "kernel k0");
    spec.table = rest.substr(colon + 1);
  } else {
    spec.name = text;
  }
  return spec;
}

ConcaveCDF make_truth(const std::string& spec) {
  if (spec == "sqrt5") return make_sqrt5();
  if (spec.rfind("mixture:", 0) == 0) {
    std::vector<double> support, weights;
    for (const auto& item : split(spec.substr(8), ',')) {
      const auto parts = split(item, ':');
      if (parts.size() != 2) fail(ErrorCode::Parse, "mixture terms are theta:weight, got '" + item + "'");
      support.push_back(parse_double(parts[0], "mixture support"));
      weights.push_back(parse_double(parts[1], "mixture weight"));
    }
    return ConcaveCDF::mixture(std::move(support), std::move(weights));
  }
  fail(ErrorCode::InvalidArgument, "unknown truth '" + spec + "'");
}

fs::path sidecar_path(const fs::path& observations) {
  fs::path p = observations;
  p += ".meta";
  return p;
}

void write_sample(const fs::path& path, const Sample& sample, const SampleHeader& header) {
  std::string body;
  for (double z : sample.observations()) body += format_double(z) + "\n";
  std::string meta;
  meta += "kernel = " + header.kernel + "\n";
  meta += "truth = " + header.truth + "\n";
  meta += "n = " + std::to_string(header.n) + "\n";
  if (header.seed) meta += "seed = " + std::to_string(*header.seed) + "\n";
  write_atomic(path, body);
  write_atomic(sidecar_path(path), meta);
}

std::pair<Sample, std::optional<SampleHeader>> read_sample(const fs::path& path) {
  std::vector<double> values;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    values.push_back(parse_double(line, path.string() + ":" + std::to_string(lineno)));
  }
  std::optional<SampleHeader> header;
  std::optional<std::uint64_t> seed;
  if (fs::exists(sidecar_path(path))) {
    const auto kv = parse_key_values(read_file(sidecar_path(path)), sidecar_path(path).string());
    SampleHeader h;
    if (auto it = kv.find("kernel"); it != kv.end()) h.kernel = it->second;
    if (auto it = kv.find("truth"); it != kv.end()) h.truth = it->second;
    if (auto it = kv.find("n"); it != kv.end()) h.n = std::stoull(it->second);
    if (auto it = kv.find("seed"); it != kv.end()) h.seed = seed = std::stoull(it->second);
    if (h.n != 0 && h.n != values.size()) {
      fail(ErrorCode::Parse, "sidecar says n = " + std::to_string(h.n) + " but file has " +
                                 std::to_string(values.size()) + " observations");
    }
    header = h;
  }
  return {Sample(std::move(values), seed), header};
}

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& context) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::Parse, context + ":" + std::to_string(lineno) + ": expected key = value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::string format_fit(const FitRecord& fit) {
  std::ostringstream out;
  out << "# deconvolution fit result\n";
  out << "estimator = " << fit.estimator << "\n";
  out << "kernel = " << fit.kernel << "\n";
  out << "sample = " << fit.sample << "\n";
  out << "n = " << fit.n << "\n";
  out << "converged = " << (fit.converged ? "true" : "false") << "\n";
  out << "iterations = " << fit.iterations << "\n";
  out << "objective = " << format_double(fit.objective) << "\n";
  out << "recip_h = " << format_double(fit.recip_h) << "\n";
  out << "recip_horizon = " << format_double(fit.recip_horizon) << "\n";
  out << "[support]\n";
  for (std::size_t j = 0; j < fit.support.size(); ++j) {
    out << format_double(fit.support[j]) << " " << format_double(fit.weights[j]) << "\n";
  }
  out << "[table]\n";
  for (const auto& row : fit.table) {
    out << format_double(row.theta) << " " << format_double(row.value) << " " << (row.flag ? 1 : 0) << "\n";
  }
  out << "[log]\n";
  for (const auto& line : fit.log) out << line << "\n";
  return out.str();
}

FitRecord parse_fit(const std::string& text) {
  FitRecord fit;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  bool have_estimator = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "fit file line " + std::to_string(lineno);
    if (section == "log") {
      if (line.rfind("[", 0) != 0) {
        if (!trim(line).empty()) fit.log.push_back(line);
        continue;
      }
    }
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      if (section != "support" && section != "table" && section != "log") {
        fail(ErrorCode::Parse, where + ": unknown section '" + section + "'");
      }
      continue;
    }
    if (section.empty()) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) fail(ErrorCode::Parse, where + ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key == "estimator") {
        fit.estimator = value;
        have_estimator = true;
      } else if (key == "kernel") {
        fit.kernel = value;
      } else if (key == "sample") {
        fit.sample = value;
      } else if (key == "n") {
        fit.n = static_cast<std::size_t>(parse_double(value, where));
      } else if (key == "converged") {
        if (value != "true" && value != "false") fail(ErrorCode::Parse, where + ": converged must be true/false");
        fit.converged = value == "true";
      } else if (key == "iterations") {
        fit.iterations = static_cast<std::size_t>(parse_double(value, where));
      } else if (key == "objective") {
        fit.objective = parse_double(value, where);
      } else if (key == "recip_h") {
        fit.recip_h = parse_double(value, where);
      } else if (key == "recip_horizon") {
        fit.recip_horizon = parse_double(value, where);
      } else {
        fail(ErrorCode::Parse, where + ": unknown key '" + key + "'");
      }
      continue;
    }
    const auto f = fields(t);
    if (section == "support") {
      if (f.size() != 2) fail(ErrorCode::Parse, where + ": support rows are 'theta weight'");
      fit.support.push_back(parse_double(f[0], where));
      fit.weights.push_back(parse_double(f[1], where));
    } else if (section == "table") {
      if (f.size() != 3) fail(ErrorCode::Parse, where + ": table rows are 'theta value flag'");
      fit.table.push_back({parse_double(f[0], where), parse_double(f[1], where), f[2] == "1"});
    }
  }
  if (!have_estimator || (fit.estimator != "mle" && fit.estimator != "lse")) {
    fail(ErrorCode::Parse, "fit file needs estimator = mle | lse");
  }
  if (fit.support.empty()) fail(ErrorCode::Parse, "fit file has no support points");
  return fit;
}

void write_fit(const fs::path& path, const FitRecord& fit) { write_atomic(path, format_fit(fit)); }
FitRecord read_fit(const fs::path& path) { return parse_fit(read_file(path)); }

void write_curve(const fs::path& path, const std::vector<double>& x, const std::vector<double>& y,
                 const std::string& comment) {
  std::string body;
  if (!comment.empty()) body += "# " + comment + "\n";
  for (std::size_t i = 0; i < x.size(); ++i) body += format_double(x[i]) + "\t" + format_double(y[i]) + "\n";
  write_atomic(path, body);
}

std::pair<std::vector<double>, std::vector<double>> read_curve(const fs::path& path) {
  std::vector<double> x, y;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = fields(t);
    if (f.size() != 2) fail(ErrorCode::Parse, path.string() + ": curve rows need two columns");
    x.push_back(parse_double(f[0], path.string()));
    y.push_back(parse_double(f[1], path.string()));
  }
  return {x, y};
}

RateTable rate_table(const asymptotics::RateStudyResult& result) {
  RateTable t;
  t.rows = result.rows;
  t.value_slope = result.value_slope;
  t.derivative_slope = result.derivative_slope;
  t.value_slope_ci = result.value_slope_ci;
  t.derivative_slope_ci = result.derivative_slope_ci;
  return t;
}

std::string format_rate_table(const RateTable& table) {
  std::string out = "# n\tmedian_value_error\tmedian_derivative_error\treps\tfailures\n";
  for (const auto& r : table.rows) {
    out += std::to_string(r.n) + "\t" + format_double(r.median_value_error) + "\t" +
           format_double(r.median_derivative_error) + "\t" + std::to_string(r.reps) + "\t" +
           std::to_string(r.failures) + "\n";
  }
  out += "# slopes: value, derivative, value band (lo, hi), derivative band (lo, hi)\n";
  out += "slopes\t" + format_double(table.value_slope) + "\t" + format_double(table.derivative_slope) + "\t" +
         format_double(table.value_slope_ci[0]) + "\t" + format_double(table.value_slope_ci[1]) + "\t" +
         format_double(table.derivative_slope_ci[0]) + "\t" + format_double(table.derivative_slope_ci[1]) + "\n";
  return out;
}

RateTable parse_rate_table(const std::string& text) {
  RateTable table;
  bool have_slopes = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = fields(t);
    if (f[0] == "slopes") {
      if (f.size() != 7) fail(ErrorCode::Parse, "slopes line needs six numbers");
      table.value_slope = parse_double(f[1], "slopes");
      table.derivative_slope = parse_double(f[2], "slopes");
      table.value_slope_ci = {parse_double(f[3], "slopes"), parse_double(f[4], "slopes")};
      table.derivative_slope_ci = {parse_double(f[5], "slopes"), parse_double(f[6], "slopes")};
      have_slopes = true;
      continue;
    }
    if (f.size() != 5) fail(ErrorCode::Parse, "rate rows need five columns");
    asymptotics::RateRow row;
    row.n = static_cast<std::size_t>(parse_double(f[0], "rate n"));
    row.median_value_error = parse_double(f[1], "rate row");
    row.median_derivative_error = parse_double(f[2], "rate row");
    row.reps = static_cast<std::size_t>(parse_double(f[3], "rate reps"));
    row.failures = static_cast<std::size_t>(parse_double(f[4], "rate failures"));
    table.rows.push_back(row);
  }
  if (!have_slopes) fail(ErrorCode::Parse, "rate table has no slopes line");
  return table;
}

}  // namespace deconv::io
