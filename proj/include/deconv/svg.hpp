#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace deconv::svg {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
  std::string color = "black";
  std::string dash;  // SVG stroke-dasharray, empty for solid
  double width = 1.5;
  bool markers = false;
};

struct Plot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_x = false;
  bool log_y = false;
  std::optional<std::pair<double, double>> y_range;
  std::vector<double> reference_lines;  // horizontal, drawn gray
  std::vector<Series> series;
};

inline const char* kDotted = "2,3";
inline const char* kDashDot = "8,3,2,3";

std::string render(const Plot& plot);
void write(const std::filesystem::path& path, const Plot& plot);

}  // namespace deconv::svg
