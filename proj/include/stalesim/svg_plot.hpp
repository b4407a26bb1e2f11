#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace stalesim {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = true;
  std::vector<PlotSeries> series;
};

/// Static SVG line chart. Non-finite (and, on a log axis, non-positive)
/// points are skipped.
std::string render_svg(const PlotSpec& plot);
void write_svg(const std::filesystem::path& path, const PlotSpec& plot);

}  // namespace stalesim
