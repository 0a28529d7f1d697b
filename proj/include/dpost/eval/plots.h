#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace dpost::eval {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
};

// Self-contained SVG renderers; no external plotting dependency.
std::string line_chart_svg(const ChartSpec& spec, const std::vector<Series>& series);
std::string scatter_svg(const ChartSpec& spec, const std::vector<Series>& series);

// One group per category, one bar per series within each group.
struct BarGroup {
  std::string label;
  std::vector<double> values;
};
std::string bar_chart_svg(const ChartSpec& spec, const std::vector<std::string>& series_names,
                          const std::vector<BarGroup>& groups);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dpost::eval
