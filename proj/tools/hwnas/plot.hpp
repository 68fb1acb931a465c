#pragma once

#include <string>
#include <vector>

namespace hwnas::cli {

struct Point {
  std::string series;
  double x = 0.0;
  double y = 0.0;
};

// Standalone SVG; one legend entry per distinct series, in first-seen order.
[[nodiscard]] std::string scatter_svg(const std::vector<Point>& pts, const std::string& title,
                                      const std::string& x_label, const std::string& y_label);

// rows x cols grid, row 0 at the top, linear grey-to-red colour scale.
[[nodiscard]] std::string heatmap_svg(const std::vector<std::vector<double>>& cells, const std::string& title,
                                      const std::string& x_label, const std::string& y_label);

[[nodiscard]] std::vector<std::string> legend_entries(const std::vector<Point>& pts);

}  // namespace hwnas::cli
