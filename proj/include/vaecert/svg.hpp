#pragma once

#include <string>
#include <vector>

namespace vaecert::io {

/// Deterministic SVG figures built from primitives: no timestamps, fixed
/// formatting, fixed palette, so reruns are byte-identical.

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct PlotOptions {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  int width = 640;
  int height = 440;
};

/// Polyline chart with markers, one color per series, legend on the right.
std::string svg_line_chart(const std::vector<Series>& series, const PlotOptions& opts);

/// Scatter plot; optionally draws the y=x reference line and the least
/// squares fit.
std::string svg_scatter(const std::vector<std::pair<double, double>>& points,
                        const PlotOptions& opts, bool y_equals_x, bool best_fit);

/// Bars with symmetric error whiskers.
std::string svg_bar_chart(const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::vector<double>& errors,
                          const PlotOptions& opts);

/// Quartile boxes with median line and min/max whiskers per group.
std::string svg_box_summary(const std::vector<std::string>& labels,
                            const std::vector<std::vector<double>>& groups,
                            const PlotOptions& opts);

}  // namespace vaecert::io
