#pragma once

#include <span>
#include <string>
#include <vector>

#include "sublab/grid.hpp"

namespace sublab {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = true;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_x = false;
  bool log_y = false;
};

/// Self-contained SVG line chart. Non-finite points and, on log axes,
/// non-positive values are skipped.
std::string line_plot(const PlotSpec& spec, std::span<const Series> series);

/// SVG heatmap of a grid function (downsampled to at most 160 cells per
/// axis) with optional isolines drawn by marching squares.
std::string heatmap(const GridSpec& grid, std::span<const double> values,
                    const std::string& title,
                    std::span<const double> contour_levels = {});

}  // namespace sublab
