#include "sublab/grid.hpp"

#include <cmath>
#include <string>

#include "sublab/error.hpp"

namespace sublab {

double GridSpec::diameter() const { return std::hypot(x1 - x0, y1 - y0); }

std::size_t GridSpec::nearest_node(double px, double py) const {
  const double slack_x = 0.5 * hx();
  const double slack_y = 0.5 * hy();
  if (px < x0 - slack_x || px > x1 + slack_x || py < y0 - slack_y ||
      py > y1 + slack_y) {
    throw ConfigError("point (" + std::to_string(px) + ", " +
                      std::to_string(py) + ") lies outside the grid");
  }
  auto clamp_round = [](double t, std::size_t n) {
    const double r = std::round(t);
    if (r < 0.0) return std::size_t{0};
    if (r > static_cast<double>(n - 1)) return n - 1;
    return static_cast<std::size_t>(r);
  };
  return index(clamp_round((px - x0) / hx(), nx),
               clamp_round((py - y0) / hy(), ny));
}

void GridSpec::validate() const {
  if (nx < 3 || ny < 3) {
    throw ConfigError("grid needs at least 3 nodes per axis");
  }
  if (!(x1 > x0) || !(y1 > y0) || !std::isfinite(x0) || !std::isfinite(x1) ||
      !std::isfinite(y0) || !std::isfinite(y1)) {
    throw ConfigError("grid extents must be finite with x1 > x0 and y1 > y0");
  }
}

GridSpec GridSpec::centered(double cx, double cy, double half_width,
                            double half_height, std::size_t n) {
  GridSpec g{cx - half_width, cx + half_width, cy - half_height,
             cy + half_height, n, n};
  g.validate();
  return g;
}

std::vector<std::uint8_t> to_mask(const GridSpec& grid, const NodeSet& nodes) {
  std::vector<std::uint8_t> mask(grid.size(), 0);
  for (auto n : nodes) mask[n] = 1;
  return mask;
}

double integrate(const GridSpec& grid, std::span<const double> values,
                 const NodeSet& nodes) {
  double sum = 0.0;
  for (auto n : nodes) sum += values[n];
  return sum * grid.cell_area();
}

void grid_differences(const GridSpec& grid, std::span<const double> w,
                      std::vector<double>& dx, std::vector<double>& dy) {
  if (w.size() != grid.size()) {
    throw ConfigError("grid function size does not match the grid");
  }
  const double hx = grid.hx();
  const double hy = grid.hy();
  const std::size_t nx = grid.nx;
  dx.assign(grid.size(), 0.0);
  dy.assign(grid.size(), 0.0);
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t n = grid.index(i, j);
      if (i == 0) {
        dx[n] = (w[n + 1] - w[n]) / hx;
      } else if (i + 1 == nx) {
        dx[n] = (w[n] - w[n - 1]) / hx;
      } else {
        dx[n] = (w[n + 1] - w[n - 1]) / (2.0 * hx);
      }
      if (j == 0) {
        dy[n] = (w[n + nx] - w[n]) / hy;
      } else if (j + 1 == grid.ny) {
        dy[n] = (w[n] - w[n - nx]) / hy;
      } else {
        dy[n] = (w[n + nx] - w[n - nx]) / (2.0 * hy);
      }
    }
  }
}

}  // namespace sublab
