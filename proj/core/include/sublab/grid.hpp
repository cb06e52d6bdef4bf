#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sublab {

/// Rectangular lattice of nx * ny nodes on [x0,x1] x [y0,y1], boundary
/// nodes included. Node (i, j) sits at (x0 + i*hx, y0 + j*hy) and has flat
/// index j*nx + i.
struct GridSpec {
  double x0 = -1.0;
  double x1 = 1.0;
  double y0 = -1.0;
  double y1 = 1.0;
  std::size_t nx = 2;
  std::size_t ny = 2;

  double hx() const { return (x1 - x0) / static_cast<double>(nx - 1); }
  double hy() const { return (y1 - y0) / static_cast<double>(ny - 1); }
  double cell_area() const { return hx() * hy(); }
  std::size_t size() const { return nx * ny; }

  std::size_t index(std::size_t i, std::size_t j) const { return j * nx + i; }
  std::size_t col(std::size_t node) const { return node % nx; }
  std::size_t row(std::size_t node) const { return node / nx; }

  double x(std::size_t i) const { return x0 + static_cast<double>(i) * hx(); }
  double y(std::size_t j) const { return y0 + static_cast<double>(j) * hy(); }
  double node_x(std::size_t node) const { return x(col(node)); }
  double node_y(std::size_t node) const { return y(row(node)); }

  bool on_boundary(std::size_t node) const {
    const auto i = col(node);
    const auto j = row(node);
    return i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
  }

  /// Euclidean diameter of the domain.
  double diameter() const;

  /// Closest node to (x, y); throws ConfigError when the point lies outside.
  std::size_t nearest_node(double px, double py) const;

  /// Throws ConfigError on degenerate extents or fewer than 3 nodes per axis.
  void validate() const;

  /// Grid of n * n nodes centred on (cx, cy) with the given half extents.
  static GridSpec centered(double cx, double cy, double half_width,
                           double half_height, std::size_t n);

  bool operator==(const GridSpec&) const = default;
};

/// Sorted list of flat node indices.
using NodeSet = std::vector<std::size_t>;

/// Per-node membership flags for a NodeSet.
std::vector<std::uint8_t> to_mask(const GridSpec& grid, const NodeSet& nodes);

/// Sum of values over nodes, weighted by the cell area.
double integrate(const GridSpec& grid, std::span<const double> values,
                 const NodeSet& nodes);

/// First differences of w: centred in the interior, one-sided on the
/// boundary. dx and dy are resized to the grid.
void grid_differences(const GridSpec& grid, std::span<const double> w,
                      std::vector<double>& dx, std::vector<double>& dy);

/// Calls fn(neighbor) for each 4-neighbour of node inside the grid.
template <typename Fn>
void for_each_neighbor(const GridSpec& grid, std::size_t node, Fn&& fn) {
  const auto i = grid.col(node);
  const auto j = grid.row(node);
  if (i > 0) fn(node - 1);
  if (i + 1 < grid.nx) fn(node + 1);
  if (j > 0) fn(node - grid.nx);
  if (j + 1 < grid.ny) fn(node + grid.nx);
}

}  // namespace sublab
