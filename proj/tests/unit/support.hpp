#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sublab/forms.hpp"
#include "sublab/geometry.hpp"
#include "sublab/metric.hpp"

namespace sublab::testing {

inline GridSpec box(double hw, double hh, std::size_t n) {
  return GridSpec{-hw, hw, -hh, hh, n, n};
}

inline QuadraticFormField euclidean(const GridSpec& grid) {
  return assemble_form(DegeneracyProfile::constant(1.0), grid);
}

inline QuadraticFormField grushin(const GridSpec& grid) {
  return assemble_form(DegeneracyProfile::power(1.0), grid);
}

/// Extrapolated distance from the node nearest (x, y).
inline DistanceField limit_distance(const QuadraticFormField& form, double x,
                                    double y, double eps0 = 0.05,
                                    int rungs = 4) {
  const auto source = form.grid.nearest_node(x, y);
  std::vector<DistanceField> fields;
  for (double eps : epsilon_ladder(eps0, rungs)) {
    fields.push_back(solve_distance(form, source, eps));
  }
  return extrapolate_distance(fields);
}

inline std::vector<double> node_function(const GridSpec& grid,
                                         double (*fn)(double, double)) {
  std::vector<double> out(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    out[n] = fn(grid.node_x(n), grid.node_y(n));
  }
  return out;
}

}  // namespace sublab::testing
