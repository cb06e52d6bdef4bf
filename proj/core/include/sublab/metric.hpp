#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sublab/forms.hpp"
#include "sublab/grid.hpp"

namespace sublab {

/// Subunit distance d^eps(source, .) on a grid. epsilon == 0 marks an
/// extrapolated limit built from an epsilon ladder.
struct DistanceField {
  GridSpec grid;
  std::size_t source = 0;
  double epsilon = 0.0;
  std::vector<double> values;
  /// 1 where the node is reachable; 0 where the limit distance diverges.
  std::vector<std::uint8_t> reached;
  /// Per-node error bar of an extrapolated limit (empty for a single solve).
  std::vector<double> error_bar;

  double max_value() const;
  /// Smallest value over boundary nodes: balls of smaller radius stay inside
  /// the grid.
  double interior_radius() const;
};

/// Monotone upwind fast marching for
///   (q11 + eps^2) (d_x)^2 + (q22 + eps^2) (d_y)^2 = 1,  d(source) = 0.
/// Ties in the causal ordering break on the lower flat node index.
DistanceField solve_distance(const QuadraticFormField& form,
                             std::size_t source, double epsilon);

/// eps_k = eps0 * 2^-k for k = 0 .. rungs-1.
std::vector<double> epsilon_ladder(double eps0 = 0.1, int rungs = 6);

struct ExtrapolationOptions {
  /// Relative slack allowed when checking that values grow as eps shrinks.
  double monotone_tolerance = 1e-12;
  /// A node diverges when each of the last two increments multiplies its
  /// value by at least this fraction of the eps ratio.
  double divergence_fraction = 0.9;
};

/// Combines fields at strictly decreasing eps (same source and grid) into a
/// limit estimate 2 d_n - d_{n-1} with error bar d_n - d_{n-1}. Nodes whose
/// finest value exceeds diam / eps_min, or whose values scale like 1/eps over
/// the last two rungs, are marked unreachable with value +inf.
DistanceField extrapolate_distance(std::span<const DistanceField> fields,
                                   ExtrapolationOptions options = {});

/// Strict sublevel set {node : value < r} restricted to reached nodes.
NodeSet ball(const DistanceField& field, double r);

}  // namespace sublab
