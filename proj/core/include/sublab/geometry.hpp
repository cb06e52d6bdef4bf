#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sublab/forms.hpp"
#include "sublab/metric.hpp"

namespace sublab {

struct GeometryOptions {
  /// Balls with fewer nodes are rejected as unresolved.
  std::size_t min_nodes = 25;
  /// delta/r at or above this marks the scale as doubling. The default is the
  /// order of a space whose volumes grow like r^8: (5/4)^(1/8) - 1.
  double doubling_threshold = 0.02829;
};

/// Volume curve r -> |B(center, r)| of one distance field and the
/// non-doubling order extracted from it. Volumes are node counts times the
/// cell area. Entries that cannot be computed inside the grid are NaN.
struct BallAnalytics {
  GridSpec grid;
  std::size_t center = 0;
  std::vector<double> radii;
  std::vector<double> volumes;
  /// |B(2r)| / |B(r)|.
  std::vector<double> doubling_ratios;
  std::vector<double> deltas;
  std::vector<double> delta_over_r;
  /// |B(r + delta)| / |B(r)| at the extracted delta.
  std::vector<double> order_ratios;
  std::vector<std::uint8_t> doubling_flags;
  double C_doubling = 1.0;
  /// Largest radius whose ball stays off the grid boundary.
  double r_max = 0.0;
  GeometryOptions options;
  /// Reached distance values in increasing order.
  std::vector<double> sorted_values;

  std::size_t count_below(double r) const;
  double volume(double r) const;
};

/// Volumes at each radius. Throws ResolutionError when a ball has fewer than
/// options.min_nodes nodes and RangeError when a radius reaches the grid
/// boundary.
BallAnalytics volume_curve(const DistanceField& field,
                           std::span<const double> radii,
                           GeometryOptions options = {});

struct NonDoublingOrder {
  double r = 0.0;
  double delta = 0.0;
  double ratio = 0.0;
  bool doubling = false;
  /// Calibrated constant after this step (at least the C passed in).
  double C = 1.0;
};

/// Smallest delta with |B(r + delta)| >= 5/4 |B(r)|, capped at r. Raises the
/// stored C_doubling when the ratio at delta exceeds 2C. Throws RangeError
/// when r + delta leaves the resolvable range.
NonDoublingOrder nondoubling_order(BallAnalytics& analytics, double r,
                                   double C);

/// Runs nondoubling_order at every stored radius and fills the delta columns
/// (NaN where the order leaves the range) and the doubling ratios.
void complete_analytics(BallAnalytics& analytics, double C = 1.0 + 1e-9);

struct ChainBound {
  double r = 0.0;
  double ratio = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool holds = false;
};

/// (5/4)^(r/delta(2r) - 1) <= |B(2r)|/|B(r)| <= (2C)^(r/delta(r) + 1) at each
/// radius where both orders are resolvable. Bounds are compared in log form.
std::vector<ChainBound> chain_bounds(BallAnalytics& analytics);

struct GrowthReport {
  std::vector<double> radii;
  std::vector<double> g;
  double first_third_mean = 0.0;
  double last_third_mean = 0.0;
  bool increasing = false;
};

/// g(r) = ln r * ln(1 - exp(-(r/delta)^lambda) / (2C)) along a decreasing
/// radius sequence; increasing when the mean of the last third of the
/// sequence exceeds the mean of the first third.
GrowthReport growth_condition_check(std::span<const double> radii,
                                    std::span<const double> deltas,
                                    double lambda, double C);

struct BoxReport {
  double r = 0.0;
  double f_half = 0.0;
  std::size_t inner_checked = 0;
  std::size_t inner_violations = 0;
  std::size_t outer_violations = 0;
  std::size_t ball_nodes = 0;
  double volume = 0.0;
  double volume_lower = 0.0;
  double volume_upper = 0.0;
  double quantization_budget = 0.0;
  bool volume_within_bounds = false;
  bool passed() const {
    return inner_violations == 0 && outer_violations == 0;
  }
};

/// Checks [r/2, 3r/4] x [y -+ r f(r/2)/4]  within  B_r  within
/// [-r, r] x [y -+ r f(r/2)], each modulo a one-cell collar, and the volume
/// bracket r^2 f(r/2)/8 <= |B_r| <= 4 r^2 f(r/2) widened by the boundary cell
/// area. The field source must lie on the axis x = 0.
BoxReport box_sandwich(const DistanceField& field, double r,
                       const DegeneracyProfile& profile);

struct ContainmentReport {
  std::vector<double> radii;
  /// Largest rho with E(x, rho) inside B(x, r).
  std::vector<double> alpha;
  /// Largest Euclidean distance of a ball node from the centre.
  std::vector<double> euclidean_reach;
  std::size_t upper_violations = 0;
  bool alpha_positive = false;
};

/// B(x, r) within E(x, r) (C = 1, up to one cell diagonal) and the empirical
/// alpha_x(r) at each radius.
ContainmentReport containment_check(const DistanceField& field,
                                    std::span<const double> radii);

}  // namespace sublab
