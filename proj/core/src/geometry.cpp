#include "sublab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sublab/error.hpp"

namespace sublab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGrowth = 1.25;

std::size_t count_at_most(const std::vector<double>& sorted, double v) {
  return static_cast<std::size_t>(
      std::upper_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
}

}  // namespace

std::size_t BallAnalytics::count_below(double r) const {
  return static_cast<std::size_t>(
      std::lower_bound(sorted_values.begin(), sorted_values.end(), r) -
      sorted_values.begin());
}

double BallAnalytics::volume(double r) const {
  return static_cast<double>(count_below(r)) * grid.cell_area();
}

BallAnalytics volume_curve(const DistanceField& field,
                           std::span<const double> radii,
                           GeometryOptions options) {
  BallAnalytics a;
  a.grid = field.grid;
  a.center = field.source;
  a.options = options;
  a.r_max = field.interior_radius();
  for (std::size_t n = 0; n < field.values.size(); ++n) {
    if (field.reached.empty() || field.reached[n]) {
      a.sorted_values.push_back(field.values[n]);
    }
  }
  std::sort(a.sorted_values.begin(), a.sorted_values.end());

  double last_r = 0.0;
  double last_v = 0.0;
  for (double r : radii) {
    if (!(r > 0.0)) throw RangeError("radii must be positive");
    if (r > a.r_max) {
      throw RangeError("radius " + std::to_string(r) +
                       " reaches the grid boundary (r_max = " +
                       std::to_string(a.r_max) + ")");
    }
    const auto count = a.count_below(r);
    if (count < options.min_nodes) {
      throw ResolutionError("ball of radius " + std::to_string(r) + " has " +
                            std::to_string(count) + " nodes (< " +
                            std::to_string(options.min_nodes) + ")");
    }
    const double v = static_cast<double>(count) * a.grid.cell_area();
    if (!a.radii.empty() && (r - last_r) * (v - last_v) < 0.0) {
      throw GeometryError("volume curve is not monotone");
    }
    last_r = r;
    last_v = v;
    a.radii.push_back(r);
    a.volumes.push_back(v);
  }
  const auto n = a.radii.size();
  a.doubling_ratios.assign(n, kNaN);
  a.deltas.assign(n, kNaN);
  a.delta_over_r.assign(n, kNaN);
  a.order_ratios.assign(n, kNaN);
  a.doubling_flags.assign(n, 0);
  return a;
}

NonDoublingOrder nondoubling_order(BallAnalytics& a, double r, double C) {
  if (!(C > 1.0)) throw ConfigError("nondoubling_order needs C > 1");
  if (!(r > 0.0) || r > a.r_max) {
    throw RangeError("radius " + std::to_string(r) +
                     " outside the resolvable range");
  }
  const auto base = a.count_below(r);
  if (base < a.options.min_nodes) {
    throw ResolutionError("ball of radius " + std::to_string(r) +
                          " is below the resolution floor");
  }
  const auto target = static_cast<std::size_t>(
      std::ceil(kGrowth * static_cast<double>(base) - 1e-9));
  NonDoublingOrder out;
  out.r = r;
  if (target > a.sorted_values.size()) {
    throw RangeError("volume never grows by 5/4 beyond r = " +
                     std::to_string(r));
  }
  const double v = a.sorted_values[target - 1];
  double delta = v - r;
  if (delta <= 0.0) delta = std::nextafter(r, 2.0 * r + 1.0) - r;
  std::size_t reached = count_at_most(a.sorted_values, v);
  if (delta >= r) {
    delta = r;
    out.doubling = true;
    reached = a.count_below(2.0 * r);
  }
  if (r + delta > a.r_max) {
    throw RangeError("r + delta = " + std::to_string(r + delta) +
                     " exits the resolvable range");
  }
  out.delta = delta;
  out.ratio = static_cast<double>(reached) / static_cast<double>(base);
  if (delta / r >= a.options.doubling_threshold) out.doubling = true;
  out.C = std::max(C, out.ratio / 2.0);
  a.C_doubling = std::max(a.C_doubling, out.C);
  return out;
}

void complete_analytics(BallAnalytics& a, double C) {
  for (std::size_t k = 0; k < a.radii.size(); ++k) {
    const double r = a.radii[k];
    if (2.0 * r <= a.r_max) {
      a.doubling_ratios[k] = a.volume(2.0 * r) / a.volumes[k];
    }
    try {
      const auto order = nondoubling_order(a, r, std::max(C, a.C_doubling));
      a.deltas[k] = order.delta;
      a.delta_over_r[k] = order.delta / r;
      a.order_ratios[k] = order.ratio;
      a.doubling_flags[k] = order.doubling ? 1 : 0;
    } catch (const RangeError&) {
      // Left as NaN: the order at this radius is not resolvable.
    }
  }
}

std::vector<ChainBound> chain_bounds(BallAnalytics& a) {
  std::vector<ChainBound> out;
  const double C = std::max(a.C_doubling, 1.0 + 1e-9);
  for (double r : a.radii) {
    if (2.0 * r > a.r_max) continue;
    NonDoublingOrder at_r;
    NonDoublingOrder at_2r;
    try {
      at_r = nondoubling_order(a, r, C);
      at_2r = nondoubling_order(a, 2.0 * r, C);
    } catch (const RangeError&) {
      continue;
    }
    ChainBound b;
    b.r = r;
    b.ratio = a.volume(2.0 * r) / a.volume(r);
    const double log_upper = (r / at_r.delta + 1.0) * std::log(2.0 * at_r.C);
    const double log_lower = (r / at_2r.delta - 1.0) * std::log(kGrowth);
    b.upper = std::exp(std::min(log_upper, 700.0));
    b.lower = std::exp(log_lower);
    const double lr = std::log(b.ratio);
    b.holds = lr <= log_upper + 1e-12 && lr >= log_lower - 1e-12;
    out.push_back(b);
  }
  return out;
}

GrowthReport growth_condition_check(std::span<const double> radii,
                                    std::span<const double> deltas,
                                    double lambda, double C) {
  if (radii.size() != deltas.size() || radii.size() < 3) {
    throw ConfigError("growth check needs >= 3 matching radii and deltas");
  }
  GrowthReport rep;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double r = radii[k];
    const double d = deltas[k];
    if (k > 0 && !(r < radii[k - 1])) {
      throw ConfigError("growth check radii must decrease");
    }
    const double ratio_pow = std::pow(r / d, lambda);
    const double inner = std::exp(-ratio_pow) / (2.0 * C);
    rep.radii.push_back(r);
    rep.g.push_back(std::log(r) * std::log1p(-inner));
  }
  const std::size_t third = std::max<std::size_t>(1, rep.g.size() / 3);
  auto mean = [](auto first, auto last) {
    return std::accumulate(first, last, 0.0) /
           static_cast<double>(std::distance(first, last));
  };
  rep.first_third_mean = mean(rep.g.begin(), rep.g.begin() + third);
  rep.last_third_mean = mean(rep.g.end() - third, rep.g.end());
  rep.increasing = rep.last_third_mean > rep.first_third_mean;
  return rep;
}

BoxReport box_sandwich(const DistanceField& field, double r,
                       const DegeneracyProfile& profile) {
  const GridSpec& g = field.grid;
  const double xc = g.node_x(field.source);
  const double yc = g.node_y(field.source);
  const double hx = g.hx();
  const double hy = g.hy();
  if (std::fabs(xc) > 0.5 * hx) {
    throw ConfigError("box_sandwich needs a centre on the axis x = 0");
  }
  BoxReport rep;
  rep.r = r;
  rep.f_half = profile(r / 2.0);
  const double inner_h = 0.25 * r * rep.f_half;
  const double outer_h = r * rep.f_half;
  std::size_t perimeter = 0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double dx = g.node_x(n) - xc;
    const double dy = std::fabs(g.node_y(n) - yc);
    const bool in_ball =
        (field.reached.empty() || field.reached[n]) && field.values[n] < r;
    if (dx >= 0.5 * r + hx && dx <= 0.75 * r - hx && dy <= inner_h - hy) {
      ++rep.inner_checked;
      if (!in_ball) ++rep.inner_violations;
    }
    if (in_ball) {
      ++rep.ball_nodes;
      if (std::fabs(dx) > r + hx || dy > outer_h + hy) ++rep.outer_violations;
      bool edge = g.on_boundary(n);
      for_each_neighbor(g, n, [&](std::size_t m) {
        if (!(field.values[m] < r)) edge = true;
      });
      if (edge) ++perimeter;
    }
  }
  const double cell = g.cell_area();
  rep.volume = static_cast<double>(rep.ball_nodes) * cell;
  rep.volume_lower = r * r * rep.f_half / 8.0;
  rep.volume_upper = 4.0 * r * r * rep.f_half;
  rep.quantization_budget = static_cast<double>(perimeter) * cell;
  rep.volume_within_bounds =
      rep.volume >= rep.volume_lower - rep.quantization_budget &&
      rep.volume <= rep.volume_upper + rep.quantization_budget;
  return rep;
}

ContainmentReport containment_check(const DistanceField& field,
                                    std::span<const double> radii) {
  const GridSpec& g = field.grid;
  const double xc = g.node_x(field.source);
  const double yc = g.node_y(field.source);
  const double slack = std::hypot(g.hx(), g.hy());
  ContainmentReport rep;
  rep.alpha_positive = true;
  for (double r : radii) {
    double alpha = std::numeric_limits<double>::infinity();
    double reach = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      const double e = std::hypot(g.node_x(n) - xc, g.node_y(n) - yc);
      const bool in_ball =
          (field.reached.empty() || field.reached[n]) && field.values[n] < r;
      if (in_ball) {
        reach = std::max(reach, e);
        if (e > r + slack) ++rep.upper_violations;
      } else {
        alpha = std::min(alpha, e);
      }
    }
    rep.radii.push_back(r);
    rep.alpha.push_back(alpha);
    rep.euclidean_reach.push_back(reach);
    if (!(alpha > 0.0)) rep.alpha_positive = false;
  }
  return rep;
}

}  // namespace sublab
