#include "sublab/metric.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <utility>

#include "sublab/error.hpp"

namespace sublab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class State : std::uint8_t { far, trial, known };

}  // namespace

double DistanceField::max_value() const {
  double m = 0.0;
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (reached.empty() || reached[n]) m = std::max(m, values[n]);
  }
  return m;
}

double DistanceField::interior_radius() const {
  double m = kInf;
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (grid.on_boundary(n)) m = std::min(m, values[n]);
  }
  return m;
}

DistanceField solve_distance(const QuadraticFormField& form,
                             std::size_t source, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw ConfigError(
        "solve_distance needs epsilon > 0; use extrapolate_distance for the "
        "limit");
  }
  const GridSpec& g = form.grid;
  if (source >= g.size()) throw ConfigError("source node outside the grid");

  const double eps2 = epsilon * epsilon;

  DistanceField field;
  field.grid = g;
  field.source = source;
  field.epsilon = epsilon;
  field.values.assign(g.size(), kInf);
  field.reached.assign(g.size(), 0);

  std::vector<State> state(g.size(), State::far);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  auto& T = field.values;
  auto update = [&](std::size_t n) {
    const auto i = g.col(n);
    const auto j = g.row(n);
    double tx = kInf;
    if (i > 0 && state[n - 1] == State::known) tx = T[n - 1];
    if (i + 1 < g.nx && state[n + 1] == State::known) tx = std::min(tx, T[n + 1]);
    double ty = kInf;
    if (j > 0 && state[n - g.nx] == State::known) ty = T[n - g.nx];
    if (j + 1 < g.ny && state[n + g.nx] == State::known)
      ty = std::min(ty, T[n + g.nx]);

    // Time to cross one cell along each axis.
    const double sx = form.q11[n] + eps2;
    const double sy = form.q22[n] + eps2;
    const double cx = sx > 0.0 ? g.hx() / std::sqrt(sx) : kInf;
    const double cy = sy > 0.0 ? g.hy() / std::sqrt(sy) : kInf;
    double cand = kInf;
    if (tx < kInf) cand = std::min(cand, tx + cx);
    if (ty < kInf) cand = std::min(cand, ty + cy);
    if (tx < kInf && ty < kInf && cx < kInf && cy < kInf) {
      // ((T - tx)/cx)^2 + ((T - ty)/cy)^2 = 1
      const double a = 1.0 / (cx * cx);
      const double b = 1.0 / (cy * cy);
      const double disc = (a + b) - a * b * (tx - ty) * (tx - ty);
      if (disc >= 0.0) {
        const double t = (a * tx + b * ty + std::sqrt(disc)) / (a + b);
        if (t >= std::max(tx, ty)) cand = std::min(cand, t);
      }
    }
    if (cand < T[n]) {
      T[n] = cand;
      state[n] = State::trial;
      heap.emplace(cand, n);
    }
  };

  T[source] = 0.0;
  heap.emplace(0.0, source);
  state[source] = State::trial;
  while (!heap.empty()) {
    const auto [value, n] = heap.top();
    heap.pop();
    if (state[n] == State::known || value > T[n]) continue;
    state[n] = State::known;
    field.reached[n] = 1;
    for_each_neighbor(g, n, [&](std::size_t m) {
      if (state[m] != State::known) update(m);
    });
  }
  return field;
}

std::vector<double> epsilon_ladder(double eps0, int rungs) {
  if (!(eps0 > 0.0) || rungs < 1) {
    throw ConfigError("epsilon ladder needs eps0 > 0 and at least one rung");
  }
  std::vector<double> out;
  for (int k = 0; k < rungs; ++k) out.push_back(std::ldexp(eps0, -k));
  return out;
}

DistanceField extrapolate_distance(std::span<const DistanceField> fields,
                                   ExtrapolationOptions options) {
  if (fields.size() < 3) {
    throw ConfigError("extrapolate_distance needs at least 3 fields");
  }
  for (std::size_t k = 1; k < fields.size(); ++k) {
    if (!(fields[k].epsilon < fields[k - 1].epsilon)) {
      throw ConfigError("epsilon must strictly decrease along the ladder");
    }
    if (!(fields[k].grid == fields[0].grid) ||
        fields[k].source != fields[0].source) {
      throw ConfigError("ladder fields must share grid and source");
    }
  }
  const auto& finest = fields.back();
  const auto& prev = fields[fields.size() - 2];
  const auto& prev2 = fields[fields.size() - 3];
  const GridSpec& g = finest.grid;
  const double diameter_bound = g.diameter() / finest.epsilon;
  const double last_ratio = prev.epsilon / finest.epsilon;
  const double prev_ratio = prev2.epsilon / prev.epsilon;

  for (std::size_t k = 1; k < fields.size(); ++k) {
    const auto& lo = fields[k - 1].values;
    const auto& hi = fields[k].values;
    for (std::size_t n = 0; n < g.size(); ++n) {
      const double slack =
          options.monotone_tolerance * std::max(1.0, std::fabs(lo[n]));
      if (hi[n] < lo[n] - slack) {
        throw MonotonicityError(
            "distance decreased as epsilon decreased at node " +
                std::to_string(n),
            n);
      }
    }
  }

  DistanceField out;
  out.grid = g;
  out.source = finest.source;
  out.epsilon = 0.0;
  out.values.resize(g.size());
  out.error_bar.resize(g.size());
  out.reached.assign(g.size(), 1);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double dn = finest.values[n];
    const double dp = prev.values[n];
    const double dpp = prev2.values[n];
    const double inc = dn - dp;
    out.values[n] = dn + inc;
    out.error_bar[n] = inc;
    // Divergent nodes keep growing like 1/eps over the last two rungs.
    const bool scales_like_inverse_eps =
        dpp > 0.0 && dp / dpp >= options.divergence_fraction * prev_ratio &&
        dn / dp >= options.divergence_fraction * last_ratio;
    if (dn >= diameter_bound || scales_like_inverse_eps || !finest.reached[n]) {
      out.reached[n] = 0;
      out.values[n] = kInf;
    }
  }
  return out;
}

NodeSet ball(const DistanceField& field, double r) {
  NodeSet nodes;
  for (std::size_t n = 0; n < field.values.size(); ++n) {
    const bool ok = field.reached.empty() || field.reached[n];
    if (ok && field.values[n] < r) nodes.push_back(n);
  }
  return nodes;
}

}  // namespace sublab
