#include "sublab/cutoff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sublab/error.hpp"

namespace sublab {

namespace {

double ramp(double d, double inner, double outer) {
  if (d <= inner) return 1.0;
  if (d >= outer) return 0.0;
  return (outer - d) / (outer - inner);
}

bool in_ball(const DistanceField& field, std::size_t n, double r) {
  return (field.reached.empty() || field.reached[n]) && field.values[n] < r;
}

void check_form_grid(const QuadraticFormField& form,
                     const DistanceField& field) {
  if (!(form.grid == field.grid)) {
    throw ConfigError("form and distance field live on different grids");
  }
}

}  // namespace

double cutoff_radius(double r, double nu, double delta, int j) {
  const double q = 1.0 - delta / r;
  return r - (1.0 - nu) * r * (1.0 - std::pow(q, j));
}

CutoffSequence build_sequence(const QuadraticFormField& form,
                              const DistanceField& field, double r, double nu,
                              double delta, int j_max) {
  check_form_grid(form, field);
  if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("nu must lie in (0, 1)");
  if (!(delta > 0.0 && delta < r)) {
    throw ConfigError("delta must lie in (0, r)");
  }
  if (j_max < 1) throw ConfigError("j_max must be at least 1");
  if (r >= field.interior_radius()) {
    throw GeometryError("B(center, " + std::to_string(r) +
                        ") reaches the grid boundary");
  }
  const GridSpec& g = field.grid;
  const double slack = std::max(g.hx(), g.hy());

  CutoffSequence seq;
  seq.center = field.source;
  seq.r = r;
  seq.nu = nu;
  seq.delta = delta;

  const double q = 1.0 - delta / r;
  seq.radii.push_back(cutoff_radius(r, nu, delta, 1));
  for (int j = 1; j <= j_max; ++j) {
    const double outer = seq.radii.back();
    const double inner = cutoff_radius(r, nu, delta, j + 1);
    if (inner < nu * r - slack) {
      throw RangeError("cutoff radius r_" + std::to_string(j + 1) +
                       " undershoots nu r");
    }
    if (outer - inner <= 1e-12 * r) {
      seq.terminated_early = true;
      break;
    }
    std::vector<double> psi(g.size());
    NodeSet support;
    for (std::size_t n = 0; n < g.size(); ++n) {
      const bool reached = field.reached.empty() || field.reached[n];
      psi[n] = reached ? ramp(field.values[n], inner, outer) : 0.0;
      if (psi[n] > 0.0) support.push_back(n);
    }
    if (support.empty()) {
      seq.terminated_early = true;
      break;
    }
    seq.radii.push_back(inner);
    const auto grad = q_gradient(form, psi);
    const double gmax = *std::max_element(grad.begin(), grad.end());
    const double scale = (1.0 - nu) * delta * std::pow(q, j);
    seq.grad_bounds.push_back(gmax);
    seq.grad_envelope.push_back(gmax * scale);
    seq.support_volumes.push_back(static_cast<double>(support.size()) *
                                  g.cell_area());
    seq.psi.push_back(std::move(psi));
    seq.supports.push_back(std::move(support));
  }
  if (seq.psi.empty()) {
    throw GeometryError("cutoff sequence is empty: B(center, r_1) has no nodes");
  }

  // Invariants, checked on the nodes themselves.
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (seq.psi.front()[n] > 0.0 && !in_ball(field, n, r)) {
      throw GeometryError("E_1 leaves B(center, r)");
    }
    if (in_ball(field, n, nu * r)) {
      for (const auto& psi : seq.psi) {
        if (psi[n] != 1.0) {
          throw GeometryError("psi_j < 1 on B(center, nu r)");
        }
      }
    }
  }
  for (std::size_t j = 0; j + 1 < seq.psi.size(); ++j) {
    for (std::size_t n : seq.supports[j + 1]) {
      if (seq.psi[j][n] != 1.0) {
        throw GeometryError("E_" + std::to_string(j + 2) +
                            " is not inside {psi_" + std::to_string(j + 1) +
                            " = 1}");
      }
    }
    seq.support_ratio_max =
        std::max(seq.support_ratio_max,
                 seq.support_volumes[j] / seq.support_volumes[j + 1]);
  }
  seq.grad_envelope_max =
      *std::max_element(seq.grad_envelope.begin(), seq.grad_envelope.end());
  return seq;
}

SpecialCutoff build_special_cutoff(const QuadraticFormField& form,
                                   const DistanceField& field, double r,
                                   double delta) {
  check_form_grid(form, field);
  if (!(r > 0.0 && delta > 0.0)) {
    throw ConfigError("special cutoff needs r > 0 and delta > 0");
  }
  const double outer = r + delta;
  const double inner = r + 0.5 * delta;
  if (outer >= field.interior_radius()) {
    throw GeometryError("B(center, r + delta) reaches the grid boundary");
  }
  const GridSpec& g = field.grid;
  SpecialCutoff out;
  out.center = field.source;
  out.r = r;
  out.delta = delta;
  out.values.resize(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    const bool reached = field.reached.empty() || field.reached[n];
    const double v = reached ? ramp(field.values[n], inner, outer) : 0.0;
    out.values[n] = v;
    if (v > 0.0) {
      if (!in_ball(field, n, outer)) {
        throw GeometryError("special cutoff support leaves B(center, r + delta)");
      }
      out.support.push_back(n);
    }
    if (v == 1.0) out.plateau.push_back(n);
  }
  const auto grad = q_gradient(form, out.values);
  out.grad_max = *std::max_element(grad.begin(), grad.end());
  out.grad_scaled = out.grad_max * delta;
  return out;
}

std::vector<double> q_gradient(const QuadraticFormField& form,
                               std::span<const double> w) {
  std::vector<double> dx;
  std::vector<double> dy;
  grid_differences(form.grid, w, dx, dy);
  std::vector<double> out(dx.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = std::sqrt(form.q11[n] * dx[n] * dx[n] + form.q22[n] * dy[n] * dy[n]);
  }
  return out;
}

}  // namespace sublab
