#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sublab/forms.hpp"
#include "sublab/grid.hpp"
#include "sublab/metric.hpp"

namespace sublab {

/// Accumulating Lipschitz cutoffs psi_1, psi_2, ... between B(center, nu r)
/// and B(center, r). psi_j ramps linearly in the distance value from 1 at
/// r_{j+1} to 0 at r_j.
struct CutoffSequence {
  std::size_t center = 0;
  double r = 0.0;
  double nu = 0.5;
  double delta = 0.0;
  /// radii[j - 1] = r_j for j = 1 .. J + 1.
  std::vector<double> radii;
  /// psi[j - 1] = psi_j for j = 1 .. J.
  std::vector<std::vector<double>> psi;
  /// supports[j - 1] = E_j = {psi_j > 0}.
  std::vector<NodeSet> supports;
  std::vector<double> support_volumes;
  /// Observed max of [grad psi_j]_Q.
  std::vector<double> grad_bounds;
  /// grad_bounds[j] * (1 - nu) * delta * (1 - delta/r)^j.
  std::vector<double> grad_envelope;
  double support_ratio_max = 0.0;
  double grad_envelope_max = 0.0;
  /// Set when the ramps became narrower than 1e-12 r or a support emptied.
  bool terminated_early = false;

  std::size_t size() const { return psi.size(); }
};

/// r_j = r - (1 - nu) r (1 - (1 - delta/r)^j).
double cutoff_radius(double r, double nu, double delta, int j);

/// Builds psi_1 .. psi_{j_max} from one distance field and validates nesting,
/// plateau and support containment. Throws ConfigError on bad parameters,
/// GeometryError when B(center, r) is not covered by the grid or an
/// invariant fails, and RangeError if the radii undershoot nu r.
CutoffSequence build_sequence(const QuadraticFormField& form,
                              const DistanceField& field, double r, double nu,
                              double delta, int j_max = 12);

struct SpecialCutoff {
  std::size_t center = 0;
  double r = 0.0;
  double delta = 0.0;
  std::vector<double> values;
  NodeSet support;
  NodeSet plateau;
  double grad_max = 0.0;
  /// grad_max * delta.
  double grad_scaled = 0.0;
};

/// phi_r = 1 on B(center, r + delta/2), 0 outside B(center, r + delta),
/// linear in the distance value between. Throws GeometryError when
/// B(center, r + delta) reaches the grid boundary.
SpecialCutoff build_special_cutoff(const QuadraticFormField& form,
                                   const DistanceField& field, double r,
                                   double delta);

/// [grad w]_Q = sqrt(q11 (Dx w)^2 + q22 (Dy w)^2); centred differences in
/// the interior, one-sided on the boundary.
std::vector<double> q_gradient(const QuadraticFormField& form,
                               std::span<const double> w);

}  // namespace sublab
