#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sublab/error.hpp"
#include "sublab/forms.hpp"
#include "sublab/grid.hpp"

namespace sublab {

/// Grid function with its grid.
struct DiscreteFunction {
  GridSpec grid;
  std::vector<double> values;
};

struct FixedPointConfig {
  int max_iterations = 200;
  /// theta in (0, 1].
  double damping = 1.0;
  /// Sup-norm tolerance on |T(u_k) - u_k|.
  double tolerance = 1e-9;
};

struct LinearSolverConfig {
  /// Relative residual |r| / |b| in the Euclidean norm.
  double tolerance = 1e-13;
  int max_iterations = 50000;
};

struct SolveConfig {
  /// Right-hand side f per node; empty means f = 0.
  std::vector<double> rhs;
  /// Dirichlet data per node; only boundary entries are read.
  std::vector<double> boundary;
  FixedPointConfig fixed_point;
  LinearSolverConfig linear_solver;

  /// Throws ConfigError on sizes that do not match the grid, a non-positive
  /// tolerance or damping outside (0, 1].
  void validate(const GridSpec& grid) const;
};

/// Raised when an iteration stops without meeting its tolerance. Carries the
/// iterate with the smallest residual and the residual history.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, DiscreteFunction best,
                std::vector<double> history)
      : Error(what), best_(std::move(best)), history_(std::move(history)) {}
  const DiscreteFunction& best() const { return best_; }
  const std::vector<double>& history() const { return history_; }

 private:
  DiscreteFunction best_;
  std::vector<double> history_;
};

/// Five-point system for -div(A grad u) = -f with Dirichlet rows eliminated.
/// Face coefficients are harmonic means of the nodal diagonal entries,
/// already divided by h^2. The operator acts on full-grid vectors and
/// ignores boundary entries.
struct LinearSystem {
  GridSpec grid;
  /// Coefficient of the face between node n and n + 1 (east).
  std::vector<double> east;
  /// Coefficient of the face between node n and n + nx (north).
  std::vector<double> north;
  std::vector<double> diag;
  /// Right-hand side with the boundary contributions folded in.
  std::vector<double> rhs;
  /// Dirichlet data on boundary nodes, 0 elsewhere.
  std::vector<double> boundary;
  /// Couplings to interior neighbours only (zero towards boundary nodes),
  /// ordered west, east, south, north.
  std::vector<double> couple_w, couple_e, couple_s, couple_n;

  /// y = M x on interior nodes; boundary entries of y are 0.
  void apply(std::span<const double> x, std::span<double> y) const;
};

/// Assembles the system for diag(a11, a22). Throws SingularSystem when an
/// interior component is cut off from the boundary by zero faces.
LinearSystem assemble_linear(const GridSpec& grid, std::span<const double> a11,
                             std::span<const double> a22,
                             std::span<const double> rhs,
                             std::span<const double> boundary);

LinearSystem assemble_linear(const QuadraticFormField& form,
                             std::span<const double> rhs,
                             std::span<const double> boundary);

struct LinearSolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. x holds the initial guess on
/// entry (boundary entries are overwritten with the Dirichlet data) and the
/// solution on exit. Throws NoConvergence after max_iterations.
LinearSolveStats solve_linear(const LinearSystem& system, std::vector<double>& x,
                              const LinearSolverConfig& config = {});

/// Linear solve for the form itself.
DiscreteFunction solve_form(const QuadraticFormField& form,
                            const SolveConfig& config);

struct QuasilinearResult {
  DiscreteFunction solution;
  /// |T(u_k) - u_k| in the sup norm for k = 0, 1, ...
  std::vector<double> residual_history;
  /// Picard updates performed before the returned iterate.
  int iterations = 0;
  /// Geometric mean of successive residual ratios (NaN with < 2 residuals).
  double decay_ratio = 0.0;
  int linear_iterations = 0;
};

/// Damped Picard iteration u_{k+1} = (1 - theta) u_k + theta T(u_k), where
/// T(v) solves the linear problem with A(x, v(x)) frozen. Starts from the
/// boundary data extended by zero and returns the first u_k with
/// |T(u_k) - u_k| <= tolerance.
QuasilinearResult solve_quasilinear(const QuasilinearEnvelope& env,
                                    const SolveConfig& config);

/// Frozen coefficients A(x, u(x)) as (a11, a22).
std::pair<std::vector<double>, std::vector<double>> frozen_coefficients(
    const QuasilinearEnvelope& env, std::span<const double> u);

struct EnergyBalance {
  /// Sum over faces of c (du)^2 / h^2 times the cell area.
  double energy = 0.0;
  /// -sum over interior nodes of f u times the cell area.
  double source = 0.0;
  /// Boundary flux term sum over boundary nodes of u times the outward flux.
  double flux = 0.0;
  /// |energy - source - flux|.
  double defect = 0.0;
};

EnergyBalance energy_balance(const LinearSystem& system,
                             std::span<const double> u,
                             std::span<const double> rhs);

/// Largest nodal violation of k [grad u]_Q^2 <= [grad u]_A^2 <= K [grad u]_Q^2
/// with A frozen at u, relative to max(1, [grad u]_Q^2).
double structural_sandwich_violation(const QuasilinearEnvelope& env,
                                     std::span<const double> u);

/// ((1/|supp w|) int_B |w|^{2 sigma})^{1/2 sigma} divided by
/// r ((1/|supp w|) int_B [grad w]_Q^2)^{1/2} + ((1/|supp w|) int_B w^2)^{1/2}.
/// Throws EmptySupport when w vanishes and ConfigError when w is nonzero
/// outside the ball.
double sobolev_functional(const QuadraticFormField& form,
                          std::span<const double> w, const NodeSet& ball,
                          double r, double sigma);

/// int_B |w - <w>_B| / (r int_B [grad w]_Q), with 0/0 read as 0. Throws
/// ZeroGradient when the gradient integral vanishes but the numerator does
/// not.
double poincare_functional(const QuadraticFormField& form,
                           std::span<const double> w, const NodeSet& ball,
                           double r);

}  // namespace sublab
