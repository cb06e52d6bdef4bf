#include "sublab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "sublab/cutoff.hpp"

namespace sublab {

namespace {

double harmonic(double a, double b) {
  if (a < 0.0 || b < 0.0 || !std::isfinite(a) || !std::isfinite(b)) {
    throw ConfigError("coefficients must be finite and nonnegative");
  }
  if (a == 0.0 || b == 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

double sup_difference(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    m = std::max(m, std::fabs(a[n] - b[n]));
  }
  return m;
}

// Interior nodes not connected to any boundary node through positive faces.
NodeSet find_island(const LinearSystem& s) {
  const GridSpec& g = s.grid;
  const std::size_t nx = g.nx;
  std::vector<std::uint8_t> seen(g.size(), 0);
  std::deque<std::size_t> queue;
  auto faces = [&](std::size_t n, auto&& fn) {
    const auto i = g.col(n);
    const auto j = g.row(n);
    if (i + 1 < nx && s.east[n] > 0.0) fn(n + 1);
    if (i > 0 && s.east[n - 1] > 0.0) fn(n - 1);
    if (j + 1 < g.ny && s.north[n] > 0.0) fn(n + nx);
    if (j > 0 && s.north[n - nx] > 0.0) fn(n - nx);
  };
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (g.on_boundary(n)) {
      seen[n] = 1;
      queue.push_back(n);
    }
  }
  auto flood = [&](NodeSet* collect) {
    while (!queue.empty()) {
      const auto n = queue.front();
      queue.pop_front();
      if (collect) collect->push_back(n);
      faces(n, [&](std::size_t m) {
        if (!seen[m]) {
          seen[m] = 1;
          queue.push_back(m);
        }
      });
    }
  };
  flood(nullptr);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!seen[n]) {
      NodeSet island;
      seen[n] = 1;
      queue.push_back(n);
      flood(&island);
      std::sort(island.begin(), island.end());
      return island;
    }
  }
  return {};
}

}  // namespace

void SolveConfig::validate(const GridSpec& grid) const {
  if (!rhs.empty() && rhs.size() != grid.size()) {
    throw ConfigError("rhs size does not match the grid");
  }
  if (boundary.size() != grid.size()) {
    throw ConfigError("boundary data size does not match the grid");
  }
  if (!(fixed_point.tolerance > 0.0) || !(linear_solver.tolerance > 0.0)) {
    throw ConfigError("solver tolerances must be positive");
  }
  if (!(fixed_point.damping > 0.0 && fixed_point.damping <= 1.0)) {
    throw ConfigError("damping must lie in (0, 1]");
  }
  if (fixed_point.max_iterations < 1 || linear_solver.max_iterations < 1) {
    throw ConfigError("iteration limits must be positive");
  }
}

void LinearSystem::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t nx = grid.nx;
  const std::size_t ny = grid.ny;
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(nx), 0.0);
  std::fill(y.end() - static_cast<std::ptrdiff_t>(nx), y.end(), 0.0);
  for (std::size_t j = 1; j + 1 < ny; ++j) {
    const std::size_t row = j * nx;
    y[row] = 0.0;
    y[row + nx - 1] = 0.0;
    for (std::size_t n = row + 1; n + 1 < row + nx; ++n) {
      y[n] = diag[n] * x[n] - couple_w[n] * x[n - 1] - couple_e[n] * x[n + 1] -
             couple_s[n] * x[n - nx] - couple_n[n] * x[n + nx];
    }
  }
}

LinearSystem assemble_linear(const GridSpec& grid, std::span<const double> a11,
                             std::span<const double> a22,
                             std::span<const double> rhs,
                             std::span<const double> boundary) {
  grid.validate();
  const std::size_t size = grid.size();
  if (a11.size() != size || a22.size() != size || boundary.size() != size ||
      (!rhs.empty() && rhs.size() != size)) {
    throw ConfigError("assemble_linear: array sizes do not match the grid");
  }
  const std::size_t nx = grid.nx;
  const double ihx2 = 1.0 / (grid.hx() * grid.hx());
  const double ihy2 = 1.0 / (grid.hy() * grid.hy());

  LinearSystem s;
  s.grid = grid;
  s.east.assign(size, 0.0);
  s.north.assign(size, 0.0);
  s.diag.assign(size, 0.0);
  s.rhs.assign(size, 0.0);
  s.boundary.assign(size, 0.0);
  for (std::size_t n = 0; n < size; ++n) {
    if (grid.col(n) + 1 < nx) s.east[n] = harmonic(a11[n], a11[n + 1]) * ihx2;
    if (grid.row(n) + 1 < grid.ny) {
      s.north[n] = harmonic(a22[n], a22[n + nx]) * ihy2;
    }
    if (grid.on_boundary(n)) s.boundary[n] = boundary[n];
  }
  for (std::size_t n = 0; n < size; ++n) {
    if (grid.on_boundary(n)) continue;
    const std::size_t nbr[4] = {n + 1, n - 1, n + nx, n - nx};
    const double c[4] = {s.east[n], s.east[n - 1], s.north[n], s.north[n - nx]};
    double b = rhs.empty() ? 0.0 : -rhs[n];
    for (int k = 0; k < 4; ++k) {
      s.diag[n] += c[k];
      if (grid.on_boundary(nbr[k])) b += c[k] * boundary[nbr[k]];
    }
    s.rhs[n] = b;
  }
  s.couple_w.assign(size, 0.0);
  s.couple_e.assign(size, 0.0);
  s.couple_s.assign(size, 0.0);
  s.couple_n.assign(size, 0.0);
  for (std::size_t n = 0; n < size; ++n) {
    if (grid.on_boundary(n)) continue;
    if (!grid.on_boundary(n - 1)) s.couple_w[n] = s.east[n - 1];
    if (!grid.on_boundary(n + 1)) s.couple_e[n] = s.east[n];
    if (!grid.on_boundary(n - nx)) s.couple_s[n] = s.north[n - nx];
    if (!grid.on_boundary(n + nx)) s.couple_n[n] = s.north[n];
  }
  auto island = find_island(s);
  if (!island.empty()) {
    throw SingularSystem("interior component of " +
                             std::to_string(island.size()) +
                             " nodes is disconnected from the boundary",
                         std::move(island));
  }
  return s;
}

LinearSystem assemble_linear(const QuadraticFormField& form,
                             std::span<const double> rhs,
                             std::span<const double> boundary) {
  return assemble_linear(form.grid, form.q11, form.q22, rhs, boundary);
}

LinearSolveStats solve_linear(const LinearSystem& s, std::vector<double>& x,
                              const LinearSolverConfig& config) {
  const GridSpec& g = s.grid;
  const std::size_t size = g.size();
  if (x.size() != size) x.assign(size, 0.0);
  // Work vectors stay zero on boundary nodes, so the stencil needs no
  // boundary tests.
  std::vector<std::size_t> interior;
  interior.reserve(size);
  for (std::size_t j = 1; j + 1 < g.ny; ++j) {
    for (std::size_t i = 1; i + 1 < g.nx; ++i) interior.push_back(g.index(i, j));
  }
  std::vector<double> xi(size, 0.0);
  for (std::size_t n : interior) xi[n] = x[n];
  std::vector<double> r(size, 0.0);
  std::vector<double> z(size, 0.0);
  std::vector<double> p(size, 0.0);
  std::vector<double> ap(size, 0.0);
  std::vector<double> inv_diag(size, 0.0);
  for (std::size_t n : interior) inv_diag[n] = 1.0 / s.diag[n];

  auto finish = [&] {
    for (std::size_t n = 0; n < size; ++n) x[n] = xi[n];
    for (std::size_t n = 0; n < size; ++n) {
      if (g.on_boundary(n)) x[n] = s.boundary[n];
    }
  };

  s.apply(xi, ap);
  double bb = 0.0;
  double rr = 0.0;
  double rz = 0.0;
  for (std::size_t n : interior) {
    r[n] = s.rhs[n] - ap[n];
    z[n] = r[n] * inv_diag[n];
    p[n] = z[n];
    bb += s.rhs[n] * s.rhs[n];
    rr += r[n] * r[n];
    rz += r[n] * z[n];
  }
  LinearSolveStats stats;
  const double bnorm = std::sqrt(bb);
  if (bnorm == 0.0) {
    std::fill(xi.begin(), xi.end(), 0.0);
    finish();
    return stats;
  }
  const double target = config.tolerance * bnorm;
  double rnorm = std::sqrt(rr);
  while (rnorm > target) {
    if (stats.iterations >= config.max_iterations) {
      finish();
      throw NoConvergence("conjugate gradients stopped at relative residual " +
                              std::to_string(rnorm / bnorm),
                          DiscreteFunction{g, x}, {rnorm / bnorm});
    }
    s.apply(p, ap);
    double pap = 0.0;
    for (std::size_t n : interior) pap += p[n] * ap[n];
    const double alpha = rz / pap;
    double rz_next = 0.0;
    rr = 0.0;
    for (std::size_t n : interior) {
      xi[n] += alpha * p[n];
      r[n] -= alpha * ap[n];
      z[n] = r[n] * inv_diag[n];
      rz_next += r[n] * z[n];
      rr += r[n] * r[n];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t n : interior) p[n] = z[n] + beta * p[n];
    rnorm = std::sqrt(rr);
    ++stats.iterations;
  }
  stats.relative_residual = rnorm / bnorm;
  finish();
  return stats;
}

DiscreteFunction solve_form(const QuadraticFormField& form,
                            const SolveConfig& config) {
  config.validate(form.grid);
  const auto system = assemble_linear(form, config.rhs, config.boundary);
  std::vector<double> x(form.grid.size(), 0.0);
  solve_linear(system, x, config.linear_solver);
  return {form.grid, std::move(x)};
}

std::pair<std::vector<double>, std::vector<double>> frozen_coefficients(
    const QuasilinearEnvelope& env, std::span<const double> u) {
  const auto size = env.base().grid.size();
  std::vector<double> a11(size);
  std::vector<double> a22(size);
  for (std::size_t n = 0; n < size; ++n) {
    a11[n] = env.a11(n, u[n]);
    a22[n] = env.a22(n, u[n]);
  }
  return {std::move(a11), std::move(a22)};
}

QuasilinearResult solve_quasilinear(const QuasilinearEnvelope& env,
                                    const SolveConfig& config) {
  const GridSpec& g = env.base().grid;
  config.validate(g);
  const double theta = config.fixed_point.damping;
  const double tol = config.fixed_point.tolerance;

  std::vector<double> u(g.size(), 0.0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (g.on_boundary(n)) u[n] = config.boundary[n];
  }
  QuasilinearResult out;
  std::vector<double> best = u;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int k = 0;; ++k) {
    auto [a11, a22] = frozen_coefficients(env, u);
    const auto system = assemble_linear(g, a11, a22, config.rhs, config.boundary);
    std::vector<double> t = u;
    out.linear_iterations +=
        solve_linear(system, t, config.linear_solver).iterations;
    const double res = sup_difference(t, u);
    out.residual_history.push_back(res);
    if (res < best_residual) {
      best_residual = res;
      best = u;
    }
    if (res <= tol) {
      out.iterations = k;
      out.solution = {g, std::move(u)};
      break;
    }
    if (k >= config.fixed_point.max_iterations) {
      throw NoConvergence("Picard iteration stopped at residual " +
                              std::to_string(res) + " after " +
                              std::to_string(k) + " updates",
                          DiscreteFunction{g, std::move(best)},
                          out.residual_history);
    }
    for (std::size_t n = 0; n < g.size(); ++n) {
      u[n] = (1.0 - theta) * u[n] + theta * t[n];
    }
  }
  const auto& h = out.residual_history;
  std::size_t m = 0;
  while (m + 1 < h.size() && h[m + 1] > tol) ++m;
  out.decay_ratio = m >= 1 ? std::pow(h[m] / h[0], 1.0 / static_cast<double>(m))
                           : std::numeric_limits<double>::quiet_NaN();
  return out;
}

EnergyBalance energy_balance(const LinearSystem& s, std::span<const double> u,
                             std::span<const double> rhs) {
  const GridSpec& g = s.grid;
  const std::size_t nx = g.nx;
  EnergyBalance e;
  std::vector<double> outflow(g.size(), 0.0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (g.col(n) + 1 < nx) {
      const double du = u[n] - u[n + 1];
      e.energy += s.east[n] * du * du;
      outflow[n] += s.east[n] * du;
      outflow[n + 1] -= s.east[n] * du;
    }
    if (g.row(n) + 1 < g.ny) {
      const double du = u[n] - u[n + nx];
      e.energy += s.north[n] * du * du;
      outflow[n] += s.north[n] * du;
      outflow[n + nx] -= s.north[n] * du;
    }
  }
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (g.on_boundary(n)) {
      e.flux += u[n] * outflow[n];
    } else if (!rhs.empty()) {
      e.source -= rhs[n] * u[n];
    }
  }
  const double area = g.cell_area();
  e.energy *= area;
  e.source *= area;
  e.flux *= area;
  e.defect = std::fabs(e.energy - e.source - e.flux);
  return e;
}

double structural_sandwich_violation(const QuasilinearEnvelope& env,
                                     std::span<const double> u) {
  const auto& base = env.base();
  std::vector<double> dx;
  std::vector<double> dy;
  grid_differences(base.grid, u, dx, dy);
  double worst = 0.0;
  for (std::size_t n = 0; n < u.size(); ++n) {
    const double gq = base.q11[n] * dx[n] * dx[n] + base.q22[n] * dy[n] * dy[n];
    const double ga =
        env.a11(n, u[n]) * dx[n] * dx[n] + env.a22(n, u[n]) * dy[n] * dy[n];
    const double v = std::max({env.k() * gq - ga, ga - env.K() * gq, 0.0});
    worst = std::max(worst, v / std::max(1.0, gq));
  }
  return worst;
}

double sobolev_functional(const QuadraticFormField& form,
                          std::span<const double> w, const NodeSet& ball,
                          double r, double sigma) {
  const GridSpec& g = form.grid;
  if (w.size() != g.size()) throw ConfigError("w does not match the grid");
  if (!(sigma > 1.0)) throw ConfigError("sigma must exceed 1");
  const auto mask = to_mask(g, ball);
  std::size_t support = 0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (w[n] != 0.0) {
      if (!mask[n]) throw ConfigError("w is nonzero outside the ball");
      ++support;
    }
  }
  if (support == 0) throw EmptySupport("w vanishes identically");
  const auto grad = q_gradient(form, w);
  double high = 0.0;
  double energy = 0.0;
  double mass = 0.0;
  for (std::size_t n : ball) {
    high += std::pow(std::fabs(w[n]), 2.0 * sigma);
    energy += grad[n] * grad[n];
    mass += w[n] * w[n];
  }
  const double count = static_cast<double>(support);
  const double lhs = std::pow(high / count, 1.0 / (2.0 * sigma));
  const double rhs = r * std::sqrt(energy / count) + std::sqrt(mass / count);
  return lhs / rhs;
}

double poincare_functional(const QuadraticFormField& form,
                           std::span<const double> w, const NodeSet& ball,
                           double r) {
  const GridSpec& g = form.grid;
  if (w.size() != g.size()) throw ConfigError("w does not match the grid");
  if (ball.empty()) throw ConfigError("poincare_functional: empty ball");
  double mean = 0.0;
  double scale = 0.0;
  for (std::size_t n : ball) {
    mean += w[n];
    scale += std::fabs(w[n]);
  }
  mean /= static_cast<double>(ball.size());
  const auto grad = q_gradient(form, w);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t n : ball) {
    num += std::fabs(w[n] - mean);
    den += grad[n];
  }
  const double area = g.cell_area();
  num *= area;
  den *= r * area;
  if (den == 0.0) {
    if (num <= 1e-12 * scale * area) return 0.0;
    throw ZeroGradient("gradient integral vanishes while w is not constant",
                       num);
  }
  return num / den;
}

}  // namespace sublab
