#include "sublab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sublab/error.hpp"

namespace sublab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLogMax = 709.0;

bool member(const DistanceField& field, std::size_t n, double r) {
  return (field.reached.empty() || field.reached[n]) && field.values[n] < r;
}

double sup_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double safe_exp(double x) { return x > kLogMax ? kInf : std::exp(x); }

// ln((1/N) sum exp(a_i)).
double log_mean_exp(const std::vector<double>& a) {
  const double top = *std::max_element(a.begin(), a.end());
  double s = 0.0;
  for (double x : a) s += std::exp(x - top);
  return top + std::log(s / static_cast<double>(a.size()));
}

// ln(-ln(1 - exp(-t))) for t > 0, stable for large t.
double log_neg_log1m_exp_neg(double t) {
  if (t > 30.0) return -t;
  return std::log(-std::log1p(-std::exp(-t)));
}

void check_sizes(const DistanceField& field, std::span<const double> u,
                 std::span<const double> f) {
  if (u.size() != field.grid.size() ||
      (!f.empty() && f.size() != field.grid.size())) {
    throw ConfigError("grid functions do not match the distance field grid");
  }
}

}  // namespace

double mu_beta(double beta) {
  if (beta == 0.0 || beta == 0.5) {
    throw DomainError("mu_beta is undefined at beta = " + std::to_string(beta));
  }
  return std::min(std::fabs((2.0 * beta - 1.0) / beta), 1.0);
}

double harnack_exponent(double sigma) {
  return 4.0 * sigma / (sigma - 1.0) + 1.0;
}

double moser_exponent(double sigma) { return sigma / (sigma - 1.0); }

double lower_shift(double r, std::span<const double> f,
                   std::span<const double> u, double configured_m) {
  const double fs = sup_abs(f);
  if (fs > 0.0) return r * r * fs;
  if (configured_m > 0.0) return configured_m;
  const double us = sup_abs(u);
  return us > 0.0 ? 1e-6 * us : 1e-6;
}

CaccioppoliTerms caccioppoli_ratio(const QuadraticFormField& form,
                                   std::span<const double> u,
                                   std::span<const double> psi, double beta,
                                   std::span<const double> f) {
  const GridSpec& g = form.grid;
  if (u.size() != g.size() || psi.size() != g.size() ||
      (!f.empty() && f.size() != g.size())) {
    throw ConfigError("caccioppoli_ratio: sizes do not match the grid");
  }
  const double mu = mu_beta(beta);
  std::vector<std::uint8_t> closed(g.size(), 0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (psi[n] != 0.0) {
      closed[n] = 1;
      for_each_neighbor(g, n, [&](std::size_t m) { closed[m] = 1; });
    }
  }
  std::vector<double> ub(g.size(), 0.0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!closed[n]) continue;
    if (!(u[n] > 0.0)) {
      throw PositivityError("u is not positive on the support of psi (node " +
                            std::to_string(n) + ")");
    }
    ub[n] = std::pow(u[n], beta);
  }
  const auto grad_ub = q_gradient(form, ub);
  const auto grad_psi = q_gradient(form, psi);
  CaccioppoliTerms t;
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!closed[n]) continue;
    const double p2 = psi[n] * psi[n];
    t.lhs += p2 * grad_ub[n] * grad_ub[n];
    t.gradient_term += ub[n] * ub[n] * grad_psi[n] * grad_psi[n];
    if (!f.empty()) t.source_term += p2 * ub[n] * ub[n] / u[n] * std::fabs(f[n]);
  }
  const double area = g.cell_area();
  t.lhs *= area;
  t.gradient_term *= area / (mu * mu);
  t.source_term *= area * std::fabs(beta) / mu;
  t.rhs = t.gradient_term + t.source_term;
  t.ratio = t.rhs > 0.0 ? t.lhs / t.rhs : (t.lhs > 0.0 ? kInf : 0.0);
  return t;
}

ExponentSchedule schedule_exponents(double gamma, double sigma, int j_max) {
  if (gamma == 0.0 || std::fabs(gamma) > 2.0) {
    throw ConfigError("gamma must be nonzero with |gamma| <= 2");
  }
  if (!(sigma > 1.0)) throw ConfigError("sigma must exceed 1");
  if (j_max < 1) throw ConfigError("j_max must be at least 1");
  ExponentSchedule s;
  s.gamma_requested = gamma;
  s.gamma = gamma;
  s.required_gap = 0.5 * (1.0 - 1.0 / sigma);
  auto fill = [&] {
    s.betas.clear();
    s.min_gap = kInf;
    for (int j = 1; j <= j_max; ++j) {
      const double b = s.gamma * std::pow(sigma, j - 1);
      s.betas.push_back(b);
      s.min_gap = std::min(s.min_gap, std::fabs(2.0 * b - 1.0));
    }
  };
  fill();
  if (s.min_gap < s.required_gap * (1.0 - 1e-12) && gamma > 0.0) {
    s.k = static_cast<int>(
        std::floor(std::log(4.0 * gamma / (sigma + 1.0)) / std::log(sigma) +
                   1e-12));
    s.gamma = 0.25 * std::pow(sigma, s.k) * (sigma + 1.0);
    s.shifted = true;
    fill();
  }
  return s;
}

MoserRun moser_iterate(std::span<const double> u, std::span<const double> f,
                       const DistanceField& field, const CutoffSequence& seq,
                       double delta_nu_r, MoserOptions options) {
  check_sizes(field, u, f);
  if (seq.center != field.source) {
    throw ConfigError("cutoff sequence and distance field use different centres");
  }
  if (seq.psi.empty()) throw ConfigError("cutoff sequence is empty");
  if (!(delta_nu_r > 0.0)) throw ConfigError("delta(nu r) must be positive");
  const double sigma = options.sigma;
  MoserRun run;
  run.center = seq.center;
  run.r = seq.r;
  run.nu = seq.nu;
  run.delta_nu_r = delta_nu_r;
  run.schedule = schedule_exponents(options.gamma, sigma,
                                    static_cast<int>(seq.psi.size()));
  run.m_r = lower_shift(seq.r, f, u, options.m);
  const double gamma = run.schedule.gamma;

  std::vector<double> log_ubar(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) {
    const double v = u[n] + run.m_r;
    log_ubar[n] = v > 0.0 ? std::log(v) : -kInf;
  }
  auto require_positive = [&](std::size_t n) {
    if (!(u[n] + run.m_r > 0.0)) {
      throw PositivityError("u + m(r) is not positive at node " +
                            std::to_string(n));
    }
  };

  for (std::size_t j = 0; j < seq.psi.size(); ++j) {
    const double beta = run.schedule.betas[j];
    const auto& support = seq.supports[j];
    std::vector<double> terms;
    terms.reserve(support.size());
    double top = -kInf;
    for (std::size_t n : support) {
      require_positive(n);
      terms.push_back(2.0 * beta * log_ubar[n]);
      top = std::max(top, terms.back());
    }
    if (run.overflow_at == 0 && top > kLogMax) {
      run.overflow_at = static_cast<int>(j + 1);
    }
    const double ln_n = log_mean_exp(terms) / (2.0 * std::pow(sigma, j));
    run.log_N.push_back(ln_n);
    run.N.push_back(safe_exp(ln_n));
  }

  std::vector<double> big;
  double obs = -kInf;
  for (std::size_t n = 0; n < u.size(); ++n) {
    if (member(field, n, seq.r)) {
      require_positive(n);
      big.push_back(2.0 * gamma * log_ubar[n]);
    }
    if (member(field, n, seq.nu * seq.r)) {
      obs = std::max(obs, gamma * log_ubar[n]);
    }
  }
  if (big.empty() || obs == -kInf) throw ConfigError("Moser ball is empty");
  run.log_prefactor = std::log(options.C_sigma) -
                      (1.0 / ((sigma - 1.0) * (sigma - 1.0)) + 1.0) *
                          std::log1p(-seq.nu) -
                      moser_exponent(sigma) * std::log(delta_nu_r / seq.r);
  run.log_sup_estimate = run.log_prefactor + 0.5 * log_mean_exp(big);
  run.log_observed_sup = obs;
  run.sup_estimate = safe_exp(run.log_sup_estimate);
  run.observed_sup = safe_exp(obs);
  run.passed = run.log_observed_sup <= run.log_sup_estimate + 1e-12;
  return run;
}

LogEstimateReport log_estimate(const QuadraticFormField& form,
                               std::span<const double> u,
                               std::span<const double> f,
                               const DistanceField& field, double r,
                               double delta, double m) {
  check_sizes(field, u, f);
  if (!(form.grid == field.grid)) {
    throw ConfigError("form and distance field live on different grids");
  }
  if (!(r > 0.0 && delta > 0.0 && m > 0.0)) {
    throw ConfigError("log_estimate needs r, delta and m positive");
  }
  LogEstimateReport rep;
  rep.r = r;
  rep.delta = delta;
  rep.m = m;
  const GridSpec& g = field.grid;
  std::vector<double> v(g.size(), 0.0);
  rep.floor_ratio = kInf;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double ub = u[n] + m;
    if (member(field, n, r + delta)) {
      if (!(ub > 0.0)) {
        throw PositivityError("u + m is not positive on B(center, r + delta)");
      }
      rep.floor_ratio = std::min(rep.floor_ratio, ub / m);
    }
    v[n] = ub > 0.0 ? std::log(ub) : 0.0;
  }
  rep.near_floor = rep.floor_ratio < 1.01;
  const auto grad = q_gradient(form, v);
  NodeSet b;
  double mean = 0.0;
  double grad_sum = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (member(field, n, r)) {
      b.push_back(n);
      mean += v[n];
      grad_sum += grad[n];
    }
  }
  if (b.empty()) throw ConfigError("log_estimate: empty ball");
  const double count = static_cast<double>(b.size());
  mean /= count;
  rep.gradient_constant = grad_sum / count * delta;
  for (int k = -40; k <= 10; ++k) {
    const double s = std::ldexp(1.0, k);
    std::size_t above = 0;
    std::size_t below = 0;
    for (std::size_t n : b) {
      if (v[n] - mean > s) ++above;
      if (mean - v[n] > s) ++below;
    }
    rep.upper_constant = std::max(
        rep.upper_constant, s * static_cast<double>(above) / count * delta / r);
    rep.lower_constant = std::max(
        rep.lower_constant, s * static_cast<double>(below) / count * delta / r);
  }
  return rep;
}

double log_harnack_constant(double C, double nu0, double r, double delta,
                            double sigma) {
  return std::log(C) +
         2.0 * std::pow(nu0 * r / delta, harnack_exponent(sigma));
}

HarnackReport harnack_check(std::span<const double> u,
                            std::span<const double> f,
                            const DistanceField& field, double r, double nu0,
                            double sigma, double delta_nu0_r, double C_cal,
                            double m_config) {
  check_sizes(field, u, f);
  HarnackReport rep;
  rep.center = field.source;
  rep.r = r;
  rep.nu0 = nu0;
  rep.delta = delta_nu0_r;
  rep.m = lower_shift(r, f, u, m_config);
  rep.sup = -kInf;
  rep.inf = kInf;
  for (std::size_t n = 0; n < u.size(); ++n) {
    if (member(field, n, nu0 * r)) {
      rep.sup = std::max(rep.sup, u[n] + rep.m);
      rep.inf = std::min(rep.inf, u[n] + rep.m);
    }
  }
  if (rep.sup == -kInf) throw ConfigError("Harnack ball is empty");
  rep.quotient = rep.inf > 0.0 ? rep.sup / rep.inf : kInf;
  rep.exponent = harnack_exponent(sigma);
  rep.log_C_har = log_harnack_constant(C_cal, nu0, r, delta_nu0_r, sigma);
  rep.C_har = safe_exp(rep.log_C_har);
  rep.log_slack = std::log(rep.quotient) - rep.log_C_har;
  rep.passed = rep.inf > 0.0 && rep.log_slack <= 1e-12;
  return rep;
}

LocalBoundReport local_bound_check(std::span<const double> u,
                                   std::span<const double> f,
                                   const DistanceField& field, double r,
                                   double nu, double sigma, double delta_nu_r) {
  check_sizes(field, u, f);
  LocalBoundReport rep;
  rep.r = r;
  rep.nu = nu;
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < u.size(); ++n) {
    if (member(field, n, r)) {
      sq += u[n] * u[n];
      ++count;
    }
    if (member(field, n, nu * r)) rep.sup = std::max(rep.sup, std::fabs(u[n]));
  }
  if (count == 0) throw ConfigError("local bound ball is empty");
  rep.l2_mean = std::sqrt(sq / static_cast<double>(count));
  rep.f_term = r * r * sup_abs(f);
  const double bracket = rep.l2_mean + rep.f_term;
  rep.empirical_C = bracket > 0.0 ? rep.sup / bracket : 0.0;
  rep.prefactor = std::pow(delta_nu_r / r, -moser_exponent(sigma));
  rep.scaled_C = rep.empirical_C / rep.prefactor;
  return rep;
}

OscillationCurve oscillation_curve(std::span<const double> u,
                                   std::span<const double> f,
                                   const DistanceField& field,
                                   std::span<const double> radii,
                                   std::span<const double> deltas,
                                   OscillationOptions options) {
  check_sizes(field, u, f);
  if (radii.size() != deltas.size()) {
    throw ConfigError("oscillation_curve: radii and deltas differ in length");
  }
  const double nu0 = options.nu0;
  for (std::size_t k = 1; k < radii.size(); ++k) {
    if (std::fabs(radii[k] - nu0 * radii[k - 1]) > 1e-9 * radii[k - 1]) {
      throw ConfigError("radii must form a chain R, nu0 R, nu0^2 R, ...");
    }
  }
  OscillationCurve c;
  c.f_sup = sup_abs(f);
  const double r_max = field.interior_radius();
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double r = radii[k];
    if (r >= r_max) continue;
    double hi = -kInf;
    double lo = kInf;
    std::size_t count = 0;
    for (std::size_t n = 0; n < u.size(); ++n) {
      if (member(field, n, r)) {
        hi = std::max(hi, u[n]);
        lo = std::min(lo, u[n]);
        ++count;
      }
    }
    if (count < options.min_nodes) break;
    c.radii.push_back(r);
    c.omega.push_back(hi - lo);
    if (!(deltas[k] > 0.0)) {
      // The last pair only needs gamma at its larger radius.
      c.log_C_har.push_back(kNaN);
      c.log_gamma.push_back(kNaN);
      c.log_alpha.push_back(kNaN);
      c.log_product.push_back(kNaN);
      break;
    }
    const double lc = log_harnack_constant(options.C_har, nu0, r, deltas[k],
                                           options.sigma);
    const double t = std::log(2.0) + lc;
    const double lg = std::log1p(-std::exp(-t));
    const double lnla = log_neg_log1m_exp_neg(t);
    c.log_C_har.push_back(lc);
    c.log_gamma.push_back(lg);
    c.log_alpha.push_back(std::log1p(-options.mu) + lnla -
                          std::log(-std::log(nu0)));
    c.log_product.push_back(std::log(std::fabs(std::log(r))) + lnla);
  }
  if (c.radii.size() < 4) {
    throw ChainTooShort("only " + std::to_string(c.radii.size()) +
                        " resolvable radii in the chain (need 4)");
  }
  c.recursion_all = true;
  c.nonincreasing = true;
  for (std::size_t k = 0; k + 1 < c.radii.size(); ++k) {
    const double r = c.radii[k];
    const double rhs = std::exp(c.log_gamma[k]) * c.omega[k] + r * r * c.f_sup;
    const bool ok = c.omega[k + 1] <= rhs + 1e-12 * std::max(1.0, c.omega[k]);
    c.recursion_rhs.push_back(rhs);
    c.recursion_holds.push_back(ok ? 1 : 0);
    c.recursion_all = c.recursion_all && ok;
    if (c.omega[k + 1] > c.omega[k]) c.nonincreasing = false;
  }
  const double R = c.radii.front();
  const double omega_R = c.omega.front();
  for (std::size_t k = 0; k < c.radii.size(); ++k) {
    const double ratio = c.radii[k] / R;
    const double alpha = std::exp(c.log_alpha[k]);
    double second = 0.0;
    if (c.f_sup > 0.0) {
      second = safe_exp(std::log(2.0 * options.C_bound) + c.log_C_har[k] +
                        std::log(R * R * c.f_sup) +
                        2.0 * options.mu * std::log(ratio));
    }
    const double b = options.C_bound * omega_R * std::pow(ratio, alpha) + second;
    c.bound.push_back(b);
    c.bound_holds.push_back(c.omega[k] <= b * (1.0 + 1e-12) ? 1 : 0);
  }
  return c;
}

}  // namespace sublab
