#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sublab/cutoff.hpp"
#include "sublab/forms.hpp"
#include "sublab/metric.hpp"

namespace sublab {

/// min(|(2 beta - 1) / beta|, 1). Throws DomainError at 0 and 1/2.
double mu_beta(double beta);

/// 4 sigma / (sigma - 1) + 1, the exponent of nu0 r / delta in C_Har.
double harnack_exponent(double sigma);

/// sigma / (sigma - 1).
double moser_exponent(double sigma);

/// Lower shift m(r) = r^2 |f|_inf; when f vanishes, the configured m if
/// positive, else 1e-6 |u|_inf (and 1e-6 if u vanishes too).
double lower_shift(double r, std::span<const double> f,
                   std::span<const double> u, double configured_m = 0.0);

struct CaccioppoliTerms {
  double lhs = 0.0;
  double gradient_term = 0.0;
  double source_term = 0.0;
  double rhs = 0.0;
  /// lhs / rhs, 0 when both vanish.
  double ratio = 0.0;
};

/// int psi^2 [grad u^beta]_Q^2 against
/// mu^-2 int u^{2 beta} [grad psi]_Q^2 + mu^-1 |beta| int psi^2 u^{2 beta - 1} |f|.
/// Throws PositivityError if u <= 0 on the closed support of psi.
CaccioppoliTerms caccioppoli_ratio(const QuadraticFormField& form,
                                   std::span<const double> u,
                                   std::span<const double> psi, double beta,
                                   std::span<const double> f);

struct ExponentSchedule {
  double gamma_requested = 0.0;
  double gamma = 0.0;
  bool shifted = false;
  /// Integer k of the shifted exponent sigma^k (sigma + 1) / 4.
  int k = 0;
  std::vector<double> betas;
  double min_gap = 0.0;
  double required_gap = 0.0;
};

/// beta_j = gamma sigma^{j-1}, j = 1 .. j_max. When some |2 beta_j - 1| falls
/// below (1 - 1/sigma)/2, gamma moves down to the largest
/// sigma^k (sigma + 1) / 4 not above it.
ExponentSchedule schedule_exponents(double gamma, double sigma, int j_max);

struct MoserOptions {
  double gamma = 1.0;
  double sigma = 2.0;
  /// Shift used when f vanishes (see lower_shift).
  double m = 0.0;
  double C_sigma = 1.0;
};

struct MoserRun {
  std::size_t center = 0;
  double r = 0.0;
  double nu = 0.0;
  ExponentSchedule schedule;
  double m_r = 0.0;
  /// ln N_j for j = 1 .. J.
  std::vector<double> log_N;
  /// N_j, +inf where it exceeds the double range.
  std::vector<double> N;
  /// First j whose u_j^2 would overflow a double, 0 if none. The ladder is
  /// evaluated in log form, so it continues past this point.
  int overflow_at = 0;
  double delta_nu_r = 0.0;
  double log_prefactor = 0.0;
  double log_sup_estimate = 0.0;
  double log_observed_sup = 0.0;
  double sup_estimate = 0.0;
  double observed_sup = 0.0;
  bool passed = false;
};

/// Moser ladder for u-bar = u + m(r) over the supports of the cutoff
/// sequence, and the bound
///   sup_{B(nu r)} u-bar^gamma <= C_sigma / ((1-nu)^{1/(sigma-1)^2 + 1}
///       (delta(nu r)/r)^{sigma/(sigma-1)}) * (mean_B u-bar^{2 gamma})^{1/2}.
MoserRun moser_iterate(std::span<const double> u, std::span<const double> f,
                       const DistanceField& field, const CutoffSequence& seq,
                       double delta_nu_r, MoserOptions options = {});

struct LogEstimateReport {
  double r = 0.0;
  double delta = 0.0;
  double m = 0.0;
  /// int_B [grad ln u-bar]_Q * delta / |B|.
  double gradient_constant = 0.0;
  /// max_s s |{v - <v>_B > s}| delta / (r |B|) over s = 2^k.
  double upper_constant = 0.0;
  /// max_s s |{<v>_B - v > s}| delta / (r |B|).
  double lower_constant = 0.0;
  /// min over B(r + delta) of u-bar / m.
  double floor_ratio = 0.0;
  bool near_floor = false;
};

/// Empirical constants of the weak logarithmic estimates on B(center, r).
/// Throws PositivityError when u-bar <= 0 on B(center, r + delta).
LogEstimateReport log_estimate(const QuadraticFormField& form,
                               std::span<const double> u,
                               std::span<const double> f,
                               const DistanceField& field, double r,
                               double delta, double m);

struct HarnackReport {
  std::size_t center = 0;
  double r = 0.0;
  double nu0 = 0.5;
  double m = 0.0;
  double sup = 0.0;
  double inf = 0.0;
  double quotient = 1.0;
  double delta = 0.0;
  double exponent = 0.0;
  /// ln C_Har(r) = ln C + 2 (nu0 r / delta)^exponent.
  double log_C_har = 0.0;
  /// C_Har(r), +inf when it exceeds the double range.
  double C_har = 0.0;
  /// ln quotient - ln C_Har.
  double log_slack = 0.0;
  bool passed = false;
};

/// ln C_Har(r) for delta = delta(nu0 r).
double log_harnack_constant(double C, double nu0, double r, double delta,
                            double sigma);

/// sup / inf of u-bar over B(center, nu0 r) against C_Har(r).
HarnackReport harnack_check(std::span<const double> u,
                            std::span<const double> f,
                            const DistanceField& field, double r, double nu0,
                            double sigma, double delta_nu0_r, double C_cal,
                            double m_config = 0.0);

struct LocalBoundReport {
  double r = 0.0;
  double nu = 0.5;
  double sup = 0.0;
  double l2_mean = 0.0;
  double f_term = 0.0;
  /// sup / (l2_mean + f_term).
  double empirical_C = 0.0;
  /// (delta(nu r)/r)^{-sigma/(sigma-1)}.
  double prefactor = 0.0;
  /// empirical_C / prefactor.
  double scaled_C = 0.0;
};

/// |u|_inf on B(nu r) against (mean_B u^2)^{1/2} + r^2 |f|_inf.
LocalBoundReport local_bound_check(std::span<const double> u,
                                   std::span<const double> f,
                                   const DistanceField& field, double r,
                                   double nu, double sigma, double delta_nu_r);

struct OscillationOptions {
  double nu0 = 0.5;
  double mu = 0.5;
  double sigma = 2.0;
  /// Constant C inside C_Har.
  double C_har = 1.0;
  /// Constant C in front of both terms of the Hoelder-type bound.
  double C_bound = 1.0;
  std::size_t min_nodes = 9;
};

struct OscillationCurve {
  std::vector<double> radii;
  std::vector<double> omega;
  std::vector<double> log_C_har;
  /// ln gamma(r), gamma(r) = 1 - 1/(2 C_Har(r)).
  std::vector<double> log_gamma;
  /// ln alpha(r), alpha(r) = (1 - mu) ln gamma(r) / ln nu0.
  std::vector<double> log_alpha;
  /// ln |ln r * ln gamma(r)|.
  std::vector<double> log_product;
  /// Right side of omega(nu0 r) <= gamma(r) omega(r) + r^2 |f|_inf, per pair.
  std::vector<double> recursion_rhs;
  std::vector<std::uint8_t> recursion_holds;
  /// C omega(R) (r/R)^alpha + 2 C C_Har(r) R^2 |f|_inf (r/R)^{2 mu}.
  std::vector<double> bound;
  std::vector<std::uint8_t> bound_holds;
  double f_sup = 0.0;
  bool recursion_all = false;
  bool nonincreasing = false;
};

/// Oscillation of u over the chain R, nu0 R, nu0^2 R, ... centred at the
/// field source. deltas[k] = delta(nu0 radii[k]); a non-positive or NaN entry
/// ends the chain at that radius, whose gamma, alpha and bound are NaN. Throws
/// ChainTooShort when fewer than 4 radii hold min_nodes nodes inside the grid.
OscillationCurve oscillation_curve(std::span<const double> u,
                                   std::span<const double> f,
                                   const DistanceField& field,
                                   std::span<const double> radii,
                                   std::span<const double> deltas,
                                   OscillationOptions options = {});

}  // namespace sublab
