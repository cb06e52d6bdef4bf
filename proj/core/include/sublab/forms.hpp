#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sublab/grid.hpp"

namespace sublab {

enum class ProfileKind { constant, power, exponential, paper_model };

std::string to_string(ProfileKind kind);
ProfileKind profile_kind_from_string(const std::string& name);

struct QuadratureConfig {
  /// Relative tolerance per panel of the adaptive Gauss-Kronrod rule.
  double tolerance = 1e-12;
  unsigned max_depth = 20;
  /// Panel width of the cached partition, in the log variable s = ln t.
  double log_step = 0.25;
  /// Smallest ln x covered by the eager cache; below it panels are
  /// integrated on demand.
  double log_floor = -700.0;
};

struct ProfileSample {
  double x;
  double f;
  double log_f;
};

/// Even degeneracy profile f(x) >= 0 with f(x) > 0 for x != 0.
///
/// The paper_model kind is f(x) = exp(-int_x^cap dt / (t h(t))), evaluated in
/// the log variable s = ln t where the integrand 1/h(e^s) is bounded. The
/// integral from every cached panel endpoint up to the cap is built once at
/// construction; instances are immutable afterwards.
class DegeneracyProfile {
 public:
  static DegeneracyProfile constant(double c);
  static DegeneracyProfile power(double k);
  static DegeneracyProfile exponential(double a);
  static DegeneracyProfile paper_model(double lambda, double domain_cap = 0.9,
                                       QuadratureConfig quadrature = {});

  ProfileKind kind() const { return kind_; }
  /// c, k, a or lambda depending on the kind.
  double parameter() const { return parameter_; }
  /// Upper endpoint of |x| for paper_model; +inf otherwise.
  double domain_cap() const { return domain_cap_; }
  const QuadratureConfig& quadrature() const { return quadrature_; }

  /// f(|x|). Throws DomainError for paper_model when |x| > domain_cap.
  double operator()(double x) const;
  /// ln f(|x|); -inf where f vanishes.
  double log_value(double x) const;
  /// ln f(x) for x = exp(log_x) > 0, usable far below the double range of x.
  double log_value_from_log(double log_x) const;

  /// Monotone sample table used for CSV export and monotonicity audits.
  const std::vector<ProfileSample>& cache() const { return cache_; }

  std::string describe() const;

 private:
  DegeneracyProfile(ProfileKind kind, double parameter, double cap,
                    QuadratureConfig quadrature);
  void build_cache();
  double integral_to_cap(double log_x) const;

  ProfileKind kind_;
  double parameter_;
  double domain_cap_;
  QuadratureConfig quadrature_;
  std::vector<double> panel_log_x_;     // s_k = ln(cap) - k * log_step
  std::vector<double> panel_integral_;  // int_{s_k}^{ln cap} ds / h(e^s)
  std::vector<ProfileSample> cache_;
};

/// h(x) = (-1 / ln(1 - exp((ln x)^(-1/3))))^(1/lambda) with the real cube
/// root of ln x < 0. Requires 0 < x < domain_cap and lambda > 1.
double eval_h(double x, double lambda, double domain_cap = 0.9);
/// Same as eval_h, parameterised by ln x so that x may underflow a double.
double eval_h_from_log(double log_x, double lambda);
/// Alias for profile(x).
double eval_f(double x, const DegeneracyProfile& profile);
/// lambda = (5 sigma - 1) / (sigma - 1).
double lambda_from_sigma(double sigma);

/// Diagonal form Q = diag(q11, q22) sampled on a grid.
struct QuadraticFormField {
  GridSpec grid;
  std::vector<double> q11;
  std::vector<double> q22;
  double k_lower = 1.0;
  double K_upper = 1.0;
  /// Grid columns where q22 is exactly zero.
  std::vector<std::size_t> zero_columns;
  /// Largest |x| among the zero columns (0 when only the axis vanishes).
  double underflow_radius = 0.0;
};

/// q11 = 1 and q22 = f(x)^2 at every node.
QuadraticFormField assemble_form(const DegeneracyProfile& profile,
                                 const GridSpec& grid);

enum class ModulationKind { constant, two_plus_tanh, two_plus_sin, affine, step };

std::string to_string(ModulationKind kind);
ModulationKind modulation_kind_from_string(const std::string& name);

/// The scalar phi(z) multiplying the degenerate entry of A(x, z), together
/// with its declared bounds lower <= phi <= upper.
struct Modulation {
  ModulationKind kind = ModulationKind::constant;
  double a = 1.0;  // constant value, affine intercept, or value below threshold
  double b = 0.0;  // affine slope or value above threshold
  double threshold = 0.0;
  double lower = 1.0;
  double upper = 1.0;

  double operator()(double z) const;
  bool operator==(const Modulation&) const = default;

  static Modulation constant(double c);
  static Modulation two_plus_tanh();
  static Modulation two_plus_sin();
  static Modulation affine(double intercept, double slope, double lower,
                           double upper);
  static Modulation step(double below, double above, double threshold);
};

/// A(x, z) = diag(q11(x), phi(z) q22(x)). With lower <= 1 <= upper this
/// satisfies lower * Q <= A <= upper * Q.
class QuasilinearEnvelope {
 public:
  QuasilinearEnvelope(QuadraticFormField base, Modulation phi);

  const QuadraticFormField& base() const { return base_; }
  const Modulation& phi() const { return phi_; }
  double k() const { return phi_.lower; }
  double K() const { return phi_.upper; }

  double a11(std::size_t node, double /*z*/) const { return base_.q11[node]; }
  double a22(std::size_t node, double z) const {
    return phi_(z) * base_.q22[node];
  }

 private:
  QuadraticFormField base_;
  Modulation phi_;
};

struct EnvelopeSample {
  std::size_t node;
  double z;
};

struct EnvelopeReport {
  double max_violation = 0.0;
  std::size_t violating_samples = 0;
  /// Samples where xi^T A xi < 0 for some probe direction.
  std::size_t indefinite_samples = 0;
  std::size_t samples = 0;
};

/// Checks k xi^T Q xi <= xi^T A xi <= K xi^T Q xi over axis and diagonal
/// probe directions.
EnvelopeReport envelope_check(const QuasilinearEnvelope& env,
                              std::span<const EnvelopeSample> samples);

}  // namespace sublab
