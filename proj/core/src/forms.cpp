#include "sublab/forms.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "sublab/error.hpp"

namespace sublab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_h_integrand(double s, double lambda) {
  // 1 / h(e^s) for s < 0.
  return 1.0 / eval_h_from_log(s, lambda);
}

double gk_integrate(double lambda, double a, double b,
                    const QuadratureConfig& q) {
  if (a == b) return 0.0;
  double error = 0.0;
  double l1 = 0.0;
  auto integrand = [lambda](double s) { return log_h_integrand(s, lambda); };
  // The embedded error estimate is unreliable on slivers far narrower than a
  // panel, where one 21-point pass integrates the smooth integrand exactly.
  const bool sliver = (b - a) < 1e-2 * q.log_step;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
          integrand, a, b, sliver ? 0 : q.max_depth, q.tolerance, &error, &l1);
  if (!std::isfinite(value) ||
      (!sliver && error > q.tolerance * std::max(l1, 1e-300) * 10.0)) {
    std::ostringstream os;
    os << "adaptive Gauss-Kronrod failed on [" << a << ", " << b
       << "]: error estimate " << error << " for |integral| " << l1;
    throw QuadratureError(os.str());
  }
  return value;
}

}  // namespace

std::string to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::constant: return "constant";
    case ProfileKind::power: return "power";
    case ProfileKind::exponential: return "exponential";
    case ProfileKind::paper_model: return "paper_model";
  }
  return "unknown";
}

ProfileKind profile_kind_from_string(const std::string& name) {
  if (name == "constant") return ProfileKind::constant;
  if (name == "power") return ProfileKind::power;
  if (name == "exponential") return ProfileKind::exponential;
  if (name == "paper_model") return ProfileKind::paper_model;
  throw ConfigError("unknown profile kind '" + name + "'");
}

double eval_h_from_log(double log_x, double lambda) {
  if (!(lambda > 1.0)) throw DomainError("h requires lambda > 1");
  if (!(log_x < 0.0) || std::isnan(log_x)) {
    throw DomainError("h requires 0 < x < 1");
  }
  // (ln x)^(-1/3) is negative; exp of it lies in (0, 1).
  const double inv_cbrt = 1.0 / std::cbrt(-log_x);
  const double one_minus = -std::expm1(-inv_cbrt);  // 1 - exp(-|ln x|^(-1/3))
  const double inner = std::log(one_minus);          // < 0
  const double base = -1.0 / inner;
  const double h = std::pow(base, 1.0 / lambda);
  if (!std::isfinite(h) || !(h > 0.0)) {
    throw DomainError("h is not finite at ln x = " + std::to_string(log_x));
  }
  return h;
}

double eval_h(double x, double lambda, double domain_cap) {
  if (!(x > 0.0) || !(x < domain_cap)) {
    throw DomainError("h is evaluated on (0, domain_cap); got x = " +
                      std::to_string(x));
  }
  return eval_h_from_log(std::log(x), lambda);
}

double lambda_from_sigma(double sigma) {
  if (!(sigma > 1.0)) throw DomainError("sigma must exceed 1");
  return (5.0 * sigma - 1.0) / (sigma - 1.0);
}

DegeneracyProfile::DegeneracyProfile(ProfileKind kind, double parameter,
                                     double cap, QuadratureConfig quadrature)
    : kind_(kind),
      parameter_(parameter),
      domain_cap_(cap),
      quadrature_(quadrature) {}

DegeneracyProfile DegeneracyProfile::constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ConfigError("constant profile needs c > 0");
  }
  DegeneracyProfile p(ProfileKind::constant, c, kInf, {});
  p.build_cache();
  return p;
}

DegeneracyProfile DegeneracyProfile::power(double k) {
  if (!(k >= 0.0) || !std::isfinite(k)) {
    throw ConfigError("power profile needs k >= 0");
  }
  DegeneracyProfile p(ProfileKind::power, k, kInf, {});
  p.build_cache();
  return p;
}

DegeneracyProfile DegeneracyProfile::exponential(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw ConfigError("exponential profile needs a > 0");
  }
  DegeneracyProfile p(ProfileKind::exponential, a, kInf, {});
  p.build_cache();
  return p;
}

DegeneracyProfile DegeneracyProfile::paper_model(double lambda,
                                                 double domain_cap,
                                                 QuadratureConfig quadrature) {
  if (!(lambda > 1.0)) throw ConfigError("paper_model needs lambda > 1");
  if (!(domain_cap > 0.0 && domain_cap < 1.0)) {
    throw ConfigError("paper_model domain_cap must lie in (0, 1)");
  }
  if (!(quadrature.tolerance > 0.0) || !(quadrature.log_step > 0.0)) {
    throw ConfigError("quadrature tolerance and log_step must be positive");
  }
  DegeneracyProfile p(ProfileKind::paper_model, lambda, domain_cap, quadrature);
  const double s_cap = std::log(domain_cap);
  p.panel_log_x_.push_back(s_cap);
  p.panel_integral_.push_back(0.0);
  for (double s = s_cap - quadrature.log_step; s > quadrature.log_floor;
       s -= quadrature.log_step) {
    const double prev = p.panel_log_x_.back();
    p.panel_integral_.push_back(p.panel_integral_.back() +
                                gk_integrate(lambda, s, prev, quadrature));
    p.panel_log_x_.push_back(s);
  }
  p.build_cache();
  return p;
}

double DegeneracyProfile::integral_to_cap(double log_x) const {
  const double s_cap = panel_log_x_.front();
  if (log_x >= s_cap) return 0.0;
  const double step = quadrature_.log_step;
  auto k = static_cast<std::size_t>((s_cap - log_x) / step);
  k = std::min(k, panel_log_x_.size() - 1);
  // Guard against rounding in the index computation.
  while (k > 0 && panel_log_x_[k] < log_x) --k;
  double total = panel_integral_[k];
  double upper = panel_log_x_[k];
  // Below the cache: integrate panel by panel on demand.
  while (upper - log_x > step) {
    total += gk_integrate(parameter_, upper - step, upper, quadrature_);
    upper -= step;
  }
  total += gk_integrate(parameter_, log_x, upper, quadrature_);
  return total;
}

double DegeneracyProfile::log_value_from_log(double log_x) const {
  switch (kind_) {
    case ProfileKind::constant: return std::log(parameter_);
    case ProfileKind::power: return parameter_ * log_x;
    case ProfileKind::exponential: return -parameter_ / std::exp(log_x);
    case ProfileKind::paper_model:
      if (log_x > std::log(domain_cap_) + 1e-15) {
        throw DomainError("paper_model evaluated beyond domain_cap");
      }
      return -integral_to_cap(log_x);
  }
  return 0.0;
}

double DegeneracyProfile::log_value(double x) const {
  const double ax = std::fabs(x);
  if (kind_ == ProfileKind::paper_model && ax > domain_cap_) {
    throw DomainError("paper_model evaluated at |x| = " + std::to_string(ax) +
                      " beyond domain_cap " + std::to_string(domain_cap_));
  }
  if (ax == 0.0) {
    if (kind_ == ProfileKind::constant) return std::log(parameter_);
    if (kind_ == ProfileKind::power && parameter_ == 0.0) return 0.0;
    return -kInf;
  }
  if (kind_ == ProfileKind::paper_model && ax == domain_cap_) return 0.0;
  return log_value_from_log(std::log(ax));
}

double DegeneracyProfile::operator()(double x) const {
  const double ax = std::fabs(x);
  switch (kind_) {
    case ProfileKind::constant: return parameter_;
    case ProfileKind::power: return std::pow(ax, parameter_);
    case ProfileKind::exponential:
      return ax == 0.0 ? 0.0 : std::exp(-parameter_ / ax);
    case ProfileKind::paper_model: return std::exp(log_value(ax));
  }
  return 0.0;
}

void DegeneracyProfile::build_cache() {
  cache_.clear();
  const double top = kind_ == ProfileKind::paper_model ? domain_cap_ : 1.0;
  // 48 log-spaced samples per decade over 12 decades, plus the origin.
  cache_.push_back({0.0, (*this)(0.0), log_value(0.0)});
  const int per_decade = 48;
  const int decades = 12;
  for (int k = per_decade * decades; k >= 0; --k) {
    const double x = top * std::pow(10.0, -static_cast<double>(k) / per_decade);
    cache_.push_back({x, (*this)(x), log_value(x)});
  }
}

std::string DegeneracyProfile::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << "(" << parameter_ << ")";
  return os.str();
}

double eval_f(double x, const DegeneracyProfile& profile) { return profile(x); }

QuadraticFormField assemble_form(const DegeneracyProfile& profile,
                                 const GridSpec& grid) {
  grid.validate();
  const double reach = std::max(std::fabs(grid.x0), std::fabs(grid.x1));
  if (reach > profile.domain_cap()) {
    throw DomainError("grid x-range exceeds the profile domain_cap");
  }
  QuadraticFormField form;
  form.grid = grid;
  form.q11.assign(grid.size(), 1.0);
  form.q22.assign(grid.size(), 0.0);
  std::vector<double> column(grid.nx);
  for (std::size_t i = 0; i < grid.nx; ++i) {
    const double lf = profile.log_value(grid.x(i));
    column[i] = std::exp(2.0 * lf);
    if (column[i] == 0.0) {
      form.zero_columns.push_back(i);
      form.underflow_radius =
          std::max(form.underflow_radius, std::fabs(grid.x(i)));
    }
  }
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t i = 0; i < grid.nx; ++i) {
      form.q22[grid.index(i, j)] = column[i];
    }
  }
  return form;
}

std::string to_string(ModulationKind kind) {
  switch (kind) {
    case ModulationKind::constant: return "constant";
    case ModulationKind::two_plus_tanh: return "two_plus_tanh";
    case ModulationKind::two_plus_sin: return "two_plus_sin";
    case ModulationKind::affine: return "affine";
    case ModulationKind::step: return "step";
  }
  return "unknown";
}

ModulationKind modulation_kind_from_string(const std::string& name) {
  if (name == "constant") return ModulationKind::constant;
  if (name == "two_plus_tanh") return ModulationKind::two_plus_tanh;
  if (name == "two_plus_sin") return ModulationKind::two_plus_sin;
  if (name == "affine") return ModulationKind::affine;
  if (name == "step") return ModulationKind::step;
  throw ConfigError("unknown modulation kind '" + name + "'");
}

double Modulation::operator()(double z) const {
  switch (kind) {
    case ModulationKind::constant: return a;
    case ModulationKind::two_plus_tanh: return 2.0 + std::tanh(z);
    case ModulationKind::two_plus_sin: return 2.0 + std::sin(z);
    case ModulationKind::affine: return a + b * z;
    case ModulationKind::step: return z < threshold ? a : b;
  }
  return a;
}

Modulation Modulation::constant(double c) {
  return {ModulationKind::constant, c, 0.0, 0.0, std::min(c, 1.0),
          std::max(c, 1.0)};
}

Modulation Modulation::two_plus_tanh() {
  return {ModulationKind::two_plus_tanh, 0.0, 0.0, 0.0, 1.0, 3.0};
}

Modulation Modulation::two_plus_sin() {
  return {ModulationKind::two_plus_sin, 0.0, 0.0, 0.0, 1.0, 3.0};
}

Modulation Modulation::affine(double intercept, double slope, double lower,
                              double upper) {
  return {ModulationKind::affine, intercept, slope, 0.0, lower, upper};
}

Modulation Modulation::step(double below, double above, double threshold) {
  return {ModulationKind::step, below, above, threshold,
          std::min({below, above, 1.0}), std::max({below, above, 1.0})};
}

QuasilinearEnvelope::QuasilinearEnvelope(QuadraticFormField base,
                                         Modulation phi)
    : base_(std::move(base)), phi_(phi) {
  if (!(phi_.lower > 0.0) || !(phi_.upper >= phi_.lower) ||
      !std::isfinite(phi_.upper)) {
    throw ConfigError("modulation bounds must satisfy 0 < lower <= upper");
  }
  if (phi_.lower > 1.0 || phi_.upper < 1.0) {
    // The q11 entry is not modulated, so the bounds must bracket 1.
    throw ConfigError("modulation bounds must bracket 1");
  }
}

EnvelopeReport envelope_check(const QuasilinearEnvelope& env,
                              std::span<const EnvelopeSample> samples) {
  if (samples.empty()) throw ConfigError("envelope_check needs samples");
  static constexpr std::array<std::array<double, 2>, 4> probes{
      {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {1.0, -1.0}}};
  EnvelopeReport report;
  report.samples = samples.size();
  const auto& q = env.base();
  for (const auto& s : samples) {
    if (s.node >= q.grid.size()) throw ConfigError("sample node out of range");
    const double q11 = q.q11[s.node];
    const double q22 = q.q22[s.node];
    const double a11 = env.a11(s.node, s.z);
    const double a22 = env.a22(s.node, s.z);
    double worst = 0.0;
    bool indefinite = false;
    for (const auto& xi : probes) {
      const double qq = q11 * xi[0] * xi[0] + q22 * xi[1] * xi[1];
      const double aa = a11 * xi[0] * xi[0] + a22 * xi[1] * xi[1];
      if (aa < 0.0) indefinite = true;
      worst = std::max({worst, env.k() * qq - aa, aa - env.K() * qq});
    }
    if (worst > 0.0) ++report.violating_samples;
    if (indefinite) ++report.indefinite_samples;
    report.max_violation = std::max(report.max_violation, worst);
  }
  return report;
}

}  // namespace sublab
