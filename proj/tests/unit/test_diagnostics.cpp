#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "sublab/cutoff.hpp"
#include "sublab/diagnostics.hpp"
#include "sublab/error.hpp"

using namespace sublab;
using namespace sublab::testing;

namespace {

GridSpec around(double cx, double cy, double half, std::size_t n) {
  return GridSpec{cx - half, cx + half, cy - half, cy + half, n, n};
}

std::vector<double> affine(const GridSpec& g, double a, double c) {
  std::vector<double> u(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) u[n] = a * g.node_x(n) + c;
  return u;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("mu beta values") {
  CHECK(mu_beta(1.0) == 1.0);
  CHECK(mu_beta(0.4) == doctest::Approx(0.5));
  CHECK(mu_beta(-1.0) == 1.0);
  CHECK_THROWS_AS(mu_beta(0.0), DomainError);
  CHECK_THROWS_AS(mu_beta(0.5), DomainError);
}

TEST_CASE("mu beta lies in the unit interval and dips at one half") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> pick(-5.0, 5.0);
  for (int k = 0; k < 1000; ++k) {
    const double b = pick(rng);
    if (b == 0.0 || b == 0.5) continue;
    const double m = mu_beta(b);
    CHECK(m > 0.0);
    CHECK(m <= 1.0);
    if (b >= 1.0 || b < 0.0) CHECK(m == 1.0);
  }
  double left = 1.0;
  double right = 1.0;
  for (double t = 0.1; t > 1e-6; t /= 10.0) {
    CHECK(mu_beta(0.5 - t) < left);
    CHECK(mu_beta(0.5 + t) < right);
    left = mu_beta(0.5 - t);
    right = mu_beta(0.5 + t);
  }
  CHECK(left < 1e-4);
  CHECK(right < 1e-4);
}

TEST_CASE("harnack and moser exponents at sigma two") {
  CHECK(harnack_exponent(2.0) == 9.0);
  CHECK(moser_exponent(2.0) == 2.0);
  CHECK(harnack_exponent(3.0) == 7.0);
}

TEST_CASE("harnack constant grows as the order shrinks") {
  CHECK(log_harnack_constant(1.0, 0.5, 0.4, 0.2, 2.0) == doctest::Approx(2.0));
  CHECK(log_harnack_constant(3.0, 0.5, 0.4, 0.2, 2.0) ==
        doctest::Approx(std::log(3.0) + 2.0));
  double previous = 0.0;
  for (double ratio = 1.0; ratio > 1e-3; ratio /= 2.0) {
    const double lc = log_harnack_constant(1.0, 0.5, 1.0, ratio, 2.0);
    CHECK(lc > previous);
    previous = lc;
  }
  CHECK(previous > 1e20);
}

TEST_CASE("lower shift follows the right-hand side and falls back") {
  const std::vector<double> f{0.0, -3.0, 1.0};
  const std::vector<double> zero(3, 0.0);
  const std::vector<double> u{2.0, -4.0, 1.0};
  CHECK(lower_shift(0.5, f, u) == doctest::Approx(0.75));
  CHECK(lower_shift(0.5, zero, u, 0.2) == 0.2);
  CHECK(lower_shift(0.5, zero, u) == doctest::Approx(4e-6));
  CHECK(lower_shift(0.5, zero, zero) == doctest::Approx(1e-6));
}

TEST_CASE("exponent schedule avoids the singular exponent") {
  const auto plain = schedule_exponents(1.0, 2.0, 12);
  CHECK_FALSE(plain.shifted);
  CHECK(plain.betas.size() == 12);
  CHECK(plain.betas[3] == 8.0);
  // 1/2 sigma^-3 puts beta_4 exactly at 1/2.
  const auto shifted = schedule_exponents(0.5 / 8.0, 2.0, 12);
  CHECK(shifted.shifted);
  CHECK(shifted.k == -4);
  CHECK(shifted.gamma == doctest::Approx(std::pow(2.0, -4) * 3.0 / 4.0));
  CHECK(shifted.gamma <= shifted.gamma_requested);
  CHECK(shifted.min_gap >= shifted.required_gap * (1.0 - 1e-12));
  CHECK_THROWS_AS(schedule_exponents(0.0, 2.0, 12), ConfigError);
  CHECK_THROWS_AS(schedule_exponents(1.0, 1.0, 12), ConfigError);
}

TEST_CASE("every scheduled exponent keeps its distance from one half") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> gamma(1e-4, 2.0);
  for (double sigma : {1.5, 2.0, 3.0}) {
    for (int k = 0; k < 300; ++k) {
      const auto s = schedule_exponents(gamma(rng), sigma, 12);
      for (double b : s.betas) {
        CHECK(std::fabs(2.0 * b - 1.0) >= s.required_gap * (1.0 - 1e-12));
      }
    }
  }
}

TEST_CASE("caccioppoli ratio of a constant is zero") {
  const auto form = grushin(box(0.6, 0.6, 65));
  const auto field = limit_distance(form, 0.3, 0.0);
  const auto seq = build_sequence(form, field, 0.2, 0.5, 0.05, 3);
  const std::vector<double> u(form.grid.size(), 2.0);
  const auto t = caccioppoli_ratio(form, u, seq.psi[0], 1.0, {});
  CHECK(t.lhs == 0.0);
  CHECK(t.rhs > 0.0);
  CHECK(t.ratio == 0.0);
  CHECK_THROWS_AS(caccioppoli_ratio(form, u, seq.psi[0], 0.5, {}), DomainError);
  const auto negative = affine(form.grid, 1.0, -0.3);
  CHECK_THROWS_AS(caccioppoli_ratio(form, negative, seq.psi[0], 1.0, {}),
                  PositivityError);
}

TEST_CASE("caccioppoli ratio of the affine solution is stable under refinement") {
  std::vector<double> ratios;
  for (std::size_t n : {129u, 257u}) {
    const auto form = grushin(box(0.6, 0.6, n));
    const auto field = limit_distance(form, 0.3, 0.0);
    const auto seq = build_sequence(form, field, 0.2, 0.5, 0.05, 3);
    const auto u = affine(form.grid, 1.0, 2.0);
    const auto t = caccioppoli_ratio(form, u, seq.psi[0], 1.0, {});
    CHECK(std::isfinite(t.ratio));
    CHECK(t.ratio > 0.0);
    ratios.push_back(t.ratio);
  }
  CHECK(ratios[1] == doctest::Approx(ratios[0]).epsilon(0.2));
}

TEST_CASE("moser ladder of a constant") {
  const auto form = grushin(box(0.6, 0.6, 97));
  const auto field = limit_distance(form, 0.3, 0.0);
  const auto seq = build_sequence(form, field, 0.2, 0.5, 0.03, 12);
  const std::vector<double> u(form.grid.size(), 3.0);
  MoserOptions opt;
  opt.m = 1.0;
  const auto run = moser_iterate(u, {}, field, seq, 0.01, opt);
  CHECK(run.m_r == 1.0);
  REQUIRE(run.log_N.size() == seq.size());
  for (double ln : run.log_N) CHECK(ln == doctest::Approx(std::log(4.0)));
  CHECK(run.passed);
  // 4^(2 * 2^8) sits at the edge of the double range; the log form continues.
  CHECK(run.overflow_at >= 9);
  CHECK(run.overflow_at <= 10);
}

TEST_CASE("moser ladder of the affine solution stays finite and bounded") {
  const auto form = grushin(around(1.0, 0.0, 0.5, 129));
  const auto field = limit_distance(form, 1.0, 0.0);
  const double r = 0.3;
  const auto seq = build_sequence(form, field, r, 0.5, 0.04, 12);
  const auto u = affine(form.grid, 1.0, 2.0);
  const auto run = moser_iterate(u, {}, field, seq, 0.02, {});
  CHECK(run.log_N.size() == seq.size());
  for (double ln : run.log_N) CHECK(std::isfinite(ln));
  CHECK(run.log_observed_sup <= run.log_sup_estimate);
  CHECK(run.passed);
  CHECK_THROWS_AS(moser_iterate(u, {}, field, seq, 0.0, {}), ConfigError);
}

TEST_CASE("log estimates of a constant vanish") {
  const auto form = grushin(box(0.6, 0.6, 65));
  const auto field = limit_distance(form, 0.3, 0.0);
  const std::vector<double> u(form.grid.size(), 2.0);
  const auto rep = log_estimate(form, u, {}, field, 0.2, 0.03, 1e-6);
  CHECK(rep.gradient_constant == 0.0);
  CHECK(rep.upper_constant == 0.0);
  CHECK(rep.lower_constant == 0.0);
  CHECK_FALSE(rep.near_floor);
}

TEST_CASE("log estimates flag a solution touching the shift") {
  const auto form = grushin(box(0.6, 0.6, 65));
  const auto field = limit_distance(form, 0.3, 0.0);
  std::vector<double> u(form.grid.size());
  const double xc = form.grid.node_x(field.source);
  for (std::size_t n = 0; n < u.size(); ++n) u[n] = std::fabs(form.grid.node_x(n) - xc);
  const auto rep = log_estimate(form, u, {}, field, 0.2, 0.03, 1e-3);
  CHECK(rep.near_floor);
  CHECK(rep.floor_ratio == doctest::Approx(1.0));
  CHECK(std::isfinite(rep.gradient_constant));
  CHECK(std::isfinite(rep.upper_constant));
  CHECK(std::isfinite(rep.lower_constant));
  const auto shifted = affine(form.grid, 1.0, -0.5);
  CHECK_THROWS_AS(log_estimate(form, shifted, {}, field, 0.2, 0.03, 1e-3),
                  PositivityError);
}

TEST_CASE("log estimates of a scale invariant solution are stable across radii") {
  // u = (x - 1)^2 solves the model equation with f = 2 and its logarithm is
  // self-similar around (1, 0).
  const auto form = grushin(around(1.0, 0.0, 0.5, 321));
  const auto field = limit_distance(form, 1.0, 0.0);
  std::vector<double> u(form.grid.size());
  for (std::size_t n = 0; n < u.size(); ++n) {
    const double d = form.grid.node_x(n) - 1.0;
    u[n] = d * d;
  }
  const std::vector<double> f(form.grid.size(), 2.0);
  const std::vector<double> radii{0.3, 0.15, 0.075};
  auto analytics = volume_curve(field, radii);
  complete_analytics(analytics);
  std::vector<double> grad, upper, lower;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double r = radii[k];
    const auto rep = log_estimate(form, u, f, field, r, analytics.deltas[k],
                                  lower_shift(r, f, u));
    grad.push_back(rep.gradient_constant);
    upper.push_back(rep.upper_constant);
    lower.push_back(rep.lower_constant);
  }
  for (const auto* series : {&grad, &upper, &lower}) {
    const double mean = std::accumulate(series->begin(), series->end(), 0.0) /
                        static_cast<double>(series->size());
    CHECK(mean > 0.0);
    for (double v : *series) CHECK(v == doctest::Approx(mean).epsilon(0.25));
  }
}

TEST_CASE("harnack quotient of constants and affine functions") {
  const auto form = grushin(around(1.0, 0.0, 0.5, 201));
  const auto field = limit_distance(form, 1.0, 0.0);
  const std::vector<double> one(form.grid.size(), 1.0);
  const auto flat = harnack_check(one, {}, field, 0.3, 0.5, 2.0, 0.05, 1.0);
  CHECK(flat.quotient == doctest::Approx(1.0));
  CHECK(flat.passed);
  CHECK(flat.exponent == 9.0);

  const auto u = affine(form.grid, 1.0, 2.0);
  const auto rep = harnack_check(u, {}, field, 0.3, 0.5, 2.0, 0.05, 1.0);
  // B(1, 0.15) spans x in (0.85, 1.15) near the axis y = 0.
  const double m = rep.m;
  const double expected = (1.15 + 2.0 + m) / (0.85 + 2.0 + m);
  CHECK(rep.quotient == doctest::Approx(expected).epsilon(2.0 * form.grid.hx()));
  CHECK(rep.passed);
  CHECK(rep.log_C_har == doctest::Approx(2.0 * std::pow(3.0, 9.0)));
}

TEST_CASE("local bound of a constant is one") {
  const auto form = grushin(box(0.6, 0.6, 65));
  const auto field = limit_distance(form, 0.3, 0.0);
  const std::vector<double> u(form.grid.size(), 2.5);
  const auto rep = local_bound_check(u, {}, field, 0.2, 0.5, 2.0, 0.01);
  CHECK(rep.empirical_C == doctest::Approx(1.0));
  CHECK(rep.prefactor == doctest::Approx(std::pow(0.05, -2.0)));
}

TEST_CASE("oscillation of an affine function halves down the chain") {
  const auto form = euclidean(box(1.0, 1.0, 257));
  const auto field = limit_distance(form, 0.0, 0.0);
  const std::vector<double> radii{0.4, 0.2, 0.1, 0.05};
  std::vector<double> deltas;
  for (double r : radii) deltas.push_back(0.118 * 0.5 * r);
  const auto u = affine(form.grid, 1.0, 2.0);
  const auto c = oscillation_curve(u, {}, field, radii, deltas, {});
  REQUIRE(c.radii.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(c.omega[k] == doctest::Approx(2.0 * radii[k]).epsilon(0.1));
  }
  CHECK(c.recursion_all);
  CHECK(c.nonincreasing);
  for (double la : c.log_alpha) CHECK(std::isfinite(la));
}

TEST_CASE("holder exponent matches its closed form for moderate constants") {
  const auto form = euclidean(box(1.0, 1.0, 129));
  const auto field = limit_distance(form, 0.0, 0.0);
  const std::vector<double> radii{0.4, 0.2, 0.1, 0.05};
  std::vector<double> deltas;
  for (double r : radii) deltas.push_back(0.5 * r);
  const auto u = affine(form.grid, 1.0, 2.0);
  const auto c = oscillation_curve(u, {}, field, radii, deltas, {});
  // nu0 r / delta = 1, so C_Har = e^2 and gamma = 1 - 1/(2 e^2).
  const double gamma = 1.0 - 0.5 * std::exp(-2.0);
  const double alpha = 0.5 * std::log(gamma) / std::log(0.5);
  for (std::size_t k = 0; k < c.radii.size(); ++k) {
    CHECK(std::exp(c.log_gamma[k]) == doctest::Approx(gamma));
    CHECK(std::exp(c.log_alpha[k]) == doctest::Approx(alpha));
    CHECK(alpha > 0.0);
  }
}

TEST_CASE("a chain with fewer than four radii is too short") {
  const auto form = euclidean(box(1.0, 1.0, 65));
  const auto field = limit_distance(form, 0.0, 0.0);
  const std::vector<double> radii{0.4, 0.2, 0.1};
  const std::vector<double> deltas{0.02, 0.01, 0.005};
  const auto u = affine(form.grid, 1.0, 2.0);
  CHECK_THROWS_AS(oscillation_curve(u, {}, field, radii, deltas, {}), ChainTooShort);
  const std::vector<double> broken{0.4, 0.3, 0.1, 0.05};
  const std::vector<double> d4{0.02, 0.01, 0.005, 0.002};
  CHECK_THROWS_AS(oscillation_curve(u, {}, field, broken, d4, {}), ConfigError);
}

}  // TEST_SUITE
