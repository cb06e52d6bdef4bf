#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "sublab/cutoff.hpp"
#include "sublab/error.hpp"

using namespace sublab;
using namespace sublab::testing;

namespace {

bool subset(const NodeSet& a, const NodeSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST_SUITE("cutoff") {

TEST_CASE("cutoff radii accumulate geometric steps") {
  CHECK(cutoff_radius(1.0, 0.5, 0.1, 0) == doctest::Approx(1.0));
  CHECK(cutoff_radius(1.0, 0.5, 0.1, 1) == doctest::Approx(0.95));
  CHECK(cutoff_radius(1.0, 0.5, 0.1, 2) == doctest::Approx(0.905));
  // Summing the ramp widths (1 - nu) delta q^i directly.
  double r = 1.0;
  for (int j = 1; j <= 40; ++j) {
    r -= 0.5 * 0.1 * std::pow(0.9, j - 1);
    CHECK(cutoff_radius(1.0, 0.5, 0.1, j) == doctest::Approx(r).epsilon(1e-13));
    CHECK(r > 0.5);
  }
  CHECK(cutoff_radius(1.0, 0.5, 0.1, 400) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cutoff sequence is nested with plateaus and contained supports") {
  for (const auto& form : {euclidean(box(1.0, 1.0, 161)),
                           grushin(box(0.6, 0.12, 257))}) {
    const auto field = limit_distance(form, 0.0, 0.0, 0.02, 4);
    const double r = 0.4;
    const double delta = 0.06;
    const auto seq = build_sequence(form, field, r, 0.5, delta, 12);
    REQUIRE(seq.size() >= 3);
    for (std::size_t j = 0; j < seq.size(); ++j) {
      const double outer = seq.radii[j];
      const double inner = seq.radii[j + 1];
      for (std::size_t n = 0; n < form.grid.size(); ++n) {
        const double v = seq.psi[j][n];
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (field.values[n] < inner) CHECK(v == 1.0);
        if (v > 0.0) CHECK(field.values[n] < outer);
      }
      if (j + 1 < seq.size()) CHECK(subset(seq.supports[j + 1], seq.supports[j]));
      CHECK(seq.support_volumes[j] > 0.0);
    }
    CHECK(seq.support_ratio_max <= 4.0);
    CHECK(seq.grad_envelope_max <= 4.0);
  }
}

TEST_CASE("euclidean cutoff gradients follow the ramp slope") {
  const auto form = euclidean(box(1.0, 1.0, 201));
  const auto field = limit_distance(form, 0.0, 0.0);
  const auto seq = build_sequence(form, field, 0.6, 0.5, 0.1, 6);
  for (std::size_t j = 0; j < seq.size(); ++j) {
    const double width = seq.radii[j] - seq.radii[j + 1];
    if (width < 2.0 * form.grid.hx()) continue;
    CHECK(seq.grad_bounds[j] <= 2.0 / width);
    CHECK(seq.grad_bounds[j] >= 0.5 / width);
  }
}

TEST_CASE("cutoff parameters are validated") {
  const auto form = euclidean(box(1.0, 1.0, 65));
  const auto field = limit_distance(form, 0.0, 0.0);
  CHECK_THROWS_AS(build_sequence(form, field, 0.5, 1.0, 0.1), ConfigError);
  CHECK_THROWS_AS(build_sequence(form, field, 0.5, 0.5, 0.6), ConfigError);
  CHECK_THROWS_AS(build_sequence(form, field, 0.5, 0.5, 0.1, 0), ConfigError);
  CHECK_THROWS_AS(build_sequence(form, field, 1.5, 0.5, 0.1), GeometryError);
  const auto other = euclidean(box(1.0, 1.0, 33));
  CHECK_THROWS_AS(build_sequence(other, field, 0.5, 0.5, 0.1), ConfigError);
}

TEST_CASE("special cutoff is one on the inner ball and zero outside") {
  const auto form = euclidean(box(1.0, 1.0, 201));
  const auto field = limit_distance(form, 0.0, 0.0);
  const auto cut = build_special_cutoff(form, field, 0.5, 0.05);
  const double h = form.grid.hx();
  for (std::size_t n = 0; n < form.grid.size(); ++n) {
    const double e = std::hypot(form.grid.node_x(n), form.grid.node_y(n));
    if (e < 0.525 - 2.0 * h) CHECK(cut.values[n] == 1.0);
    if (e > 0.55 + 2.0 * h) CHECK(cut.values[n] == 0.0);
  }
  for (auto n : cut.support) CHECK(field.values[n] < 0.55);
  CHECK(subset(cut.plateau, cut.support));
  // Ramp of width delta/2 in a unit-speed distance.
  CHECK(cut.grad_scaled == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("special cutoff gradient stays bounded on the degenerate form") {
  const auto form = grushin(box(0.6, 0.12, 257));
  const auto field = limit_distance(form, 0.0, 0.0, 0.02, 4);
  for (double r : {0.3, 0.2}) {
    const auto cut = build_special_cutoff(form, field, r, 0.2 * r);
    CHECK(cut.grad_scaled <= 4.0);
    CHECK(!cut.plateau.empty());
  }
  CHECK_THROWS_AS(build_special_cutoff(form, field, 0.55, 0.1), GeometryError);
  CHECK_THROWS_AS(build_special_cutoff(form, field, 0.3, 0.0), ConfigError);
}

TEST_CASE("q gradient of coordinate functions") {
  const auto form = grushin(box(0.5, 0.5, 33));
  std::vector<double> wy(form.grid.size());
  std::vector<double> wx(form.grid.size());
  for (std::size_t n = 0; n < form.grid.size(); ++n) {
    wy[n] = form.grid.node_y(n);
    wx[n] = form.grid.node_x(n);
  }
  const auto gy = q_gradient(form, wy);
  const auto gx = q_gradient(form, wx);
  for (std::size_t n = 0; n < form.grid.size(); ++n) {
    CHECK(gy[n] == doctest::Approx(std::fabs(form.grid.node_x(n))).epsilon(1e-12));
    CHECK(gx[n] == doctest::Approx(1.0).epsilon(1e-12));
  }
  const std::vector<double> flat(form.grid.size(), 3.0);
  for (double g : q_gradient(form, flat)) CHECK(g == 0.0);
}

}  // TEST_SUITE
