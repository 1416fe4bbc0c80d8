#include <doctest.h>

#include <cmath>

#include "mise/analysis.hpp"
#include "support.hpp"

using namespace mise;

TEST_CASE("classical entropy") {
  const int L = 10;
  // Frozen sites contribute only through the 1e-12 clamp, about 3e-11 nats each.
  RVector n = RVector::Zero(L);
  CHECK(classical_entropy(n) < L * 3e-11);
  n.head(5).setOnes();
  CHECK(classical_entropy(n) < L * 3e-11);
  CHECK(classical_entropy(RVector::Constant(L, 0.5)) == doctest::Approx(L * std::log(2.0)).epsilon(1e-14));
  // Independent evaluation of the formula.
  mise::testing::Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    RVector p(6);
    double expected = 0.0;
    for (int i = 0; i < 6; ++i) {
      p(i) = mise::testing::uniform(rng, 0.001, 0.999);
      expected -= p(i) * std::log(p(i)) + (1.0 - p(i)) * std::log1p(-p(i));
    }
    CHECK(classical_entropy(p) == doctest::Approx(expected).epsilon(1e-12));
  }
  // Tiny excursions from rounding are tolerated, real ones are not.
  CHECK(classical_entropy(RVector::Constant(3, 1.0 + 1e-12)) < 1e-9);
  CHECK_THROWS_AS(classical_entropy(RVector::Constant(3, 1.1)), DataError);
  CHECK_THROWS_AS(classical_entropy(RVector::Constant(3, -0.01)), DataError);
}

TEST_CASE("classical entropy is concave and maximal at half filling") {
  mise::testing::Rng rng(72);
  for (int trial = 0; trial < 200; ++trial) {
    RVector a(4);
    RVector b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = mise::testing::uniform(rng, 0.0, 1.0);
      b(i) = mise::testing::uniform(rng, 0.0, 1.0);
    }
    const double w = mise::testing::uniform(rng, 0.0, 1.0);
    const RVector mix = w * a + (1.0 - w) * b;
    CHECK(classical_entropy(mix) >= w * classical_entropy(a) + (1.0 - w) * classical_entropy(b) - 1e-12);
    CHECK(classical_entropy(a) <= 4.0 * std::log(2.0) + 1e-12);
  }
}

TEST_CASE("current from momentum occupation") {
  const int L = 64;
  RVector nk = RVector::Zero(L);
  // k_m = 2 pi m / L; the interval (-pi, 0) is m = L/2 + 1 .. L - 1.
  for (int m = L / 2 + 1; m < L; ++m) nk(m) = 1.0;
  double riemann = 0.0;
  for (int m = L / 2 + 1; m < L; ++m) riemann += std::sin(2.0 * pi * m / L);
  riemann *= 2.0 * pi / L;
  CHECK(current(nk) == doctest::Approx(riemann).epsilon(1e-13));
  CHECK(current(nk) == doctest::Approx(-2.0).epsilon(2e-3));

  CHECK(std::abs(current(RVector::Constant(L, 0.5))) < 1e-13);
  RVector sym = RVector::Zero(L);
  for (int m = 0; m < L; ++m) sym(m) = std::cos(2.0 * pi * m / L) * std::cos(2.0 * pi * m / L);
  CHECK(std::abs(current(sym)) < 1e-13);

  mise::testing::Rng rng(73);
  RVector a(L);
  RVector b(L);
  for (int m = 0; m < L; ++m) {
    a(m) = mise::testing::uniform(rng, 0.0, 1.0);
    b(m) = mise::testing::uniform(rng, 0.0, 1.0);
  }
  CHECK(current(2.0 * a - b) == doctest::Approx(2.0 * current(a) - current(b)).epsilon(1e-12));
  CHECK(current(RVector()) == 0.0);
}

TEST_CASE("asymptote fit recovers c / gamma") {
  std::vector<ScalingPoint> data;
  for (int L : {64, 128, 256}) {
    for (double g : {0.3, 0.5, 1.0}) data.push_back({pi, g, L, 5.0 / g, 0.01 / g});
    for (double g : {0.3, 0.5, 1.0}) data.push_back({0.5 * pi, g, L, 9.0 / g, 0.01 / g});
  }
  const auto fits = fit_asymptote(data);
  REQUIRE(fits.size() == 2);
  // Sorted by theta.
  CHECK(fits[0].theta == doctest::Approx(0.5 * pi));
  CHECK(fits[0].c == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(fits[1].c == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(fits[1].residual < 1e-12);
  CHECK(fits[1].stable);
  CHECK(fits[1].c_err > 0.0);
}

TEST_CASE("asymptote fit drops small sizes that have not converged") {
  std::vector<ScalingPoint> data;
  for (double g : {0.3, 0.5, 1.0}) {
    data.push_back({pi, g, 16, 2.0 / g, 0.01 / g});  // finite-size saturated
    data.push_back({pi, g, 128, 3.0 / g, 0.01 / g});
    data.push_back({pi, g, 256, 3.0 / g, 0.01 / g});
  }
  const auto fits = fit_asymptote(data);
  REQUIRE(fits.size() == 1);
  CHECK(fits[0].min_sites == 128);
  CHECK(fits[0].c == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fits[0].stable);
}

TEST_CASE("asymptote fit errors") {
  std::vector<ScalingPoint> two{{pi, 0.3, 64, 10.0, 0.1}, {pi, 0.5, 64, 6.0, 0.1}};
  CHECK_THROWS_AS(fit_asymptote(two), DataError);
  std::vector<ScalingPoint> bad{{pi, 0.3, 64, 10.0, 0.1}, {pi, 0.5, 64, 0.0, 0.1}, {pi, 1.0, 64, 3.0, 0.1}};
  CHECK_THROWS_AS(fit_asymptote(bad), DataError);
}

TEST_CASE("collapse of an exact scaling form has zero spread") {
  std::vector<ScalingPoint> data;
  for (int L : {32, 64}) {
    for (double x : {1.0, 2.0, 4.0, 8.0}) {
      const double g = x / L;
      data.push_back({pi, g, L, L * std::exp(-x), 0.0});
    }
  }
  data.push_back({pi, 2.0, 32, 1.0, 0.0});  // above the cutoff, ignored
  const auto c = scaling_collapse(data, 1.0);
  REQUIRE(c.series.size() == 2);
  CHECK(c.series[0].sites == 32);
  CHECK(c.series[0].x.size() == 4);
  CHECK(c.grid.size() == 4);
  CHECK(c.spread < 1e-10);

  // A curve off by 10% everywhere.
  for (auto& p : data) {
    if (p.sites == 64) p.scl *= 1.1;
  }
  const auto off = scaling_collapse(data, 1.0);
  CHECK(off.spread == doctest::Approx(0.1 / 1.05).epsilon(1e-9));
}

TEST_CASE("collapse errors") {
  std::vector<ScalingPoint> one{{pi, 0.1, 32, 1.0, 0.0}, {pi, 0.2, 32, 1.0, 0.0}};
  CHECK_THROWS_AS(scaling_collapse(one), DataError);
  std::vector<ScalingPoint> disjoint{{pi, 0.01, 32, 1.0, 0.0}, {pi, 0.02, 32, 1.0, 0.0},
                                     {pi, 0.5, 64, 1.0, 0.0}, {pi, 0.6, 64, 1.0, 0.0}};
  CHECK_THROWS_AS(scaling_collapse(disjoint), DataError);
}

TEST_CASE("steady drift") {
  std::vector<double> t;
  RVector y(41);
  for (int i = 0; i <= 40; ++i) {
    t.push_back(0.5 * i);
    // Linear ramp that flattens at t = 10.
    y(i) = t.back() < 10.0 ? 3.0 * t.back() : 30.0;
  }
  const auto flat = steady_drift(t, y, 8.0);
  CHECK(flat.points == 17);
  CHECK(flat.window == doctest::Approx(8.0));
  CHECK(flat.steady);
  CHECK(std::abs(flat.slope) < 1e-12);
  const auto ramp = steady_drift(t, y, 100.0);
  CHECK(ramp.points == 41);
  CHECK_FALSE(ramp.steady);
  CHECK(ramp.slope > 0.0);
  // Pure line: slope recovered exactly.
  RVector line(41);
  for (int i = 0; i <= 40; ++i) line(i) = 2.0 - 0.25 * t[static_cast<std::size_t>(i)];
  CHECK(steady_drift(t, line, 5.0).slope == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK_THROWS_AS(steady_drift(t, line, 0.1), DataError);
  CHECK_THROWS_AS(steady_drift(std::vector<double>{1.0}, line, 1.0), DataError);
}
