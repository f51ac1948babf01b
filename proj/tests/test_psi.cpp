#include <doctest.h>

#include "hitgap/error.hpp"
#include "hitgap/psi.hpp"
#include "oracles.hpp"

using namespace hitgap;

TEST_CASE("smoothstep order 2 is 10s^3 - 15s^4 + 6s^5") {
  const auto c = smoothstep_coefficients(2);
  REQUIRE(c.size() == 6);
  CHECK(c[3] == doctest::Approx(10.0));
  CHECK(c[4] == doctest::Approx(-15.0));
  CHECK(c[5] == doctest::Approx(6.0));
}

TEST_CASE("smoothstep psi rises from 0 to 1 on [1, 2]") {
  const PsiFunction s = PsiFunction::smoothstep(1.0, 2.0);
  CHECK(s(0.5) == 0.0);
  CHECK(s(1.5) == doctest::Approx(0.5));
  CHECK(s(3.0) == 1.0);
  CHECK(s.smoothness() == 2);
  CHECK(s.derivative_support().lo == doctest::Approx(1.0));
  CHECK(s.derivative_support().hi == doctest::Approx(2.0));
}

TEST_CASE("bump is C^2 with support [1, 2] and peak 1") {
  const PsiFunction b = PsiFunction::bump(1.0, 2.0);
  CHECK(b.support().lo == doctest::Approx(1.0));
  CHECK(b.support().hi == doctest::Approx(2.0));
  CHECK(b(1.5) == doctest::Approx(1.0));
  CHECK(b.smoothness() == 2);
  CHECK(b.passes_c2_probe());
  CHECK(PsiFunction::bump(1.0, 2.0, 1).smoothness() == 1);
}

TEST_CASE("property: exact derivatives match central differences") {
  const PsiFunction b = PsiFunction::bump(0.5, 3.0, 3, 2.0, 0.7);
  for (double t = 0.55; t < 2.95; t += 0.0931) {
    CHECK(b.derivative(t, 1) == doctest::Approx(oracle::derivative([&](double x) { return b(x); }, t)).epsilon(1e-6));
    CHECK(b.derivative(t, 2) ==
          doctest::Approx(oracle::derivative([&](double x) { return b.derivative(x, 1); }, t)).epsilon(1e-5));
  }
  const PsiFunction d = b.derivative();
  CHECK(d(1.234) == doctest::Approx(b.derivative(1.234, 1)));
}

TEST_CASE("property: transform matches Simpson and obeys the B_k decay bound") {
  const PsiFunction b = PsiFunction::bump(1.0, 2.0);
  for (double sigma : {0.5, 1.0, 2.0}) {
    for (double y : {0.0, 0.7, 3.0, 15.0, 80.0, 400.0}) {
      const Complex z(sigma, y);
      const double re = oracle::simpson([&](double t) { return (std::exp(z * t) * b(t)).real(); }, 1.0, 2.0, 20000);
      const double im = oracle::simpson([&](double t) { return (std::exp(z * t) * b(t)).imag(); }, 1.0, 2.0, 20000);
      const Complex mine = b.transform(z);
      CHECK(std::abs(mine - Complex(re, im)) < 1e-8 * std::max(1.0, std::abs(mine)));
      for (int k = 1; k <= 4; ++k) {
        CHECK(std::abs(mine) <= b.transform_decay_constant(sigma, k) / std::pow(std::abs(z), k) * (1 + 1e-9));
      }
    }
  }
  CHECK_THROWS_AS(b.transform_decay_constant(1.0, 5), DomainError);
  CHECK_THROWS_AS(PsiFunction::exponential(1.0).transform(1.0), ModeError);
}

TEST_CASE("expression psi: smoothness read off the endpoint derivatives") {
  const PsiFunction p = PsiFunction::expression("(t-1)^3*(2-t)^3", 1.0, 2.0);
  CHECK(p.smoothness() == 2);
  CHECK(p(1.5) == doctest::Approx(1.0 / 64.0));
  CHECK(PsiFunction::expression("(t-1)*(2-t)", 1.0, 2.0).smoothness() == 0);
}

TEST_CASE("psi JSON: strict keys per family") {
  const PsiFunction b = PsiFunction::from_json({{"family", "bump"}, {"support", {1, 2}}});
  CHECK(b.support().hi == doctest::Approx(2.0));
  CHECK_THROWS_AS(PsiFunction::from_json({{"family", "bump"}, {"support", {1, 2}}, {"rate", 1}}), ValidationError);
  CHECK_THROWS_AS(PsiFunction::from_json({{"family", "nope"}}), ValidationError);
  CHECK(PsiFunction::from_json({{"family", "exponential"}, {"rate", 2}})(1.0) == doctest::Approx(std::exp(-2.0)));
}
