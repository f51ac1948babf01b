#include <doctest.h>

#include <random>

#include "hitgap/error.hpp"
#include "hitgap/potentials.hpp"
#include "hitgap/spectral.hpp"
#include "hitgap/verify.hpp"
#include "oracles.hpp"

using namespace hitgap;

namespace {

const FiniteChain& two_state() {
  static const FiniteChain c = two_state_chain();
  return c;
}

const InvariantMeasure& two_state_pi() {
  static const InvariantMeasure pi = invariant_measure(two_state());
  return pi;
}

const TargetSet k0(2, {0});

}  // namespace

// From state 1 the chain leaves at rate 2 straight into K = {0}, so tau ~ Exp(2)
// and E e^{-z tau} = 2 / (2 + z).
TEST_CASE("two-state z-potential is 2 / (2 + z)") {
  for (Complex z : {Complex(1, 0), Complex(2, 0), Complex(1, 1), Complex(0.3, -4)}) {
    const Potential p = z_potential(two_state(), k0, z);
    CHECK(std::abs(p.values(0) - 1.0) < 1e-15);
    CHECK(std::abs(p.values(1) - 2.0 / (2.0 + z)) < 1e-14);
  }
  const Potential h1 = z_potential(two_state(), k0, 1.0);
  CHECK(h1.values(1).real() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(z_potential(two_state(), k0, Complex(0.0, 1.0)), DomainError);
}

TEST_CASE("two-state exponential moment: E e^{tau} = 2 and blow-up at alpha* = 2") {
  const Potential p = exp_moment_potential(two_state(), two_state_pi(), k0, 1.0);
  CHECK(p.values(0).real() == doctest::Approx(1.0));
  CHECK(p.values(1).real() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(exp_moment_potential(two_state(), two_state_pi(), k0, 2.0), BlowUpError);
  CHECK_THROWS_AS(exp_moment_potential(two_state(), two_state_pi(), k0, 2.5), BlowUpError);
}

TEST_CASE("first moment potential h^1(1) = -2/9 at z = 1") {
  const Potential h = moment_potential(two_state(), k0, 1.0, 1);
  CHECK(h.values(0).real() == doctest::Approx(0.0));
  CHECK(h.values(1).real() == doctest::Approx(-2.0 / 9.0).epsilon(1e-14));
  // m-th derivative of 2/(2+z) is 2 (-1)^m m! / (2+z)^{m+1}.
  const auto all = moment_potentials(two_state(), k0, 1.0, 5);
  double factorial = 1.0;
  for (int m = 1; m <= 5; ++m) {
    factorial *= m;
    const double expected = 2.0 * std::pow(-1.0, m) * factorial / std::pow(3.0, m + 1);
    CHECK(all[static_cast<std::size_t>(m)].values(1).real() == doctest::Approx(expected).epsilon(1e-13));
  }
  CHECK_THROWS(moment_potential(two_state(), k0, 1.0, 0));
}

TEST_CASE("finite-difference analyticity probe: dh_z/dz = h^1") {
  const FiniteChain c = reference_birth_death(6);
  const TargetSet k(6, {0});
  const double eps = 1e-4;
  for (Complex z : {Complex(1, 0), Complex(2, 0), Complex(1, 1)}) {
    const CVector up = z_potential(c, k, z + Complex(0, eps)).values;
    const CVector down = z_potential(c, k, z - Complex(0, eps)).values;
    const CVector fd = (up - down) / Complex(0, 2 * eps);
    const CVector h1 = moment_potential(c, k, z, 1).values;
    CHECK((fd - h1).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("threshold: eigenvalue and bisection agree on the two-state chain") {
  const ThresholdReport t = blowup_threshold(two_state(), two_state_pi(), k0);
  CHECK(t.alpha_star == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(t.bisection_value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(t.agreement < 1e-10);
  const ThresholdReport full = blowup_threshold(two_state(), two_state_pi(), TargetSet::full(2));
  CHECK(full.infinite);
}

TEST_CASE("property: exponential moment finite at 0.99 alpha*, infinite at 1.01 alpha*") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 30)(rng);
    const FiniteChain c = build_random_reversible(n, rng());
    const InvariantMeasure pi = invariant_measure(c);
    const TargetSet k(n, oracle::random_proper_subset(rng, n));
    const double a = dirichlet_eigenvalue(c, pi, k);
    CHECK(exp_moment_finite(c, k, 0.99 * a));
    CHECK_FALSE(exp_moment_finite(c, k, 1.01 * a));
    CHECK_NOTHROW(exp_moment_potential(c, pi, k, 0.99 * a));
    CHECK_THROWS_AS(exp_moment_potential(c, pi, k, 1.01 * a), BlowUpError);
  }
}

TEST_CASE("property: exponential-moment potential is >= 1 and increasing in alpha") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 30)(rng);
    const FiniteChain c = build_random_reversible(n, rng());
    const InvariantMeasure pi = invariant_measure(c);
    const TargetSet k(n, oracle::random_proper_subset(rng, n));
    const double a = dirichlet_eigenvalue(c, pi, k);
    Vector previous = Vector::Ones(n);
    for (double f : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const Vector h = exp_moment_potential(c, pi, k, f * a, a).real();
      CHECK(h.minCoeff() >= 1.0 - 1e-12);
      CHECK((h - previous).minCoeff() >= -1e-12);
      previous = h;
    }
  }
}

TEST_CASE("property: z-potential for real z is in (0, 1] and decreasing in z") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 30)(rng);
    const FiniteChain c = build_random_reversible(n, rng());
    const TargetSet k(n, oracle::random_proper_subset(rng, n));
    Vector previous = Vector::Ones(n);
    for (double z : {0.1, 0.5, 1.0, 3.0}) {
      const Vector h = z_potential(c, k, z).real();
      CHECK(h.minCoeff() > 0.0);
      CHECK(h.maxCoeff() <= 1.0 + 1e-14);
      CHECK((previous - h).minCoeff() >= -1e-14);
      previous = h;
    }
  }
}

TEST_CASE("direct psi-potential with psi = e^{-t} reproduces h_1") {
  const DirectResult d = psi_potential_direct(two_state(), k0, PsiFunction::exponential(1.0));
  CHECK(d.potential.values(1).real() == doctest::Approx(2.0 / 3.0).epsilon(1e-11));
  CHECK(d.potential.values(0).real() == doctest::Approx(1.0));
}

TEST_CASE("direct psi-potential of the bump matches the Simpson phase-type oracle") {
  const PsiFunction psi = PsiFunction::bump(1.0, 2.0);
  const FiniteChain c = reference_birth_death(20);
  const TargetSet k(20, {0});
  const Vector mine = psi_potential_direct(c, k, psi).potential.real();
  std::vector<int> free;
  for (int i = 1; i < 20; ++i) free.push_back(i);
  const Vector ref = oracle::psi_potential(c.dense(), free, [&](double t) { return psi(t); }, 1.0, 2.0, 4000);
  CHECK(mine(0) == 0.0);
  for (int i = 1; i < 20; ++i) CHECK(mine(i) == doctest::Approx(ref(i - 1)).epsilon(1e-9));
}

TEST_CASE("frozen: two-state bump[1,2] potential") {
  // Frozen from the Simpson oracle: int_1^2 psi(t) 2 e^{-2t} dt.
  const PsiFunction psi = PsiFunction::bump(1.0, 2.0);
  const double ref = oracle::simpson([&](double t) { return psi(t) * 2.0 * std::exp(-2.0 * t); }, 1.0, 2.0, 20000);
  CHECK(ref == doctest::Approx(0.05282063866654519).epsilon(1e-11));
  const Vector mine = psi_potential_direct(two_state(), k0, psi).potential.real();
  CHECK(mine(1) == doctest::Approx(0.05282063866654519).epsilon(1e-11));
}

TEST_CASE("contour inversion agrees with the direct oracle for each sigma") {
  const PsiFunction psi = PsiFunction::bump(1.0, 2.0);
  const Vector direct = psi_potential_direct(two_state(), k0, psi).potential.real();
  for (double sigma : {0.5, 1.0, 2.0}) {
    ContourOptions o;
    o.sigma = sigma;
    o.tolerance = 5e-7;
    const ContourResult r = psi_potential_contour(two_state(), k0, psi, o);
    CHECK((r.potential.real() - direct).cwiseAbs().maxCoeff() < 5e-7);
    CHECK(r.imag_residue < 1e-10);
    CHECK(r.truncation_bound <= 0.5 * o.tolerance);
  }
}

TEST_CASE("contour mode refuses psi without compact support or C^2") {
  CHECK_THROWS_AS(require_lemma_mode(PsiFunction::exponential(1.0)), ModeError);
  CHECK_THROWS_AS(require_lemma_mode(PsiFunction::bump(1.0, 2.0, 1)), ModeError);
  CHECK_NOTHROW(require_lemma_mode(PsiFunction::bump(1.0, 2.0, 2)));
}

TEST_CASE("contour with a too-short truncation reports a suggested value") {
  ContourOptions o;
  o.t_im = 5.0;
  o.step = 0.1;
  o.tolerance = 1e-8;
  try {
    psi_potential_contour(two_state(), k0, PsiFunction::bump(1.0, 2.0), o);
    FAIL("expected TruncationError");
  } catch (const TruncationError& e) {
    CHECK(e.suggested() > 5.0);
  }
}

TEST_CASE("Lyapunov potential on two states: drift exact off K, b = 2 at alpha = 1") {
  const LyapunovResult r = lyapunov_potential(two_state(), two_state_pi(), k0, 1.0);
  CHECK(r.drift_residual < 1e-14);
  CHECK(r.b == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("potential JSON carries values_re and values_im") {
  const auto j = to_json(z_potential(two_state(), k0, Complex(1, 1)));
  CHECK(j.contains("values_re"));
  CHECK(j.contains("values_im"));
  CHECK(j["kind"] == "z");
}
