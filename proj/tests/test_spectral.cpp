#include <doctest.h>

#include <random>

#include "hitgap/error.hpp"
#include "hitgap/spectral.hpp"
#include "hitgap/verify.hpp"
#include "oracles.hpp"

using namespace hitgap;

TEST_CASE("two-state gap is 3 and the Poincare constant 1/3") {
  const FiniteChain c = two_state_chain();
  const SpectralReport s = spectral_gap(c, invariant_measure(c));
  CHECK(s.gap == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(s.poincare_c == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("two-state killed eigenvalue on K = {0} is the exit rate 2") {
  const FiniteChain c = two_state_chain();
  const auto e = dirichlet_eigenpair(c, invariant_measure(c), TargetSet(2, {0}));
  CHECK(e.value == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(e.perron_positive);
}

TEST_CASE("full or empty K has no killed eigenvalue") {
  const FiniteChain c = two_state_chain();
  CHECK_THROWS_AS(dirichlet_eigenvalue(c, invariant_measure(c), TargetSet::full(2)), DomainError);
}

TEST_CASE("non-reversible chains are refused by the gap solver") {
  Matrix q(3, 3);
  q << -1, 1, 0,  //
      0, -1, 1,  //
      1, 0, -1;
  const FiniteChain c = FiniteChain::from_dense(q);
  CHECK_THROWS_AS(spectral_gap(c, invariant_measure(c)), UnsupportedModeError);
}

TEST_CASE("property: gap agrees with power iteration on random reversible chains") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 25)(rng);
    const auto rc = oracle::random_reversible(rng, n);
    const FiniteChain c = FiniteChain::from_dense(rc.q);
    const double gap = spectral_gap(c, invariant_measure(c)).gap;
    CHECK(gap == doctest::Approx(oracle::power_gap(rc.q, rc.pi)).epsilon(1e-7));
  }
}

TEST_CASE("property: killed eigenvalue agrees with the generalized eigenproblem") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 40)(rng);
    const auto rc = oracle::random_reversible(rng, n);
    const auto k = oracle::random_proper_subset(rng, n);
    const FiniteChain c = FiniteChain::from_dense(rc.q);
    const double value = dirichlet_eigenvalue(c, invariant_measure(c), TargetSet(n, k));
    CHECK(value == doctest::Approx(oracle::killed_eigenvalue(rc.q, rc.pi, oracle::complement(n, k))).epsilon(1e-10));
  }
}

TEST_CASE("property: Poincare inequality Var(f) <= c E(f, f) on random functions") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 30)(rng);
    const auto rc = oracle::random_reversible(rng, n);
    const FiniteChain c = FiniteChain::from_dense(rc.q);
    const InvariantMeasure pi = invariant_measure(c);
    const DirichletForm form(c, pi);
    const SpectralReport s = spectral_gap(c, pi);
    for (int f_trial = 0; f_trial < 10; ++f_trial) {
      Vector f(n);
      for (int i = 0; i < n; ++i) f(i) = g(rng);
      CHECK(variance(pi, f) <= s.poincare_c * form.energy(f, f) * (1 + 1e-10));
    }
    // Equality on the gap eigenfunction.
    CHECK(variance(pi, s.eigenvector) ==
          doctest::Approx(s.poincare_c * form.energy(s.eigenvector, s.eigenvector)).epsilon(1e-8));
  }
}

TEST_CASE("property: conductance sum equals the generator pairing for reversible chains") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 20)(rng);
    const auto rc = oracle::random_reversible(rng, n);
    const FiniteChain c = FiniteChain::from_dense(rc.q);
    const InvariantMeasure pi = invariant_measure(c);
    const DirichletForm form(c, pi);
    CVector f(n), h(n);
    for (int i = 0; i < n; ++i) {
      f(i) = Complex(g(rng), g(rng));
      h(i) = Complex(g(rng), g(rng));
    }
    CHECK(std::abs(form.conductance_sum(f, h) - form.generator_pairing(f, h)) < 1e-11);
  }
}

TEST_CASE("property: enlarging K does not decrease the killed eigenvalue") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(3, 30)(rng);
    const FiniteChain c = build_random_reversible(n, rng());
    const InvariantMeasure pi = invariant_measure(c);
    auto k = oracle::random_proper_subset(rng, n);
    const double small = dirichlet_eigenvalue(c, pi, TargetSet(n, k));
    const auto rest = oracle::complement(n, k);
    if (rest.size() < 2) continue;
    k.push_back(rest.front());
    CHECK(dirichlet_eigenvalue(c, pi, TargetSet(n, k)) >= small * (1 - 1e-12));
  }
}

TEST_CASE("OU gap is 1 within 1% at 2000 points") {
  const FiniteChain c = discretize_diffusion_1d(ou_spec(), 2000);
  CHECK(std::abs(spectral_gap(c, invariant_measure(c)).gap - 1.0) < 0.01);
}

TEST_CASE("semigroup propagator matches Eigen's matrix exponential") {
  const FiniteChain c = reference_birth_death(8);
  const Vector v = Vector::LinSpaced(8, 0.0, 1.0);
  const Vector mine = SemigroupPropagator(c.generator()).apply(0.7, v);
  const Vector ref = (0.7 * c.dense()).exp() * v;
  CHECK((mine - ref).cwiseAbs().maxCoeff() < 1e-12);
}
