#include <doctest.h>

#include <cmath>
#include <random>

#include "hitgap/chain.hpp"
#include "hitgap/error.hpp"
#include "hitgap/expression.hpp"
#include "hitgap/verify.hpp"
#include "oracles.hpp"

using namespace hitgap;

TEST_CASE("two-state chain has pi = (2/3, 1/3) and is reversible") {
  const FiniteChain c = two_state_chain();
  const InvariantMeasure pi = invariant_measure(c);
  CHECK(pi.pi(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(pi.pi(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(pi.reversible);
  CHECK(pi.stationarity_residual < 1e-14);
}

TEST_CASE("validation lists every violation") {
  Matrix q(3, 3);
  q << -1, 1, 0.5,  //
      -0.2, 0.2, 0,  //
      0, std::nan(""), 0;
  const auto v = validate(SparseMatrix(q.sparseView()));
  int negative = 0, row_sum = 0, non_finite = 0;
  for (const auto& x : v) {
    negative += x.kind == Violation::Kind::NegativeOffDiagonal;
    row_sum += x.kind == Violation::Kind::RowSum;
    non_finite += x.kind == Violation::Kind::NonFinite;
  }
  CHECK(negative >= 1);
  CHECK(row_sum >= 1);
  CHECK(non_finite >= 1);
  CHECK_THROWS_AS(FiniteChain::from_dense(q), ValidationError);
}

TEST_CASE("reducible chain is rejected when pi is requested") {
  Matrix q(3, 3);
  q << -1, 1, 0,  //
      1, -1, 0,  //
      0, 1, -1;
  const FiniteChain c = FiniteChain::from_dense(q);
  CHECK_THROWS_AS(invariant_measure(c), IrreducibilityError);
}

TEST_CASE("birth-death pi is geometric with ratio up/down") {
  const FiniteChain c = reference_birth_death(12);
  const InvariantMeasure pi = invariant_measure(c);
  for (int i = 1; i < 12; ++i) CHECK(pi.pi(i) / pi.pi(i - 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pi.balance_residual < 1e-14);
}

TEST_CASE("property: pi matches the null-space oracle on random reversible chains") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 30)(rng);
    const auto rc = oracle::random_reversible(rng, n);
    const FiniteChain c = FiniteChain::from_dense(rc.q);
    const InvariantMeasure pi = invariant_measure(c);
    CHECK((pi.pi - rc.pi).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pi.pi - oracle::stationary(rc.q)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(pi.reversible);
  }
}

TEST_CASE("property: random_reversible builder gives irreducible reversible chains") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const FiniteChain c = build_random_reversible(2 + static_cast<int>(seed % 40), seed);
    CHECK(validate(c.generator()).empty());
    const InvariantMeasure pi = invariant_measure(c);
    CHECK(pi.reversible);
    CHECK(pi.pi.minCoeff() > 0.0);
  }
}

TEST_CASE("target sets") {
  const TargetSet k(5, {3, 1});
  CHECK(k.members() == std::vector<int>{1, 3});
  CHECK(k.complement() == std::vector<int>{0, 2, 4});
  CHECK(k.contains(3));
  CHECK_FALSE(k.contains(0));
  CHECK(TargetSet::full(5).is_full());
  CHECK(TargetSet(5, {1}).subset_of(k));
  CHECK_THROWS_AS(TargetSet(5, {}), DomainError);
  CHECK_THROWS_AS(TargetSet(5, {7}), DomainError);
  CHECK_THROWS_WITH(TargetSet::from_interval(two_state_chain(), 0, 1), "coordinate targets require labels");
}

TEST_CASE("chain JSON round trip") {
  const FiniteChain c = reference_birth_death(4);
  const FiniteChain back = chain_from_json(chain_to_json(c));
  CHECK((back.dense() - c.dense()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(chain_from_json({{"Q", {{-1, 1}, {1, -1}}}, {"extra", 1}}), ValidationError);
}

TEST_CASE("expressions and derivatives") {
  const Expression e = Expression::parse("-4*x^3 + 4*x");
  CHECK(e(2.0) == doctest::Approx(-24.0));
  CHECK(e.derivative()(2.0) == doctest::Approx(-44.0));
  CHECK(Expression::parse("-x^2")(3.0) == doctest::Approx(-9.0));
  CHECK(Expression::parse("exp(sin(t))")(0.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(Expression::parse("2*(x"), ValidationError);
}

TEST_CASE("OU discretization: labels are cell centers and pi follows the Gaussian density") {
  const FiniteChain c = discretize_diffusion_1d(ou_spec(), 400);
  REQUIRE(c.labels().size() == 400);
  const double dx = 16.0 / 400;
  CHECK(c.labels().front() == doctest::Approx(-8.0 + dx / 2));
  const InvariantMeasure pi = invariant_measure(c);
  CHECK(pi.reversible);
  double worst = 0.0;
  for (int i = 0; i < 400; ++i) {
    const double x = c.labels()[static_cast<std::size_t>(i)];
    worst = std::max(worst, std::abs(pi.pi(i) / dx - std::exp(-x * x / 2) / std::sqrt(2 * M_PI)));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("non-elliptic diffusion is rejected") {
  const auto spec = DiffusionSpec1D::from_expressions("0", "x", -1.0, 1.0);
  CHECK_THROWS_AS(discretize_diffusion_1d(spec, 10), EllipticityError);
}
