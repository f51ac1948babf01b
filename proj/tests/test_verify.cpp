#include <doctest.h>

#include "hitgap/error.hpp"
#include "hitgap/potentials.hpp"
#include "hitgap/spectral.hpp"
#include "hitgap/verify.hpp"

using namespace hitgap;

TEST_CASE("pass is metric <= tolerance and nothing else") {
  CHECK(VerificationReport::make("c", "i", "", 1e-9, 1e-8).pass);
  CHECK_FALSE(VerificationReport::make("c", "i", "", 2e-8, 1e-8).pass);
  CHECK_FALSE(VerificationReport::make("c", "i", "", std::nan(""), 1e-8).pass);
  const auto s = VerificationReport::skip("c", "i", "why");
  CHECK(s.skipped);
  CHECK(s.pass);
  CHECK_FALSE(VerificationReport::error("c", "i", "boom").pass);
}

TEST_CASE("reports sort by (check_id, instance_id)") {
  std::vector<VerificationReport> r{VerificationReport::make("b", "1", "", 0, 0),
                                    VerificationReport::make("a", "2", "", 0, 0),
                                    VerificationReport::make("a", "1", "", 0, 0)};
  sort_reports(r);
  CHECK(r[0].check_id == "a");
  CHECK(r[0].instance_id == "1");
  CHECK(r[2].check_id == "b");
}

TEST_CASE("theorem bound on the sharpness witness is tight") {
  const FiniteChain c = two_state_chain();
  const auto r = check_theorem_bound(c, invariant_measure(c), TargetSet(2, {0}), "two-state");
  CHECK(r.pass);
  CHECK(std::abs(r.measured["slack"].get<double>()) < 1e-12);
}

TEST_CASE("weak identities hold on a birth-death chain") {
  const FiniteChain c = reference_birth_death(10);
  const InvariantMeasure pi = invariant_measure(c);
  const TargetSet k(10, {0, 9});
  const double a = dirichlet_eigenvalue(c, pi, k);
  CHECK(check_potential_properties(c, pi, k, 0.5 * a, "bd10").pass);
  CHECK(check_z_identity(c, pi, k, Complex(1, 1), "bd10").pass);
  CHECK(check_moment_bound(c, pi, k, Complex(2, 0), 5, "bd10").pass);
  CHECK(check_lyapunov_drift(c, pi, k, 0.5 * a, "bd10").pass);
  CHECK(check_threshold_agreement(c, pi, k, "bd10").pass);
  CHECK(check_corollary_identity(c, pi, k, PsiFunction::smoothstep(1.0, 2.0), "bd10").pass);
}

TEST_CASE("a wrong potential fails the weak identity") {
  // Sanity check that the residual is sensitive: perturbed alpha.
  const FiniteChain c = reference_birth_death(6);
  const InvariantMeasure pi = invariant_measure(c);
  const TargetSet k(6, {0});
  const double a = dirichlet_eigenvalue(c, pi, k);
  const Potential p = exp_moment_potential(c, pi, k, 0.5 * a);
  const DirichletForm form(c, pi);
  CVector e = CVector::Zero(6);
  e(3) = 1.0;
  const Complex lhs = form.energy(p.values, e);
  CHECK(std::abs(lhs - 0.5 * a * pi.pi(3) * p.values(3)) < 1e-12);
  CHECK(std::abs(lhs - 0.51 * a * pi.pi(3) * p.values(3)) > 1e-6);
}

TEST_CASE("cycle bound: 2-state has no separating geometry") {
  const FiniteChain c = two_state_chain();
  const CycleBoundSpec spec{TargetSet(2, {0}), TargetSet(2, {1}), 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(cycle_bound(c, invariant_measure(c), spec, "two-state"), GeometryError);
  const CycleBoundSpec overlap{TargetSet(2, {0}), TargetSet(2, {0}), 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(cycle_bound(c, invariant_measure(c), overlap, "two-state"), GeometryError);
}

TEST_CASE("cycle bound holds on the 5-state birth-death chain") {
  const FiniteChain c = reference_birth_death(5);
  const InvariantMeasure pi = invariant_measure(c);
  const TargetSet k(5, {0});
  const double a = dirichlet_eigenvalue(c, pi, k);
  const auto r = cycle_bound(c, pi, CycleBoundSpec{k, TargetSet(5, {3}), 1.0, 0.5 * a, 1.0}, "bd5");
  CHECK(r.pass);
  CHECK(r.measured["q"].get<double>() < 1.0);
  CHECK(r.measured["grid_times"].get<int>() == 101);
  CHECK(enclosed_region(c, k, TargetSet(5, {3})) == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("corpus is deterministic and uses proper target sets") {
  CorpusSpec spec;
  spec.size = 20;
  const auto a = random_corpus(spec);
  const auto b = random_corpus(spec);
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK((a[i].chain.dense() - b[i].chain.dense()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a[i].chain.size() <= 50);
    CHECK(a[i].targets.size() == 5);
    for (const auto& k : a[i].targets) CHECK_FALSE(k.is_full());
  }
}

TEST_CASE("interpolation between cell centers") {
  const FiniteChain c = discretize_diffusion_1d(ou_spec(), 16);
  Vector v(16);
  for (int i = 0; i < 16; ++i) v(i) = c.labels()[static_cast<std::size_t>(i)] * 2.0;
  CHECK(interpolate_on_grid(c, v, 2.0) == doctest::Approx(4.0));
  CHECK(interpolate_on_grid(c, v, 0.3) == doctest::Approx(0.6));
}

TEST_CASE("unknown check names are configuration errors before any computation") {
  SuiteConfig config;
  config.checks = {"no_such_check"};
  CHECK_THROWS_AS(run_suite(config), ConfigError);
}

TEST_CASE("small suite run: every record passes and counts add up") {
  SuiteConfig config;
  config.corpus.size = 5;
  config.checks = {"theorem_bound", "z_identity", "moment_bound", "cycle_bound"};
  const SuiteReport r = run_suite(config);
  CHECK(r.all_passed());
  CHECK(r.passed + r.failed + r.skipped == static_cast<int>(r.reports.size()));
}
