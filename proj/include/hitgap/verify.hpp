#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitgap/chain.hpp"
#include "hitgap/linalg.hpp"
#include "hitgap/psi.hpp"

namespace hitgap {

/// Outcome of one check on one instance.
///
/// `pass` is decided at construction from `metric <= tolerance` and nothing
/// else. Every check is phrased so that its metric is a residual or a
/// normalized violation (smaller is better).
struct VerificationReport {
  std::string check_id;
  std::string instance_id;
  std::string claimed;
  nlohmann::json measured = nlohmann::json::object();
  double metric = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string note;      ///< skip reason or module error
  double seconds = 0.0;  ///< wall-clock, serialized apart from the report body

  static VerificationReport make(std::string check, std::string instance, std::string claimed, double metric,
                                 double tolerance, nlohmann::json measured = nlohmann::json::object());
  static VerificationReport skip(std::string check, std::string instance, std::string reason);
  static VerificationReport error(std::string check, std::string instance, std::string what);
};

/// Body of a report without the wall-clock field.
nlohmann::json to_json(const VerificationReport& report);

/// Canonical order: (check_id, instance_id), stable otherwise.
void sort_reports(std::vector<VerificationReport>& reports);

/// alpha* >= pi(K) gap - 1e-8 max(1, alpha*).
VerificationReport check_theorem_bound(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                       const std::string& instance);

/// Eigenvalue and bisection routes to alpha* agree within 1e-6 relative.
VerificationReport check_threshold_agreement(const FiniteChain& chain, const InvariantMeasure& pi,
                                             const TargetSet& k, const std::string& instance);

/// h = h_{-alpha}: h = 1 on K and E(h, e_j) = alpha (h, e_j)_pi for every j outside K.
VerificationReport check_potential_properties(const FiniteChain& chain, const InvariantMeasure& pi,
                                              const TargetSet& k, double alpha, const std::string& instance,
                                              double alpha_star = std::numeric_limits<double>::quiet_NaN());

/// E(h_z, e_j) = -z (h_z, e_j)_pi for every j outside K.
VerificationReport check_z_identity(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                    Complex z, const std::string& instance);

/// ||h_z^m||_{L^2(pi)} / m! <= (Re z)^{-m} for m = 1..m_max; metric is the
/// largest ratio lhs / rhs minus one.
VerificationReport check_moment_bound(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                      Complex z, int m_max, const std::string& instance);

/// E(h_psi, e_j) = (h_psi', e_j)_pi for every j outside K, both from the direct oracle.
VerificationReport check_corollary_identity(const FiniteChain& chain, const InvariantMeasure& pi,
                                            const TargetSet& k, const PsiFunction& psi,
                                            const std::string& instance, double tolerance = 1e-8);

/// Contour potential against the direct oracle for each sigma, plus the spread
/// across sigma. Returns one report per sigma and one for the spread.
std::vector<VerificationReport> check_contour(const FiniteChain& chain, const TargetSet& k, const PsiFunction& psi,
                                              const std::vector<double>& sigmas, double tolerance,
                                              const std::string& instance);

/// Off-K residual of Q phi + alpha_tilde phi; b is reported.
VerificationReport check_lyapunov_drift(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                        double alpha_tilde, const std::string& instance, double tolerance = 1e-10);

struct CycleBoundSpec {
  TargetSet k;
  TargetSet s;
  double a = 1.0;
  double alpha_tilde = 0.0;
  double horizon = 1.0;  ///< S in [0, S]
};

/// States enclosed by S around K: S together with everything reachable from K
/// without passing through S.
std::vector<int> enclosed_region(const FiniteChain& chain, const TargetSet& k, const TargetSet& s);

/// q = max(sup_K E e^{-a tau_S}, sup_S E e^{-a tau_K}) < 1 and
/// e^{a S}(1 - q)^{-1} sup_E phi >= sup_K (e^{tQ} phi) on 101 grid times.
/// Throws GeometryError when K and S intersect or E has nothing between them.
VerificationReport cycle_bound(const FiniteChain& chain, const InvariantMeasure& pi, const CycleBoundSpec& spec,
                               const std::string& instance);

/// Random reversible chain with its target sets.
struct CorpusInstance {
  std::string id;
  FiniteChain chain;
  std::vector<TargetSet> targets;
};

struct CorpusSpec {
  int size = 200;
  int targets_per_chain = 5;
  std::uint64_t seed = 0;
  int n_min = 2;
  int n_max = 50;
};

std::vector<CorpusInstance> random_corpus(const CorpusSpec& spec);

/// The 2-state chain Q = [[-1, 1], [2, -2]].
FiniteChain two_state_chain();
/// Birth-death chain with n states, up rate 1 and down rate 2.
FiniteChain reference_birth_death(int n);

/// Discretized OU (a = -x, b = 2 on [-8, 8]) and double well (a = -V', V = (x^2 - 1)^2, b = 2 on [-3, 3]).
DiffusionSpec1D ou_spec();
DiffusionSpec1D double_well_spec();

/// Chain-solve value of E_x exp(alpha tau_K) at a coordinate, interpolated
/// linearly between the neighbouring cell centers.
double interpolate_on_grid(const FiniteChain& chain, const Vector& values, double x);

/// Quantitative surrogates of the gap/threshold equivalence on the diffusion benchmarks.
struct EquivalenceOptions {
  int ou_points = 2000;
  int ou_coarse_points = 1000;
  int double_well_points = 800;
};
std::vector<VerificationReport> check_equivalence_suite(const EquivalenceOptions& options = {});

/// Monte Carlo against the chain-solve oracle on the OU benchmark.
struct OuMonteCarloOptions {
  int points = 2000;
  double x0 = 2.0;
  double dt = 1e-3;
  std::size_t samples = 20000;
  std::uint64_t seed = 0;
  double sigmas = 3.0;
  bool bridge = true;
};
VerificationReport check_ou_monte_carlo(const OuMonteCarloOptions& options);

/// Fraction of (instance, seed) pairs whose exact-jump estimate lies within
/// 4 sigma of the potential; metric is the shortfall below 99%.
VerificationReport check_mc_corpus(const std::vector<CorpusInstance>& corpus, int instances, int seeds,
                                   std::size_t samples, std::uint64_t seed);

struct SuiteConfig {
  CorpusSpec corpus;
  std::set<std::string> checks;  ///< empty runs every check
  std::vector<double> alpha_fractions{0.25, 0.5, 0.9};
  std::vector<Complex> z_values{Complex(1.0, 0.0), Complex(2.0, 0.0), Complex(1.0, 1.0)};
  int moment_max = 5;
  std::vector<double> sigmas{0.5, 1.0, 2.0};
  double contour_tolerance = 1e-6;
  int corollary_instances = 10;
  std::uint64_t seed = 0;
  std::size_t mc_samples = 20000;
  double mc_dt = 1e-3;
  int mc_corpus_instances = 25;
  int mc_corpus_seeds = 4;
  std::size_t mc_corpus_samples = 4000;
  int workers = 0;
};

/// Every check name understood by run_suite.
const std::vector<std::string>& suite_check_names();

struct SuiteReport {
  std::vector<VerificationReport> reports;
  int passed = 0;
  int failed = 0;
  int skipped = 0;
  bool all_passed() const { return failed == 0; }
};

SuiteReport run_suite(const SuiteConfig& config);

}  // namespace hitgap
