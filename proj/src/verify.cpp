#include "hitgap/verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>

#include "hitgap/error.hpp"
#include "hitgap/montecarlo.hpp"
#include "hitgap/potentials.hpp"
#include "hitgap/random.hpp"
#include "hitgap/spectral.hpp"

namespace hitgap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string k_label(const TargetSet& k) {
  std::string s = "K={";
  for (std::size_t i = 0; i < k.members().size(); ++i) {
    if (i) s += ",";
    s += std::to_string(k.members()[i]);
  }
  return s + "}";
}

std::string z_label(Complex z) {
  char buf[64];
  if (z.imag() == 0.0) {
    std::snprintf(buf, sizeof buf, "z=%g", z.real());
  } else {
    std::snprintf(buf, sizeof buf, "z=%g%+gi", z.real(), z.imag());
  }
  return buf;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double theorem_metric(double alpha_star, double pi_k, double gap) {
  return (pi_k * gap - alpha_star) / std::max(1.0, alpha_star);
}

VerificationReport theorem_bound_with_gap(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                          double gap, const std::string& instance) {
  const std::string claim = "alpha* >= pi(K) * gap";
  if (k.is_full()) {
    return VerificationReport::make("theorem_bound", instance, claim, 0.0, 1e-8,
                                    {{"alpha_star", kInf}, {"pi_K", 1.0}, {"gap", gap}});
  }
  const double alpha_star = dirichlet_eigenvalue(chain, pi, k);
  const double pi_k = pi.mass(k.members());
  return VerificationReport::make("theorem_bound", instance, claim, theorem_metric(alpha_star, pi_k, gap), 1e-8,
                                  {{"alpha_star", alpha_star},
                                   {"pi_K", pi_k},
                                   {"gap", gap},
                                   {"pi_K_gap", pi_k * gap},
                                   {"slack", alpha_star - pi_k * gap}});
}

// Max over j outside K of |E(h, e_j) - c pi_j h_j|.
double basis_residual(const DirichletForm& form, const TargetSet& k, const CVector& h, Complex c) {
  const int n = static_cast<int>(h.size());
  const InvariantMeasure& pi = form.measure();
  double worst = 0.0;
  CVector e = CVector::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (k.contains(j)) continue;
    e(j) = 1.0;
    const Complex lhs = form.energy(h, e);
    e(j) = 0.0;
    worst = std::max(worst, std::abs(lhs - c * pi.pi(j) * h(j)));
  }
  return worst;
}

double on_target_deviation(const TargetSet& k, const CVector& h, Complex value) {
  double worst = 0.0;
  for (int x : k.members()) worst = std::max(worst, std::abs(h(x) - value));
  return worst;
}

}  // namespace

VerificationReport VerificationReport::make(std::string check, std::string instance, std::string claimed,
                                            double metric, double tolerance, nlohmann::json measured) {
  VerificationReport r;
  r.check_id = std::move(check);
  r.instance_id = std::move(instance);
  r.claimed = std::move(claimed);
  r.metric = metric;
  r.tolerance = tolerance;
  r.measured = std::move(measured);
  r.pass = metric <= tolerance;
  return r;
}

VerificationReport VerificationReport::skip(std::string check, std::string instance, std::string reason) {
  VerificationReport r;
  r.check_id = std::move(check);
  r.instance_id = std::move(instance);
  r.claimed = "not applicable";
  r.pass = true;
  r.skipped = true;
  r.note = std::move(reason);
  return r;
}

VerificationReport VerificationReport::error(std::string check, std::string instance, std::string what) {
  VerificationReport r;
  r.check_id = std::move(check);
  r.instance_id = std::move(instance);
  r.claimed = "module error";
  r.metric = kInf;
  r.pass = false;
  r.note = std::move(what);
  return r;
}

nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json out = {{"check_id", r.check_id},     {"instance_id", r.instance_id}, {"claimed", r.claimed},
                        {"measured", r.measured},     {"metric", r.metric},           {"tolerance", r.tolerance},
                        {"pass", r.pass}};
  if (r.skipped) out["skipped"] = true;
  if (!r.note.empty()) out["note"] = r.note;
  return out;
}

void sort_reports(std::vector<VerificationReport>& reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    return std::tie(a.check_id, a.instance_id) < std::tie(b.check_id, b.instance_id);
  });
}

VerificationReport check_theorem_bound(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                       const std::string& instance) {
  return theorem_bound_with_gap(chain, pi, k, spectral_gap(chain, pi).gap, instance);
}

VerificationReport check_threshold_agreement(const FiniteChain& chain, const InvariantMeasure& pi,
                                             const TargetSet& k, const std::string& instance) {
  const std::string claim = "eigenvalue and bisection thresholds agree; 0.99 alpha* finite, 1.01 alpha* infinite";
  if (k.is_full()) return VerificationReport::skip("threshold_agreement", instance, "K is the whole space");
  const ThresholdReport t = blowup_threshold(chain, pi, k);
  const bool below = exp_moment_finite(chain, k, 0.99 * t.alpha_star);
  const bool above = exp_moment_finite(chain, k, 1.01 * t.alpha_star);
  const double metric = below && !above ? t.agreement : kInf;
  nlohmann::json m = to_json(t);
  m["finite_at_0.99"] = below;
  m["finite_at_1.01"] = above;
  return VerificationReport::make("threshold_agreement", instance, claim, metric, 1e-6, m);
}

VerificationReport check_potential_properties(const FiniteChain& chain, const InvariantMeasure& pi,
                                              const TargetSet& k, double alpha, const std::string& instance,
                                              double alpha_star) {
  const std::string claim = "h = 1 on K, h >= 1, E(h,u) = alpha (h,u)_pi for u = 0 on K";
  const Potential p = exp_moment_potential(chain, pi, k, alpha, alpha_star);
  const DirichletForm form(chain, pi);
  const double weak = basis_residual(form, k, p.values, alpha);
  const double on_k = on_target_deviation(k, p.values, 1.0);
  const double below_one = std::max(0.0, 1.0 - p.real().minCoeff());
  return VerificationReport::make("potential_properties", instance + "/" + fmt("alpha=%.6g", alpha), claim,
                                  std::max({weak, on_k, below_one, p.residual}), 1e-9,
                                  {{"alpha", alpha},
                                   {"weak_residual", weak},
                                   {"solve_residual", p.residual},
                                   {"max_h", p.real().maxCoeff()}});
}

VerificationReport check_z_identity(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                    Complex z, const std::string& instance) {
  const std::string claim = "E(h_z,u) = -z (h_z,u)_pi for u = 0 on K; h_z = 1 on K; |h_z| <= 1";
  const Potential p = z_potential(chain, k, z);
  const DirichletForm form(chain, pi);
  const double weak = basis_residual(form, k, p.values, -z);
  const double on_k = on_target_deviation(k, p.values, 1.0);
  const double above_one = std::max(0.0, p.values.cwiseAbs().maxCoeff() - 1.0);
  return VerificationReport::make("z_identity", instance + "/" + z_label(z), claim,
                                  std::max({weak, on_k, above_one}), 1e-9,
                                  {{"weak_residual", weak}, {"solve_residual", p.residual}});
}

VerificationReport check_moment_bound(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                      Complex z, int m_max, const std::string& instance) {
  const std::string claim = "||h^m||_{L2(pi)} / m! <= (Re z)^{-m}";
  const auto hs = moment_potentials(chain, k, z, m_max);
  double worst = -kInf;
  double factorial = 1.0;
  double residual = 0.0;
  std::vector<double> ratios;
  for (int m = 1; m <= m_max; ++m) {
    factorial *= m;
    const CVector& h = hs[static_cast<std::size_t>(m)].values;
    const double norm = std::sqrt((pi.pi.array() * h.cwiseAbs2().array()).sum());
    const double ratio = (norm / factorial) * std::pow(z.real(), m);
    ratios.push_back(ratio);
    worst = std::max(worst, ratio - 1.0);
    residual = std::max(residual, hs[static_cast<std::size_t>(m)].residual);
  }
  return VerificationReport::make("moment_bound", instance + "/" + z_label(z), claim, worst, 0.0,
                                  {{"ratios", ratios}, {"recursion_residual", residual}});
}

VerificationReport check_corollary_identity(const FiniteChain& chain, const InvariantMeasure& pi,
                                            const TargetSet& k, const PsiFunction& psi,
                                            const std::string& instance, double tolerance) {
  const std::string claim = "E(h_psi,u) = (h_psi',u)_pi for u = 0 on K";
  require_corollary_mode(psi);
  const DirectResult h = psi_potential_direct(chain, k, psi);
  const DirectResult dh = psi_potential_direct(chain, k, psi.derivative());
  const DirichletForm form(chain, pi);
  const int n = chain.size();
  double worst = 0.0;
  CVector e = CVector::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (k.contains(j)) continue;
    e(j) = 1.0;
    const Complex lhs = form.energy(h.potential.values, e);
    e(j) = 0.0;
    worst = std::max(worst, std::abs(lhs - pi.pi(j) * dh.potential.values(j)));
  }
  return VerificationReport::make("corollary_identity", instance + "/" + psi.id(), claim, worst, tolerance,
                                  {{"residual", worst},
                                   {"quadrature_error", h.quadrature_error + dh.quadrature_error},
                                   {"horizon", h.horizon}});
}

std::vector<VerificationReport> check_contour(const FiniteChain& chain, const TargetSet& k, const PsiFunction& psi,
                                              const std::vector<double>& sigmas, double tolerance,
                                              const std::string& instance) {
  std::vector<VerificationReport> out;
  const DirectResult direct = psi_potential_direct(chain, k, psi);
  const Vector reference = direct.potential.real();
  std::vector<Vector> results;
  for (double sigma : sigmas) {
    ContourOptions o;
    o.sigma = sigma;
    o.tolerance = 0.5 * tolerance;
    const ContourResult c = psi_potential_contour(chain, k, psi, o);
    const Vector v = c.potential.real();
    results.push_back(v);
    const double diff = (v - reference).cwiseAbs().maxCoeff();
    out.push_back(VerificationReport::make(
        "contour_vs_direct", instance + "/" + psi.id() + "/" + fmt("sigma=%g", sigma),
        "contour inversion equals the direct oracle", std::max(diff, c.imag_residue > 1e-8 ? kInf : 0.0),
        tolerance,
        {{"max_abs_diff", diff},
         {"imag_residue", c.imag_residue},
         {"truncation_bound", c.truncation_bound},
         {"aliasing_bound", c.aliasing_bound},
         {"t_im", c.options.t_im},
         {"step", c.options.step},
         {"nodes", c.nodes}}));
  }
  double spread = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (std::size_t j = i + 1; j < results.size(); ++j) {
      spread = std::max(spread, (results[i] - results[j]).cwiseAbs().maxCoeff());
    }
  }
  out.push_back(VerificationReport::make("contour_sigma_independence", instance + "/" + psi.id(),
                                         "contour result does not depend on sigma", spread, tolerance,
                                         {{"sigmas", sigmas}, {"spread", spread}}));
  return out;
}

VerificationReport check_lyapunov_drift(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                        double alpha_tilde, const std::string& instance, double tolerance) {
  const LyapunovResult r = lyapunov_potential(chain, pi, k, alpha_tilde);
  return VerificationReport::make("lyapunov_drift", instance + "/" + fmt("alpha=%.6g", alpha_tilde),
                                  "Q phi = -alpha phi off K; Q phi <= -alpha phi + b 1_K", r.drift_residual,
                                  tolerance,
                                  {{"alpha_tilde", alpha_tilde},
                                   {"drift_residual", r.drift_residual},
                                   {"b", r.b},
                                   {"max_phi", r.phi.real().maxCoeff()}});
}

std::vector<int> enclosed_region(const FiniteChain& chain, const TargetSet& k, const TargetSet& s) {
  const int n = chain.size();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<int> frontier;
  for (int x : k.members()) {
    seen[static_cast<std::size_t>(x)] = 1;
    frontier.push(x);
  }
  const SparseMatrix& q = chain.generator();
  while (!frontier.empty()) {
    const int x = frontier.front();
    frontier.pop();
    for (SparseMatrix::InnerIterator it(q, x); it; ++it) {
      const int y = static_cast<int>(it.col());
      if (y == x || it.value() <= 0.0 || seen[static_cast<std::size_t>(y)] || s.contains(y)) continue;
      seen[static_cast<std::size_t>(y)] = 1;
      frontier.push(y);
    }
  }
  std::vector<int> region;
  for (int x = 0; x < n; ++x) {
    if (seen[static_cast<std::size_t>(x)] || s.contains(x)) region.push_back(x);
  }
  return region;
}

VerificationReport cycle_bound(const FiniteChain& chain, const InvariantMeasure& pi, const CycleBoundSpec& spec,
                               const std::string& instance) {
  const TargetSet& k = spec.k;
  const TargetSet& s = spec.s;
  if (k.state_count() != chain.size() || s.state_count() != chain.size()) {
    throw DomainError("cycle bound sets do not match the chain");
  }
  for (int x : k.members()) {
    if (s.contains(x)) throw GeometryError("K and S intersect at state " + std::to_string(x));
  }
  const std::vector<int> region = enclosed_region(chain, k, s);
  const auto between = std::count_if(region.begin(), region.end(),
                                     [&](int x) { return !k.contains(x) && !s.contains(x); });
  if (between == 0) throw GeometryError("no states lie strictly between K and S");
  if (!(spec.a > 0.0) || !(spec.horizon > 0.0)) throw DomainError("cycle bound needs a > 0 and S > 0");

  const Vector to_s = z_potential(chain, s, spec.a).real();
  const Vector to_k = z_potential(chain, k, spec.a).real();
  double q_ks = 0.0;
  double q_sk = 0.0;
  for (int x : k.members()) q_ks = std::max(q_ks, to_s(x));
  for (int x : s.members()) q_sk = std::max(q_sk, to_k(x));
  const double q = std::max(q_ks, q_sk);

  const Vector phi = lyapunov_potential(chain, pi, k, spec.alpha_tilde).phi.real();
  double sup_e = 0.0;
  for (int x : region) sup_e = std::max(sup_e, phi(x));
  const double bound = q < 1.0 ? std::exp(spec.a * spec.horizon) / (1.0 - q) * sup_e : kInf;

  const auto path = SemigroupPropagator(chain.generator()).trajectory(spec.horizon / 100.0, 100, phi);
  double direct = 0.0;
  double worst = -kInf;
  for (const Vector& v : path) {
    double sup_k = 0.0;
    for (int x : k.members()) sup_k = std::max(sup_k, v(x));
    direct = std::max(direct, sup_k);
    worst = std::max(worst, sup_k - bound);
  }
  const double metric = q < 1.0 ? worst / bound : kInf;
  return VerificationReport::make("cycle_bound", instance, "q < 1 and e^{aS}(1-q)^{-1} sup_E phi dominates e^{tQ}phi on K",
                                  metric, 0.0,
                                  {{"q", q},
                                   {"q_K_to_S", q_ks},
                                   {"q_S_to_K", q_sk},
                                   {"bound", bound},
                                   {"direct_max", direct},
                                   {"sup_E_phi", sup_e},
                                   {"region_size", region.size()},
                                   {"grid_times", path.size()},
                                   {"a", spec.a},
                                   {"alpha_tilde", spec.alpha_tilde},
                                   {"horizon", spec.horizon}});
}

std::vector<CorpusInstance> random_corpus(const CorpusSpec& spec) {
  if (spec.n_min < 2 || spec.n_max < spec.n_min) throw ValidationError("corpus sizes need 2 <= n_min <= n_max");
  Rng rng(spec.seed, 0xC0);
  std::vector<CorpusInstance> out;
  for (int i = 0; i < spec.size; ++i) {
    const int n = spec.n_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_max - spec.n_min + 1)));
    const std::uint64_t chain_seed = rng();
    char id[32];
    std::snprintf(id, sizeof id, "rc%03d-n%d", i, n);
    CorpusInstance inst{id, build_random_reversible(n, chain_seed), {}};
    for (int j = 0; j < spec.targets_per_chain; ++j) {
      const int size = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
      std::vector<int> states(static_cast<std::size_t>(n));
      for (int s = 0; s < n; ++s) states[static_cast<std::size_t>(s)] = s;
      for (int s = 0; s < size; ++s) {
        const auto pick = s + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - s)));
        std::swap(states[static_cast<std::size_t>(s)], states[static_cast<std::size_t>(pick)]);
      }
      states.resize(static_cast<std::size_t>(size));
      inst.targets.emplace_back(n, states);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

FiniteChain two_state_chain() { return FiniteChain::from_dense((Matrix(2, 2) << -1, 1, 2, -2).finished()); }

FiniteChain reference_birth_death(int n) {
  return build_birth_death(n, std::vector<double>(static_cast<std::size_t>(n - 1), 1.0),
                           std::vector<double>(static_cast<std::size_t>(n - 1), 2.0));
}

DiffusionSpec1D ou_spec() { return DiffusionSpec1D::from_expressions("-x", "2", -8.0, 8.0); }

DiffusionSpec1D double_well_spec() { return DiffusionSpec1D::from_expressions("-4*x^3 + 4*x", "2", -3.0, 3.0); }

double interpolate_on_grid(const FiniteChain& chain, const Vector& values, double x) {
  const auto& lab = chain.labels();
  if (lab.empty()) throw DomainError("coordinate lookup requires labels");
  if (x <= lab.front()) return values(0);
  if (x >= lab.back()) return values(static_cast<int>(lab.size()) - 1);
  const auto it = std::upper_bound(lab.begin(), lab.end(), x);
  const int hi = static_cast<int>(it - lab.begin());
  const int lo = hi - 1;
  const double w = (x - lab[static_cast<std::size_t>(lo)]) / (lab[static_cast<std::size_t>(hi)] - lab[static_cast<std::size_t>(lo)]);
  return (1.0 - w) * values(lo) + w * values(hi);
}

std::vector<VerificationReport> check_equivalence_suite(const EquivalenceOptions& options) {
  std::vector<VerificationReport> out;
  const std::string ou_id = "ou-" + std::to_string(options.ou_points);
  const FiniteChain ou = discretize_diffusion_1d(ou_spec(), options.ou_points);
  const InvariantMeasure ou_pi = invariant_measure(ou);
  const double ou_gap = spectral_gap(ou, ou_pi).gap;
  out.push_back(VerificationReport::make("ou_gap", ou_id, "OU spectral gap is 1 within 1%", std::abs(ou_gap - 1.0),
                                         0.01, {{"gap", ou_gap}}));

  const FiniteChain coarse = discretize_diffusion_1d(ou_spec(), options.ou_coarse_points);
  const InvariantMeasure coarse_pi = invariant_measure(coarse);
  const TargetSet k_fine = TargetSet::from_interval(ou, -1.0, 1.0);
  const TargetSet k_coarse = TargetSet::from_interval(coarse, -1.0, 1.0);
  const double a_fine = dirichlet_eigenvalue(ou, ou_pi, k_fine);
  const double a_coarse = dirichlet_eigenvalue(coarse, coarse_pi, k_coarse);
  out.push_back(VerificationReport::make(
      "ou_threshold_refinement", "ou-" + std::to_string(options.ou_coarse_points) + "-vs-" + std::to_string(options.ou_points) + "/K=[-1,1]",
      "alpha* changes by at most 2% under grid refinement", std::abs(a_fine - a_coarse) / a_fine, 0.02,
      {{"alpha_star_coarse", a_coarse}, {"alpha_star_fine", a_fine}}));

  // Threshold lower bound on nested intervals, plus monotonicity in K.
  const std::vector<std::pair<double, double>> nested{{-0.5, 0.5}, {-1.0, 1.0}, {-2.0, 2.0}, {-4.0, 4.0}};
  std::vector<double> alphas;
  for (const auto& [lo, hi] : nested) {
    const TargetSet k = TargetSet::from_interval(ou, lo, hi);
    char id[64];
    std::snprintf(id, sizeof id, "%s/K=[%g,%g]", ou_id.c_str(), lo, hi);
    out.push_back(theorem_bound_with_gap(ou, ou_pi, k, ou_gap, id));
    alphas.push_back(out.back().measured["alpha_star"].get<double>());
  }
  double worst_drop = 0.0;
  for (std::size_t i = 0; i + 1 < alphas.size(); ++i) {
    worst_drop = std::max(worst_drop, (alphas[i] - alphas[i + 1]) / alphas[i + 1]);
  }
  out.push_back(VerificationReport::make("k_monotonicity", ou_id, "enlarging K never decreases alpha*", worst_drop,
                                         1e-9, {{"alpha_star", alphas}}));
  out.push_back(VerificationReport::skip("theorem_bound", ou_id + "/K=full", "K is the whole space"));

  const std::string dw_id = "double-well-" + std::to_string(options.double_well_points);
  const FiniteChain dw = discretize_diffusion_1d(double_well_spec(), options.double_well_points);
  const InvariantMeasure dw_pi = invariant_measure(dw);
  const double dw_gap = spectral_gap(dw, dw_pi).gap;
  const TargetSet well = TargetSet::from_interval(dw, -1.5, -0.5);
  const TargetSet both = TargetSet::from_interval(dw, -1.5, 1.5);
  out.push_back(theorem_bound_with_gap(dw, dw_pi, well, dw_gap, dw_id + "/K=[-1.5,-0.5]"));
  const double dw_alpha_well = out.back().measured["alpha_star"].get<double>();
  out.push_back(theorem_bound_with_gap(dw, dw_pi, both, dw_gap, dw_id + "/K=[-1.5,1.5]"));
  const TargetSet ou_well = TargetSet::from_interval(ou, -1.5, -0.5);
  const double ou_alpha_well = dirichlet_eigenvalue(ou, ou_pi, ou_well);
  out.push_back(VerificationReport::make("double_well_gap", dw_id, "metastable double well has a smaller gap than OU",
                                         dw_gap - ou_gap, 0.0,
                                         {{"gap_double_well", dw_gap},
                                          {"gap_ou", ou_gap},
                                          {"alpha_star_one_well_double_well", dw_alpha_well},
                                          {"alpha_star_one_well_ou", ou_alpha_well}}));

  // Positive thresholds for every tested K go with a positive gap.
  const bool thresholds_positive = std::all_of(alphas.begin(), alphas.end(), [](double a) { return a > 0.0; });
  out.push_back(VerificationReport::make("gap_positive", ou_id, "all tested alpha* > 0 implies gap > 0",
                                         thresholds_positive && !(ou_gap > 0.0) ? 1.0 : 0.0, 0.0,
                                         {{"gap", ou_gap}, {"thresholds_positive", thresholds_positive}}));
  out.push_back(VerificationReport::make("gap_positive", dw_id, "all tested alpha* > 0 implies gap > 0",
                                         dw_alpha_well > 0.0 && !(dw_gap > 0.0) ? 1.0 : 0.0, 0.0,
                                         {{"gap", dw_gap}}));
  return out;
}

VerificationReport check_ou_monte_carlo(const OuMonteCarloOptions& o) {
  const DiffusionSpec1D spec = ou_spec();
  const FiniteChain chain = discretize_diffusion_1d(spec, o.points);
  const InvariantMeasure pi = invariant_measure(chain);
  const double gap = spectral_gap(chain, pi).gap;
  const TargetSet k = TargetSet::from_interval(chain, -1.0, 1.0);
  const double alpha = 0.5 * pi.mass(k.members()) * gap;
  const Vector h = exp_moment_potential(chain, pi, k, alpha).real();
  const double oracle = interpolate_on_grid(chain, h, o.x0);
  SamplingOptions so;
  so.time_cap = 50.0 / gap;
  so.bridge = o.bridge;
  const HittingSample sample = sample_hitting_time_diffusion(spec, o.x0, Interval{-1.0, 1.0}, o.dt, o.samples, o.seed, so);
  EstimateOptions eo;
  eo.seed = o.seed;
  const MomentEstimate e = estimate_exp_moment(sample, alpha, eo);
  const double z = std::abs(e.mean - oracle) / e.std_error;
  char id[96];
  std::snprintf(id, sizeof id, "ou-%d/K=[-1,1]/x0=%g/dt=%g/n=%zu", o.points, o.x0, o.dt, o.samples);
  nlohmann::json m = to_json(e);
  m["oracle"] = oracle;
  m["z_score"] = z;
  m["seed"] = o.seed;
  return VerificationReport::make("mc_ou", id, "Euler-Maruyama exponential moment matches the chain solve", z,
                                  o.sigmas, m);
}

VerificationReport check_mc_corpus(const std::vector<CorpusInstance>& corpus, int instances, int seeds,
                                   std::size_t samples, std::uint64_t seed) {
  int total = 0;
  int within = 0;
  double worst = 0.0;
  for (int i = 0; i < instances && i < static_cast<int>(corpus.size()); ++i) {
    const CorpusInstance& inst = corpus[static_cast<std::size_t>(i)];
    const TargetSet& k = inst.targets.front();
    const InvariantMeasure pi = invariant_measure(inst.chain);
    const double gap = spectral_gap(inst.chain, pi).gap;
    const double alpha = 0.4 * dirichlet_eigenvalue(inst.chain, pi, k);
    const Vector h = exp_moment_potential(inst.chain, pi, k, alpha).real();
    const int x0 = k.complement().front();
    for (int s = 0; s < seeds; ++s) {
      std::uint64_t state = seed ^ (static_cast<std::uint64_t>(i) << 20) ^ static_cast<std::uint64_t>(s);
      SamplingOptions so;
      so.time_cap = 50.0 / gap;
      so.workers = 1;
      const auto sample = sample_hitting_time_ctmc(inst.chain, x0, k, samples, splitmix64(state), so);
      const MomentEstimate e = estimate_exp_moment(sample, alpha);
      const double z = std::abs(e.mean - h(x0)) / std::max(e.std_error, 1e-300);
      worst = std::max(worst, z);
      ++total;
      if (z <= 4.0) ++within;
    }
  }
  const double fraction = total ? static_cast<double>(within) / total : 1.0;
  return VerificationReport::make("mc_corpus", "corpus-first-" + std::to_string(instances),
                                  "exact-jump estimates within 4 sigma of the potential in >= 99% of pairs",
                                  std::max(0.0, 0.99 - fraction), 0.0,
                                  {{"pairs", total}, {"within_4_sigma", within}, {"fraction", fraction},
                                   {"max_z", worst}, {"alpha_fraction", 0.4}, {"samples", samples}});
}

const std::vector<std::string>& suite_check_names() {
  static const std::vector<std::string> names{
      "theorem_bound",  "threshold_agreement", "potential_properties", "z_identity",   "moment_bound",
      "corollary_identity", "contour",         "lyapunov_drift",       "cycle_bound",  "equivalence",
      "mc_two_state",   "mc_ou",               "mc_corpus",            "shifted_moment"};
  return names;
}

namespace {

using Task = std::function<std::vector<VerificationReport>()>;

// Runs a named task and converts library errors into failed reports.
Task guarded(std::string check, std::string instance, Task body) {
  return [check = std::move(check), instance = std::move(instance), body = std::move(body)] {
    const auto start = std::chrono::steady_clock::now();
    std::vector<VerificationReport> out;
    try {
      out = body();
    } catch (const Error& e) {
      out.push_back(VerificationReport::error(check, instance, e.what()));
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto& r : out) r.seconds = seconds / static_cast<double>(out.size());
    return out;
  };
}

std::vector<VerificationReport> run_tasks(const std::vector<Task>& tasks, int workers) {
  std::vector<std::vector<VerificationReport>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) results[i] = tasks[i]();
  };
  unsigned count = workers > 0 ? static_cast<unsigned>(workers) : std::thread::hardware_concurrency();
  count = std::max(1u, count);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::vector<VerificationReport> all;
  for (auto& r : results) all.insert(all.end(), r.begin(), r.end());
  return all;
}

// Every corpus-wide check on one chain.
std::vector<VerificationReport> corpus_checks(const CorpusInstance& inst, const SuiteConfig& config,
                                              const std::function<bool(const std::string&)>& enabled) {
  std::vector<VerificationReport> out;
  const InvariantMeasure pi = invariant_measure(inst.chain);
  const double gap = spectral_gap(inst.chain, pi).gap;
  for (const TargetSet& k : inst.targets) {
    const std::string id = inst.id + "/" + k_label(k);
    auto attempt = [&](const std::string& check, const std::function<void()>& body) {
      if (!enabled(check)) return;
      try {
        body();
      } catch (const Error& e) {
        out.push_back(VerificationReport::error(check, id, e.what()));
      }
    };
    attempt("theorem_bound", [&] { out.push_back(theorem_bound_with_gap(inst.chain, pi, k, gap, id)); });
    attempt("threshold_agreement", [&] { out.push_back(check_threshold_agreement(inst.chain, pi, k, id)); });
    if (k.is_full()) {
      for (const char* check : {"potential_properties", "z_identity", "moment_bound", "lyapunov_drift"}) {
        if (enabled(check)) out.push_back(VerificationReport::skip(check, id, "K is the whole space"));
      }
      continue;
    }
    const double alpha_star = dirichlet_eigenvalue(inst.chain, pi, k);
    attempt("potential_properties", [&] {
      for (double f : config.alpha_fractions) {
        out.push_back(check_potential_properties(inst.chain, pi, k, f * alpha_star, id, alpha_star));
      }
    });
    attempt("z_identity", [&] {
      for (Complex z : config.z_values) out.push_back(check_z_identity(inst.chain, pi, k, z, id));
    });
    attempt("moment_bound", [&] {
      for (Complex z : config.z_values) out.push_back(check_moment_bound(inst.chain, pi, k, z, config.moment_max, id));
    });
    attempt("lyapunov_drift", [&] { out.push_back(check_lyapunov_drift(inst.chain, pi, k, 0.5 * alpha_star, id)); });
  }
  return out;
}

}  // namespace

SuiteReport run_suite(const SuiteConfig& config) {
  for (const auto& c : config.checks) {
    const auto& names = suite_check_names();
    if (std::find(names.begin(), names.end(), c) == names.end()) {
      throw ConfigError({"checks: unknown check \"" + c + "\""});
    }
  }
  auto enabled = [&](const std::string& name) { return config.checks.empty() || config.checks.count(name) > 0; };
  const auto corpus = std::make_shared<std::vector<CorpusInstance>>(random_corpus(config.corpus));
  std::vector<Task> tasks;

  // Sharpness witness and small reference chains.
  tasks.push_back(guarded("two-state", "two-state", [&config, enabled] {
    CorpusInstance inst{"two-state", two_state_chain(), {TargetSet(2, {0}), TargetSet(2, {1}), TargetSet::full(2)}};
    auto out = corpus_checks(inst, config, enabled);
    if (enabled("cycle_bound")) {
      const InvariantMeasure pi = invariant_measure(inst.chain);
      bool geometry_error = false;
      try {
        cycle_bound(inst.chain, pi, CycleBoundSpec{TargetSet(2, {0}), TargetSet(2, {1}), 1.0, 1.0, 1.0}, "two-state");
      } catch (const GeometryError&) {
        geometry_error = true;
      }
      out.push_back(VerificationReport::make("cycle_geometry", "two-state/K={0}/S={1}",
                                             "no separating geometry exists on two states", geometry_error ? 0.0 : 1.0,
                                             0.0, {{"geometry_error", geometry_error}}));
    }
    return out;
  }));
  for (std::size_t i = 0; i < corpus->size(); ++i) {
    tasks.push_back(guarded("corpus", (*corpus)[i].id, [&config, enabled, corpus, i] {
      return corpus_checks((*corpus)[i], config, enabled);
    }));
  }

  if (enabled("corollary_identity")) {
    const PsiFunction psi = PsiFunction::smoothstep(1.0, 2.0);
    tasks.push_back(guarded("corollary_identity", "two-state", [psi] {
      const FiniteChain c = two_state_chain();
      return std::vector{check_corollary_identity(c, invariant_measure(c), TargetSet(2, {0}), psi, "two-state/K={0}")};
    }));
    tasks.push_back(guarded("corollary_identity", "bd20", [psi] {
      const FiniteChain c = reference_birth_death(20);
      return std::vector{check_corollary_identity(c, invariant_measure(c), TargetSet(20, {0}), psi, "bd20/K={0}")};
    }));
    tasks.push_back(guarded("corollary_identity", "two-state-exp", [] {
      const FiniteChain c = two_state_chain();
      return std::vector{check_corollary_identity(c, invariant_measure(c), TargetSet(2, {0}),
                                                  PsiFunction::exponential(1.0), "two-state/K={0}", 1e-10)};
    }));
    for (int i = 0; i < config.corollary_instances && i < static_cast<int>(corpus->size()); ++i) {
      tasks.push_back(guarded("corollary_identity", (*corpus)[static_cast<std::size_t>(i)].id, [psi, corpus, i] {
        const CorpusInstance& inst = (*corpus)[static_cast<std::size_t>(i)];
        return std::vector{check_corollary_identity(inst.chain, invariant_measure(inst.chain), inst.targets.front(),
                                                    psi, inst.id + "/" + k_label(inst.targets.front()))};
      }));
    }
  }

  if (enabled("contour")) {
    const PsiFunction bump = PsiFunction::bump(1.0, 2.0);
    tasks.push_back(guarded("contour", "two-state", [bump, &config] {
      return check_contour(two_state_chain(), TargetSet(2, {0}), bump, config.sigmas, config.contour_tolerance,
                           "two-state/K={0}");
    }));
    tasks.push_back(guarded("contour", "bd20", [bump, &config] {
      return check_contour(reference_birth_death(20), TargetSet(20, {0}), bump, config.sigmas,
                           config.contour_tolerance, "bd20/K={0}");
    }));
  }

  if (enabled("cycle_bound")) {
    tasks.push_back(guarded("cycle_bound", "bd5", [] {
      const FiniteChain c = reference_birth_death(5);
      const InvariantMeasure pi = invariant_measure(c);
      const TargetSet k(5, {0});
      const double alpha_star = dirichlet_eigenvalue(c, pi, k);
      return std::vector{cycle_bound(c, pi, CycleBoundSpec{k, TargetSet(5, {3}), 1.0, 0.5 * alpha_star, 1.0},
                                     "bd5/K={0}/S={3}")};
    }));
    tasks.push_back(guarded("cycle_bound", "ou-2000", [] {
      const FiniteChain c = discretize_diffusion_1d(ou_spec(), 2000);
      const InvariantMeasure pi = invariant_measure(c);
      const TargetSet k = TargetSet::from_interval(c, -1.0, 1.0);
      const double dx = c.labels()[1] - c.labels()[0];
      std::vector<int> shell;
      for (int i = 0; i < c.size(); ++i) {
        if (std::abs(std::abs(c.labels()[static_cast<std::size_t>(i)]) - 2.0) <= 0.5 * dx * (1.0 + 1e-9)) shell.push_back(i);
      }
      const double alpha_star = dirichlet_eigenvalue(c, pi, k);
      return std::vector{cycle_bound(c, pi, CycleBoundSpec{k, TargetSet(c.size(), shell), 1.0, 0.5 * alpha_star, 1.0},
                                     "ou-2000/K=[-1,1]/S=|x|~2")};
    }));
    tasks.push_back(guarded("lyapunov_drift", "ou-2000", [] {
      const FiniteChain c = discretize_diffusion_1d(ou_spec(), 2000);
      const InvariantMeasure pi = invariant_measure(c);
      const TargetSet k = TargetSet::from_interval(c, -1.0, 1.0);
      const double alpha = 0.5 * pi.mass(k.members()) * spectral_gap(c, pi).gap;
      return std::vector{check_lyapunov_drift(c, pi, k, alpha, "ou-2000/K=[-1,1]", 1e-9)};
    }));
  }

  if (enabled("equivalence")) {
    tasks.push_back(guarded("equivalence", "diffusions", [] { return check_equivalence_suite(); }));
  }

  if (enabled("mc_ou")) {
    tasks.push_back(guarded("mc_ou", "ou-2000", [&config] {
      OuMonteCarloOptions o;
      o.seed = config.seed;
      o.samples = config.mc_samples;
      o.dt = config.mc_dt;
      return std::vector{check_ou_monte_carlo(o)};
    }));
  }

  if (enabled("mc_two_state")) {
    tasks.push_back(guarded("mc_two_state", "two-state", [&config] {
      const FiniteChain c = two_state_chain();
      const TargetSet k(2, {0});
      const auto sample = sample_hitting_time_ctmc(c, 1, k, 100000, config.seed);
      double mean = 0.0;
      for (double t : sample.times) mean += t;
      mean /= static_cast<double>(sample.times.size());
      double var = 0.0;
      for (double t : sample.times) var += (t - mean) * (t - mean);
      const double se = std::sqrt(var / static_cast<double>(sample.times.size() - 1) / static_cast<double>(sample.times.size()));
      EstimateOptions eo;
      eo.seed = config.seed;
      const MomentEstimate e = estimate_exp_moment(sample, 1.0, eo);
      nlohmann::json m = to_json(e);
      m["oracle"] = 2.0;
      return std::vector{
          VerificationReport::make("mc_two_state", "two-state/K={0}/x0=1/mean_tau", "sample mean of tau is 1/2 within 3 sigma",
                                   std::abs(mean - 0.5) / se, 3.0, {{"mean", mean}, {"std_error", se}, {"oracle", 0.5}}),
          VerificationReport::make("mc_two_state", "two-state/K={0}/x0=1/alpha=1", "E e^{tau} = 2 within 3 sigma",
                                   std::abs(e.mean - 2.0) / e.std_error, 3.0, m)};
    }));
  }

  if (enabled("shifted_moment")) {
    tasks.push_back(guarded("shifted_moment", "two-state", [&config] {
      const FiniteChain c = two_state_chain();
      const auto r = estimate_shifted_moment(c, invariant_measure(c), 0, TargetSet(2, {0}), 1.0, 1.0, 100000, config.seed);
      nlohmann::json m = to_json(r.estimate);
      m["oracle"] = r.oracle;
      return std::vector{VerificationReport::make("shifted_moment", "two-state/K={0}/x0=0/t=1/alpha=1",
                                                  "E e^{alpha tau^t} = (e^{tQ} phi)(x0) within 3 sigma",
                                                  std::abs(r.estimate.mean - r.oracle) / r.estimate.std_error, 3.0, m)};
    }));
  }

  if (enabled("mc_corpus")) {
    tasks.push_back(guarded("mc_corpus", "corpus", [&config, corpus] {
      return std::vector{check_mc_corpus(*corpus, config.mc_corpus_instances, config.mc_corpus_seeds,
                                         config.mc_corpus_samples, config.seed)};
    }));
  }

  SuiteReport report;
  report.reports = run_tasks(tasks, config.workers);
  sort_reports(report.reports);
  for (const auto& r : report.reports) {
    if (r.skipped) {
      ++report.skipped;
    } else if (r.pass) {
      ++report.passed;
    } else {
      ++report.failed;
    }
  }
  return report;
}

}  // namespace hitgap
