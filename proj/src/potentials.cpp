#include "hitgap/potentials.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include <Eigen/SparseLU>

#include "hitgap/error.hpp"
#include "hitgap/quadrature.hpp"
#include "hitgap/spectral.hpp"

namespace hitgap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_target(const FiniteChain& chain, const TargetSet& k) {
  if (k.state_count() != chain.size()) {
    throw DomainError("target set is over " + std::to_string(k.state_count()) + " states, chain has " +
                      std::to_string(chain.size()));
  }
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

CVector solve_free(const KilledGenerator& kg, Complex z) {
  const ShiftedSolver solver(kg, z);
  return solver.solve(-kg.rate_into_target().cast<Complex>());
}

double free_residual(const KilledGenerator& kg, const CVector& h_free, const CVector& rhs, Complex z) {
  if (kg.size() == 0) return 0.0;
  const CVector r = kg.sub_generator().cast<Complex>() * h_free - z * h_free - rhs;
  return r.cwiseAbs().maxCoeff();
}

}  // namespace

const char* to_string(Potential::Kind kind) {
  switch (kind) {
    case Potential::Kind::Z: return "z";
    case Potential::Kind::ExpMoment: return "exp_moment";
    case Potential::Kind::Moment: return "moment";
    case Potential::Kind::Psi: return "psi";
    case Potential::Kind::Lyapunov: return "lyapunov";
  }
  return "unknown";
}

nlohmann::json to_json(const Potential& p) {
  nlohmann::json out = {{"kind", to_string(p.kind)}, {"K", p.target}};
  if (p.parameter.imag() == 0.0) {
    out["param"] = p.parameter.real();
  } else {
    out["param"] = {p.parameter.real(), p.parameter.imag()};
  }
  if (p.kind == Potential::Kind::Moment) out["order"] = p.order;
  if (!p.psi.empty()) out["psi"] = p.psi;
  out["values_re"] = to_std(p.values.real());
  out["values_im"] = to_std(p.values.imag());
  out["residual"] = p.residual;
  return out;
}

KilledGenerator::KilledGenerator(const FiniteChain& chain, const TargetSet& k)
    : chain_(&chain), k_(&k), free_(k.complement()) {
  check_target(chain, k);
  const int m = size();
  std::vector<int> index(static_cast<std::size_t>(chain.size()), -1);
  for (int a = 0; a < m; ++a) index[static_cast<std::size_t>(free_[static_cast<std::size_t>(a)])] = a;
  std::vector<Eigen::Triplet<double>> trips;
  into_target_ = Vector::Zero(m);
  const SparseMatrix& q = chain.generator();
  for (int a = 0; a < m; ++a) {
    const int x = free_[static_cast<std::size_t>(a)];
    for (SparseMatrix::InnerIterator it(q, x); it; ++it) {
      const int b = index[static_cast<std::size_t>(it.col())];
      if (b >= 0) {
        trips.emplace_back(a, b, it.value());
      } else {
        into_target_(a) += it.value();
      }
    }
  }
  sub_ = SparseMatrix(m, m);
  sub_.setFromTriplets(trips.begin(), trips.end());
}

CVector KilledGenerator::lift(const CVector& free, Complex on_target) const {
  CVector full = CVector::Constant(chain_->size(), on_target);
  for (int a = 0; a < size(); ++a) full(free_[static_cast<std::size_t>(a)]) = free(a);
  return full;
}

CVector KilledGenerator::restrict_free(const CVector& full) const {
  CVector out(size());
  for (int a = 0; a < size(); ++a) out(a) = full(free_[static_cast<std::size_t>(a)]);
  return out;
}

struct ShiftedSolver::Impl {
  bool dense = true;
  CMatrix a;
  Eigen::PartialPivLU<CMatrix> lu;
  Eigen::SparseMatrix<Complex> sa;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> slu;

  CVector apply(const CVector& x) const { return dense ? CVector(a * x) : CVector(sa * x); }
  CVector raw(const CVector& b) const { return dense ? CVector(lu.solve(b)) : CVector(slu.solve(b)); }
};

ShiftedSolver::ShiftedSolver(const KilledGenerator& killed, Complex z) : impl_(std::make_unique<Impl>()) {
  const int m = killed.size();
  Eigen::SparseMatrix<Complex> shifted = killed.sub_generator().cast<Complex>();
  for (int i = 0; i < m; ++i) shifted.coeffRef(i, i) -= z;
  if (m <= kDenseLimit) {
    impl_->a = CMatrix(shifted);
    impl_->lu.compute(impl_->a);
  } else {
    impl_->dense = false;
    impl_->sa = shifted;
    impl_->sa.makeCompressed();
    impl_->slu.compute(impl_->sa);
    if (impl_->slu.info() != Eigen::Success) {
      throw InternalError("sparse factorization of Q_FF - z failed at z = " + std::to_string(z.real()) + "+" +
                          std::to_string(z.imag()) + "i");
    }
  }
}

ShiftedSolver::~ShiftedSolver() = default;
ShiftedSolver::ShiftedSolver(ShiftedSolver&&) noexcept = default;

CVector ShiftedSolver::solve(const CVector& rhs) const {
  CVector x = impl_->raw(rhs);
  const CVector r = rhs - impl_->apply(x);
  x += impl_->raw(r);
  if (!x.allFinite()) throw InternalError("shifted solve produced non-finite values");
  return x;
}

Potential z_potential(const FiniteChain& chain, const TargetSet& k, Complex z) {
  if (!(z.real() > 0.0)) throw DomainError("z-potential needs Re z > 0, got " + std::to_string(z.real()));
  const KilledGenerator kg(chain, k);
  Potential p;
  p.kind = Potential::Kind::Z;
  p.parameter = z;
  p.target = k.members();
  if (kg.size() == 0) {
    p.values = CVector::Ones(chain.size());
    return p;
  }
  const CVector rhs = -kg.rate_into_target().cast<Complex>();
  const CVector h = solve_free(kg, z);
  p.values = kg.lift(h, 1.0);
  p.residual = free_residual(kg, h, rhs, z);
  return p;
}

Potential exp_moment_potential(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                               double alpha, double alpha_star) {
  check_target(chain, k);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw DomainError("exponential moment needs alpha >= 0, got " + std::to_string(alpha));
  }
  if (std::isnan(alpha_star)) alpha_star = k.is_full() ? kInf : dirichlet_eigenvalue(chain, pi, k);
  if (alpha >= alpha_star) {
    throw BlowUpError("E exp(alpha tau_K) is infinite: alpha = " + std::to_string(alpha) +
                          " >= alpha* = " + std::to_string(alpha_star),
                      alpha, alpha_star);
  }
  const KilledGenerator kg(chain, k);
  Potential p;
  p.kind = Potential::Kind::ExpMoment;
  p.parameter = alpha;
  p.target = k.members();
  if (kg.size() == 0) {
    p.values = CVector::Ones(chain.size());
    return p;
  }
  const CVector rhs = -kg.rate_into_target().cast<Complex>();
  const CVector h = solve_free(kg, -alpha);
  if (h.real().minCoeff() < 1.0 - 1e-9) {
    throw BlowUpError("solution lost positivity below the computed threshold (alpha too close to alpha*)",
                      alpha, alpha_star);
  }
  p.values = kg.lift(CVector(h.real().cast<Complex>()), 1.0);
  p.residual = free_residual(kg, h, rhs, -alpha);
  return p;
}

std::vector<Potential> moment_potentials(const FiniteChain& chain, const TargetSet& k, Complex z, int m_max) {
  if (!(z.real() > 0.0)) throw DomainError("moment potentials need Re z > 0");
  if (m_max < 0) throw DomainError("moment order must be nonnegative");
  const KilledGenerator kg(chain, k);
  std::vector<Potential> out;
  Potential base;
  base.kind = Potential::Kind::Z;
  base.parameter = z;
  base.target = k.members();
  if (kg.size() == 0) {
    base.values = CVector::Ones(chain.size());
    out.push_back(base);
    for (int m = 1; m <= m_max; ++m) {
      Potential p = base;
      p.kind = Potential::Kind::Moment;
      p.order = m;
      p.values = CVector::Zero(chain.size());
      out.push_back(p);
    }
    return out;
  }
  const ShiftedSolver solver(kg, z);
  CVector rhs = -kg.rate_into_target().cast<Complex>();
  CVector h = solver.solve(rhs);
  base.values = kg.lift(h, 1.0);
  base.residual = free_residual(kg, h, rhs, z);
  out.push_back(base);
  for (int m = 1; m <= m_max; ++m) {
    rhs = static_cast<double>(m) * h;
    h = solver.solve(rhs);
    Potential p;
    p.kind = Potential::Kind::Moment;
    p.parameter = z;
    p.order = m;
    p.target = k.members();
    p.values = kg.lift(h, 0.0);
    p.residual = free_residual(kg, h, rhs, z);
    out.push_back(p);
  }
  return out;
}

Potential moment_potential(const FiniteChain& chain, const TargetSet& k, Complex z, int m) {
  if (m < 1) throw DomainError("moment potential order must be >= 1");
  return moment_potentials(chain, k, z, m).back();
}

namespace {

// Symmetrized -Q_FF together with the killed generator, for repeated threshold tests.
class ThresholdProblem {
 public:
  ThresholdProblem(const FiniteChain& chain, const TargetSet& k) : kg_(chain, k) {
    const ColSparseMatrix l = symmetrized_negative_generator(chain);
    std::vector<int> index(static_cast<std::size_t>(chain.size()), -1);
    const auto& free = kg_.free_states();
    for (std::size_t a = 0; a < free.size(); ++a) index[static_cast<std::size_t>(free[a])] = static_cast<int>(a);
    std::vector<Eigen::Triplet<double>> trips;
    for (int c = 0; c < l.outerSize(); ++c) {
      for (ColSparseMatrix::InnerIterator it(l, c); it; ++it) {
        const int a = index[static_cast<std::size_t>(it.row())];
        const int b = index[static_cast<std::size_t>(it.col())];
        if (a >= 0 && b >= 0) trips.emplace_back(a, b, it.value());
      }
    }
    l_ff_ = ColSparseMatrix(kg_.size(), kg_.size());
    l_ff_.setFromTriplets(trips.begin(), trips.end());
  }

  const KilledGenerator& killed() const { return kg_; }

  bool finite(double alpha) const {
    const int m = kg_.size();
    if (m == 0) return true;
    ColSparseMatrix shifted = l_ff_;
    for (int i = 0; i < m; ++i) shifted.coeffRef(i, i) -= alpha;
    if (m <= kDenseLimit) {
      const Eigen::LDLT<Matrix> ldlt{Matrix(shifted)};
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) return false;
    } else {
      const Eigen::SimplicialLDLT<ColSparseMatrix> ldlt(shifted);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) return false;
    }
    // Roundoff can leave D > 0 at the singular point itself.
    try {
      const CVector h = solve_free(kg_, -alpha);
      return h.allFinite() && h.real().minCoeff() >= 1.0;
    } catch (const InternalError&) {
      return false;
    }
  }

 private:
  KilledGenerator kg_;
  ColSparseMatrix l_ff_;
};

}  // namespace

bool exp_moment_finite(const FiniteChain& chain, const TargetSet& k, double alpha) {
  if (alpha <= 0.0) return true;
  return ThresholdProblem(chain, k).finite(alpha);
}

ThresholdReport blowup_threshold(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k) {
  check_target(chain, k);
  ThresholdReport report;
  if (k.is_full()) {
    report.infinite = true;
    report.alpha_star = report.eigen_value = report.bisection_value = kInf;
    report.complement_connected = report.perron_positive = true;
    report.method = "trivial";
    return report;
  }
  const DirichletEigen eig = dirichlet_eigenpair(chain, pi, k);
  report.eigen_value = eig.value;
  report.complement_connected = eig.complement_connected;
  report.perron_positive = eig.perron_positive;
  report.method = eig.method;

  const ThresholdProblem problem(chain, k);
  double hi = kInf;
  for (int x : problem.killed().free_states()) hi = std::min(hi, chain.exit_rate(x));
  hi *= 1.0 + 1e-12;
  for (int guard = 0; guard < 64 && problem.finite(hi); ++guard) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (problem.finite(mid) ? lo : hi) = mid;
  }
  report.bisection_value = 0.5 * (lo + hi);
  report.alpha_star = report.eigen_value;
  report.agreement = std::abs(report.eigen_value - report.bisection_value) / report.eigen_value;
  return report;
}

nlohmann::json to_json(const ThresholdReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"); };
  return {{"alpha_star", num(r.alpha_star)},
          {"eigen_value", num(r.eigen_value)},
          {"bisection_value", num(r.bisection_value)},
          {"agreement", r.agreement},
          {"infinite", r.infinite},
          {"complement_connected", r.complement_connected},
          {"perron_positive", r.perron_positive},
          {"method", r.method}};
}

// ---------------------------------------------------------------------------
// psi-potentials

void require_lemma_mode(const PsiFunction& psi) {
  const Interval s = psi.support();
  if (!std::isfinite(s.lo) || !s.bounded() || s.lo < 0.0) {
    throw ModeError(psi.id() + ": contour mode needs compact support inside [0, inf)");
  }
  if (psi.smoothness() < 2) {
    throw ModeError(psi.id() + ": contour mode needs psi in C^2, this one is C^" +
                    std::to_string(std::max(psi.smoothness(), 0)) + " at best");
  }
  if (!psi.passes_c2_probe()) throw ModeError(psi.id() + ": fails the C^2 finite-difference probe");
}

void require_corollary_mode(const PsiFunction& psi) {
  const Interval d = psi.derivative_support();
  if (d.lo < 0.0) throw ModeError(psi.id() + ": psi' must vanish on (-inf, 0)");
}

DirectResult psi_potential_direct(const FiniteChain& chain, const TargetSet& k, const PsiFunction& psi,
                                  const DirectOptions& options) {
  const KilledGenerator kg(chain, k);
  const int m = kg.size();
  DirectResult out;
  Potential& p = out.potential;
  p.kind = Potential::Kind::Psi;
  p.psi = psi.id();
  p.target = k.members();
  const double at_zero = psi(0.0);
  if (m == 0) {
    p.values = CVector::Constant(chain.size(), at_zero);
    return out;
  }

  const bool dense = m <= kDenseLimit;
  const Matrix a = dense ? Matrix(kg.sub_generator()) : Matrix();
  const SemigroupPropagator propagator(kg.sub_generator());
  const Vector ones = Vector::Ones(m);
  auto survival = [&](double t) -> Vector {
    if (t <= 0.0) return ones;
    return dense ? Vector(expm(t * a) * ones) : propagator.apply(t, ones);
  };

  const Interval dsupp = psi.derivative_support();
  auto truncation = [&](double horizon) {
    if (dsupp.bounded() && dsupp.hi <= horizon) return 0.0;
    return survival(horizon).maxCoeff() * psi.tail_variation(horizon);
  };

  double lambda0 = 0.0;
  if (dense) {
    const Eigen::EigenSolver<Matrix> es(a, false);
    lambda0 = -es.eigenvalues().real().maxCoeff();
  }
  double horizon = lambda0 > 0.0 ? std::log(1e12) / lambda0 : 1.0;
  for (int guard = 0; guard < 80 && survival(horizon).maxCoeff() > 1e-12; ++guard) horizon *= 1.5;
  for (int guard = 0; guard < 40 && truncation(horizon) > options.tolerance; ++guard) horizon *= 2.0;
  if (options.horizon > 0.0) {
    const double est = truncation(options.horizon);
    if (est > options.tolerance) {
      throw TruncationError("horizon " + std::to_string(options.horizon) + " leaves truncation error " +
                                std::to_string(est),
                            est, horizon);
    }
    horizon = options.horizon;
  }
  out.horizon = horizon;
  out.truncation_estimate = truncation(horizon);

  const double upper = dsupp.bounded() ? std::min(horizon, dsupp.hi) : horizon;
  std::vector<double> cuts{0.0};
  for (double b : psi.breakpoints()) {
    if (b > 0.0 && b < upper) cuts.push_back(b);
  }
  if (upper > 0.0) cuts.push_back(upper);

  Vector h = Vector::Constant(m, at_zero);
  // Jumps of psi contribute jump * P(tau > t).
  const PsiFunction& f = psi;
  for (std::size_t i = 1; i + 1 < cuts.size(); ++i) {
    const double t = cuts[i];
    const double jump = f(t) - f(std::nextafter(t, -kInf));
    if (jump != 0.0) h += jump * survival(t);
  }
  const PsiFunction dpsi = psi.derivative();
  const double segment_tol = options.tolerance / (4.0 * std::max<std::size_t>(cuts.size(), 1));
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (dpsi.support().bounded() && (cuts[i + 1] <= dpsi.support().lo || cuts[i] >= dpsi.support().hi)) continue;
    auto integrand = [&](double t) -> Vector { return dpsi(t) * survival(t); };
    const auto q = integrate(integrand, cuts[i], cuts[i + 1], segment_tol, 0.0);
    h += q.value;
    out.quadrature_error += q.error;
  }
  p.values = kg.lift(h.cast<Complex>(), at_zero);
  p.residual = out.quadrature_error;
  return out;
}

double contour_truncation_bound(const PsiFunction& psi, double sigma, double t_im, double step) {
  if (!(t_im > step)) return kInf;
  const int kmax = std::min(psi.smoothness() + 2, 8);
  double best = kInf;
  for (int k = 2; k <= kmax; ++k) {
    const double b = psi.transform_decay_constant(sigma, k);
    best = std::min(best, b / (std::numbers::pi * (k - 1) * std::pow(t_im - step, k - 1)));
  }
  return best;
}

double contour_aliasing_bound(const PsiFunction& psi, double sigma, double step) {
  if (!(kTwoPi / step > psi.support().hi)) return kInf;
  const double r = std::exp(-kTwoPi * sigma / step);
  return psi.max_abs() * r / (1.0 - r);
}

ContourOptions suggest_contour(const PsiFunction& psi, double sigma, double tolerance) {
  if (!(sigma > 0.0)) throw DomainError("contour abscissa sigma must be positive");
  if (!(tolerance > 0.0)) throw DomainError("contour tolerance must be positive");
  ContourOptions o;
  o.sigma = sigma;
  o.tolerance = tolerance;
  const double budget = 0.25 * tolerance;
  const double mass = psi.max_abs();
  o.step = std::min(0.9 * kTwoPi / std::max(psi.support().hi, 1e-300),
                    kTwoPi * sigma / std::log((mass + budget) / budget));
  const int kmax = std::min(psi.smoothness() + 2, 8);
  double best = kInf;
  for (int k = 2; k <= kmax; ++k) {
    const double b = psi.transform_decay_constant(sigma, k);
    best = std::min(best, o.step + std::pow(b / (std::numbers::pi * (k - 1) * budget), 1.0 / (k - 1)));
  }
  o.t_im = best;
  return o;
}

ContourResult psi_potential_contour(const FiniteChain& chain, const TargetSet& k, const PsiFunction& psi,
                                    const ContourOptions& options) {
  require_lemma_mode(psi);
  if (!(options.sigma > 0.0)) throw DomainError("contour abscissa sigma must be positive");
  ContourOptions o = options;
  if (o.t_im <= 0.0 || o.step <= 0.0) {
    const ContourOptions s = suggest_contour(psi, o.sigma, o.tolerance);
    if (o.step <= 0.0) o.step = s.step;
    if (o.t_im <= 0.0) o.t_im = s.t_im;
  }
  ContourResult out;
  out.aliasing_bound = contour_aliasing_bound(psi, o.sigma, o.step);
  if (out.aliasing_bound > 0.5 * o.tolerance) {
    const ContourOptions s = suggest_contour(psi, o.sigma, o.tolerance);
    throw TruncationError("contour step " + std::to_string(o.step) + " leaves aliasing error " +
                              std::to_string(out.aliasing_bound),
                          out.aliasing_bound, s.step);
  }
  out.truncation_bound = contour_truncation_bound(psi, o.sigma, o.t_im, o.step);
  if (out.truncation_bound > 0.5 * o.tolerance) {
    ContourOptions s = suggest_contour(psi, o.sigma, o.tolerance);
    const double suggested = o.step + (s.t_im - s.step);
    throw TruncationError("contour truncation at T = " + std::to_string(o.t_im) + " leaves error bound " +
                              std::to_string(out.truncation_bound),
                          out.truncation_bound, suggested);
  }
  out.options = o;

  const KilledGenerator kg(chain, k);
  const int m = kg.size();
  const long n_half = static_cast<long>(std::floor(o.t_im / o.step));
  const long total = 2 * n_half + 1;
  out.nodes = static_cast<int>(total);
  const CVector rhs = -kg.rate_into_target().cast<Complex>();

  // Fixed blocks summed in order: the result does not depend on the thread count.
  constexpr long kBlocks = 64;
  std::vector<CVector> free_sums(kBlocks, CVector::Zero(m));
  std::vector<Complex> target_sums(kBlocks, 0.0);
  auto work = [&](long block) {
    const long begin = -n_half + block * total / kBlocks;
    const long end = -n_half + (block + 1) * total / kBlocks;
    for (long j = begin; j < end; ++j) {
      const Complex z(o.sigma, static_cast<double>(j) * o.step);
      const Complex transform = psi.transform(z);
      target_sums[static_cast<std::size_t>(block)] += transform;
      if (m > 0) free_sums[static_cast<std::size_t>(block)] += transform * ShiftedSolver(kg, z).solve(rhs);
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 16u));
  std::vector<std::thread> pool;
  std::atomic<long> next{0};
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (long b = next++; b < kBlocks; b = next++) work(b);
    });
  }
  for (auto& t : pool) t.join();

  CVector free_total = CVector::Zero(m);
  Complex target_total = 0.0;
  for (long b = 0; b < kBlocks; ++b) {
    free_total += free_sums[static_cast<std::size_t>(b)];
    target_total += target_sums[static_cast<std::size_t>(b)];
  }
  const double scale = o.step / kTwoPi;
  Potential& p = out.potential;
  p.kind = Potential::Kind::Psi;
  p.psi = psi.id();
  p.target = k.members();
  p.values = kg.lift(scale * free_total, scale * target_total);
  out.imag_residue = p.imag_residue();
  p.residual = out.truncation_bound + out.aliasing_bound;
  return out;
}

LyapunovResult lyapunov_potential(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                  double alpha_tilde, double alpha_star) {
  LyapunovResult out;
  out.phi = exp_moment_potential(chain, pi, k, alpha_tilde, alpha_star);
  out.phi.kind = Potential::Kind::Lyapunov;
  const Vector phi = out.phi.real();
  const Vector drift = chain.generator() * phi + alpha_tilde * phi;
  for (int x = 0; x < chain.size(); ++x) {
    if (k.contains(x)) {
      out.b = std::max(out.b, drift(x));
    } else {
      out.drift_residual = std::max(out.drift_residual, std::abs(drift(x)));
    }
  }
  return out;
}

}  // namespace hitgap
