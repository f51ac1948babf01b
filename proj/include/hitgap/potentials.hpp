#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitgap/chain.hpp"
#include "hitgap/linalg.hpp"
#include "hitgap/psi.hpp"

namespace hitgap {

/// A function on the states produced by a potential solve.
struct Potential {
  enum class Kind { Z, ExpMoment, Moment, Psi, Lyapunov };
  Kind kind = Kind::Z;
  Complex parameter = 0.0;  ///< z, or alpha for exp-moment and Lyapunov potentials
  int order = 0;            ///< m for moment potentials
  std::string psi;          ///< psi id for psi-potentials
  std::vector<int> target;
  CVector values;
  double residual = 0.0;    ///< max-abs residual of the defining equation off K

  Vector real() const { return values.real(); }
  double imag_residue() const { return values.size() ? values.imag().cwiseAbs().maxCoeff() : 0.0; }
};

const char* to_string(Potential::Kind kind);
nlohmann::json to_json(const Potential& potential);

/// The generator restricted to the complement F of K.
class KilledGenerator {
 public:
  KilledGenerator(const FiniteChain& chain, const TargetSet& k);

  int size() const { return static_cast<int>(free_.size()); }
  const std::vector<int>& free_states() const { return free_; }
  /// Q_FF
  const SparseMatrix& sub_generator() const { return sub_; }
  /// (Q_FK 1)(x) for x in F
  const Vector& rate_into_target() const { return into_target_; }
  /// Full-length vector equal to `free` on F and `on_target` on K.
  CVector lift(const CVector& free, Complex on_target) const;
  CVector restrict_free(const CVector& full) const;

  const FiniteChain& chain() const { return *chain_; }
  const TargetSet& target() const { return *k_; }

 private:
  const FiniteChain* chain_;
  const TargetSet* k_;
  std::vector<int> free_;
  SparseMatrix sub_;
  Vector into_target_;
};

/// Factorization of Q_FF - z I, reused for several right-hand sides.
class ShiftedSolver {
 public:
  ShiftedSolver(const KilledGenerator& killed, Complex z);
  ~ShiftedSolver();
  ShiftedSolver(ShiftedSolver&&) noexcept;
  /// Solution with one step of iterative refinement.
  CVector solve(const CVector& rhs) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// h_z(x) = E_x exp(-z tau_K) for Re z > 0: (Q - z) h = 0 off K, h = 1 on K.
Potential z_potential(const FiniteChain& chain, const TargetSet& k, Complex z);

/// h(x) = E_x exp(alpha tau_K) for 0 < alpha < alpha*: (Q + alpha) h = 0 off K, h = 1 on K.
///
/// Throws BlowUpError when alpha >= alpha*. Pass alpha_star when already known.
Potential exp_moment_potential(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                               double alpha,
                               double alpha_star = std::numeric_limits<double>::quiet_NaN());

/// h^0 = h_z, h^1, ..., h^{m_max} with h^m = d^m h_z / dz^m, i.e.
/// (Q - z) h^m = m h^{m-1} off K and h^m = 0 on K.
std::vector<Potential> moment_potentials(const FiniteChain& chain, const TargetSet& k, Complex z, int m_max);
Potential moment_potential(const FiniteChain& chain, const TargetSet& k, Complex z, int m);

/// Blow-up threshold alpha* of x -> E_x exp(alpha tau_K) by two independent routes.
struct ThresholdReport {
  double alpha_star = 0.0;      ///< killed eigenvalue; +inf when K is the whole space
  double eigen_value = 0.0;
  double bisection_value = 0.0;
  double agreement = 0.0;       ///< relative difference of the two routes
  bool infinite = false;
  bool complement_connected = false;
  bool perron_positive = false;
  std::string method;
};

/// True iff E_x exp(alpha tau_K) is finite: Q_FF + alpha is negative definite in
/// L^2(pi) (inertia of an LDL^T factorization) and the solved potential is >= 1.
bool exp_moment_finite(const FiniteChain& chain, const TargetSet& k, double alpha);

ThresholdReport blowup_threshold(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k);
nlohmann::json to_json(const ThresholdReport& report);

/// psi-potential h_psi(x) = E_x psi(tau_K) on the time side:
/// psi(0) + int psi'(t) P_x(tau_K > t) dt plus jump terms, with
/// P_x(tau_K > t) = (exp(t Q_FF) 1)(x).
struct DirectOptions {
  double horizon = 0.0;    ///< 0 selects exp(-lambda0 T) <= 1e-12 automatically
  double tolerance = 1e-12;
};

struct DirectResult {
  Potential potential;
  double horizon = 0.0;
  double truncation_estimate = 0.0;
  double quadrature_error = 0.0;
};

DirectResult psi_potential_direct(const FiniteChain& chain, const TargetSet& k, const PsiFunction& psi,
                                  const DirectOptions& options = {});

/// psi-potential on the Laplace side:
/// h_psi = (1/2pi) int Psi(sigma + iy) h_{sigma+iy} dy by the trapezoidal rule.
struct ContourOptions {
  double sigma = 1.0;
  double t_im = 0.0;       ///< truncation height; 0 selects one from the tolerance
  double step = 0.0;       ///< node spacing; 0 selects one from the tolerance
  double tolerance = 1e-7;
};

struct ContourResult {
  Potential potential;
  double truncation_bound = 0.0;
  double aliasing_bound = 0.0;
  double imag_residue = 0.0;
  int nodes = 0;
  ContourOptions options;
};

/// Bound on the contribution of nodes with |y| > t_im, from |Psi(z)| <= B_k / |z|^k and |h_z| <= 1.
double contour_truncation_bound(const PsiFunction& psi, double sigma, double t_im, double step);
/// Bound on the trapezoidal aliasing error; +inf when 2 pi / step <= sup supp psi.
double contour_aliasing_bound(const PsiFunction& psi, double sigma, double step);
/// Step and truncation height meeting `tolerance` (half for each error source).
ContourOptions suggest_contour(const PsiFunction& psi, double sigma, double tolerance);

/// Throws ModeError unless psi is C^2 with compact support in [0, inf).
void require_lemma_mode(const PsiFunction& psi);
/// Throws ModeError unless supp psi' lies in [0, inf).
void require_corollary_mode(const PsiFunction& psi);

ContourResult psi_potential_contour(const FiniteChain& chain, const TargetSet& k, const PsiFunction& psi,
                                    const ContourOptions& options);

/// phi = h_{-alpha_tilde}, the exponential-moment potential used as a Lyapunov function.
struct LyapunovResult {
  Potential phi;
  double drift_residual = 0.0;  ///< max_{x not in K} |Q phi + alpha_tilde phi|
  double b = 0.0;               ///< max_{x in K} (Q phi + alpha_tilde phi)^+
};

LyapunovResult lyapunov_potential(const FiniteChain& chain, const InvariantMeasure& pi, const TargetSet& k,
                                  double alpha_tilde,
                                  double alpha_star = std::numeric_limits<double>::quiet_NaN());

}  // namespace hitgap
