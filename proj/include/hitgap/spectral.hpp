#pragma once

#include <string>

#include <json.hpp>

#include "hitgap/chain.hpp"
#include "hitgap/linalg.hpp"

namespace hitgap {

/// Dirichlet form E(f, g) = -(Qf, g)_pi of a chain with a fixed invariant measure.
class DirichletForm {
 public:
  DirichletForm(const FiniteChain& chain, const InvariantMeasure& pi);

  /// Conductance sum (1/2) sum_ij pi_i Q_ij (f_j - f_i)(g_j - g_i) for reversible
  /// chains, the generator pairing otherwise.
  double energy(const Vector& f, const Vector& g) const;
  Complex energy(const CVector& f, const CVector& g) const;

  /// -(Qf, g)_pi, valid for any chain.
  double generator_pairing(const Vector& f, const Vector& g) const;
  Complex generator_pairing(const CVector& f, const CVector& g) const;

  /// (1/2) sum_ij pi_i Q_ij (f_j - f_i)(g_j - g_i), bilinear in (f, g) with no conjugation.
  Complex conductance_sum(const CVector& f, const CVector& g) const;

  /// (f, g)_pi = sum_i pi_i f_i g_i, bilinear.
  Complex inner(const CVector& f, const CVector& g) const;

  const FiniteChain& chain() const { return *chain_; }
  const InvariantMeasure& measure() const { return *pi_; }

 private:
  void check(Eigen::Index f, Eigen::Index g) const;
  const FiniteChain* chain_;
  const InvariantMeasure* pi_;
};

double dirichlet_energy(const DirichletForm& form, const Vector& f, const Vector& g);

/// Var_pi(f) = int f^2 dpi - (int f dpi)^2.
double variance(const InvariantMeasure& pi, const Vector& f);

/// Best Poincare constant of a reversible chain and the gap eigenfunction.
struct SpectralReport {
  double gap = 0.0;
  double poincare_c = 0.0;
  Vector eigenvector;  ///< pi-mean zero, Var_pi = 1
  std::string method;  ///< "dense" or "iterative"
  double residual = 0.0;
};

/// Smallest nonzero eigenvalue of -Q in L^2(pi).
///
/// The generator is symmetrized as L_ij = -sign(Q_ij) sqrt(Q_ij Q_ji),
/// L_ii = -Q_ii, the D^{1/2} Q D^{-1/2} similarity written without pi.
/// Throws UnsupportedModeError for non-reversible chains.
SpectralReport spectral_gap(const FiniteChain& chain, const InvariantMeasure& pi);

/// Symmetric positive semidefinite matrix similar to -Q; requires reversibility.
ColSparseMatrix symmetrized_negative_generator(const FiniteChain& chain);

/// Principal eigenpair of -Q killed on K.
struct DirichletEigen {
  double value = 0.0;
  Vector eigenfunction;        ///< zero on K, max-normalized to 1 off K
  bool complement_connected = false;
  bool perron_positive = false;  ///< eigenfunction > 0 on the complement (only expected when connected)
  std::string method;
  double residual = 0.0;
};

DirichletEigen dirichlet_eigenpair(const FiniteChain& chain, const InvariantMeasure& pi,
                                   const TargetSet& k);

/// lambda_0 of -Q restricted to the complement of K. Equals the blow-up
/// threshold of x -> E_x exp(alpha tau_K). Throws DomainError for K empty or full.
double dirichlet_eigenvalue(const FiniteChain& chain, const InvariantMeasure& pi,
                            const TargetSet& k);

nlohmann::json to_json(const SpectralReport& report);

}  // namespace hitgap
