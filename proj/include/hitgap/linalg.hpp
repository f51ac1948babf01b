#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace hitgap {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using ColSparseMatrix = Eigen::SparseMatrix<double>;

/// Problems up to this many states are handled with dense factorizations.
inline constexpr int kDenseLimit = 512;

/// Dense matrix exponential exp(A) by scaling and squaring with a Pade approximant.
Matrix expm(const Matrix& a);

/// Computes exp(t*A) v for a (sub-)generator A: nonnegative off-diagonal, row sums <= 0.
///
/// Small matrices use the dense Pade exponential; larger ones use uniformization
/// with Poisson weights evaluated in log space, which stays entrywise nonnegative
/// for nonnegative v.
class SemigroupPropagator {
 public:
  explicit SemigroupPropagator(const SparseMatrix& generator);

  Vector apply(double t, const Vector& v) const;

  /// exp(k*dt*A) v for k = 0..steps, reusing the single-step operator.
  std::vector<Vector> trajectory(double dt, int steps, const Vector& v) const;

  bool dense() const { return dense_; }

 private:
  Vector uniformized(double t, const Vector& v) const;

  SparseMatrix a_;
  Matrix dense_a_;
  bool dense_;
  double rate_;
};

/// Result of an extremal symmetric eigenvalue computation.
struct SymmetricEigenpair {
  double value = 0.0;
  Vector vector;
  double residual = 0.0;  ///< ||A v - value v||_2 for unit v
  int iterations = 0;
};

/// Smallest eigenpair of a symmetric matrix by shifted block inverse iteration
/// with Rayleigh-Ritz, optionally restricted to the orthogonal complement of `deflate`.
///
/// `shift` must make A - shift*I positive definite on the whole space.
SymmetricEigenpair smallest_symmetric_eigenpair(const ColSparseMatrix& a, double shift,
                                                const Vector* deflate, double tolerance,
                                                int block_size = 4, int max_iterations = 2000);

/// Max-abs row sum norm of a sparse matrix.
double inf_norm(const SparseMatrix& a);

}  // namespace hitgap
