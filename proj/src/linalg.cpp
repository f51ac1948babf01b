#include "hitgap/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "hitgap/error.hpp"

namespace hitgap {

Matrix expm(const Matrix& a) { return a.exp(); }

double inf_norm(const SparseMatrix& a) {
  double norm = 0.0;
  for (int i = 0; i < a.outerSize(); ++i) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) row += std::abs(it.value());
    norm = std::max(norm, row);
  }
  return norm;
}

SemigroupPropagator::SemigroupPropagator(const SparseMatrix& generator)
    : a_(generator), dense_(generator.rows() <= kDenseLimit), rate_(0.0) {
  if (dense_) dense_a_ = Matrix(generator);
  for (int i = 0; i < a_.rows(); ++i) rate_ = std::max(rate_, -a_.coeff(i, i));
}

Vector SemigroupPropagator::apply(double t, const Vector& v) const {
  if (t == 0.0) return v;
  if (dense_) return expm(t * dense_a_) * v;
  return uniformized(t, v);
}

std::vector<Vector> SemigroupPropagator::trajectory(double dt, int steps, const Vector& v) const {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(v);
  if (dense_) {
    const Matrix step = expm(dt * dense_a_);
    for (int k = 0; k < steps; ++k) out.push_back(step * out.back());
  } else {
    for (int k = 0; k < steps; ++k) out.push_back(uniformized(dt, out.back()));
  }
  return out;
}

// exp(tA) v = sum_k Poisson(k; rate*t) P^k v with P = I + A / rate.
Vector SemigroupPropagator::uniformized(double t, const Vector& v) const {
  if (rate_ <= 0.0) return v;
  const double mean = rate_ * t;
  const int last = static_cast<int>(std::ceil(mean + 12.0 * std::sqrt(mean) + 30.0));
  Vector term = v;
  Vector sum = Vector::Zero(v.size());
  const double log_mean = std::log(mean);
  for (int k = 0; k <= last; ++k) {
    const double log_w = -mean + k * log_mean - std::lgamma(k + 1.0);
    if (log_w > -745.0) sum += std::exp(log_w) * term;
    if (k < last) term += (a_ * term) / rate_;
  }
  return sum;
}

namespace {

void project_out(Matrix& block, const Vector* deflate) {
  if (deflate == nullptr) return;
  for (int c = 0; c < block.cols(); ++c) block.col(c) -= deflate->dot(block.col(c)) * *deflate;
}

Matrix orthonormalize(const Matrix& block) {
  Eigen::HouseholderQR<Matrix> qr(block);
  return qr.householderQ() * Matrix::Identity(block.rows(), block.cols());
}

// Deterministic starting block, so repeated runs produce identical eigenvectors.
Matrix starting_block(int n, int cols) {
  Matrix x(n, cols);
  std::uint64_t state = 0x9E3779B97F4A7C15ULL;
  for (int c = 0; c < cols; ++c) {
    for (int i = 0; i < n; ++i) {
      state ^= state << 13;
      state ^= state >> 7;
      state ^= state << 17;
      x(i, c) = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    }
  }
  return x;
}

}  // namespace

SymmetricEigenpair smallest_symmetric_eigenpair(const ColSparseMatrix& a, double shift,
                                                const Vector* deflate, double tolerance,
                                                int block_size, int max_iterations) {
  const int n = static_cast<int>(a.rows());
  int available = n - (deflate != nullptr ? 1 : 0);
  block_size = std::max(1, std::min(block_size, available));

  ColSparseMatrix shifted = a;
  for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) -= shift;
  Eigen::SimplicialLDLT<ColSparseMatrix> factor(shifted);
  if (factor.info() != Eigen::Success) {
    throw InternalError("shifted eigenproblem factorization failed");
  }

  double scale = 0.0;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (ColSparseMatrix::InnerIterator it(a, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  }
  scale = std::max(scale, 1e-300);

  Matrix x = starting_block(n, block_size);
  project_out(x, deflate);
  x = orthonormalize(x);

  SymmetricEigenpair best;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    Matrix y(n, block_size);
    for (int c = 0; c < block_size; ++c) y.col(c) = factor.solve(x.col(c));
    project_out(y, deflate);
    x = orthonormalize(y);
    project_out(x, deflate);

    const Matrix ax = a * x;
    const Matrix h = x.transpose() * ax;
    Eigen::SelfAdjointEigenSolver<Matrix> ritz(0.5 * (h + h.transpose()));
    x = x * ritz.eigenvectors();
    const Matrix ax_rot = ax * ritz.eigenvectors();

    const double theta = ritz.eigenvalues()(0);
    const double residual = (ax_rot.col(0) - theta * x.col(0)).norm();
    best.value = theta;
    best.vector = x.col(0);
    best.residual = residual;
    best.iterations = iter;
    if (residual <= tolerance * scale) return best;
  }
  throw InternalError("block inverse iteration did not converge; residual " +
                      std::to_string(best.residual));
}

}  // namespace hitgap
