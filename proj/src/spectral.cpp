#include "hitgap/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "hitgap/error.hpp"

namespace hitgap {

DirichletForm::DirichletForm(const FiniteChain& chain, const InvariantMeasure& pi)
    : chain_(&chain), pi_(&pi) {
  if (pi.pi.size() != chain.size()) {
    throw ValidationError("invariant measure length does not match the chain");
  }
}

void DirichletForm::check(Eigen::Index f, Eigen::Index g) const {
  if (f != chain_->size() || g != chain_->size()) {
    throw ValidationError("state function length " + std::to_string(f) + "/" + std::to_string(g) +
                          " does not match the " + std::to_string(chain_->size()) + " states");
  }
}

double DirichletForm::generator_pairing(const Vector& f, const Vector& g) const {
  check(f.size(), g.size());
  const Vector qf = chain_->generator() * f;
  return -(pi_->pi.array() * qf.array() * g.array()).sum();
}

Complex DirichletForm::generator_pairing(const CVector& f, const CVector& g) const {
  check(f.size(), g.size());
  const CVector qf = chain_->generator().cast<Complex>() * f;
  Complex sum = 0.0;
  for (int i = 0; i < f.size(); ++i) sum += pi_->pi(i) * qf(i) * g(i);
  return -sum;
}

Complex DirichletForm::conductance_sum(const CVector& f, const CVector& g) const {
  check(f.size(), g.size());
  const SparseMatrix& q = chain_->generator();
  Complex sum = 0.0;
  for (int i = 0; i < q.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j == i) continue;
      sum += pi_->pi(i) * it.value() * (f(j) - f(i)) * (g(j) - g(i));
    }
  }
  return 0.5 * sum;
}

Complex DirichletForm::energy(const CVector& f, const CVector& g) const {
  return pi_->reversible ? conductance_sum(f, g) : generator_pairing(f, g);
}

double DirichletForm::energy(const Vector& f, const Vector& g) const {
  if (!pi_->reversible) return generator_pairing(f, g);
  check(f.size(), g.size());
  const SparseMatrix& q = chain_->generator();
  double sum = 0.0;
  for (int i = 0; i < q.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j == i) continue;
      sum += pi_->pi(i) * it.value() * (f(j) - f(i)) * (g(j) - g(i));
    }
  }
  return 0.5 * sum;
}

Complex DirichletForm::inner(const CVector& f, const CVector& g) const {
  check(f.size(), g.size());
  Complex sum = 0.0;
  for (int i = 0; i < f.size(); ++i) sum += pi_->pi(i) * f(i) * g(i);
  return sum;
}

double dirichlet_energy(const DirichletForm& form, const Vector& f, const Vector& g) {
  return form.energy(f, g);
}

double variance(const InvariantMeasure& pi, const Vector& f) {
  if (f.size() != pi.pi.size()) {
    throw ValidationError("state function length does not match the invariant measure");
  }
  const double mean = pi.pi.dot(f);
  // Centered form avoids cancellation between E f^2 and (E f)^2.
  return (pi.pi.array() * (f.array() - mean).square()).sum();
}

ColSparseMatrix symmetrized_negative_generator(const FiniteChain& chain) {
  const SparseMatrix& q = chain.generator();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(q.nonZeros()));
  for (int i = 0; i < q.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(q, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j == i) {
        trips.emplace_back(i, i, -it.value());
      } else if (it.value() > 0.0) {
        const double back = q.coeff(j, i);
        if (!(back > 0.0)) {
          throw UnsupportedModeError("chain is not reversible: rate (" + std::to_string(i) + "," +
                                     std::to_string(j) + ") has no reverse rate");
        }
        trips.emplace_back(i, j, -std::sqrt(it.value() * back));
      }
    }
  }
  ColSparseMatrix l(q.rows(), q.cols());
  l.setFromTriplets(trips.begin(), trips.end());
  return l;
}

namespace {

void require_reversible(const FiniteChain& chain, const InvariantMeasure& pi) {
  if (pi.pi.size() != chain.size()) {
    throw ValidationError("invariant measure length does not match the chain");
  }
  if (!pi.reversible) {
    throw UnsupportedModeError("operation requires a reversible chain (detailed-balance residual " +
                               std::to_string(pi.balance_residual) + ")");
  }
}

double max_abs(const ColSparseMatrix& a) {
  double m = 0.0;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (ColSparseMatrix::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
  }
  return m;
}

constexpr double kIterativeTolerance = 1e-12;

}  // namespace

SpectralReport spectral_gap(const FiniteChain& chain, const InvariantMeasure& pi) {
  const auto comps = strongly_connected_components(chain.generator());
  if (comps.size() > 1) throw IrreducibilityError("spectral gap of a reducible chain", comps);
  require_reversible(chain, pi);
  const int n = chain.size();
  const ColSparseMatrix l = symmetrized_negative_generator(chain);
  const Vector root_pi = pi.pi.cwiseSqrt();

  SpectralReport report;
  Vector v;
  if (n <= kDenseLimit) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig{Matrix(l)};
    report.gap = eig.eigenvalues()(1);
    v = eig.eigenvectors().col(1);
    report.method = "dense";
    report.residual = (Matrix(l) * v - report.gap * v).norm();
  } else {
    const Vector null = root_pi.normalized();
    const double scale = max_abs(l);
    const auto pair = smallest_symmetric_eigenpair(l, -1e-9 * scale, &null, kIterativeTolerance);
    report.gap = pair.value;
    v = pair.vector;
    report.method = "iterative";
    report.residual = pair.residual;
  }
  Vector f = v.cwiseQuotient(root_pi);
  f.array() -= pi.pi.dot(f);
  f /= std::sqrt(variance(pi, f));
  report.eigenvector = f;
  report.poincare_c = 1.0 / report.gap;
  return report;
}

DirichletEigen dirichlet_eigenpair(const FiniteChain& chain, const InvariantMeasure& pi,
                                   const TargetSet& k) {
  if (k.state_count() != chain.size()) throw DomainError("target set does not match the chain");
  if (k.is_full()) throw DomainError("killed eigenvalue needs K to be a proper subset");
  require_reversible(chain, pi);
  const std::vector<int> free = k.complement();
  const int m = static_cast<int>(free.size());
  std::vector<int> index(static_cast<std::size_t>(chain.size()), -1);
  for (int a = 0; a < m; ++a) index[static_cast<std::size_t>(free[static_cast<std::size_t>(a)])] = a;

  const ColSparseMatrix l = symmetrized_negative_generator(chain);
  std::vector<Eigen::Triplet<double>> trips;
  for (int c = 0; c < l.outerSize(); ++c) {
    for (ColSparseMatrix::InnerIterator it(l, c); it; ++it) {
      const int a = index[static_cast<std::size_t>(it.row())];
      const int b = index[static_cast<std::size_t>(it.col())];
      if (a >= 0 && b >= 0) trips.emplace_back(a, b, it.value());
    }
  }
  ColSparseMatrix sub(m, m);
  sub.setFromTriplets(trips.begin(), trips.end());

  DirichletEigen out;
  Vector v;
  if (m <= kDenseLimit) {
    const Matrix dense(sub);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dense);
    out.value = eig.eigenvalues()(0);
    v = eig.eigenvectors().col(0);
    out.method = "dense";
    out.residual = (dense * v - out.value * v).norm();
  } else {
    const auto pair = smallest_symmetric_eigenpair(sub, -1e-9 * max_abs(sub), nullptr, kIterativeTolerance);
    out.value = pair.value;
    v = pair.vector;
    out.method = "iterative";
    out.residual = pair.residual;
  }
  if (v.sum() < 0.0) v = -v;
  Vector g = Vector::Zero(chain.size());
  for (int a = 0; a < m; ++a) {
    const int s = free[static_cast<std::size_t>(a)];
    g(s) = v(a) / std::sqrt(pi.pi(s));
  }
  g /= g.cwiseAbs().maxCoeff();
  out.eigenfunction = g;

  // Connectivity of the complement's induced positivity graph.
  std::vector<char> seen(static_cast<std::size_t>(m), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int a = frontier.front();
    frontier.pop();
    for (ColSparseMatrix::InnerIterator it(sub, a); it; ++it) {
      const int b = static_cast<int>(it.row());
      if (b != a && it.value() != 0.0 && !seen[static_cast<std::size_t>(b)]) {
        seen[static_cast<std::size_t>(b)] = 1;
        ++reached;
        frontier.push(b);
      }
    }
  }
  out.complement_connected = reached == m;
  out.perron_positive = true;
  for (int s : free) out.perron_positive = out.perron_positive && g(s) > 0.0;
  return out;
}

double dirichlet_eigenvalue(const FiniteChain& chain, const InvariantMeasure& pi,
                            const TargetSet& k) {
  return dirichlet_eigenpair(chain, pi, k).value;
}

nlohmann::json to_json(const SpectralReport& report) {
  return {{"gap", report.gap},
          {"poincare_c", report.poincare_c},
          {"eigenvector", std::vector<double>(report.eigenvector.data(),
                                              report.eigenvector.data() + report.eigenvector.size())},
          {"method", report.method},
          {"residual", report.residual}};
}

}  // namespace hitgap
