#pragma once

// Test-side reference computations. Each one takes a different route from the
// library: generalized eigenproblems instead of symmetrization, power
// iteration instead of a dense solver, Eigen's own matrix exponential, and
// composite Simpson instead of adaptive Gauss-Kronrod.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Stationary law from the null space of Q^T.
inline Vec stationary(const Mat& q) {
  const Eigen::FullPivLU<Mat> lu(q.transpose());
  Vec v = lu.kernel().col(0);
  return v / v.sum();
}

/// Smallest eigenvalue of  -Q_FF v = lambda v  posed as the generalized
/// symmetric problem (Pi (-Q))_FF v = lambda Pi_FF v.
inline double killed_eigenvalue(const Mat& q, const Vec& pi, const std::vector<int>& free) {
  const int m = static_cast<int>(free.size());
  Mat a(m, m);
  Mat b = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    b(i, i) = pi(free[i]);
    for (int j = 0; j < m; ++j) a(i, j) = -pi(free[i]) * q(free[i], free[j]);
  }
  const Mat sym = 0.5 * (a + a.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(sym, b);
  return es.eigenvalues().minCoeff();
}

/// Spectral gap by power iteration on (s I + Q) restricted to pi-mean-zero
/// functions. Converges to s - gap.
inline double power_gap(const Mat& q, const Vec& pi, int iterations = 200000, double tol = 1e-13) {
  const int n = static_cast<int>(q.rows());
  // -Q has spectrum in [0, 2 max exit rate], so s I + Q is positive semidefinite.
  const double s = 2.02 * (-q.diagonal()).maxCoeff();
  const Mat m = s * Mat::Identity(n, n) + q;
  Vec v = Vec::LinSpaced(n, 1.0, 2.0).array().sin();
  auto center = [&](Vec& f) { f.array() -= pi.dot(f); };
  auto norm = [&](const Vec& f) { return std::sqrt((pi.array() * f.array().square()).sum()); };
  center(v);
  v /= norm(v);
  double mu = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vec w = m * v;
    center(w);
    const double next = norm(w);
    w /= next;
    const bool done = std::abs(next - mu) < tol * s;
    mu = next;
    v = w;
    if (done && it > 50) break;
  }
  return s - mu;
}

/// Survival S(t) = exp(t Q_FF) 1 via Eigen's matrix exponential.
inline Vec survival(const Mat& a, double t) { return (t * a).exp() * Vec::Ones(a.rows()); }

/// Composite Simpson with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return sum * h / 3.0;
}

/// E_x psi(tau_K) for x outside K, from the phase-type density
/// f(t) = exp(t A)(-A 1), integrated by Simpson on [lo, hi] with n panels.
/// Suitable when psi vanishes outside [lo, hi].
inline Vec psi_potential(const Mat& q, const std::vector<int>& free, const std::function<double(double)>& psi,
                         double lo, double hi, int n) {
  const int m = static_cast<int>(free.size());
  Mat a(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) a(i, j) = q(free[i], free[j]);
  }
  const Vec exit = -(a * Vec::Ones(m));
  Vec out = Vec::Zero(m);
  if (n % 2) ++n;
  const double h = (hi - lo) / n;
  const Mat step = (h * a).exp();
  Vec density = (lo * a).exp() * exit;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    out += w * psi(lo + i * h) * density;
    density = step * density;
  }
  return out * h / 3.0;
}

/// Central difference of order one.
inline double derivative(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Reversible generator from weights w and symmetric conductances c:
/// Q_ij = c_ij / w_i, so pi is proportional to w.
struct ReversibleCase {
  Mat q;
  Vec pi;
};

inline ReversibleCase random_reversible(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.2, 3.0);
  std::bernoulli_distribution extra(0.3);
  Vec w(n);
  for (int i = 0; i < n; ++i) w(i) = u(rng);
  Mat c = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const int j = std::uniform_int_distribution<int>(0, i - 1)(rng);
    c(i, j) = c(j, i) = u(rng);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (c(i, j) == 0.0 && extra(rng)) c(i, j) = c(j, i) = u(rng);
    }
  }
  Mat q = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) q(i, j) = c(i, j) / w(i);
    }
    q(i, i) = -q.row(i).sum();
  }
  return {q, w / w.sum()};
}

/// Nonempty proper subset of {0, ..., n-1}.
inline std::vector<int> random_proper_subset(std::mt19937_64& rng, int n) {
  std::vector<int> states(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) states[static_cast<std::size_t>(i)] = i;
  std::shuffle(states.begin(), states.end(), rng);
  const int size = std::uniform_int_distribution<int>(1, n - 1)(rng);
  states.resize(static_cast<std::size_t>(size));
  std::sort(states.begin(), states.end());
  return states;
}

inline std::vector<int> complement(int n, const std::vector<int>& k) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (std::find(k.begin(), k.end(), i) == k.end()) out.push_back(i);
  }
  return out;
}

}  // namespace oracle
