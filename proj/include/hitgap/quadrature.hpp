#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <queue>
#include <vector>

#include "hitgap/linalg.hpp"

namespace hitgap {

inline double quad_norm(double v) { return std::abs(v); }
inline double quad_norm(const Complex& v) { return std::abs(v); }
inline double quad_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

template <class T>
struct QuadResult {
  T value;
  double error = 0.0;
  int evaluations = 0;
  bool converged = true;
};

namespace detail {

// Gauss-Kronrod 7/15 abscissae on [-1, 1] (positive half) and weights.
inline constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                  0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T, class F>
struct Panel {
  double a, b;
  T value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <class T, class F>
Panel<T, F> gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const T fc = f(center);
  T kronrod = fc * kWgk[7];
  T gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const T f1 = f(center - dx);
    const T f2 = f(center + dx);
    kronrod = kronrod + (f1 + f2) * kWgk[j];
    if (j % 2 == 1) gauss = gauss + (f1 + f2) * kWg[j / 2];
  }
  kronrod = kronrod * half;
  gauss = gauss * half;
  return {a, b, kronrod, quad_norm(T(kronrod - gauss))};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of a scalar, complex or
/// vector-valued integrand over [a, b]; the error norm is max-abs.
///
/// Stops when the summed error estimate is below max(abs_tol, rel_tol * |I|).
template <class F>
auto integrate(F f, double a, double b, double abs_tol, double rel_tol, int max_panels = 2000)
    -> QuadResult<std::decay_t<decltype(f(a))>> {
  using T = std::decay_t<decltype(f(a))>;
  using Panel = detail::Panel<T, F>;
  QuadResult<T> result;
  std::priority_queue<Panel> panels;
  Panel first = detail::gk15<T>(f, a, b);
  result.evaluations = 15;
  T total = first.value;
  double error = first.error;
  panels.push(first);
  while (error > std::max(abs_tol, rel_tol * quad_norm(total))) {
    if (static_cast<int>(panels.size()) >= max_panels) {
      result.converged = false;
      break;
    }
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Panel left = detail::gk15<T>(f, worst.a, mid);
    const Panel right = detail::gk15<T>(f, mid, worst.b);
    result.evaluations += 30;
    total = total - worst.value + left.value + right.value;
    error = error - worst.error + left.error + right.error;
    panels.push(left);
    panels.push(right);
  }
  // Re-sum from the panels to avoid drift from repeated subtraction.
  T sum = panels.top().value * 0.0;
  double err = 0.0;
  while (!panels.empty()) {
    sum = sum + panels.top().value;
    err += panels.top().error;
    panels.pop();
  }
  result.value = sum;
  result.error = err;
  return result;
}

}  // namespace hitgap
