#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitgap/linalg.hpp"

namespace hitgap {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool bounded() const { return hi < std::numeric_limits<double>::infinity(); }
};

/// Coefficients of the order-N polynomial smoothstep S_N on [0, 1] (ascending
/// powers). S_N is 0 at 0, 1 at 1, has N vanishing derivatives at both ends and
/// is therefore C^N when extended by constants.
std::vector<double> smoothstep_coefficients(int order);

/// A real function psi of time, piecewise smooth, constant to the left of its
/// first piece and constant to the right of its last bounded piece.
///
/// Used as the test function of psi-potentials h_psi(x) = E_x psi(tau_K).
/// Derivatives of every order are exact: polynomial pieces are differentiated
/// coefficient-wise, expression pieces symbolically.
class PsiFunction {
 public:
  /// C^order bump on [a, b]: smoothstep rise over `ramp`, plateau of `height`,
  /// mirrored fall. ramp <= 0 selects (b - a) / 2, i.e. no plateau.
  static PsiFunction bump(double a, double b, int order = 2, double height = 1.0, double ramp = -1.0);
  /// 0 before a, C^order smoothstep rise on [a, b], `height` after b.
  static PsiFunction smoothstep(double a, double b, int order = 2, double height = 1.0);
  /// exp(-rate t) for t >= 0, 1 for t < 0.
  static PsiFunction exponential(double rate);
  static PsiFunction constant(double value);
  /// The expression on [lo, hi] (hi may be +inf), 0 to the left; to the right
  /// of a bounded hi the function is 0 as well.
  static PsiFunction expression(const std::string& text, double lo, double hi);

  /// Builds from a config object such as {"family": "bump", "support": [1, 2]}.
  static PsiFunction from_json(const nlohmann::json& spec);
  nlohmann::json to_json() const { return spec_; }

  double operator()(double t) const { return derivative(t, 0); }
  /// Derivative of the given order at t (right-continuous at breakpoints).
  double derivative(double t, int order) const;
  /// psi' as a PsiFunction of its own.
  PsiFunction derivative() const;

  /// Closure of {psi != 0}; hi = +inf when psi does not vanish at infinity.
  Interval support() const;
  Interval derivative_support() const;
  std::vector<double> breakpoints() const;
  double max_abs() const;

  /// Number of continuous derivatives across all breakpoints (C^k).
  int smoothness() const;
  const std::string& id() const { return id_; }

  /// Psi(z) = int e^{zt} psi(t) dt; requires bounded support.
  Complex transform(Complex z) const;

  /// B_k(sigma) with |Psi(sigma + iy)| <= B_k / |z|^k, from k - 1 integrations
  /// by parts: sum of e^{sigma t_j} |jump of psi^{(k-1)} at t_j| plus
  /// int e^{sigma t} |psi^{(k)}(t)| dt. Valid for 1 <= k <= smoothness() + 2.
  double transform_decay_constant(double sigma, int k) const;

  /// int_from^inf |psi'(t)| dt.
  double tail_variation(double from) const;

  /// Finite-difference probe: second differences at step h must vary by less
  /// than 10% of their peak between neighbouring points.
  bool passes_c2_probe(double h = 1e-3) const;

 private:
  struct Piece {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> poly;  ///< ascending powers of (t - lo); empty for callables
    std::function<double(double, int)> fn;
    double eval(double t, int order) const;
    bool polynomial() const { return !poly.empty(); }
  };

  PsiFunction() = default;
  double left_limit(double t, int order) const;
  double right_limit(double t, int order) const;

  std::vector<Piece> pieces_;
  double left_value_ = 0.0;
  double right_value_ = 0.0;  ///< beyond the last piece when it is bounded
  int offset_ = 0;            ///< derivative order applied on top of the base function
  int base_smoothness_ = 0;
  std::string id_;
  nlohmann::json spec_;
};

}  // namespace hitgap
