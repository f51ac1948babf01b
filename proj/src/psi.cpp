#include "hitgap/psi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "hitgap/error.hpp"
#include "hitgap/expression.hpp"
#include "hitgap/quadrature.hpp"

namespace hitgap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kExpressionOrders = 10;
constexpr int kSmoothForever = 64;

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Coefficients of the order-th derivative of an ascending-power polynomial.
std::vector<double> differentiate(std::vector<double> c, int order) {
  for (int r = 0; r < order && !c.empty(); ++r) {
    std::vector<double> d;
    for (std::size_t j = 1; j < c.size(); ++j) d.push_back(c[j] * static_cast<double>(j));
    c = d.empty() ? std::vector<double>{0.0} : d;
  }
  return c;
}

double horner(const std::vector<double>& c, double s) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * s + *it;
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::vector<double> smoothstep_coefficients(int order) {
  if (order < 0 || order > 12) throw ValidationError("smoothstep order must lie in [0, 12]");
  std::vector<double> c(static_cast<std::size_t>(2 * order + 2), 0.0);
  for (int n = 0; n <= order; ++n) {
    c[static_cast<std::size_t>(order + 1 + n)] +=
        binomial(order + n, n) * binomial(2 * order + 1, order - n) * (n % 2 ? -1.0 : 1.0);
  }
  return c;
}

double PsiFunction::Piece::eval(double t, int order) const {
  if (!polynomial()) return fn(t, order);
  return horner(differentiate(poly, order), t - lo);
}

PsiFunction PsiFunction::bump(double a, double b, int order, double height, double ramp) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
    throw ValidationError("bump support [" + fmt(a) + ", " + fmt(b) + "] is not a bounded interval");
  }
  const double half = 0.5 * (b - a);
  const double w = ramp <= 0.0 ? half : ramp;
  if (w > half * (1.0 + 1e-12)) throw ValidationError("bump ramp exceeds half the support");
  const std::vector<double> s = smoothstep_coefficients(order);
  PsiFunction f;
  Piece rise{a, a + w, {}, {}};
  Piece fall{b - w, b, {}, {}};
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double scale = height / std::pow(w, static_cast<double>(j));
    rise.poly.push_back(s[j] * scale);
    fall.poly.push_back(-s[j] * scale);
  }
  fall.poly[0] += height;
  f.pieces_.push_back(rise);
  if (b - w > a + w) f.pieces_.push_back(Piece{a + w, b - w, {height}, {}});
  f.pieces_.push_back(fall);
  f.base_smoothness_ = order;
  f.id_ = "bump[" + fmt(a) + "," + fmt(b) + "]^" + std::to_string(order);
  f.spec_ = {{"family", "bump"}, {"support", {a, b}}, {"order", order}, {"height", height}, {"ramp", w}};
  return f;
}

PsiFunction PsiFunction::smoothstep(double a, double b, int order, double height) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
    throw ValidationError("smoothstep interval [" + fmt(a) + ", " + fmt(b) + "] is not bounded");
  }
  const std::vector<double> s = smoothstep_coefficients(order);
  PsiFunction f;
  Piece rise{a, b, {}, {}};
  for (std::size_t j = 0; j < s.size(); ++j) {
    rise.poly.push_back(s[j] * height / std::pow(b - a, static_cast<double>(j)));
  }
  f.pieces_.push_back(rise);
  f.right_value_ = height;
  f.base_smoothness_ = order;
  f.id_ = "smoothstep[" + fmt(a) + "," + fmt(b) + "]^" + std::to_string(order);
  f.spec_ = {{"family", "smoothstep"}, {"interval", {a, b}}, {"order", order}, {"height", height}};
  return f;
}

PsiFunction PsiFunction::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("exponential rate must be positive");
  PsiFunction f;
  f.pieces_.push_back(Piece{0.0, kInf, {}, [rate](double t, int k) {
                              return std::pow(-rate, k) * std::exp(-rate * t);
                            }});
  f.left_value_ = 1.0;
  f.base_smoothness_ = 0;
  f.id_ = "exp(-" + fmt(rate) + "t)";
  f.spec_ = {{"family", "exponential"}, {"rate", rate}};
  return f;
}

PsiFunction PsiFunction::constant(double value) {
  PsiFunction f;
  f.left_value_ = value;
  f.right_value_ = value;
  f.base_smoothness_ = kSmoothForever;
  f.id_ = "const(" + fmt(value) + ")";
  f.spec_ = {{"family", "constant"}, {"value", value}};
  return f;
}

PsiFunction PsiFunction::expression(const std::string& text, double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo)) throw ValidationError("expression support must satisfy lo < hi");
  auto derivs = std::make_shared<std::vector<Expression>>();
  derivs->push_back(Expression::parse(text));
  for (int k = 1; k <= kExpressionOrders; ++k) derivs->push_back(derivs->back().derivative());
  PsiFunction f;
  f.pieces_.push_back(Piece{lo, hi, {}, [derivs](double t, int k) {
                              if (k > kExpressionOrders) {
                                throw DomainError("expression psi supports derivatives up to order " +
                                                  std::to_string(kExpressionOrders));
                              }
                              return (*derivs)[static_cast<std::size_t>(k)](t);
                            }});
  // Exact smoothness: the first derivative order that does not vanish at an end.
  double scale = 0.0;
  for (int i = 0; i <= 64; ++i) {
    const double t = std::isfinite(hi) ? lo + (hi - lo) * i / 64.0 : lo + i / 8.0;
    scale = std::max(scale, std::abs((*derivs)[0](t)));
  }
  const double tol = 1e-12 * std::max(scale, 1.0);
  int smooth = kExpressionOrders - 2;
  for (int k = 0; k < kExpressionOrders - 1; ++k) {
    const bool jump_lo = std::abs((*derivs)[static_cast<std::size_t>(k)](lo)) > tol;
    const bool jump_hi =
        std::isfinite(hi) && std::abs((*derivs)[static_cast<std::size_t>(k)](hi)) > tol;
    if (jump_lo || jump_hi) {
      smooth = k - 1;
      break;
    }
  }
  f.base_smoothness_ = smooth;
  f.id_ = "expr(" + text + ")";
  f.spec_ = {{"family", "expr"}, {"expr", text}, {"support", {lo, std::isfinite(hi) ? nlohmann::json(hi) : nlohmann::json("inf")}}};
  return f;
}

PsiFunction PsiFunction::from_json(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("family") || !spec["family"].is_string()) {
    throw ValidationError("psi needs a string \"family\"");
  }
  const std::string family = spec["family"];
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [key, value] : spec.items()) {
      if (key == "family") continue;
      if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
        throw ValidationError("psi." + key + ": unknown key for family " + family);
      }
    }
  };
  auto number = [&](const char* key, double fallback) {
    if (!spec.contains(key)) return fallback;
    const auto& v = spec[key];
    if (v.is_string() && v.get<std::string>() == "inf") return kInf;
    if (!v.is_number()) throw ValidationError(std::string("psi.") + key + ": expected a number");
    return v.get<double>();
  };
  auto pair = [&](const char* key) {
    if (!spec.contains(key) || !spec[key].is_array() || spec[key].size() != 2) {
      throw ValidationError(std::string("psi.") + key + ": expected [lo, hi]");
    }
    std::array<double, 2> out{};
    for (int i = 0; i < 2; ++i) {
      const auto& v = spec[key][static_cast<std::size_t>(i)];
      if (v.is_string() && v.get<std::string>() == "inf") {
        out[static_cast<std::size_t>(i)] = kInf;
      } else if (v.is_number()) {
        out[static_cast<std::size_t>(i)] = v.get<double>();
      } else {
        throw ValidationError(std::string("psi.") + key + ": expected numbers");
      }
    }
    return out;
  };
  if (family == "bump") {
    allow({"support", "order", "height", "ramp"});
    const auto s = pair("support");
    return bump(s[0], s[1], static_cast<int>(number("order", 2)), number("height", 1.0), number("ramp", -1.0));
  }
  if (family == "smoothstep") {
    allow({"interval", "order", "height"});
    const auto s = pair("interval");
    return smoothstep(s[0], s[1], static_cast<int>(number("order", 2)), number("height", 1.0));
  }
  if (family == "exponential") {
    allow({"rate"});
    return exponential(number("rate", 1.0));
  }
  if (family == "constant") {
    allow({"value"});
    return constant(number("value", 1.0));
  }
  if (family == "expr") {
    allow({"expr", "support"});
    if (!spec.contains("expr") || !spec["expr"].is_string()) throw ValidationError("psi.expr: expected a string");
    const auto s = pair("support");
    return expression(spec["expr"].get<std::string>(), s[0], s[1]);
  }
  throw ValidationError("psi.family: unknown family \"" + family + "\"");
}

double PsiFunction::derivative(double t, int order) const {
  const int k = order + offset_;
  const double left = k == 0 ? left_value_ : 0.0;
  const double right = k == 0 ? right_value_ : 0.0;
  if (pieces_.empty() || t < pieces_.front().lo) return left;
  for (const Piece& p : pieces_) {
    if (t >= p.lo && t < p.hi) return p.eval(t, k);
  }
  return right;
}

double PsiFunction::left_limit(double t, int order) const {
  const int k = order + offset_;
  if (pieces_.empty() || t <= pieces_.front().lo) return k == 0 ? left_value_ : 0.0;
  for (const Piece& p : pieces_) {
    if (t > p.lo && t <= p.hi) return p.eval(t, k);
  }
  return k == 0 ? right_value_ : 0.0;
}

double PsiFunction::right_limit(double t, int order) const { return derivative(t, order); }

PsiFunction PsiFunction::derivative() const {
  PsiFunction d = *this;
  ++d.offset_;
  d.id_ = id_ + "'";
  d.spec_["derivative"] = d.offset_;
  return d;
}

Interval PsiFunction::support() const {
  const double left = offset_ == 0 ? left_value_ : 0.0;
  const double right = offset_ == 0 ? right_value_ : 0.0;
  if (pieces_.empty()) return left == 0.0 ? Interval{0.0, 0.0} : Interval{-kInf, kInf};
  Interval s{pieces_.front().lo, pieces_.back().hi};
  if (left != 0.0) s.lo = -kInf;
  if (right != 0.0) s.hi = kInf;
  return s;
}

Interval PsiFunction::derivative_support() const { return derivative().support(); }

std::vector<double> PsiFunction::breakpoints() const {
  std::vector<double> b;
  for (const Piece& p : pieces_) {
    b.push_back(p.lo);
    if (std::isfinite(p.hi)) b.push_back(p.hi);
  }
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

double PsiFunction::max_abs() const {
  double m = std::abs(derivative(-kInf, 0));
  if (offset_ == 0) m = std::max(m, std::abs(right_value_));
  for (const Piece& p : pieces_) {
    const double hi = std::isfinite(p.hi) ? p.hi : p.lo + 64.0;
    for (int i = 0; i <= 4096; ++i) {
      const double t = i == 4096 && std::isfinite(p.hi) ? p.hi : p.lo + (hi - p.lo) * i / 4096.0;
      m = std::max(m, std::abs(p.eval(t, offset_)));
    }
  }
  return m;
}

int PsiFunction::smoothness() const { return base_smoothness_ - offset_; }

Complex PsiFunction::transform(Complex z) const {
  const Interval s = support();
  if (!s.bounded() || !std::isfinite(s.lo)) {
    throw ModeError("transform of " + id_ + " needs compact support");
  }
  Complex total = 0.0;
  for (const Piece& p : pieces_) {
    const double width = p.hi - p.lo;
    const std::vector<double> c = p.polynomial() ? differentiate(p.poly, offset_) : std::vector<double>{};
    const int degree = static_cast<int>(c.size()) - 1;
    if (p.polynomial() && std::abs(z) * width > degree + 2.0) {
      // int_0^H e^{zs} c(s) ds = [e^{zs} sum_k (-1)^k c^{(k)}(s) / z^{k+1}]_0^H
      Complex at_hi = 0.0;
      Complex at_lo = 0.0;
      Complex zpow = z;
      for (int k = 0; k <= degree; ++k) {
        const std::vector<double> dk = differentiate(c, k);
        const double sign = k % 2 ? -1.0 : 1.0;
        at_hi += sign * horner(dk, width) / zpow;
        at_lo += sign * horner(dk, 0.0) / zpow;
        zpow *= z;
      }
      total += std::exp(z * p.lo) * (std::exp(z * width) * at_hi - at_lo);
    } else {
      auto f = [&](double t) { return std::exp(z * t) * p.eval(t, offset_); };
      const double scale = std::exp(z.real() * p.hi) * std::max(1.0, std::abs(p.eval(p.lo, offset_)));
      total += integrate(f, p.lo, p.hi, 1e-15 * scale, 1e-12).value;
    }
  }
  return total;
}

double PsiFunction::transform_decay_constant(double sigma, int k) const {
  if (k < 1 || k > smoothness() + 2) {
    throw DomainError("decay order " + std::to_string(k) + " exceeds smoothness " +
                      std::to_string(smoothness()) + " + 2 of " + id_);
  }
  const Interval s = support();
  if (!s.bounded() || !std::isfinite(s.lo)) throw ModeError("decay constant of " + id_ + " needs compact support");
  double b = 0.0;
  for (double t : breakpoints()) {
    b += std::exp(sigma * t) * std::abs(right_limit(t, k - 1) - left_limit(t, k - 1));
  }
  for (const Piece& p : pieces_) {
    auto f = [&](double t) { return std::exp(sigma * t) * std::abs(p.eval(t, offset_ + k)); };
    b += integrate(f, p.lo, p.hi, 1e-14, 1e-10).value;
  }
  return b;
}

double PsiFunction::tail_variation(double from) const {
  double total = 0.0;
  for (double t : breakpoints()) {
    if (t >= from) total += std::abs(right_limit(t, 0) - left_limit(t, 0));
  }
  for (const Piece& p : pieces_) {
    const double a = std::max(from, p.lo);
    auto f = [&](double t) { return std::abs(p.eval(t, offset_ + 1)); };
    if (std::isfinite(p.hi)) {
      if (a < p.hi) total += integrate(f, a, p.hi, 1e-15, 1e-10).value;
      continue;
    }
    double length = 1.0;
    double start = a;
    while (length < 1e9) {
      const double piece = integrate(f, start, start + length, 1e-16, 1e-10).value;
      total += piece;
      start += length;
      if (piece <= 1e-16 * std::max(total, 1e-300) || piece == 0.0) break;
      length *= 2.0;
    }
  }
  return total;
}

bool PsiFunction::passes_c2_probe(double h) const {
  const std::vector<double> b = breakpoints();
  if (b.empty()) return true;
  const double lo = b.front() - 10.0 * h;
  const double hi = (std::isfinite(pieces_.back().hi) ? b.back() : b.back() + 1.0) + 10.0 * h;
  const int steps = static_cast<int>(std::ceil((hi - lo) / h));
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double t = lo + i * h;
    d2.push_back(((*this)(t + h) - 2.0 * (*this)(t) + (*this)(t - h)) / (h * h));
  }
  double peak = 0.0;
  for (double v : d2) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return true;
  for (std::size_t i = 1; i < d2.size(); ++i) {
    if (std::abs(d2[i] - d2[i - 1]) > 0.1 * peak) return false;
  }
  return true;
}

}  // namespace hitgap
