#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace hitgap {

/// A real function of one variable parsed from a small arithmetic grammar.
///
/// Grammar: numbers, the variable (`x` or `t`), `+ - * / ^`, unary minus,
/// parentheses and the functions `exp sin cos abs`. `^` is right associative
/// and binds tighter than unary minus, so `-x^2` is `-(x^2)`.
///
/// Expressions are immutable and cheap to copy; derivatives are symbolic.
class Expression {
 public:
  struct Node;

  /// Throws ValidationError with the offending position on malformed input.
  static Expression parse(std::string_view text);
  static Expression constant(double value);

  double operator()(double x) const;
  Expression derivative() const;

  /// Source text for parsed expressions, a rendering for derived ones.
  std::string to_string() const;

 private:
  explicit Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) {}
  std::shared_ptr<const Node> root_;
};

}  // namespace hitgap
