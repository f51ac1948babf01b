#include "hitgap/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "hitgap/error.hpp"

namespace hitgap {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Sin, Cos, Abs, Log, Sign };

struct Expression::Node {
  Op op;
  double value = 0.0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

NodePtr make_const(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

bool has_variable(const NodePtr& n) {
  if (!n) return false;
  if (n->op == Op::Var) return true;
  return has_variable(n->lhs) || has_variable(n->rhs);
}

double eval(const Expression::Node& n, double x) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return x;
    case Op::Add: return eval(*n.lhs, x) + eval(*n.rhs, x);
    case Op::Sub: return eval(*n.lhs, x) - eval(*n.rhs, x);
    case Op::Mul: return eval(*n.lhs, x) * eval(*n.rhs, x);
    case Op::Div: return eval(*n.lhs, x) / eval(*n.rhs, x);
    case Op::Pow: return std::pow(eval(*n.lhs, x), eval(*n.rhs, x));
    case Op::Neg: return -eval(*n.lhs, x);
    case Op::Exp: return std::exp(eval(*n.lhs, x));
    case Op::Sin: return std::sin(eval(*n.lhs, x));
    case Op::Cos: return std::cos(eval(*n.lhs, x));
    case Op::Abs: return std::abs(eval(*n.lhs, x));
    case Op::Log: return std::log(eval(*n.lhs, x));
    case Op::Sign: {
      const double v = eval(*n.lhs, x);
      return static_cast<double>((v > 0) - (v < 0));
    }
  }
  return 0.0;
}

// Constant-folding constructors keep derivative trees small.
NodePtr add(NodePtr a, NodePtr b) {
  if (is_const(a, 0)) return b;
  if (is_const(b, 0)) return a;
  if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value + b->value);
  return make(Op::Add, a, b);
}
NodePtr sub(NodePtr a, NodePtr b) {
  if (is_const(b, 0)) return a;
  if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value - b->value);
  if (is_const(a, 0)) return make(Op::Neg, b);
  return make(Op::Sub, a, b);
}
NodePtr mul(NodePtr a, NodePtr b) {
  if (is_const(a, 0) || is_const(b, 0)) return make_const(0.0);
  if (is_const(a, 1)) return b;
  if (is_const(b, 1)) return a;
  if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value * b->value);
  return make(Op::Mul, a, b);
}
NodePtr div(NodePtr a, NodePtr b) {
  if (is_const(a, 0)) return make_const(0.0);
  if (is_const(b, 1)) return a;
  return make(Op::Div, a, b);
}
NodePtr neg(NodePtr a) {
  if (a->op == Op::Const) return make_const(-a->value);
  return make(Op::Neg, a);
}

NodePtr differentiate(const NodePtr& n) {
  switch (n->op) {
    case Op::Const: return make_const(0.0);
    case Op::Var: return make_const(1.0);
    case Op::Add: return add(differentiate(n->lhs), differentiate(n->rhs));
    case Op::Sub: return sub(differentiate(n->lhs), differentiate(n->rhs));
    case Op::Mul:
      return add(mul(differentiate(n->lhs), n->rhs), mul(n->lhs, differentiate(n->rhs)));
    case Op::Div:
      return div(sub(mul(differentiate(n->lhs), n->rhs), mul(n->lhs, differentiate(n->rhs))),
                 mul(n->rhs, n->rhs));
    case Op::Pow: {
      if (!has_variable(n->rhs)) {
        // d(u^c) = c u^(c-1) u'
        NodePtr reduced = sub(n->rhs, make_const(1.0));
        return mul(mul(n->rhs, make(Op::Pow, n->lhs, reduced)), differentiate(n->lhs));
      }
      // d(u^v) = u^v (v' log u + v u' / u)
      return mul(n, add(mul(differentiate(n->rhs), make(Op::Log, n->lhs)),
                        div(mul(n->rhs, differentiate(n->lhs)), n->lhs)));
    }
    case Op::Neg: return neg(differentiate(n->lhs));
    case Op::Exp: return mul(n, differentiate(n->lhs));
    case Op::Sin: return mul(make(Op::Cos, n->lhs), differentiate(n->lhs));
    case Op::Cos: return neg(mul(make(Op::Sin, n->lhs), differentiate(n->lhs)));
    case Op::Abs: return mul(make(Op::Sign, n->lhs), differentiate(n->lhs));
    case Op::Log: return div(differentiate(n->lhs), n->lhs);
    case Op::Sign: return make_const(0.0);
  }
  return make_const(0.0);
}

void render(const NodePtr& n, std::ostringstream& out) {
  auto binary = [&](const char* sym) {
    out << '(';
    render(n->lhs, out);
    out << sym;
    render(n->rhs, out);
    out << ')';
  };
  auto call = [&](const char* name) {
    out << name << '(';
    render(n->lhs, out);
    out << ')';
  };
  switch (n->op) {
    case Op::Const: out.precision(17); out << n->value; break;
    case Op::Var: out << 'x'; break;
    case Op::Add: binary("+"); break;
    case Op::Sub: binary("-"); break;
    case Op::Mul: binary("*"); break;
    case Op::Div: binary("/"); break;
    case Op::Pow: binary("^"); break;
    case Op::Neg: out << "(-"; render(n->lhs, out); out << ')'; break;
    case Op::Exp: call("exp"); break;
    case Op::Sin: call("sin"); break;
    case Op::Cos: call("cos"); break;
    case Op::Abs: call("abs"); break;
    case Op::Log: call("log"); break;
    case Op::Sign: call("sign"); break;
  }
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    NodePtr e = expression();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("expression '" + std::string(text_) + "': " + what + " at position " +
                          std::to_string(pos_));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expression() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Op::Add, lhs, term());
      } else if (accept('-')) {
        lhs = make(Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Op::Mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make(Op::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Op::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = expression();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const std::string_view name = text_.substr(start, pos_ - start);
      if (name == "x" || name == "t") return make(Op::Var);
      Op op;
      if (name == "exp") {
        op = Op::Exp;
      } else if (name == "sin") {
        op = Op::Sin;
      } else if (name == "cos") {
        op = Op::Cos;
      } else if (name == "abs") {
        op = Op::Abs;
      } else {
        pos_ = start;
        fail("unknown identifier '" + std::string(name) + "'");
      }
      if (!accept('(')) fail("expected '(' after function name");
      NodePtr arg = expression();
      if (!accept(')')) fail("expected ')'");
      return make(op, arg);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    const std::string rest(text_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return make_const(v);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view text) { return Expression(Parser(text).parse()); }

Expression Expression::constant(double value) { return Expression(make_const(value)); }

double Expression::operator()(double x) const { return eval(*root_, x); }

Expression Expression::derivative() const { return Expression(differentiate(root_)); }

std::string Expression::to_string() const {
  std::ostringstream out;
  render(root_, out);
  return out.str();
}

}  // namespace hitgap
