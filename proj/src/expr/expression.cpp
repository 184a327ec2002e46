#include "webaudit/expr.hpp"

#include <cmath>
#include <unordered_map>

namespace webaudit::expr {

struct Expression::Node {
  Op op = Op::Const;
  double value = 0.0;
  std::string name;
  Expression a;
  Expression b;
};

bool is_unary(Op op) { return op == Op::Neg || op == Op::Exp || op == Op::Ln || op == Op::Sqrt; }

bool is_binary(Op op) {
  return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div || op == Op::Pow;
}

Expression::Expression() : node_(nullptr) {}

Expression Expression::constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("expression constants must be finite");
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = value == 0.0 ? 0.0 : value;  // no signed zero
  return Expression(std::move(n));
}

Expression Expression::variable(std::string name) {
  if (name.empty()) throw std::invalid_argument("variable name must be non-empty");
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->name = std::move(name);
  return Expression(std::move(n));
}

Expression Expression::unary(Op op, Expression arg) {
  if (!is_unary(op)) throw std::invalid_argument("not a unary operator");
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(arg);
  return Expression(std::move(n));
}

Expression Expression::binary(Op op, Expression lhs, Expression rhs) {
  if (!is_binary(op)) throw std::invalid_argument("not a binary operator");
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(lhs);
  n->b = std::move(rhs);
  return Expression(std::move(n));
}

// A default-constructed Expression has no node and reads as constant 0.
Op Expression::op() const { return node_ ? node_->op : Op::Const; }
double Expression::value() const { return node_ ? node_->value : 0.0; }

const std::string& Expression::name() const {
  static const std::string empty;
  return node_ ? node_->name : empty;
}

const Expression& Expression::arg() const {
  if (!node_) throw std::logic_error("constant has no operands");
  return node_->a;
}
const Expression& Expression::lhs() const { return arg(); }
const Expression& Expression::rhs() const {
  if (!node_) throw std::logic_error("constant has no operands");
  return node_->b;
}

bool operator==(const Expression& a, const Expression& b) {
  if (a.id() == b.id() && a.id() != nullptr) return true;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case Op::Const:
      return a.value() == b.value();
    case Op::Var:
      return a.name() == b.name();
    case Op::Neg:
    case Op::Exp:
    case Op::Ln:
    case Op::Sqrt:
      return a.arg() == b.arg();
    default:
      return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }
}

Expression operator+(const Expression& a, const Expression& b) { return Expression::binary(Op::Add, a, b); }
Expression operator-(const Expression& a, const Expression& b) { return Expression::binary(Op::Sub, a, b); }
Expression operator*(const Expression& a, const Expression& b) { return Expression::binary(Op::Mul, a, b); }
Expression operator/(const Expression& a, const Expression& b) { return Expression::binary(Op::Div, a, b); }
Expression operator-(const Expression& a) { return Expression::unary(Op::Neg, a); }
Expression pow(const Expression& base, const Expression& exponent) {
  return Expression::binary(Op::Pow, base, exponent);
}
Expression exp(const Expression& a) { return Expression::unary(Op::Exp, a); }
Expression ln(const Expression& a) { return Expression::unary(Op::Ln, a); }
Expression sqrt(const Expression& a) { return Expression::unary(Op::Sqrt, a); }

std::set<std::string> free_variables(const Expression& e) {
  std::set<std::string> out;
  std::unordered_map<const void*, bool> seen;
  auto walk = [&](auto&& self, const Expression& n) -> void {
    if (n.id() && !seen.emplace(n.id(), true).second) return;
    switch (n.op()) {
      case Op::Const:
        return;
      case Op::Var:
        out.insert(n.name());
        return;
      case Op::Neg:
      case Op::Exp:
      case Op::Ln:
      case Op::Sqrt:
        self(self, n.arg());
        return;
      default:
        self(self, n.lhs());
        self(self, n.rhs());
    }
  };
  walk(walk, e);
  return out;
}

bool depends_on(const Expression& e, std::string_view var) {
  std::unordered_map<const void*, bool> memo;
  auto walk = [&](auto&& self, const Expression& n) -> bool {
    if (n.op() == Op::Const) return false;
    if (n.op() == Op::Var) return n.name() == var;
    if (auto it = memo.find(n.id()); it != memo.end()) return it->second;
    bool r = is_unary(n.op()) ? self(self, n.arg()) : (self(self, n.lhs()) || self(self, n.rhs()));
    memo.emplace(n.id(), r);
    return r;
  };
  return walk(walk, e);
}

std::size_t node_count(const Expression& e) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var:
      return 1;
    case Op::Neg:
    case Op::Exp:
    case Op::Ln:
    case Op::Sqrt:
      return 1 + node_count(e.arg());
    default:
      return 1 + node_count(e.lhs()) + node_count(e.rhs());
  }
}

Expression substitute(const Expression& e, const std::map<std::string, Expression, std::less<>>& replacements) {
  std::unordered_map<const void*, Expression> memo;
  auto walk = [&](auto&& self, const Expression& n) -> Expression {
    switch (n.op()) {
      case Op::Const:
        return n;
      case Op::Var: {
        auto it = replacements.find(n.name());
        return it == replacements.end() ? n : it->second;
      }
      default:
        break;
    }
    if (auto it = memo.find(n.id()); it != memo.end()) return it->second;
    Expression r = is_unary(n.op()) ? Expression::unary(n.op(), self(self, n.arg()))
                                    : Expression::binary(n.op(), self(self, n.lhs()), self(self, n.rhs()));
    memo.emplace(n.id(), r);
    return r;
  };
  return walk(walk, e);
}

}  // namespace webaudit::expr
