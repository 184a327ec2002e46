#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>

#include "webaudit/expr.hpp"

namespace webaudit::expr {

namespace {

double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw EvalError(EvalError::Kind::NonFinite, std::string("non-finite result in ") + what);
  return v;
}

double apply_unary(Op op, double a) {
  switch (op) {
    case Op::Neg:
      return -a;
    case Op::Exp:
      return checked(std::exp(a), "exp");
    case Op::Ln:
      if (!(a > 0.0)) throw EvalError(EvalError::Kind::Domain, "ln of non-positive argument");
      return std::log(a);
    case Op::Sqrt:
      if (a < 0.0) throw EvalError(EvalError::Kind::Domain, "sqrt of negative argument");
      return std::sqrt(a);
    default:
      throw std::logic_error("apply_unary: bad op");
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add:
      return checked(a + b, "+");
    case Op::Sub:
      return checked(a - b, "-");
    case Op::Mul:
      return checked(a * b, "*");
    case Op::Div:
      if (b == 0.0) throw EvalError(EvalError::Kind::Domain, "division by zero");
      return checked(a / b, "/");
    case Op::Pow:
      if (a == 0.0) {
        if (b < 0.0) throw EvalError(EvalError::Kind::Domain, "zero raised to a negative power");
        return b == 0.0 ? 1.0 : 0.0;
      }
      if (a < 0.0 && b != std::nearbyint(b))
        throw EvalError(EvalError::Kind::Domain, "negative base with non-integer exponent");
      return checked(std::pow(a, b), "^");
    default:
      throw std::logic_error("apply_binary: bad op");
  }
}

std::optional<double> try_fold_unary(Op op, double a) {
  try {
    return apply_unary(op, a);
  } catch (const EvalError&) {
    return std::nullopt;
  }
}

std::optional<double> try_fold_binary(Op op, double a, double b) {
  try {
    return apply_binary(op, a, b);
  } catch (const EvalError&) {
    return std::nullopt;
  }
}

}  // namespace

double evaluate(const Expression& e, const Bindings& bindings) {
  switch (e.op()) {
    case Op::Const:
      return e.value();
    case Op::Var: {
      auto it = bindings.find(e.name());
      if (it == bindings.end()) throw EvalError(EvalError::Kind::UnboundVariable, "unbound variable '" + e.name() + "'");
      return it->second;
    }
    case Op::Neg:
    case Op::Exp:
    case Op::Ln:
    case Op::Sqrt:
      return apply_unary(e.op(), evaluate(e.arg(), bindings));
    default: {
      double a = evaluate(e.lhs(), bindings);
      double b = evaluate(e.rhs(), bindings);
      return apply_binary(e.op(), a, b);
    }
  }
}

// ------------------------------------------------------------------ Program

Program::Program(const Expression& e, std::vector<std::string> slots) : slots_(std::move(slots)) {
  std::unordered_map<const void*, std::uint32_t> reg;
  auto emit = [&](auto&& self, const Expression& n) -> std::uint32_t {
    if (n.id()) {
      if (auto it = reg.find(n.id()); it != reg.end()) return it->second;
    }
    Instr in{n.op(), 0, 0, 0.0};
    switch (n.op()) {
      case Op::Const:
        in.value = n.value();
        break;
      case Op::Var: {
        auto it = std::find(slots_.begin(), slots_.end(), n.name());
        if (it == slots_.end())
          throw EvalError(EvalError::Kind::UnboundVariable, "unbound variable '" + n.name() + "'");
        in.a = static_cast<std::uint32_t>(it - slots_.begin());
        break;
      }
      case Op::Neg:
      case Op::Exp:
      case Op::Ln:
      case Op::Sqrt:
        in.a = self(self, n.arg());
        break;
      default:
        in.a = self(self, n.lhs());
        in.b = self(self, n.rhs());
    }
    auto r = static_cast<std::uint32_t>(code_.size());
    code_.push_back(in);
    if (n.id()) reg.emplace(n.id(), r);
    return r;
  };
  emit(emit, e);
}

double Program::operator()(std::span<const double> values) const {
  thread_local std::vector<double> regs;
  if (regs.size() < code_.size()) regs.resize(code_.size());
  for (std::size_t k = 0; k < code_.size(); ++k) {
    const Instr& in = code_[k];
    switch (in.op) {
      case Op::Const:
        regs[k] = in.value;
        break;
      case Op::Var:
        if (in.a >= values.size()) throw EvalError(EvalError::Kind::UnboundVariable, "missing slot value");
        regs[k] = values[in.a];
        break;
      case Op::Neg:
      case Op::Exp:
      case Op::Ln:
      case Op::Sqrt:
        regs[k] = apply_unary(in.op, regs[in.a]);
        break;
      default:
        regs[k] = apply_binary(in.op, regs[in.a], regs[in.b]);
    }
  }
  return code_.empty() ? 0.0 : regs[code_.size() - 1];
}

// ---------------------------------------------------------------- folding

namespace fold {

namespace {
Expression c(double v) { return Expression::constant(v); }
}  // namespace

Expression neg(const Expression& a) {
  if (a.is_constant()) return c(-a.value());
  if (a.op() == Op::Neg) return a.arg();
  return -a;
}

Expression add(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant())
    if (auto v = try_fold_binary(Op::Add, a.value(), b.value())) return c(*v);
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (b.op() == Op::Neg) return sub(a, b.arg());
  return a + b;
}

Expression sub(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant())
    if (auto v = try_fold_binary(Op::Sub, a.value(), b.value())) return c(*v);
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return neg(b);
  if (b.op() == Op::Neg) return add(a, b.arg());
  return a - b;
}

Expression mul(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant())
    if (auto v = try_fold_binary(Op::Mul, a.value(), b.value())) return c(*v);
  if (a.is_constant(0.0) || b.is_constant(0.0)) return c(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return neg(b);
  if (b.is_constant(-1.0)) return neg(a);
  if (a.op() == Op::Neg && b.op() == Op::Neg) return mul(a.arg(), b.arg());
  if (a.op() == Op::Neg) return neg(mul(a.arg(), b));
  if (b.op() == Op::Neg) return neg(mul(a, b.arg()));
  return a * b;
}

Expression div(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant())
    if (auto v = try_fold_binary(Op::Div, a.value(), b.value())) return c(*v);
  if (a.is_constant(0.0)) return c(0.0);
  if (b.is_constant(1.0)) return a;
  if (b.is_constant(-1.0)) return neg(a);
  if (a.op() == Op::Neg && b.op() == Op::Neg) return div(a.arg(), b.arg());
  if (a.op() == Op::Neg) return neg(div(a.arg(), b));
  return a / b;
}

Expression pow(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant())
    if (auto v = try_fold_binary(Op::Pow, a.value(), b.value())) return c(*v);
  if (b.is_constant(1.0)) return a;
  if (b.is_constant(0.0)) return c(1.0);
  if (a.is_constant(1.0)) return c(1.0);
  return expr::pow(a, b);
}

Expression unary(Op op, const Expression& a) {
  if (op == Op::Neg) return neg(a);
  if (a.is_constant())
    if (auto v = try_fold_unary(op, a.value())) return c(*v);
  return Expression::unary(op, a);
}

}  // namespace fold

// ----------------------------------------------------------- simplify

Expression simplify(const Expression& e) {
  std::unordered_map<const void*, Expression> memo;
  auto walk = [&](auto&& self, const Expression& n) -> Expression {
    if (n.op() == Op::Const || n.op() == Op::Var) return n;
    if (auto it = memo.find(n.id()); it != memo.end()) return it->second;
    Expression r;
    switch (n.op()) {
      case Op::Neg:
      case Op::Exp:
      case Op::Ln:
      case Op::Sqrt:
        r = fold::unary(n.op(), self(self, n.arg()));
        break;
      case Op::Add:
        r = fold::add(self(self, n.lhs()), self(self, n.rhs()));
        break;
      case Op::Sub:
        r = fold::sub(self(self, n.lhs()), self(self, n.rhs()));
        break;
      case Op::Mul:
        r = fold::mul(self(self, n.lhs()), self(self, n.rhs()));
        break;
      case Op::Div:
        r = fold::div(self(self, n.lhs()), self(self, n.rhs()));
        break;
      default:
        r = fold::pow(self(self, n.lhs()), self(self, n.rhs()));
    }
    memo.emplace(n.id(), r);
    return r;
  };
  return walk(walk, e);
}

// ------------------------------------------------------- differentiate

Expression differentiate(const Expression& e, std::string_view var) {
  using namespace fold;
  const Expression zero = Expression::constant(0.0);
  const Expression one = Expression::constant(1.0);
  const Expression two = Expression::constant(2.0);
  std::unordered_map<const void*, Expression> memo;

  auto d = [&](auto&& self, const Expression& n) -> Expression {
    if (n.op() == Op::Const) return zero;
    if (n.op() == Op::Var) return n.name() == var ? one : zero;
    if (auto it = memo.find(n.id()); it != memo.end()) return it->second;
    Expression r;
    switch (n.op()) {
      case Op::Neg:
        r = neg(self(self, n.arg()));
        break;
      case Op::Exp:
        r = mul(n, self(self, n.arg()));
        break;
      case Op::Ln:
        r = div(self(self, n.arg()), n.arg());
        break;
      case Op::Sqrt:
        r = div(self(self, n.arg()), mul(two, n));
        break;
      case Op::Add:
        r = add(self(self, n.lhs()), self(self, n.rhs()));
        break;
      case Op::Sub:
        r = sub(self(self, n.lhs()), self(self, n.rhs()));
        break;
      case Op::Mul: {
        const Expression& a = n.lhs();
        const Expression& b = n.rhs();
        r = add(mul(self(self, a), b), mul(a, self(self, b)));
        break;
      }
      case Op::Div: {
        const Expression& a = n.lhs();
        const Expression& b = n.rhs();
        Expression da = self(self, a);
        Expression db = self(self, b);
        if (db.is_constant(0.0)) {
          r = div(da, b);
        } else {
          r = div(sub(mul(da, b), mul(a, db)), fold::pow(b, two));
        }
        break;
      }
      default: {
        const Expression& a = n.lhs();
        const Expression& b = n.rhs();
        if (!depends_on(b, var)) {
          // power rule; exponent is constant with respect to var
          r = mul(mul(b, fold::pow(a, sub(b, one))), self(self, a));
        } else {
          // a^b = exp(b ln a)
          Expression rewritten = Expression::unary(Op::Exp, mul(b, Expression::unary(Op::Ln, a)));
          r = self(self, rewritten);
        }
      }
    }
    memo.emplace(n.id(), r);
    return r;
  };
  return d(d, e);
}

}  // namespace webaudit::expr
