#include "webaudit/forms.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <utility>

namespace webaudit::forms {

using expr::Expression;

// ------------------------------------------------------------ coordinates

CoordinateSystem::CoordinateSystem(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw FormError(FormError::Kind::Definition, "empty coordinate name");
    if (!seen.insert(n).second) throw FormError(FormError::Kind::Definition, "duplicate coordinate '" + n + "'");
  }
}

int CoordinateSystem::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw FormError(FormError::Kind::UnknownCoordinate, "unknown coordinate '" + name + "'");
  return static_cast<int>(it - names_.begin());
}

bool CoordinateSystem::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Coordinates coordinates(std::vector<std::string> names) {
  return std::make_shared<const CoordinateSystem>(std::move(names));
}

namespace {

// Sorts in place; returns the permutation sign, or 0 on a repeated index.
int canonicalize(IndexTuple& t) {
  int sign = 1;
  for (std::size_t i = 1; i < t.size(); ++i) {
    for (std::size_t j = i; j > 0 && t[j - 1] >= t[j]; --j) {
      if (t[j - 1] == t[j]) return 0;
      std::swap(t[j - 1], t[j]);
      sign = -sign;
    }
  }
  return sign;
}

void require_same(const DifferentialForm& a, const DifferentialForm& b) {
  if (!(*a.coords() == *b.coords()))
    throw FormError(FormError::Kind::CoordinateMismatch, "forms live on different coordinate systems");
}

void require_coefficient(const CoordinateSystem& cs, const Expression& c) {
  for (const auto& v : expr::free_variables(c))
    if (!cs.contains(v)) throw FormError(FormError::Kind::Definition, "coefficient uses '" + v + "', not a coordinate");
}

IndexTuple tuple_of(const CoordinateSystem& cs, const std::vector<std::string>& names, int& sign) {
  IndexTuple t;
  for (const auto& n : names) t.push_back(cs.index_of(n));
  sign = canonicalize(t);
  return t;
}

}  // namespace

// ------------------------------------------------------------ forms

DifferentialForm::DifferentialForm(Coordinates coords, int degree) : coords_(std::move(coords)), degree_(degree) {
  if (!coords_) throw FormError(FormError::Kind::Definition, "null coordinate system");
  if (degree < 0) throw FormError(FormError::Kind::Definition, "negative degree");
}

void DifferentialForm::add_term(IndexTuple tuple, const Expression& c) {
  auto it = terms_.find(tuple);
  if (it != terms_.end() && expr::simplify(expr::fold::neg(c)) == it->second) {
    terms_.erase(it);
    return;
  }
  Expression sum = it == terms_.end() ? expr::simplify(c) : expr::simplify(expr::fold::add(it->second, c));
  if (sum.is_constant(0.0)) {
    if (it != terms_.end()) terms_.erase(it);
    return;
  }
  terms_[std::move(tuple)] = sum;
}

DifferentialForm DifferentialForm::function(Coordinates coords, const Expression& f) {
  DifferentialForm out(std::move(coords), 0);
  require_coefficient(*out.coords_, f);
  out.add_term({}, f);
  return out;
}

DifferentialForm DifferentialForm::basis(Coordinates coords, const std::string& name) {
  return monomial(std::move(coords), Expression::constant(1.0), {name});
}

DifferentialForm DifferentialForm::monomial(Coordinates coords, const Expression& coefficient,
                                            const std::vector<std::string>& names) {
  DifferentialForm out(std::move(coords), static_cast<int>(names.size()));
  require_coefficient(*out.coords_, coefficient);
  int sign = 0;
  IndexTuple t = tuple_of(*out.coords_, names, sign);
  if (sign != 0) out.add_term(std::move(t), sign > 0 ? coefficient : expr::fold::neg(coefficient));
  return out;
}

Expression DifferentialForm::coefficient(const std::vector<std::string>& names) const {
  if (static_cast<int>(names.size()) != degree_) return Expression::constant(0.0);
  int sign = 0;
  IndexTuple t = tuple_of(*coords_, names, sign);
  auto it = terms_.find(t);
  if (sign == 0 || it == terms_.end()) return Expression::constant(0.0);
  return sign > 0 ? it->second : expr::simplify(expr::fold::neg(it->second));
}

DifferentialForm DifferentialForm::operator+(const DifferentialForm& other) const {
  require_same(*this, other);
  if (degree_ != other.degree_) throw FormError(FormError::Kind::Definition, "adding forms of different degree");
  DifferentialForm out = *this;
  for (const auto& [t, c] : other.terms_) out.add_term(t, c);
  return out;
}

DifferentialForm DifferentialForm::operator-() const {
  DifferentialForm out(coords_, degree_);
  for (const auto& [t, c] : terms_) out.add_term(t, expr::fold::neg(c));
  return out;
}

DifferentialForm DifferentialForm::operator-(const DifferentialForm& other) const { return *this + (-other); }

DifferentialForm DifferentialForm::scaled(const Expression& factor) const {
  require_coefficient(*coords_, factor);
  DifferentialForm out(coords_, degree_);
  for (const auto& [t, c] : terms_) out.add_term(t, expr::fold::mul(factor, c));
  return out;
}

DifferentialForm wedge(const DifferentialForm& a, const DifferentialForm& b) {
  require_same(a, b);
  DifferentialForm out(a.coords(), a.degree() + b.degree());
  for (const auto& [ta, ca] : a.terms()) {
    for (const auto& [tb, cb] : b.terms()) {
      IndexTuple t = ta;
      t.insert(t.end(), tb.begin(), tb.end());
      int sign = canonicalize(t);
      if (sign == 0) continue;
      Expression c = expr::fold::mul(ca, cb);
      out = out + DifferentialForm::monomial(a.coords(), sign > 0 ? c : expr::fold::neg(c), [&] {
        std::vector<std::string> names;
        for (int i : t) names.push_back(a.coords()->names()[i]);
        return names;
      }());
    }
  }
  return out;
}

DifferentialForm exterior_derivative(const DifferentialForm& a) {
  const auto& names = a.coords()->names();
  DifferentialForm out(a.coords(), a.degree() + 1);
  for (const auto& [t, c] : a.terms()) {
    for (int k = 0; k < static_cast<int>(names.size()); ++k) {
      if (std::find(t.begin(), t.end(), k) != t.end()) continue;
      Expression dc = expr::simplify(expr::differentiate(c, names[k]));
      if (dc.is_constant(0.0)) continue;
      std::vector<std::string> idx{names[k]};
      for (int i : t) idx.push_back(names[i]);
      out = out + DifferentialForm::monomial(a.coords(), dc, idx);
    }
  }
  return out;
}

DifferentialForm pullback(const DifferentialForm& a, const std::map<std::string, Expression>& map, Coordinates base) {
  if (!base) throw FormError(FormError::Kind::Definition, "null base coordinate system");
  const auto& target = a.coords()->names();
  std::map<std::string, Expression, std::less<>> subst;
  std::vector<DifferentialForm> dx;
  for (const auto& name : target) {
    auto it = map.find(name);
    if (it == map.end())
      throw FormError(FormError::Kind::MissingCoordinate, "no expression for target coordinate '" + name + "'");
    for (const auto& v : expr::free_variables(it->second))
      if (!base->contains(v))
        throw FormError(FormError::Kind::UnknownCoordinate,
                        "expression for '" + name + "' uses '" + v + "', not a base coordinate");
    subst.emplace(name, it->second);
    DifferentialForm d(base, 1);
    for (const auto& b : base->names())
      d = d + DifferentialForm::monomial(base, expr::simplify(expr::differentiate(it->second, b)), {b});
    dx.push_back(std::move(d));
  }
  for (const auto& [name, _] : map)
    if (!a.coords()->contains(name))
      throw FormError(FormError::Kind::UnknownCoordinate, "map entry '" + name + "' is not a target coordinate");

  DifferentialForm out(base, a.degree());
  for (const auto& [t, c] : a.terms()) {
    DifferentialForm term = DifferentialForm::function(base, expr::simplify(expr::substitute(c, subst)));
    for (int i : t) term = wedge(term, dx[i]);
    out = out + term;
  }
  return out;
}

std::string to_string(const DifferentialForm& a) {
  if (a.is_zero()) return "0";
  const auto& names = a.coords()->names();
  std::string out;
  for (const auto& [t, c] : a.terms()) {
    std::string basis;
    for (int i : t) basis += (basis.empty() ? "d" : "^d") + names[i];
    std::string coef;
    bool negative = false;
    if (!t.empty() && c.is_constant(1.0)) {
    } else if (!t.empty() && c.is_constant(-1.0)) {
      negative = true;
    } else if (c.is_constant() && c.value() < 0) {
      negative = true;
      coef = expr::to_string(Expression::constant(-c.value()));
    } else {
      coef = expr::to_string(c);
      if (c.op() == expr::Op::Add || c.op() == expr::Op::Sub) coef = "(" + coef + ")";
    }
    if (!out.empty()) out += negative ? " - " : " + ";
    else if (negative) out += "-";
    out += coef;
    if (!coef.empty() && !basis.empty()) out += " ";
    out += basis;
  }
  return out;
}

// ------------------------------------------------------------ equality

namespace {

// Magnitude with every sum replaced by a sum of absolute values: the scale
// that rounding error in evaluating `e` is proportional to.
double magnitude(const Expression& e, const expr::Bindings& env, std::map<const void*, double>& memo) {
  auto it = memo.find(e.id());
  if (it != memo.end()) return it->second;
  double m = 0.0;
  switch (e.op()) {
    case expr::Op::Const:
    case expr::Op::Var:
      m = std::abs(expr::evaluate(e, env));
      break;
    case expr::Op::Neg:
      m = magnitude(e.arg(), env, memo);
      break;
    case expr::Op::Add:
    case expr::Op::Sub:
      m = magnitude(e.lhs(), env, memo) + magnitude(e.rhs(), env, memo);
      break;
    case expr::Op::Mul:
      m = magnitude(e.lhs(), env, memo) * magnitude(e.rhs(), env, memo);
      break;
    case expr::Op::Div:
      m = magnitude(e.lhs(), env, memo) / std::abs(expr::evaluate(e.rhs(), env));
      break;
    default:
      m = std::abs(expr::evaluate(e, env));
  }
  memo.emplace(e.id(), m);
  return m;
}

}  // namespace

EqualityCheck compare(const DifferentialForm& a, const DifferentialForm& b, const EqualityOptions& opt) {
  require_same(a, b);
  EqualityCheck out;
  if (a.degree() != b.degree()) {
    out.equal = a.is_zero() && b.is_zero();
    return out;
  }
  struct Row {
    Expression lhs, rhs, diff;
  };
  std::vector<Row> rows;
  std::set<IndexTuple> keys;
  for (const auto& [t, _] : a.terms()) keys.insert(t);
  for (const auto& [t, _] : b.terms()) keys.insert(t);
  for (const auto& t : keys) {
    auto ia = a.terms().find(t);
    auto ib = b.terms().find(t);
    Expression l = ia == a.terms().end() ? Expression::constant(0.0) : ia->second;
    Expression r = ib == b.terms().end() ? Expression::constant(0.0) : ib->second;
    Expression d = expr::simplify(expr::fold::sub(l, r));
    if (!d.is_constant(0.0)) rows.push_back({l, r, d});
  }
  if (rows.empty()) {
    out.equal = true;
    out.evaluated = opt.points;
    return out;
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(opt.lo, opt.hi);
  const auto& names = a.coords()->names();
  for (int k = 0; k < opt.points; ++k) {
    expr::Bindings env;
    for (const auto& n : names) env[n] = u(rng);
    double worst = 0.0;
    try {
      std::map<const void*, double> memo;
      for (const auto& r : rows) {
        double d = expr::evaluate(r.lhs, env) - expr::evaluate(r.rhs, env);
        double scale = std::max({1.0, magnitude(r.lhs, env, memo), magnitude(r.rhs, env, memo)});
        worst = std::max(worst, std::abs(d) / scale);
      }
    } catch (const expr::EvalError&) {
      continue;
    }
    ++out.evaluated;
    out.max_deviation = std::max(out.max_deviation, worst);
  }
  out.equal = 2 * out.evaluated >= opt.points && out.max_deviation <= opt.tol;
  return out;
}

bool probably_equal(const DifferentialForm& a, const DifferentialForm& b, const EqualityOptions& opt) {
  return compare(a, b, opt).equal;
}

// ------------------------------------------------------------ contact chain

bool ContactChainReport::all_hold() const {
  return std::all_of(identities.begin(), identities.end(), [](const IdentityCheck& c) { return c.holds; }) &&
         literal_triple_zero && omega_squared_zero && top_form_nonzero;
}

ContactChainReport verify_contact_chain() {
  auto cs = coordinates({"Pi", "q1", "p1", "q2", "p2"});
  auto d = [&](const std::string& n) { return DifferentialForm::basis(cs, n); };
  auto var = [](const std::string& n) { return Expression::variable(n); };

  DifferentialForm omega = d("Pi") + d("p1").scaled(var("q1")) + d("p2").scaled(var("q2"));
  DifferentialForm domega = exterior_derivative(omega);
  DifferentialForm dd = wedge(domega, domega);
  DifferentialForm top = wedge(omega, dd);
  DifferentialForm two = DifferentialForm::function(cs, Expression::constant(2.0));

  ContactChainReport out;
  out.coordinates = cs->names();
  out.omega = to_string(omega);
  auto check = [&](std::string name, const DifferentialForm& lhs, const DifferentialForm& rhs) {
    EqualityCheck eq = compare(lhs, rhs);
    out.identities.push_back({std::move(name), to_string(lhs), to_string(rhs), eq.equal, eq.max_deviation});
  };
  check("d omega", domega, wedge(d("q1"), d("p1")) + wedge(d("q2"), d("p2")));
  check("d omega ^ d omega", dd, wedge(two, wedge(wedge(d("q1"), d("p1")), wedge(d("q2"), d("p2")))));
  check("omega ^ d omega ^ d omega", top,
        wedge(two, wedge(d("Pi"), wedge(wedge(d("q1"), d("p1")), wedge(d("q2"), d("p2"))))));

  DifferentialForm triple = wedge(dd, domega);
  out.literal_triple_degree = triple.degree();
  out.literal_triple_zero = triple.is_zero();
  out.omega_squared_zero = compare(wedge(omega, omega), DifferentialForm(cs, 2)).equal;
  out.top_form_nonzero = top.degree() == cs->dimension() && !top.is_zero();
  return out;
}

Expression lagrangian_coefficient(const Expression& q2, const Expression& p2) {
  auto target = coordinates({"q1", "p1", "q2", "p2"});
  auto base = coordinates({"q1", "p1"});
  auto d = [&](const std::string& n) { return DifferentialForm::basis(target, n); };
  DifferentialForm domega = wedge(d("q1"), d("p1")) + wedge(d("q2"), d("p2"));
  std::map<std::string, Expression> map{{"q1", Expression::variable("q1")},
                                        {"p1", Expression::variable("p1")},
                                        {"q2", q2},
                                        {"p2", p2}};
  return pullback(domega, map, base).coefficient({"q1", "p1"});
}

}  // namespace webaudit::forms
