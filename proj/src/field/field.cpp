#include "webaudit/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "webaudit/numerics.hpp"

namespace webaudit::field {

using expr::Expression;
using expr::Program;

Point Rect::probe(int i, int j, int n) const {
  return {x.lo + x.width() * (i + 1) / (n + 1), y.lo + y.width() * (j + 1) / (n + 1)};
}

namespace {

std::string where(Point p) { return "(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")"; }

void check_order(Order o) {
  if (o.i < 0 || o.j < 0 || o.total() > ScalarField2D::kMaxOrder)
    throw FieldError(FieldError::Kind::OrderTooHigh, "partial order (" + std::to_string(o.i) + "," +
                                                         std::to_string(o.j) + ") exceeds total order 4");
}

double finite_or_throw(double v, Point p) {
  if (!std::isfinite(v)) throw FieldError(FieldError::Kind::NonFinite, "non-finite value at " + where(p));
  return v;
}

}  // namespace

struct ScalarField2D::Impl {
  bool is_grid = false;

  // closed form
  Expression e;
  std::string x = "x";
  std::string y = "y";
  std::optional<Rect> domain;
  std::vector<ImplicitUnknown> chart;
  std::vector<std::string> slots;
  std::vector<Program> h_prog;
  std::vector<Program> hu_prog;
  std::vector<Expression> ux;  // du_k/dx
  std::vector<Expression> uy;

  struct Entry {
    Expression e;
    Program prog;
  };
  mutable std::mutex mu;
  mutable std::map<std::pair<int, int>, std::shared_ptr<const Entry>> cache;

  // grid
  GridData g;
  int interp = 3;

  Expression total_derivative(const Expression& f, int axis) const {
    using namespace expr;
    Expression r = differentiate(f, axis == 0 ? x : y);
    for (std::size_t k = 0; k < chart.size(); ++k) {
      if (!depends_on(f, chart[k].name)) continue;
      r = fold::add(r, fold::mul(differentiate(f, chart[k].name), axis == 0 ? ux[k] : uy[k]));
    }
    return simplify(r);
  }

  const Entry& entry(Order o) const {
    std::lock_guard lock(mu);
    return entry_locked(o.i, o.j);
  }

  const Entry& entry_locked(int i, int j) const {
    auto key = std::make_pair(i, j);
    if (auto it = cache.find(key); it != cache.end()) return *it->second;
    Expression d;
    if (i == 0 && j == 0) {
      d = e;
    } else if (j > 0) {
      d = total_derivative(entry_locked(i, j - 1).e, 1);
    } else {
      d = total_derivative(entry_locked(i - 1, 0).e, 0);
    }
    auto made = std::make_shared<const Entry>(Entry{d, Program(d, slots)});
    cache.emplace(key, made);
    return *made;
  }

  std::vector<double> solve_chart(Point p) const {
    std::vector<double> vals(slots.size(), 0.0);
    vals[0] = p.x;
    vals[1] = p.y;
    for (std::size_t k = 0; k < chart.size(); ++k) {
      std::size_t slot = 2 + k;
      auto g = [&](double u) {
        vals[slot] = u;
        return h_prog[k](vals);
      };
      auto dg = [&](double u) {
        vals[slot] = u;
        return hu_prog[k](vals);
      };
      try {
        double u = numerics::solve_monotone(g, dg, chart[k].bracket.lo, chart[k].bracket.hi);
        vals[slot] = u;
      } catch (const numerics::RootError& err) {
        throw FieldError(FieldError::Kind::Chart,
                         "cannot solve for '" + chart[k].name + "' at " + where(p) + ": " + err.what(),
                         err.kind() == numerics::RootError::Kind::NotMonotone);
      }
    }
    return vals;
  }

  void check_domain(Point p) const {
    if (!domain) return;
    double slack = 1e-12 * std::max({1.0, std::abs(domain->x.lo), std::abs(domain->x.hi), std::abs(domain->y.lo),
                                     std::abs(domain->y.hi)});
    if (!domain->contains(p, slack))
      throw FieldError(FieldError::Kind::OutOfDomain, "point " + where(p) + " outside the field domain");
  }

  // Closed-form evaluation without the domain check (used by stencils).
  double closed_eval(Order o, Point p) const {
    const Entry& en = entry(o);
    try {
      std::vector<double> vals = chart.empty() ? std::vector<double>{p.x, p.y} : solve_chart(p);
      return finite_or_throw(en.prog(vals), p);
    } catch (const expr::EvalError& err) {
      if (err.kind() == expr::EvalError::Kind::NonFinite)
        throw FieldError(FieldError::Kind::NonFinite, std::string(err.what()) + " at " + where(p));
      throw FieldError(FieldError::Kind::Evaluation, std::string(err.what()) + " at " + where(p));
    }
  }

  double grid_partial(Order o, Point p, int levels) const;
};

// ------------------------------------------------------------ construction

ScalarField2D ScalarField2D::closed_form(Expression e, std::string x, std::string y, std::optional<Rect> domain,
                                         std::vector<ImplicitUnknown> chart) {
  if (x.empty() || y.empty() || x == y)
    throw FieldError(FieldError::Kind::Definition, "field variables must be two distinct names");
  auto m = std::make_shared<Impl>();
  m->e = std::move(e);
  m->x = std::move(x);
  m->y = std::move(y);
  m->domain = domain;
  m->chart = std::move(chart);
  m->slots = {m->x, m->y};
  for (const auto& u : m->chart) {
    if (u.name == m->x || u.name == m->y || u.name.empty())
      throw FieldError(FieldError::Kind::Chart, "chart unknown '" + u.name + "' clashes with a field variable");
    if (!(u.bracket.lo < u.bracket.hi))
      throw FieldError(FieldError::Kind::Chart, "chart unknown '" + u.name + "' has an empty bracket");
    m->slots.push_back(u.name);
  }
  for (std::size_t k = 0; k < m->chart.size(); ++k) {
    const auto& u = m->chart[k];
    for (const auto& v : expr::free_variables(u.equation))
      if (v != m->x && v != m->y && v != u.name)
        throw FieldError(FieldError::Kind::Chart, "equation for '" + u.name + "' uses '" + v + "'");
    using namespace expr;
    Expression hu = simplify(differentiate(u.equation, u.name));
    m->h_prog.emplace_back(u.equation, m->slots);
    m->hu_prog.emplace_back(hu, m->slots);
    m->ux.push_back(simplify(fold::neg(fold::div(differentiate(u.equation, m->x), hu))));
    m->uy.push_back(simplify(fold::neg(fold::div(differentiate(u.equation, m->y), hu))));
  }
  for (const auto& v : expr::free_variables(m->e))
    if (std::find(m->slots.begin(), m->slots.end(), v) == m->slots.end())
      throw FieldError(FieldError::Kind::Definition, "expression uses unknown variable '" + v + "'");
  return ScalarField2D(std::move(m));
}

ScalarField2D ScalarField2D::grid(GridData data, int interpolation_order) {
  if (interpolation_order != 1 && interpolation_order != 3)
    throw FieldError(FieldError::Kind::Definition, "interpolation order must be 1 or 3");
  if (data.nx < 2 || data.ny < 2) throw FieldError(FieldError::Kind::Format, "grid needs at least 2 x 2 nodes");
  if (!(data.hx > 0) || !(data.hy > 0)) throw FieldError(FieldError::Kind::Format, "grid spacing must be positive");
  if (data.values.size() != static_cast<std::size_t>(data.nx) * data.ny)
    throw FieldError(FieldError::Kind::Format, "grid value count does not match nx * ny");
  for (double v : data.values)
    if (!std::isfinite(v)) throw FieldError(FieldError::Kind::Format, "grid contains a non-finite sample");
  auto m = std::make_shared<Impl>();
  m->is_grid = true;
  m->g = std::move(data);
  m->interp = interpolation_order;
  return ScalarField2D(std::move(m));
}

// --------------------------------------------------------------- accessors

bool ScalarField2D::is_grid() const { return impl_->is_grid; }
const std::string& ScalarField2D::x_name() const { return impl_->x; }
const std::string& ScalarField2D::y_name() const { return impl_->y; }

const Expression& ScalarField2D::expression() const {
  if (impl_->is_grid) throw FieldError(FieldError::Kind::Definition, "grid field has no expression");
  return impl_->e;
}

const std::vector<ImplicitUnknown>& ScalarField2D::chart() const { return impl_->chart; }

const Expression& ScalarField2D::partial_expression(Order o) const {
  check_order(o);
  if (impl_->is_grid) throw FieldError(FieldError::Kind::Definition, "grid field has no expression");
  return impl_->entry(o).e;
}

std::vector<double> ScalarField2D::chart_values(Point p) const {
  if (impl_->is_grid) return {};
  std::vector<double> vals = impl_->solve_chart(p);
  return {vals.begin() + 2, vals.end()};
}

const GridData& ScalarField2D::grid_data() const {
  if (!impl_->is_grid) throw FieldError(FieldError::Kind::Definition, "closed-form field has no grid");
  return impl_->g;
}

int ScalarField2D::interpolation_order() const { return impl_->interp; }

std::optional<Rect> ScalarField2D::domain() const {
  if (impl_->is_grid) return impl_->g.extent();
  return impl_->domain;
}

std::optional<Rect> ScalarField2D::valid_region(Order o) const {
  check_order(o);
  if (!impl_->is_grid) return impl_->domain;
  const GridData& g = impl_->g;
  int rx = stencil_reach(o.i, 1);
  int ry = stencil_reach(o.j, 1);
  if (g.nx - 2 * rx < impl_->interp + 1 || g.ny - 2 * ry < impl_->interp + 1) return std::nullopt;
  return Rect{{g.x_at(rx), g.x_at(g.nx - 1 - rx)}, {g.y_at(ry), g.y_at(g.ny - 1 - ry)}};
}

// ------------------------------------------------------------- evaluation

double ScalarField2D::value(Point p) const { return partial({0, 0}, p); }

double ScalarField2D::partial(Order o, Point p, const DiffConfig& cfg) const {
  check_order(o);
  if (!std::isfinite(p.x) || !std::isfinite(p.y))
    throw FieldError(FieldError::Kind::OutOfDomain, "non-finite query point");
  if (impl_->is_grid) return impl_->grid_partial(o, p, std::max(cfg.levels, 1));
  impl_->check_domain(p);
  return impl_->closed_eval(o, p);
}

double ScalarField2D::partial_numeric(Order o, Point p, const DiffConfig& cfg) const {
  check_order(o);
  if (cfg.levels < 1) throw FieldError(FieldError::Kind::Definition, "Richardson levels must be >= 1");
  // A grid has a single numeric route: its stencils.
  if (impl_->is_grid) return partial(o, p, cfg);
  impl_->check_domain(p);
  if (o.total() == 0) return impl_->closed_eval(o, p);
  double hx = cfg.hx > 0 ? cfg.hx : default_step(o.total(), cfg.levels, p.x);
  double hy = cfg.hy > 0 ? cfg.hy : default_step(o.total(), cfg.levels, p.y);
  auto f = [&](double x, double y) { return impl_->closed_eval({0, 0}, {x, y}); };
  return finite_or_throw(richardson_partial(f, o, p, hx, hy, cfg.levels), p);
}

ScalarField2D ScalarField2D::rescaled(double sx, double sy) const {
  if (!(sx > 0) || !(sy > 0)) throw FieldError(FieldError::Kind::Definition, "rescaling factors must be positive");
  if (impl_->is_grid) {
    GridData g = impl_->g;
    g.x0 *= sx;
    g.hx *= sx;
    g.y0 *= sy;
    g.hy *= sy;
    return grid(std::move(g), impl_->interp);
  }
  std::map<std::string, Expression, std::less<>> sub{
      {impl_->x, Expression::variable(impl_->x) / Expression::constant(sx)},
      {impl_->y, Expression::variable(impl_->y) / Expression::constant(sy)}};
  std::vector<ImplicitUnknown> chart = impl_->chart;
  for (auto& u : chart) u.equation = expr::substitute(u.equation, sub);
  std::optional<Rect> dom = impl_->domain;
  if (dom) {
    dom->x = {dom->x.lo * sx, dom->x.hi * sx};
    dom->y = {dom->y.lo * sy, dom->y.hi * sy};
  }
  return closed_form(expr::substitute(impl_->e, sub), impl_->x, impl_->y, dom, std::move(chart));
}

// ------------------------------------------------------------------ grids

namespace {

struct AxisWindow {
  std::vector<int> nodes;
  std::vector<double> weights;
};

// Interpolation window along one axis at fractional index s, keeping `reach`
// nodes of stencil room on both sides. Empty when the point does not fit.
std::optional<AxisWindow> axis_window(double s, int n, int reach, int order) {
  const double tol = 1e-9;
  double r = std::round(s);
  if (std::abs(s - r) <= tol) {
    int k = static_cast<int>(r);
    if (k < reach || k > n - 1 - reach) return std::nullopt;
    return AxisWindow{{k}, {1.0}};
  }
  int lo = reach;
  int hi = n - 1 - reach;
  if (s < lo || s > hi || hi - lo < order) return std::nullopt;
  int start = static_cast<int>(std::floor(s)) - (order - 1) / 2;
  start = std::clamp(start, lo, hi - order);
  AxisWindow w;
  w.weights = numerics::lagrange_weights(s - start, order);
  for (int k = 0; k <= order; ++k) w.nodes.push_back(start + k);
  return w;
}

}  // namespace

double ScalarField2D::Impl::grid_partial(Order o, Point p, int levels) const {
  const double sx = (p.x - g.x0) / g.hx;
  const double sy = (p.y - g.y0) / g.hy;
  auto node = [this](int i, int j) { return g.at(i, j); };
  for (int lv = levels; lv >= 1; --lv) {
    auto wx = axis_window(sx, g.nx, stencil_reach(o.i, lv), interp);
    auto wy = axis_window(sy, g.ny, stencil_reach(o.j, lv), interp);
    if (!wx || !wy) continue;
    double sum = 0.0;
    for (std::size_t a = 0; a < wx->nodes.size(); ++a)
      for (std::size_t b = 0; b < wy->nodes.size(); ++b)
        sum += wx->weights[a] * wy->weights[b] * node_partial(node, wx->nodes[a], wy->nodes[b], o, g.hx, g.hy, lv);
    return finite_or_throw(sum, p);
  }
  throw FieldError(FieldError::Kind::OutOfDomain,
                   "point " + where(p) + " outside the grid validity region for partial (" + std::to_string(o.i) +
                       "," + std::to_string(o.j) + ")");
}

int stencil_reach(int k, int levels) { return numerics::stencil_radius(k) * (1 << (levels - 1)); }

double node_partial(const std::function<double(int, int)>& v, int i, int j, Order o, double hx, double hy,
                    int levels) {
  auto wx = numerics::central_stencil(o.i);
  auto wy = numerics::central_stencil(o.j);
  const int rx = static_cast<int>(wx.size() / 2);
  const int ry = static_cast<int>(wy.size() / 2);
  std::vector<double> est;
  for (int lv = 0; lv < levels; ++lv) {
    const int s = 1 << lv;
    double sum = 0.0;
    for (int a = 0; a < static_cast<int>(wx.size()); ++a) {
      if (wx[a] == 0.0) continue;
      for (int b = 0; b < static_cast<int>(wy.size()); ++b) {
        if (wy[b] == 0.0) continue;
        sum += wx[a] * wy[b] * v(i + (a - rx) * s, j + (b - ry) * s);
      }
    }
    est.push_back(sum / (std::pow(s * hx, o.i) * std::pow(s * hy, o.j)));
  }
  return numerics::richardson(est);
}

double default_step(int k, int levels, double c) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::pow(eps, 1.0 / (2.0 * levels + k)) * std::max(1.0, std::abs(c));
}

double richardson_partial(const std::function<double(double, double)>& f, Order o, Point p, double hx, double hy,
                          int levels) {
  check_order(o);
  auto wx = numerics::central_stencil(o.i);
  auto wy = numerics::central_stencil(o.j);
  const int rx = static_cast<int>(wx.size() / 2);
  const int ry = static_cast<int>(wy.size() / 2);
  std::vector<double> est;
  for (int lv = 0; lv < levels; ++lv) {
    const double s = std::ldexp(1.0, lv);
    const double sx = s * hx;
    const double sy = s * hy;
    double sum = 0.0;
    for (int a = 0; a < static_cast<int>(wx.size()); ++a) {
      if (wx[a] == 0.0) continue;
      for (int b = 0; b < static_cast<int>(wy.size()); ++b) {
        if (wy[b] == 0.0) continue;
        sum += wx[a] * wy[b] * f(p.x + (a - rx) * sx, p.y + (b - ry) * sy);
      }
    }
    est.push_back(sum / (std::pow(sx, o.i) * std::pow(sy, o.j)));
  }
  return numerics::richardson(est);
}

GridData derived_grid(const GridGeometry& g, int margin, const std::function<double(int, int)>& fn) {
  if (g.nx - 2 * margin < 2 || g.ny - 2 * margin < 2)
    throw FieldError(FieldError::Kind::OutOfDomain, "grid too small for the requested stencil margin");
  GridData out;
  out.x0 = g.x_at(margin);
  out.y0 = g.y_at(margin);
  out.hx = g.hx;
  out.hy = g.hy;
  out.nx = g.nx - 2 * margin;
  out.ny = g.ny - 2 * margin;
  out.values.resize(static_cast<std::size_t>(out.nx) * out.ny);
  for (int j = 0; j < out.ny; ++j)
    for (int i = 0; i < out.nx; ++i) out.values[static_cast<std::size_t>(j) * out.nx + i] = fn(i + margin, j + margin);
  return out;
}

GridData sample_to_grid(const ScalarField2D& field, const Rect& rect, int n) {
  if (n < 9) throw FieldError(FieldError::Kind::Definition, "sample_to_grid needs n >= 9 nodes per axis");
  if (!(rect.x.width() > 0) || !(rect.y.width() > 0))
    throw FieldError(FieldError::Kind::Definition, "sampling rectangle is empty");
  GridData g;
  g.x0 = rect.x.lo;
  g.y0 = rect.y.lo;
  g.hx = rect.x.width() / (n - 1);
  g.hy = rect.y.width() / (n - 1);
  g.nx = n;
  g.ny = n;
  g.values.resize(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    double y = j == n - 1 ? rect.y.hi : g.y_at(j);
    for (int i = 0; i < n; ++i) {
      double x = i == n - 1 ? rect.x.hi : g.x_at(i);
      g.values[static_cast<std::size_t>(j) * n + i] = field.value({x, y});
    }
  }
  return g;
}

}  // namespace webaudit::field
