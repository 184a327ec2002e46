#include "webaudit/web2.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "webaudit/numerics.hpp"

namespace webaudit::web2 {

using expr::Expression;
using field::FieldError;
using field::Order;

namespace {

std::string where(Point p) { return "(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")"; }

double slack_of(const Rect& r) {
  return 1e-12 * std::max({1.0, std::abs(r.x.lo), std::abs(r.x.hi), std::abs(r.y.lo), std::abs(r.y.hi)});
}

Web2Error translate(const FieldError& e) {
  switch (e.kind()) {
    case FieldError::Kind::OutOfDomain:
      return {Web2Error::Kind::Domain, e.what()};
    case FieldError::Kind::Chart:
      return {e.not_monotone() ? Web2Error::Kind::NotMonotone : Web2Error::Kind::NotBracketed, e.what()};
    default:
      return {Web2Error::Kind::Derivative, e.what()};
  }
}

template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const FieldError& e) {
    throw translate(e);
  }
}

void require_inside(const DemandWeb& web, Point p) {
  if (!web.domain().contains(p, slack_of(web.domain())))
    throw Web2Error(Web2Error::Kind::Domain, "point " + where(p) + " outside the web domain");
}

// Union of two charts; an unknown appearing in both must be defined identically.
std::vector<field::ImplicitUnknown> merge_charts(const std::vector<field::ImplicitUnknown>& a,
                                                 const std::vector<field::ImplicitUnknown>& b) {
  std::vector<field::ImplicitUnknown> out = a;
  for (const auto& u : b) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& v) { return v.name == u.name; });
    if (it == out.end()) {
      out.push_back(u);
    } else if (!(it->equation == u.equation) || it->bracket.lo != u.bracket.lo || it->bracket.hi != u.bracket.hi) {
      throw Web2Error(Web2Error::Kind::Degenerate, "chart unknown '" + u.name + "' is defined twice differently");
    }
  }
  return out;
}

}  // namespace

// ------------------------------------------------------------------ DemandWeb

DemandWeb DemandWeb::families(const Expression& f1, const Expression& f2, Rect domain, Interval p2_bracket,
                              Interval q2_bracket, double floor) {
  for (const auto& v : expr::free_variables(f1))
    if (v != "p1" && v != "p2")
      throw Web2Error(Web2Error::Kind::Degenerate, "f1 must be an expression in p1 and p2, found '" + v + "'");
  for (const auto& v : expr::free_variables(f2))
    if (v != "p1" && v != "q2")
      throw Web2Error(Web2Error::Kind::Degenerate, "f2 must be an expression in p1 and q2, found '" + v + "'");
  if (!expr::depends_on(f1, "p2"))
    throw Web2Error(Web2Error::Kind::NotMonotone, "f1 does not depend on p2; the family cannot be inverted");
  if (!expr::depends_on(f2, "q2"))
    throw Web2Error(Web2Error::Kind::NotMonotone, "f2 does not depend on q2; the family cannot be inverted");
  Expression q1 = Expression::variable("q1");
  field::ImplicitUnknown up2{"p2", f1 - q1, p2_bracket};
  field::ImplicitUnknown uq2{"q2", f2 - q1, q2_bracket};
  auto q2 = guarded(
      [&] { return ScalarField2D::closed_form(Expression::variable("q2"), "q1", "p1", domain, {uq2}); });
  auto p2 = guarded(
      [&] { return ScalarField2D::closed_form(Expression::variable("p2"), "q1", "p1", domain, {up2}); });
  DemandWeb w(std::move(q2), std::move(p2));
  w.source_ = Source::Families;
  w.floor_ = floor;
  w.f1_ = f1;
  w.f2_ = f2;
  w.finish(domain);
  return w;
}

DemandWeb DemandWeb::map(ScalarField2D q2, ScalarField2D p2, std::optional<Rect> domain, double floor) {
  if (q2.is_grid() != p2.is_grid())
    throw Web2Error(Web2Error::Kind::Degenerate, "q2 and p2 must both be closed forms or both grids");
  if (q2.is_grid()) {
    const auto& a = q2.grid_data();
    const auto& b = p2.grid_data();
    if (a.nx != b.nx || a.ny != b.ny || a.x0 != b.x0 || a.y0 != b.y0 || a.hx != b.hx || a.hy != b.hy)
      throw Web2Error(Web2Error::Kind::Degenerate, "q2 and p2 grids have different geometry");
  } else if (q2.x_name() != p2.x_name() || q2.y_name() != p2.y_name()) {
    throw Web2Error(Web2Error::Kind::Degenerate, "q2 and p2 use different coordinate names");
  }
  DemandWeb w(std::move(q2), std::move(p2));
  w.floor_ = floor;
  w.finish(domain);
  return w;
}

void DemandWeb::finish(std::optional<Rect> domain) {
  if (!(floor_ >= 0)) throw Web2Error(Web2Error::Kind::Transversality, "transversality floor must be >= 0");
  if (is_grid()) {
    const field::GridData& gq = q2_.grid_data();
    const field::GridData& gp = p2_.grid_data();
    const int levels = 2;
    auto vq = [&gq](int i, int j) { return gq.at(i, j); };
    auto vp = [&gp](int i, int j) { return gp.at(i, j); };
    field::GridData a = guarded([&] {
      return field::derived_grid(gq, field::stencil_reach(1, levels), [&](int i, int j) {
        double qx = field::node_partial(vq, i, j, {1, 0}, gq.hx, gq.hy, levels);
        double qy = field::node_partial(vq, i, j, {0, 1}, gq.hx, gq.hy, levels);
        double px = field::node_partial(vp, i, j, {1, 0}, gq.hx, gq.hy, levels);
        double py = field::node_partial(vp, i, j, {0, 1}, gq.hx, gq.hy, levels);
        return qx * py - qy * px;
      });
    });
    a_ = ScalarField2D::grid(a, q2_.interpolation_order());
    if (domain) {
      domain_ = *domain;
    } else {
      auto r = a_.valid_region({1, 1});
      if (!r) throw Web2Error(Web2Error::Kind::Domain, "grid too small for a 2-web analysis");
      domain_ = *r;
    }
    auto region = a_.valid_region({1, 1});
    if (!region || !region->contains({domain_.x.lo, domain_.y.lo}, slack_of(domain_)) ||
        !region->contains({domain_.x.hi, domain_.y.hi}, slack_of(domain_)))
      throw Web2Error(Web2Error::Kind::Domain, "web domain exceeds the usable part of the grid");
  } else {
    if (domain) {
      domain_ = *domain;
    } else if (auto d = q2_.domain()) {
      domain_ = *d;
    } else {
      throw Web2Error(Web2Error::Kind::Domain, "a closed-form web needs a domain rectangle");
    }
    auto chart = merge_charts(q2_.chart(), p2_.chart());
    Expression det = expr::simplify(q2_.partial_expression({1, 0}) * p2_.partial_expression({0, 1}) -
                                    q2_.partial_expression({0, 1}) * p2_.partial_expression({1, 0}));
    a_ = guarded([&] { return ScalarField2D::closed_form(det, q2_.x_name(), q2_.y_name(), domain_, chart); });
    std::vector<std::string> slots{q2_.x_name(), q2_.y_name()};
    for (const auto& u : chart) slots.push_back(u.name);
    compiled_ = std::make_shared<Compiled>(Compiled{expr::Program(q2_.expression(), slots),
                                                    expr::Program(p2_.expression(), slots)});
  }
  if (!(domain_.x.width() > 0) || !(domain_.y.width() > 0))
    throw Web2Error(Web2Error::Kind::Domain, "web domain is empty");

  // Sweep: finite nonzero density of one sign, transverse leaves.
  const int n = 17;
  double worst = INFINITY;
  sign_ = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      Point p{domain_.x.lo + domain_.x.width() * i / (n - 1), domain_.y.lo + domain_.y.width() * j / (n - 1)};
      InducedMapSample s = induced_map(*this, p);
      if (!std::isfinite(s.det))
        throw Web2Error(Web2Error::Kind::Derivative, "non-finite Jacobian at " + where(p));
      double gq = std::hypot(s.jacobian[0][0], s.jacobian[0][1]);
      double gp = std::hypot(s.jacobian[1][0], s.jacobian[1][1]);
      double sine = gq > 0 && gp > 0 ? std::abs(s.det) / (gq * gp) : 0.0;
      if (sine < floor_ || s.det == 0)
        throw Web2Error(Web2Error::Kind::Transversality,
                        "demand families not transverse at " + where(p) + " (|sin angle| = " + std::to_string(sine) +
                            ")");
      int sg = s.det > 0 ? 1 : -1;
      if (sign_ && sg != sign_)
        throw Web2Error(Web2Error::Kind::Transversality,
                        "Jacobian determinant changes sign in the domain near " + where(p));
      sign_ = sg;
      worst = std::min(worst, sine);
    }
  measured_ = worst;

  if (is_grid()) {
    field::GridData g = a_.grid_data();
    for (double& v : g.values) v = std::abs(v);
    abs_a_ = ScalarField2D::grid(std::move(g), a_.interpolation_order());
  } else {
    Expression e = sign_ > 0 ? a_.expression() : expr::simplify(-a_.expression());
    abs_a_ = ScalarField2D::closed_form(e, a_.x_name(), a_.y_name(), domain_, a_.chart());
  }
}

Point DemandWeb::map_values(Point p) const {
  if (!compiled_) return guarded([&] { return Point{q2_.value(p), p2_.value(p)}; });
  if (!domain_.contains(p, slack_of(domain_)))
    throw Web2Error(Web2Error::Kind::Domain, "point " + where(p) + " outside the web domain");
  std::vector<double> v{p.x, p.y};
  auto u = guarded([&] { return a_.chart_values(p); });
  v.insert(v.end(), u.begin(), u.end());
  try {
    return {compiled_->q2(v), compiled_->p2(v)};
  } catch (const expr::EvalError& e) {
    throw Web2Error(Web2Error::Kind::Derivative, std::string("map evaluation at ") + where(p) + ": " + e.what());
  }
}

DemandWeb DemandWeb::rescaled(double lambda) const {
  if (!(lambda > 0)) throw Web2Error(Web2Error::Kind::Domain, "rescaling factor must be positive");
  Rect d{{domain_.x.lo * lambda, domain_.x.hi * lambda}, {domain_.y.lo / lambda, domain_.y.hi / lambda}};
  auto q = guarded([&] { return q2_.rescaled(lambda, 1 / lambda); });
  auto p = guarded([&] { return p2_.rescaled(lambda, 1 / lambda); });
  if (!q.is_grid()) {
    q = ScalarField2D::closed_form(q.expression(), q.x_name(), q.y_name(), d, q.chart());
    p = ScalarField2D::closed_form(p.expression(), p.x_name(), p.y_name(), d, p.chart());
  }
  DemandWeb w = map(std::move(q), std::move(p), d, floor_);
  w.source_ = source_;
  return w;
}

// ------------------------------------------------------------ point tests

InducedMapSample induced_map(const DemandWeb& web, Point p) {
  require_inside(web, p);
  InducedMapSample s;
  s.at = p;
  guarded([&] {
    s.q2 = web.q2().value(p);
    s.p2 = web.p2().value(p);
    s.jacobian[0][0] = web.q2().partial({1, 0}, p);
    s.jacobian[0][1] = web.q2().partial({0, 1}, p);
    s.jacobian[1][0] = web.p2().partial({1, 0}, p);
    s.jacobian[1][1] = web.p2().partial({0, 1}, p);
    return 0;
  });
  s.det = s.jacobian[0][0] * s.jacobian[1][1] - s.jacobian[0][1] * s.jacobian[1][0];
  return s;
}

double lagrangian_residual(const DemandWeb& web, Point p) { return induced_map(web, p).det + 1.0; }

double jacobian_density(const DemandWeb& web, Point p) {
  double det = induced_map(web, p).det;
  if (det == 0 || !std::isfinite(det))
    throw Web2Error(Web2Error::Kind::Degenerate, "Jacobian determinant vanishes at " + where(p));
  return det;
}

namespace {

struct DensityJet {
  double a, aq, ap, aqp;
};

DensityJet jet(const DemandWeb& web, Point p) {
  require_inside(web, p);
  const ScalarField2D& a = web.density();
  DensityJet j = guarded([&] {
    return DensityJet{a.value(p), a.partial({1, 0}, p), a.partial({0, 1}, p), a.partial({1, 1}, p)};
  });
  if (j.a == 0 || (j.a > 0 ? 1 : -1) != web.orientation())
    throw Web2Error(Web2Error::Kind::SignChange, "density changes sign at " + where(p));
  return j;
}

}  // namespace

double samuelson_residual(const DemandWeb& web, Point p) {
  DensityJet j = jet(web, p);
  return (j.a * j.aqp - j.aq * j.ap) / (j.a * j.a);
}

TaylorResidual taylor_identity_residual(const DemandWeb& web, Point p) {
  DensityJet j = jet(web, p);
  TaylorResidual r;
  r.direct = j.a * j.aqp - j.aq * j.ap;

  // S(q, p') = double integral of a over [p.x, q] x [p.y, p'], so S_{qp} = a.
  const ScalarField2D& a = web.density();
  auto S = [&](double q, double pp) {
    return numerics::integrate(
        [&](double s) { return numerics::integrate([&](double t) { return a.value({s, t}); }, p.y, pp, 5); }, p.x, q,
        5);
  };
  auto d = [&](Order o) {
    double hx = field::default_step(o.total(), 2, p.x);
    double hy = field::default_step(o.total(), 2, p.y);
    return field::richardson_partial(S, o, p, hx, hy, 2);
  };
  guarded([&] {
    r.reconstructed = d({1, 1}) * d({2, 2}) - d({2, 1}) * d({1, 2});
    return 0;
  });
  return r;
}

// ---------------------------------------------------------------- areas

namespace {

constexpr int kArcPoints = 256;    // finest boundary resolution per side
constexpr int kRombergLevels = 3;  // 256, 128, 64 points per side

double shoelace(const std::vector<Point>& loop, int stride) {
  double s = 0.0;
  const std::size_t n = loop.size();
  for (std::size_t k = 0; k < n; k += stride) {
    const Point& u = loop[k];
    const Point& v = loop[(k + stride) % n];
    s += u.x * v.y - v.x * u.y;
  }
  return 0.5 * s;
}

// Closed loop of 4 * kArcPoints vertices (each side sampled at kArcPoints
// uniform steps); Romberg over the shoelace at full, 1/2 and 1/4 resolution.
double romberg_area(const std::vector<Point>& loop) {
  std::vector<double> est;
  for (int l = 0, stride = 1; l < kRombergLevels; ++l, stride *= 2) est.push_back(shoelace(loop, stride));
  return numerics::richardson(est);
}

// (q1, p1) with (q2, p2)(q1, p1) = target, by damped Newton from `guess`.
std::optional<Point> invert(const DemandWeb& web, double tq, double tp, Point guess) {
  const Rect& dom = web.domain();
  const double slack = slack_of(dom);
  const double tol = 1e-13 * std::max({1.0, std::abs(tq), std::abs(tp)});
  Point x = guess;
  for (int it = 0; it < 60; ++it) {
    InducedMapSample s = induced_map(web, x);
    double rq = s.q2 - tq;
    double rp = s.p2 - tp;
    if (std::abs(rq) <= tol && std::abs(rp) <= tol) return x;
    double det = s.det;
    if (det == 0) return std::nullopt;
    double dx = (s.jacobian[1][1] * rq - s.jacobian[0][1] * rp) / det;
    double dy = (-s.jacobian[1][0] * rq + s.jacobian[0][0] * rp) / det;
    double lam = 1.0;
    Point y{x.x - dx, x.y - dy};
    while (!dom.contains(y, slack) && lam > 1e-6) {
      lam /= 2;
      y = {x.x - lam * dx, x.y - lam * dy};
    }
    if (!dom.contains(y, slack)) return std::nullopt;
    if (std::abs(dx) + std::abs(dy) <= 1e-15 * (1 + std::abs(x.x) + std::abs(x.y))) return y;
    x = y;
  }
  return std::nullopt;
}

// Lattice point whose image is closest to the target, in range-scaled units.
Point seed_for(const DemandWeb& web, double tq, double tp) {
  const int n = 33;
  const Rect& d = web.domain();
  std::vector<InducedMapSample> samples;
  double qlo = INFINITY, qhi = -INFINITY, plo = INFINITY, phi = -INFINITY;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      Point p{d.x.lo + d.x.width() * i / (n - 1), d.y.lo + d.y.width() * j / (n - 1)};
      InducedMapSample s;
      s.at = p;
      Point v = web.map_values(p);
      s.q2 = v.x;
      s.p2 = v.y;
      qlo = std::min(qlo, s.q2);
      qhi = std::max(qhi, s.q2);
      plo = std::min(plo, s.p2);
      phi = std::max(phi, s.p2);
      samples.push_back(s);
    }
  double sq = qhi > qlo ? qhi - qlo : 1.0;
  double sp = phi > plo ? phi - plo : 1.0;
  Point best = samples.front().at;
  double bd = INFINITY;
  for (const auto& s : samples) {
    double dist = std::hypot((s.q2 - tq) / sq, (s.p2 - tp) / sp);
    if (dist < bd) {
      bd = dist;
      best = s.at;
    }
  }
  return best;
}

}  // namespace

double quadrilateral_area(const DemandWeb& web, Interval p2_leaves, Interval q2_leaves) {
  if (p2_leaves.lo == p2_leaves.hi || q2_leaves.lo == q2_leaves.hi)
    throw Web2Error(Web2Error::Kind::Geometry, "a cell needs two distinct leaves of each family");
  // image rectangle corners, counterclockwise in (q2, p2)
  const double cq[4] = {q2_leaves.lo, q2_leaves.hi, q2_leaves.hi, q2_leaves.lo};
  const double cp[4] = {p2_leaves.lo, p2_leaves.lo, p2_leaves.hi, p2_leaves.hi};
  std::vector<Point> loop;
  loop.reserve(4 * kArcPoints);
  auto first = invert(web, cq[0], cp[0], seed_for(web, cq[0], cp[0]));
  if (!first)
    throw Web2Error(Web2Error::Kind::Geometry, "leaves q2 = " + std::to_string(cq[0]) + " and p2 = " +
                                                   std::to_string(cp[0]) + " do not meet inside the domain");
  Point cur = *first;
  for (int side = 0; side < 4; ++side) {
    int nxt = (side + 1) % 4;
    for (int k = 0; k < kArcPoints; ++k) {
      double t = static_cast<double>(k) / kArcPoints;
      double tq = cq[side] + t * (cq[nxt] - cq[side]);
      double tp = cp[side] + t * (cp[nxt] - cp[side]);
      auto x = invert(web, tq, tp, cur);
      if (!x) x = invert(web, tq, tp, seed_for(web, tq, tp));
      if (!x)
        throw Web2Error(Web2Error::Kind::Geometry,
                        "cell boundary leaves the domain near (q2, p2) = (" + std::to_string(tq) + ", " +
                            std::to_string(tp) + ")");
      loop.push_back(*x);
      cur = *x;
    }
  }
  double area = romberg_area(loop);
  if (!std::isfinite(area) || area == 0)
    throw Web2Error(Web2Error::Kind::Geometry, "degenerate cell boundary");
  return std::abs(area);
}

double cell_image_area(const DemandWeb& web, Point p, double eps, double delta) {
  if (eps == 0 || delta == 0) throw Web2Error(Web2Error::Kind::Geometry, "cell offsets must be nonzero");
  const Point c[4] = {p, {p.x + eps, p.y}, {p.x + eps, p.y + delta}, {p.x, p.y + delta}};
  for (Point q : c) require_inside(web, q);
  std::vector<Point> loop;
  loop.reserve(4 * kArcPoints);
  for (int side = 0; side < 4; ++side) {
    Point a = c[side];
    Point b = c[(side + 1) % 4];
    for (int k = 0; k < kArcPoints; ++k) {
      double t = static_cast<double>(k) / kArcPoints;
      loop.push_back(web.map_values({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}));
    }
  }
  return romberg_area(loop);
}

double area_ratio_check(const DemandWeb& web, Point base, double eps, double delta) {
  double app = cell_image_area(web, base, eps, delta);
  double amm = cell_image_area(web, base, -eps, -delta);
  double apm = cell_image_area(web, base, eps, -delta);
  double amp = cell_image_area(web, base, -eps, delta);
  double den = apm * amp;
  if (den == 0) throw Web2Error(Web2Error::Kind::Geometry, "a cell around " + where(base) + " has zero area");
  return std::abs(app * amm / den - 1.0);
}

// ------------------------------------------------------- factorization

namespace {

double s_tolerance(const DemandWeb& web, double tol) { return tol >= 0 ? tol : (web.is_grid() ? 1e-3 : 1e-6); }

}  // namespace

Factorization factor_density(const DemandWeb& web, Point anchor, const FactorOptions& opt) {
  require_inside(web, anchor);
  if (opt.nq < 2 || opt.np < 2) throw Web2Error(Web2Error::Kind::Domain, "factor tables need >= 2 nodes");
  const double tol = s_tolerance(web, opt.tol);
  const Rect& d = web.domain();
  double worst = 0.0;
  Point at;
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i) {
      Point p = d.probe(i, j, 5);
      double r = std::abs(samuelson_residual(web, p));
      if (r > worst) {
        worst = r;
        at = p;
      }
    }
  if (worst > tol)
    throw Web2Error(Web2Error::Kind::Precondition, "S condition fails: max |(ln|a|)_{q1p1}| = " +
                                                       std::to_string(worst) + " at " + where(at) + " > " +
                                                       std::to_string(tol));
  const ScalarField2D& a = web.density();
  const double sg = web.orientation();
  const double a_star = guarded([&] { return std::abs(a.value(anchor)); });
  if (a_star == 0) throw Web2Error(Web2Error::Kind::Degenerate, "density vanishes at the anchor");

  Factorization fz;
  fz.anchor = anchor;
  guarded([&] {
    for (int k = 0; k < opt.nq; ++k) {
      double q = k == opt.nq - 1 ? d.x.hi : d.x.lo + d.x.width() * k / (opt.nq - 1);
      fz.f.t.push_back(q);
      fz.f.v.push_back(std::abs(a.value({q, anchor.y})));
      fz.f.dv.push_back(sg * a.partial({1, 0}, {q, anchor.y}));
    }
    for (int k = 0; k < opt.np; ++k) {
      double p = k == opt.np - 1 ? d.y.hi : d.y.lo + d.y.width() * k / (opt.np - 1);
      fz.g.t.push_back(p);
      fz.g.v.push_back(std::abs(a.value({anchor.x, p})) / a_star);
      fz.g.dv.push_back(sg * a.partial({0, 1}, {anchor.x, p}) / a_star);
    }
    double amax = 0.0;
    double err = 0.0;
    for (int j = 0; j < opt.np; ++j)
      for (int i = 0; i < opt.nq; ++i) {
        double v = std::abs(a.value({fz.f.t[i], fz.g.t[j]}));
        amax = std::max(amax, v);
        err = std::max(err, std::abs(fz.f.v[i] * fz.g.v[j] - v));
      }
    fz.max_error = amax > 0 ? err / amax : err;
    return 0;
  });
  return fz;
}

Rectification rectify(const DemandWeb& web, Point anchor, const FactorOptions& opt) {
  Rectification r;
  r.factors = factor_density(web, anchor, opt);
  for (double v : r.factors.f.v)
    if (!(v > 0)) throw Web2Error(Web2Error::Kind::NotMonotone, "factor f is not positive; F is not monotone");
  for (double v : r.factors.g.v)
    if (!(v > 0)) throw Web2Error(Web2Error::Kind::NotMonotone, "factor g is not positive; G is not monotone");
  const ScalarField2D& a = web.density();
  const Rect& d = web.domain();
  const double a_star = std::abs(a.value(anchor));
  guarded([&] {
    r.F = web3::cumulative_table([&](double q) { return std::abs(a.value({q, anchor.y})); }, d.x.lo, d.x.hi, opt.nq,
                                 anchor.x);
    r.G = web3::cumulative_table([&](double p) { return std::abs(a.value({anchor.x, p})) / a_star; }, d.y.lo, d.y.hi,
                                 opt.np, anchor.y);
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 5; ++i) {
        Point p = d.probe(i, j, 5);
        double det = std::abs(a.value(p)) / (r.F.derivative(p.x) * r.G.derivative(p.y));
        r.probes.push_back(p);
        r.rectified_det.push_back(det);
        r.max_det_deviation = std::max(r.max_det_deviation, std::abs(det - 1));
      }
    return 0;
  });
  return r;
}

// ------------------------------------------------------------- hexagon

namespace {

struct Vacuity {
  bool vacuous = false;
  std::string note;
};

// A constant |a| (or one depending on a single variable) has no level web in
// general position: the hexagon test passes vacuously.
Vacuity density_vacuity(const DemandWeb& web) {
  const ScalarField2D& a = web.abs_density();
  const Rect& d = web.domain();
  const int n = 9;
  double amax = 0.0, gq = 0.0, gp = 0.0;
  guarded([&] {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        Point p = d.probe(i, j, n);
        amax = std::max(amax, std::abs(a.value(p)));
        gq = std::max(gq, std::abs(a.partial({1, 0}, p)));
        gp = std::max(gp, std::abs(a.partial({0, 1}, p)));
      }
    return 0;
  });
  double thr = (web.is_grid() ? 1e-5 : 1e-10) * std::max(amax, 1e-300) / std::min(d.x.width(), d.y.width());
  if (gq <= thr && gp <= thr) return {true, "density is constant; hexagon condition holds vacuously"};
  if (gq <= thr) return {true, "density depends on p1 only; its level web is degenerate and ln|a| is additive"};
  if (gp <= thr) return {true, "density depends on q1 only; its level web is degenerate and ln|a| is additive"};
  return {};
}

}  // namespace

web3::HexagonReport hexagon_on_density(const DemandWeb& web, double x0, double y0, double x1, double x2) {
  Vacuity v = density_vacuity(web);
  if (v.vacuous) {
    web3::HexagonReport h;
    h.x0 = x0;
    h.y0 = y0;
    h.x1 = x1;
    h.x2 = x2;
    h.vacuous = true;
    h.note = v.note;
    return h;
  }
  web3::Web3 level(web.abs_density(), web.domain(), 0.0);
  return web3::thomsen_closure_gap(level, x0, y0, x1, x2);
}

// ---------------------------------------------------------------- audit

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Pass:
      return "pass";
    case Outcome::Fail:
      return "fail";
    case Outcome::Vacuous:
      return "vacuous-pass";
    default:
      return "inconclusive";
  }
}

Tolerances resolve(const Tolerances& t, const DemandWeb& web) {
  Tolerances r = t;
  if (r.lagrangian < 0) r.lagrangian = web.is_grid() ? 1e-4 : 1e-6;
  r.samuelson = s_tolerance(web, t.samuelson);
  if (r.taylor < 0) r.taylor = r.samuelson;
  if (r.hexagon < 0) r.hexagon = web.is_grid() ? 1e-5 : 1e-8;
  return r;
}

const TestResult& IntegrabilityReport::test(const std::string& name) const {
  for (const auto& t : tests)
    if (t.name == name) return t;
  throw std::out_of_range("no test named " + name);
}

namespace {

template <class F>
void record(TestResult& t, Point p, F&& f) {
  Residual r;
  r.p = p;
  try {
    r.value = f();
    double v = std::abs(*r.value);
    bool first = std::none_of(t.residuals.begin(), t.residuals.end(), [](const Residual& x) { return x.value.has_value(); });
    if (first || v > t.max_abs) {
      t.max_abs = v;
      t.worst = p;
    }
  } catch (const std::exception& e) {
    r.value.reset();
    r.error = e.what();
    ++t.failed;
  }
  t.residuals.push_back(std::move(r));
}

void conclude(TestResult& t) {
  std::size_t total = t.residuals.size();
  if (total == 0 || t.failed * 10 > static_cast<int>(total) || t.failed == static_cast<int>(total)) {
    t.outcome = Outcome::Inconclusive;
    return;
  }
  t.outcome = t.max_abs <= t.tolerance ? Outcome::Pass : Outcome::Fail;
}

bool passes(Outcome o) { return o == Outcome::Pass || o == Outcome::Vacuous; }

}  // namespace

IntegrabilityReport audit(const DemandWeb& web, const AuditOptions& opt) {
  if (opt.n < 3) throw Web2Error(Web2Error::Kind::Domain, "audit needs n >= 3");
  IntegrabilityReport rep;
  rep.n = opt.n;
  rep.tolerances = resolve(opt.tol, web);
  const Rect& d = web.domain();
  std::vector<Point> probes;
  for (int j = 0; j < opt.n; ++j)
    for (int i = 0; i < opt.n; ++i) probes.push_back(d.probe(i, j, opt.n));

  TestResult lag;
  lag.name = "lagrangian";
  lag.tolerance = rep.tolerances.lagrangian;
  TestResult sam;
  sam.name = "samuelson";
  sam.tolerance = rep.tolerances.samuelson;
  TestResult tay;
  tay.name = "taylor";
  tay.tolerance = rep.tolerances.taylor;
  TestResult area;
  area.name = "area_ratio";
  area.tolerance = rep.tolerances.area_ratio;
  double route_gap = 0.0;
  for (Point p : probes) {
    record(lag, p, [&] { return lagrangian_residual(web, p); });
    record(sam, p, [&] { return samuelson_residual(web, p); });
    record(tay, p, [&] {
      TaylorResidual t = taylor_identity_residual(web, p);
      if (std::abs(t.direct) > 1e-10)
        route_gap = std::max(route_gap, std::abs(t.reconstructed - t.direct) / std::abs(t.direct));
      return t.direct;
    });
    record(area, p, [&] { return area_ratio_check(web, p, opt.eps, opt.delta); });
  }
  tay.note = "max relative disagreement with the reconstructed-S route: " + std::to_string(route_gap);
  area.note = "cells (eps, delta) = (" + std::to_string(opt.eps) + ", " + std::to_string(opt.delta) + ")";
  for (TestResult* t : {&lag, &sam, &tay, &area}) conclude(*t);
  if (lag.outcome != Outcome::Inconclusive) {
    double det_mean = 0.0;
    int m = 0;
    for (const auto& r : lag.residuals)
      if (r.value) {
        det_mean += *r.value - 1.0;
        ++m;
      }
    if (m && det_mean / m > 0)
      lag.note = "Jacobian determinant is positive: the map preserves orientation";
  }

  TestResult hex;
  hex.name = "hexagon_on_density";
  hex.tolerance = rep.tolerances.hexagon;
  Vacuity v = density_vacuity(web);
  if (v.vacuous) {
    hex.outcome = Outcome::Vacuous;
    hex.note = v.note;
  } else {
    const int k = std::max(opt.hexagon_family, 1);
    std::optional<web3::Web3> level;
    try {
      level.emplace(web.abs_density(), d, 0.0);
    } catch (const std::exception& e) {
      hex.note = std::string("level web of |a| rejected: ") + e.what();
    }
    if (level) {
      Point mid{d.x.mid(), d.y.mid()};
      const ScalarField2D& a = web.abs_density();
      double aq = a.partial({1, 0}, mid);
      double ap = a.partial({0, 1}, mid);
      bool rising = aq * ap > 0;
      // keep the ordinate climb (about 2 step |a_q / a_p|) within a quarter of the height
      double step = std::min(d.x.width() / 20, 0.125 * d.y.width() * std::abs(ap) / std::max(std::abs(aq), 1e-300));
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
          double x0 = d.x.lo + d.x.width() * (0.2 + 0.2 * i);
          double t = 0.2 + 0.15 * j;
          double y0 = rising ? d.y.lo + d.y.width() * t : d.y.hi - d.y.width() * t;
          record(hex, {x0, y0}, [&] {
            return web3::thomsen_closure_gap(*level, x0, y0, x0 + step, x0 + 2 * step).gap / d.y.width();
          });
        }
      conclude(hex);
      hex.note = "gap / domain height over a " + std::to_string(k) + "x" + std::to_string(k) + " quadruple family";
    }
  }

  rep.tests = {lag, sam, tay, area, hex};

  // Lagrangian => S condition => area ratio => hexagon on density.
  const TestResult* chain[] = {&rep.tests[0], &rep.tests[1], &rep.tests[3], &rep.tests[4]};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (passes(chain[i]->outcome) && chain[j]->outcome == Outcome::Fail)
        rep.inconsistencies.push_back(chain[i]->name + " passes but the weaker " + chain[j]->name + " fails");
  return rep;
}

}  // namespace webaudit::web2
