#include "webaudit/web3.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "webaudit/numerics.hpp"

namespace webaudit::web3 {

using field::FieldError;
using field::Order;

namespace {

std::string where(Point p) { return "(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ")"; }

double slack_of(const Rect& r) {
  return 1e-12 * std::max({1.0, std::abs(r.x.lo), std::abs(r.x.hi), std::abs(r.y.lo), std::abs(r.y.hi)});
}

// Field errors inside web operations surface as derivative failures.
template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const FieldError& e) {
    if (e.kind() == FieldError::Kind::OutOfDomain) throw WebError(WebError::Kind::Domain, e.what());
    throw WebError(WebError::Kind::Derivative, e.what());
  }
}

void require_inside(const Web3& web, Point p) {
  if (!web.domain().contains(p, slack_of(web.domain())))
    throw WebError(WebError::Kind::Domain, "point " + where(p) + " outside the web domain");
}

struct Grad {
  double fx;
  double fy;
};

Grad gradient(const Web3& web, Point p) {
  return guarded([&] { return Grad{web.f().partial({1, 0}, p), web.f().partial({0, 1}, p)}; });
}

void require_regular(const Web3& web, double fx, double fy, Point p) {
  if (std::abs(fx) < web.reg_floor() || std::abs(fy) < web.reg_floor())
    throw WebError(WebError::Kind::Regularity, "regularity floor violated at " + where(p) + " (f_x = " +
                                                   std::to_string(fx) + ", f_y = " + std::to_string(fy) + ")");
}

}  // namespace

struct Web3::Cache {
  std::once_flag once;
  std::optional<ScalarField2D> log_ratio;
  std::exception_ptr error;
};

Web3::Web3(ScalarField2D f, std::optional<Rect> domain, double reg_floor, int sweep)
    : f_(std::move(f)), reg_floor_(reg_floor), cache_(std::make_shared<Cache>()) {
  if (!(reg_floor >= 0)) throw WebError(WebError::Kind::Regularity, "regularity floor must be >= 0");
  if (domain) {
    domain_ = *domain;
  } else if (f_.is_grid()) {
    auto r = f_.valid_region({2, 2});
    if (!r) throw WebError(WebError::Kind::Domain, "grid too small for a 3-web analysis");
    domain_ = *r;
  } else if (auto d = f_.domain()) {
    domain_ = *d;
  } else {
    throw WebError(WebError::Kind::Domain, "a closed-form web needs a domain rectangle");
  }
  if (!(domain_.x.width() > 0) || !(domain_.y.width() > 0))
    throw WebError(WebError::Kind::Domain, "web domain is empty");
  if (auto fd = f_.domain(); fd && f_.is_grid()) {
    if (!fd->contains({domain_.x.lo, domain_.y.lo}) || !fd->contains({domain_.x.hi, domain_.y.hi}))
      throw WebError(WebError::Kind::Domain, "web domain exceeds the grid");
  }

  sweep = std::max(sweep, 2);
  double floor = INFINITY;
  int sx = 0;
  int sy = 0;
  for (int j = 0; j < sweep; ++j)
    for (int i = 0; i < sweep; ++i) {
      Point p{domain_.x.lo + domain_.x.width() * i / (sweep - 1), domain_.y.lo + domain_.y.width() * j / (sweep - 1)};
      Grad g = gradient(*this, p);
      require_regular(*this, g.fx, g.fy, p);
      int gx = g.fx > 0 ? 1 : -1;
      int gy = g.fy > 0 ? 1 : -1;
      if ((sx && gx != sx) || (sy && gy != sy))
        throw WebError(WebError::Kind::Regularity, "a partial of f changes sign in the domain near " + where(p));
      sx = gx;
      sy = gy;
      floor = std::min({floor, std::abs(g.fx), std::abs(g.fy)});
    }
  measured_floor_ = floor;
}

Route Web3::resolve(Route r) const {
  if (r != Route::Auto) return r;
  return f_.is_grid() ? Route::Numeric : Route::Symbolic;
}

const ScalarField2D& Web3::log_ratio_grid() const {
  std::call_once(cache_->once, [this] {
    try {
      const field::GridData& g = f_.grid_data();
      const int levels = 2;
      auto node = [&g](int i, int j) { return g.at(i, j); };
      field::GridData lr = field::derived_grid(g, field::stencil_reach(1, levels), [&](int i, int j) {
        double fx = field::node_partial(node, i, j, {1, 0}, g.hx, g.hy, levels);
        double fy = field::node_partial(node, i, j, {0, 1}, g.hx, g.hy, levels);
        return std::log(std::abs(fx / fy));
      });
      cache_->log_ratio = ScalarField2D::grid(std::move(lr), f_.interpolation_order());
    } catch (...) {
      cache_->error = std::current_exception();
    }
  });
  if (cache_->error) {
    try {
      std::rethrow_exception(cache_->error);
    } catch (const FieldError& e) {
      throw WebError(WebError::Kind::Derivative, std::string("ln|f_x/f_y| grid: ") + e.what());
    }
  }
  return *cache_->log_ratio;
}

// ---------------------------------------------------------------- curvature

namespace {

double lxy_symbolic(const ScalarField2D& f, Point p) {
  double fx = f.partial({1, 0}, p);
  double fy = f.partial({0, 1}, p);
  double fxx = f.partial({2, 0}, p);
  double fxy = f.partial({1, 1}, p);
  double fyy = f.partial({0, 2}, p);
  double fxxy = f.partial({2, 1}, p);
  double fxyy = f.partial({1, 2}, p);
  return (fxxy * fx - fxx * fxy) / (fx * fx) - (fxyy * fy - fxy * fyy) / (fy * fy);
}

// Outer (1,1) stencil step: about (1e-12)^(1/6) of scale, shrunk so every
// stencil centre stays in the domain.
double outer_step(double c, const field::Interval& iv) {
  double h = 1e-2 * std::max(1.0, std::abs(c));
  double room = std::min(c - iv.lo, iv.hi - c) / 2.5;
  return std::min(h, room);
}

double lxy_numeric(const Web3& web, Point p) {
  const ScalarField2D& f = web.f();
  if (f.is_grid()) return web.log_ratio_grid().partial({1, 1}, p);
  double hx = outer_step(p.x, web.domain().x);
  double hy = outer_step(p.y, web.domain().y);
  if (!(hx > 1e-7 * std::max(1.0, std::abs(p.x))) || !(hy > 1e-7 * std::max(1.0, std::abs(p.y))))
    throw WebError(WebError::Kind::Domain, "point " + where(p) + " too close to the boundary for the numeric route");
  auto log_ratio = [&f](double x, double y) {
    double fx = f.partial_numeric({1, 0}, {x, y});
    double fy = f.partial_numeric({0, 1}, {x, y});
    return std::log(std::abs(fx / fy));
  };
  return field::richardson_partial(log_ratio, {1, 1}, p, hx, hy, 2);
}

}  // namespace

double saint_robert_residual(const Web3& web, Point p, Route route) {
  require_inside(web, p);
  Grad g = gradient(web, p);
  require_regular(web, g.fx, g.fy, p);
  double r = guarded([&] {
    return web.resolve(route) == Route::Symbolic ? lxy_symbolic(web.f(), p) : lxy_numeric(web, p);
  });
  if (!std::isfinite(r)) throw WebError(WebError::Kind::Derivative, "non-finite residual at " + where(p));
  return r;
}

double chern_curvature(const Web3& web, Point p, Route route) {
  double lxy = saint_robert_residual(web, p, route);
  Grad g = web.resolve(route) == Route::Numeric && !web.f().is_grid()
               ? guarded([&] {
                   return Grad{web.f().partial_numeric({1, 0}, p), web.f().partial_numeric({0, 1}, p)};
                 })
               : gradient(web, p);
  return -lxy / (g.fx * g.fy);
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Trivial:
      return "trivial";
    case Verdict::NonTrivial:
      return "non-trivial";
    default:
      return "inconclusive";
  }
}

CurvatureReport separability_test(const Web3& web, int n, double tol, Route route) {
  if (n < 3) throw WebError(WebError::Kind::Domain, "separability_test needs n >= 3");
  CurvatureReport rep;
  rep.n = n;
  rep.tolerance = tol;
  rep.route = web.resolve(route);
  bool have = false;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      ProbeResult pr;
      pr.p = web.domain().probe(i, j, n);
      try {
        pr.residual = saint_robert_residual(web, pr.p, rep.route);
        pr.curvature = chern_curvature(web, pr.p, rep.route);
        double a = std::abs(*pr.residual);
        if (!have || a > rep.max_abs_residual) {
          rep.max_abs_residual = a;
          rep.worst = pr.p;
        }
        have = true;
        rep.max_abs_curvature = std::max(rep.max_abs_curvature, std::abs(*pr.curvature));
      } catch (const WebError& e) {
        pr.residual.reset();
        pr.curvature.reset();
        pr.error = e.what();
        ++rep.failed;
      }
      rep.probes.push_back(std::move(pr));
    }
  if (!have || rep.failed * 10 > n * n) {
    rep.verdict = Verdict::Inconclusive;
  } else {
    rep.verdict = rep.max_abs_residual <= tol ? Verdict::Trivial : Verdict::NonTrivial;
  }
  return rep;
}

// -------------------------------------------------------------- hexagon

namespace {

// y with f(x, y) = c inside the domain.
double solve_y(const Web3& web, double x, double c) {
  const ScalarField2D& f = web.f();
  auto g = [&](double y) { return f.value({x, y}); };
  auto dg = [&](double y) { return f.partial({0, 1}, {x, y}); };
  try {
    return guarded([&] { return numerics::solve_monotone(g, dg, web.domain().y.lo, web.domain().y.hi, c); });
  } catch (const numerics::RootError& e) {
    auto kind = e.kind() == numerics::RootError::Kind::NotMonotone    ? WebError::Kind::NotMonotone
                : e.kind() == numerics::RootError::Kind::NotBracketed ? WebError::Kind::NotBracketed
                                                                      : WebError::Kind::Derivative;
    throw WebError(kind, "level solve at x = " + std::to_string(x) + ": " + e.what());
  }
}

Polyline level_arc(const Web3& web, double xa, double xb, double c) {
  Polyline pl{"level", {}};
  const int n = 32;
  for (int k = 0; k <= n; ++k) {
    double x = xa + (xb - xa) * k / n;
    pl.points.push_back({x, solve_y(web, x, c)});
  }
  return pl;
}

}  // namespace

HexagonReport thomsen_closure_gap(const Web3& web, double x0, double y0, double x1, double x2) {
  if (x0 == x1 || x1 == x2 || x0 == x2) throw WebError(WebError::Kind::Domain, "x0, x1, x2 must be distinct");
  for (double x : {x0, x1, x2}) require_inside(web, {x, y0});
  const ScalarField2D& f = web.f();
  HexagonReport h;
  h.x0 = x0;
  h.y0 = y0;
  h.x1 = x1;
  h.x2 = x2;
  double c1 = guarded([&] { return f.value({x1, y0}); });
  h.y1 = solve_y(web, x0, c1);
  double c2 = guarded([&] { return f.value({x2, h.y1}); });
  h.y2 = solve_y(web, x1, c2);
  double c3 = guarded([&] { return f.value({x2, y0}); });
  h.y2_prime = solve_y(web, x0, c3);
  h.gap = h.y2_prime - h.y2;

  h.polylines.push_back({"vertical", {{x0, y0}, {x0, std::min(h.y2, h.y2_prime)}}});
  h.polylines.push_back({"vertical", {{x1, y0}, {x1, h.y2}}});
  h.polylines.push_back({"vertical", {{x2, y0}, {x2, h.y1}}});
  h.polylines.push_back({"horizontal", {{x0, y0}, {x2, y0}}});
  h.polylines.push_back({"horizontal", {{x0, h.y1}, {x2, h.y1}}});
  h.polylines.push_back({"horizontal", {{x0, h.y2}, {x1, h.y2}}});
  h.polylines.push_back(level_arc(web, x0, x1, c1));
  h.polylines.push_back(level_arc(web, x1, x2, c2));
  h.polylines.push_back(level_arc(web, x0, x2, c3));
  h.polylines.push_back({"defect", {{x0, h.y2}, {x0, h.y2_prime}}});
  return h;
}

// ------------------------------------------------------------ tracing

std::vector<Point> trace_level_curve(const Web3& web, Point seed, double span, double step) {
  if (!(step > 0)) throw WebError(WebError::Kind::Domain, "trace step must be positive");
  require_inside(web, seed);
  const ScalarField2D& f = web.f();
  const Rect& dom = web.domain();
  const double slack = slack_of(dom);
  const double dir = span < 0 ? -1.0 : 1.0;
  const int nsteps = std::max(1, static_cast<int>(std::ceil(std::abs(span) / step - 1e-12)));
  const double h = std::abs(span) / nsteps;
  const double c = guarded([&] { return f.value(seed); });
  const double tol = 1e-9 * std::max(1.0, std::abs(c));

  std::vector<Point> pts{seed};
  auto exit = [&](Point at) {
    throw DomainExit("level curve leaves the domain near " + where(at), pts);
  };
  auto tangent = [&](Point p) -> Point {
    if (!dom.contains(p, slack)) exit(p);
    Grad g = gradient(web, p);
    double norm = std::hypot(g.fx, g.fy);
    if (norm < web.reg_floor())
      throw WebError(WebError::Kind::Regularity, "|grad f| below the regularity floor at " + where(p));
    return {dir * g.fy / norm, -dir * g.fx / norm};
  };

  Point p = seed;
  for (int s = 0; s < nsteps; ++s) {
    Point k1 = tangent(p);
    Point k2 = tangent({p.x + 0.5 * h * k1.x, p.y + 0.5 * h * k1.y});
    Point k3 = tangent({p.x + 0.5 * h * k2.x, p.y + 0.5 * h * k2.y});
    Point k4 = tangent({p.x + h * k3.x, p.y + h * k3.y});
    Point q{p.x + h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x), p.y + h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y)};
    for (int it = 0; it < 3; ++it) {
      if (!dom.contains(q, slack)) exit(q);
      double r = guarded([&] { return f.value(q) - c; });
      if (std::abs(r) <= tol) break;
      Grad g = gradient(web, q);
      double n2 = g.fx * g.fx + g.fy * g.fy;
      q = {q.x - r * g.fx / n2, q.y - r * g.fy / n2};
    }
    if (!dom.contains(q, slack)) exit(q);
    double r = guarded([&] { return f.value(q) - c; });
    if (std::abs(r) > tol)
      throw WebError(WebError::Kind::Derivative, "projection onto the level set failed near " + where(q));
    pts.push_back(q);
    p = q;
  }
  return pts;
}

// ------------------------------------------------------ additive recovery

namespace {

std::size_t locate(const std::vector<double>& t, double s) {
  const double span = t.back() - t.front();
  const double slack = 1e-12 * std::max(1.0, std::abs(span));
  if (t.size() < 2 || s < t.front() - slack || s > t.back() + slack)
    throw std::out_of_range("table lookup at " + std::to_string(s) + " outside [" + std::to_string(t.front()) +
                            ", " + std::to_string(t.back()) + "]");
  auto it = std::upper_bound(t.begin(), t.end(), s);
  std::size_t k = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
  return std::min(k, t.size() - 2);
}

}  // namespace

double Table::operator()(double s) const {
  std::size_t k = locate(t, s);
  double h = t[k + 1] - t[k];
  double u = (s - t[k]) / h;
  double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
  double h10 = u * (1 - u) * (1 - u);
  double h01 = u * u * (3 - 2 * u);
  double h11 = u * u * (u - 1);
  return h00 * v[k] + h10 * h * dv[k] + h01 * v[k + 1] + h11 * h * dv[k + 1];
}

double Table::derivative(double s) const {
  std::size_t k = locate(t, s);
  double h = t[k + 1] - t[k];
  double u = (s - t[k]) / h;
  double d00 = 6 * u * (u - 1) / h;
  double d10 = (1 - u) * (1 - 3 * u);
  double d01 = -d00;
  double d11 = u * (3 * u - 2);
  return d00 * v[k] + d10 * dv[k] + d01 * v[k + 1] + d11 * dv[k + 1];
}

bool Table::strictly_monotone() const {
  if (v.size() < 2) return false;
  bool up = v[1] > v[0];
  for (std::size_t k = 1; k < v.size(); ++k)
    if (up ? !(v[k] > v[k - 1]) : !(v[k] < v[k - 1])) return false;
  return true;
}

Table cumulative_table(const std::function<double(double)>& g, double lo, double hi, int n, double anchor) {
  Table tab;
  tab.t.resize(n);
  tab.v.resize(n);
  tab.dv.resize(n);
  std::vector<double> c(n, 0.0);
  for (int k = 0; k < n; ++k) {
    tab.t[k] = k == n - 1 ? hi : lo + (hi - lo) * k / (n - 1);
    tab.dv[k] = g(tab.t[k]);
    if (k > 0) c[k] = c[k - 1] + numerics::integrate(g, tab.t[k - 1], tab.t[k], 8);
  }
  std::size_t m = locate(tab.t, anchor);
  double at_anchor = c[m] + numerics::integrate(g, tab.t[m], anchor, 8);
  for (int k = 0; k < n; ++k) tab.v[k] = c[k] - at_anchor;
  return tab;
}

AdditiveRepresentation recover_additive(const Web3& web, Point anchor, const RecoverOptions& opt) {
  require_inside(web, anchor);
  if (opt.nx < 2 || opt.ny < 2) throw WebError(WebError::Kind::Domain, "recover_additive needs >= 2 table nodes");
  const ScalarField2D& f = web.f();
  double tol = opt.tol >= 0 ? opt.tol : (f.is_grid() ? 1e-3 : 1e-8);
  CurvatureReport sep = separability_test(web, 5, tol);
  if (sep.verdict != Verdict::Trivial)
    throw WebError(WebError::Kind::NonTrivial, "web is not trivial (max |(ln f_x/f_y)_xy| = " +
                                                   std::to_string(sep.max_abs_residual) + ", verdict " +
                                                   to_string(sep.verdict) + ")");
  const Rect& dom = web.domain();
  auto ratio = [&](double x, double y) {
    Grad g = gradient(web, {x, y});
    return g.fx / g.fy;
  };
  const double r_star = ratio(anchor.x, anchor.y);

  AdditiveRepresentation rep;
  rep.anchor = anchor;
  guarded([&] {
    rep.u1 = cumulative_table([&](double x) { return ratio(x, anchor.y) / r_star; }, dom.x.lo, dom.x.hi, opt.nx, anchor.x);
    rep.u2 = cumulative_table([&](double y) { return 1.0 / ratio(anchor.x, y); }, dom.y.lo, dom.y.hi, opt.ny, anchor.y);
    return 0;
  });

  // phi from the pairs (f(x, y*), U1(x) + U2(y*)), U2(y*) = 0.
  Table& phi = rep.phi;
  for (std::size_t k = 0; k < rep.u1.t.size(); ++k) {
    Point p{rep.u1.t[k], anchor.y};
    double fv = guarded([&] { return f.value(p); });
    double fx = gradient(web, p).fx;
    phi.t.push_back(fv);
    phi.v.push_back(rep.u1.v[k]);
    phi.dv.push_back(rep.u1.dv[k] / fx);
  }
  if (phi.t.size() >= 2 && phi.t.front() > phi.t.back()) {
    std::reverse(phi.t.begin(), phi.t.end());
    std::reverse(phi.v.begin(), phi.v.end());
    std::reverse(phi.dv.begin(), phi.dv.end());
  }
  for (std::size_t k = 1; k < phi.t.size(); ++k)
    if (!(phi.t[k] > phi.t[k - 1])) throw WebError(WebError::Kind::NotMonotone, "f is not monotone along y = y*");
  if (!rep.u1.strictly_monotone() || !rep.u2.strictly_monotone() || !phi.strictly_monotone())
    throw WebError(WebError::Kind::NotMonotone, "recovered tables are not strictly monotone");

  // Self-check: U1 + U2 is constant along traced level curves.
  double range = std::abs(rep.u1.v.back() - rep.u1.v.front()) + std::abs(rep.u2.v.back() - rep.u2.v.front());
  double diam = std::hypot(dom.x.width(), dom.y.width());
  double worst = 0.0;
  for (int k = 0; k < opt.leaves; ++k) {
    Point seed{anchor.x, dom.y.lo + dom.y.width() * (k + 0.5) / opt.leaves};
    std::vector<Point> leaf;
    for (double dir : {1.0, -1.0}) {
      try {
        auto pts = trace_level_curve(web, seed, dir * 2 * diam, diam / 256);
        leaf.insert(leaf.end(), pts.begin(), pts.end());
      } catch (const DomainExit& e) {
        leaf.insert(leaf.end(), e.partial().begin(), e.partial().end());
      }
    }
    double lo = INFINITY;
    double hi = -INFINITY;
    for (Point q : leaf) {
      double v = rep.u1(q.x) + rep.u2(q.y);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    worst = std::max(worst, hi - lo);
    ++rep.leaves_checked;
  }
  rep.leaf_spread = range > 0 ? worst / range : worst;
  return rep;
}

}  // namespace webaudit::web3
