#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "webaudit/field.hpp"

namespace webaudit::web3 {

using field::Point;
using field::Rect;
using field::ScalarField2D;

class WebError : public std::runtime_error {
 public:
  enum class Kind { Regularity, Domain, NotBracketed, NotMonotone, NonTrivial, Derivative };
  WebError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// A level curve left the domain; carries the vertices traced so far.
class DomainExit : public WebError {
 public:
  DomainExit(const std::string& what, std::vector<Point> partial)
      : WebError(Kind::Domain, what), partial_(std::move(partial)) {}
  const std::vector<Point>& partial() const { return partial_; }

 private:
  std::vector<Point> partial_;
};

/// How L_xy = (ln|f_x/f_y|)_xy is obtained.
/// Symbolic: the expanded formula on the field's own partials (exact
/// derivatives for closed forms, stencils for grids). Numeric: L is formed
/// from finite-difference first partials and differentiated again by a
/// mixed (1,1) Richardson stencil (on grids: L sampled at nodes, then
/// stencilled).
enum class Route { Auto, Symbolic, Numeric };

/// The 3-web of verticals, horizontals and level curves of f on a rectangle.
class Web3 {
 public:
  /// Sweeps an n x n lattice of the domain and rejects the web when
  /// min(|f_x|, |f_y|) falls below reg_floor or either sign changes.
  Web3(ScalarField2D f, std::optional<Rect> domain = std::nullopt, double reg_floor = 1e-8, int sweep = 33);

  const ScalarField2D& f() const { return f_; }
  const Rect& domain() const { return domain_; }
  double reg_floor() const { return reg_floor_; }
  /// Smallest min(|f_x|, |f_y|) seen by the construction sweep.
  double measured_floor() const { return measured_floor_; }
  Route resolve(Route r) const;

  /// Nodal samples of ln|f_x / f_y| for the numeric route on grids; built once.
  const ScalarField2D& log_ratio_grid() const;

  struct Cache;

 private:
  ScalarField2D f_;
  Rect domain_;
  double reg_floor_;
  double measured_floor_ = 0.0;
  std::shared_ptr<Cache> cache_;
};

/// (ln|f_x / f_y|)_{xy} at p.
double saint_robert_residual(const Web3& web, Point p, Route route = Route::Auto);

/// K = -(ln|f_x / f_y|)_{xy} / (f_x f_y).
double chern_curvature(const Web3& web, Point p, Route route = Route::Auto);

enum class Verdict { Trivial, NonTrivial, Inconclusive };
const char* to_string(Verdict v);

struct ProbeResult {
  Point p;
  std::optional<double> curvature;
  std::optional<double> residual;  // de Saint Robert
  std::string error;               // set when the probe failed
};

struct CurvatureReport {
  std::vector<ProbeResult> probes;  // row-major, n x n
  int n = 0;
  int failed = 0;
  double max_abs_curvature = 0.0;
  double max_abs_residual = 0.0;
  Point worst;  // probe of max |residual|
  double tolerance = 0.0;
  Route route = Route::Auto;
  Verdict verdict = Verdict::Inconclusive;
};

/// n x n probes at fractions (i+1)/(n+1) of the domain. Trivial iff
/// max |residual| <= tol; inconclusive when more than 10% of probes fail.
CurvatureReport separability_test(const Web3& web, int n, double tol, Route route = Route::Auto);

struct Polyline {
  std::string kind;  // "vertical", "horizontal", "level", "defect"
  std::vector<Point> points;
};

struct HexagonReport {
  double x0 = 0, y0 = 0, x1 = 0, x2 = 0;
  double y1 = 0, y2 = 0, y2_prime = 0;
  double gap = 0;  // y2' - y2
  bool vacuous = false;
  std::string note;
  std::vector<Polyline> polylines;
};

/// Solves y1: f(x0,y1) = f(x1,y0); y2: f(x1,y2) = f(x2,y1); y2': f(x0,y2') = f(x2,y0).
HexagonReport thomsen_closure_gap(const Web3& web, double x0, double y0, double x1, double x2);

/// RK4 along the unit tangent (f_y, -f_x)/|grad f| for arc length |span|
/// (negative span runs the other way) with Newton projection onto the level
/// set after each step. Throws DomainExit with the partial polyline.
std::vector<Point> trace_level_curve(const Web3& web, Point seed, double span, double step);

/// Monotone table with derivatives; evaluated by cubic Hermite interpolation.
struct Table {
  std::vector<double> t;
  std::vector<double> v;
  std::vector<double> dv;
  double operator()(double s) const;
  double derivative(double s) const;
  bool strictly_monotone() const;
};

/// Table of the running integral of g over n uniform nodes of [lo, hi],
/// zero at `anchor`, with dv = g at the nodes (8-point Gauss-Legendre per cell).
Table cumulative_table(const std::function<double(double)>& g, double lo, double hi, int n, double anchor);

struct AdditiveRepresentation {
  Point anchor;
  Table u1;   // over x
  Table u2;   // over y
  Table phi;  // over f values along y = y*
  int leaves_checked = 0;
  double leaf_spread = 0.0;  // max variation of U1+U2 along traced leaves / range of U1+U2
};

struct RecoverOptions {
  int nx = 65;
  int ny = 65;
  int leaves = 10;
  double tol = -1.0;  // separability tolerance; < 0 picks 1e-8 (closed form) or 1e-3 (grid)
};

/// phi(f) = U1(x) + U2(y) in the gauge U1(x*) = U2(y*) = 0, U1'(x*) = 1.
AdditiveRepresentation recover_additive(const Web3& web, Point anchor, const RecoverOptions& opt = {});

}  // namespace webaudit::web3
