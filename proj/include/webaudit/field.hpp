#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "webaudit/expr.hpp"

namespace webaudit::field {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
};

struct Rect {
  Interval x;
  Interval y;
  bool contains(Point p, double slack = 0.0) const { return x.contains(p.x, slack) && y.contains(p.y, slack); }
  /// Probe (i, j) of an n x n family at fractions (i+1)/(n+1); i, j in [0, n).
  Point probe(int i, int j, int n) const;
};

struct Order {
  int i = 0;  // derivative count in x
  int j = 0;  // derivative count in y
  int total() const { return i + j; }
};

struct DiffConfig {
  double hx = 0.0;  // 0 selects eps^(1/(2*levels+k)) * max(1, |x|)
  double hy = 0.0;
  int levels = 2;  // Richardson levels; error order 2*levels
  double rel_tol = 1e-8;
};

class FieldError : public std::runtime_error {
 public:
  enum class Kind { OutOfDomain, OrderTooHigh, NonFinite, Evaluation, Format, Chart, Definition };
  FieldError(Kind kind, const std::string& what, bool not_monotone = false)
      : std::runtime_error(what), kind_(kind), not_monotone_(not_monotone) {}
  Kind kind() const { return kind_; }
  /// Chart errors: the root solve failed its monotonicity check (as opposed to bracketing).
  bool not_monotone() const { return not_monotone_; }

 private:
  Kind kind_;
  bool not_monotone_;
};

/// Auxiliary unknown u defined implicitly by equation(x, y, u) = 0, with a
/// unique root in `bracket` (the equation is strictly monotone in u there).
struct ImplicitUnknown {
  std::string name;
  expr::Expression equation;
  Interval bracket;
};

/// Uniform lattice; node (i, j) sits at (x0 + i*hx, y0 + j*hy).
struct GridGeometry {
  double x0 = 0.0;
  double y0 = 0.0;
  double hx = 1.0;
  double hy = 1.0;
  int nx = 0;
  int ny = 0;

  double x_at(int i) const { return x0 + i * hx; }
  double y_at(int j) const { return y0 + j * hy; }
  Rect extent() const { return {{x0, x_at(nx - 1)}, {y0, y_at(ny - 1)}}; }
};

struct GridData : GridGeometry {
  std::vector<double> values;  // row-major, row index j advances y
  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
};

/// Bivariate function with partial derivatives up to total order 4.
///
/// Closed-form fields are symbolic: partial() differentiates the expression
/// (through any implicit chart) and evaluates. Grid fields use compact
/// central stencils at nodes with Richardson over step doubling; off-node
/// derivatives interpolate the node derivatives (cubic by default).
/// Values are immutable and cheap to copy.
class ScalarField2D {
 public:
  static constexpr int kMaxOrder = 4;

  static ScalarField2D closed_form(expr::Expression e, std::string x = "x", std::string y = "y",
                                   std::optional<Rect> domain = std::nullopt, std::vector<ImplicitUnknown> chart = {});
  static ScalarField2D grid(GridData data, int interpolation_order = 3);

  bool is_grid() const;
  const std::string& x_name() const;
  const std::string& y_name() const;

  /// Closed-form only.
  const expr::Expression& expression() const;
  const std::vector<ImplicitUnknown>& chart() const;
  /// Symbolic partial in the variables (x, y, chart unknowns).
  const expr::Expression& partial_expression(Order o) const;
  /// Values of the chart unknowns at p, in chart order.
  std::vector<double> chart_values(Point p) const;

  /// Grid only.
  const GridData& grid_data() const;
  int interpolation_order() const;

  /// Declared domain (closed form; unbounded if none was given) or grid extent.
  std::optional<Rect> domain() const;
  /// Where partials of order o can be taken: the grid extent inset by the
  /// stencil and interpolation reach; the domain for closed forms.
  std::optional<Rect> valid_region(Order o) const;

  double value(Point p) const;
  double partial(Order o, Point p, const DiffConfig& cfg = {}) const;
  /// Richardson central differences of value(); the route used to cross-check partial().
  double partial_numeric(Order o, Point p, const DiffConfig& cfg = {}) const;

  /// Same field in rescaled coordinates: g(X, Y) = f(X / sx, Y / sy).
  ScalarField2D rescaled(double sx, double sy) const;

  struct Impl;

 private:
  explicit ScalarField2D(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

/// Richardson-extrapolated tensor-product central difference of f at p.
double richardson_partial(const std::function<double(double, double)>& f, Order o, Point p, double hx, double hy,
                          int levels);

/// Default step for a total-order-k derivative at coordinate c.
double default_step(int k, int levels, double c);

/// Node derivative of a lattice function by compact stencils, Richardson over
/// `levels` step doublings. Caller guarantees the stencil reach stays on-grid.
double node_partial(const std::function<double(int, int)>& v, int i, int j, Order o, double hx, double hy, int levels);

/// Nodes needed on each side of a node for an order-k stencil with `levels`.
int stencil_reach(int k, int levels);

/// Grid of fn(i, j) over the nodes of `g` at least `margin` nodes from the edge.
GridData derived_grid(const GridGeometry& g, int margin, const std::function<double(int, int)>& fn);

GridData grid_from_csv(const std::string& path);
GridData grid_from_csv_text(const std::string& text);
std::string grid_to_csv_text(const GridData& g);
void grid_to_csv(const GridData& g, const std::string& path);

/// Samples a field on an n x n lattice spanning rect (corners included).
GridData sample_to_grid(const ScalarField2D& field, const Rect& rect, int n);

}  // namespace webaudit::field
