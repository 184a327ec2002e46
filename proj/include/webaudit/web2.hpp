#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "webaudit/field.hpp"
#include "webaudit/web3.hpp"

namespace webaudit::web2 {

using field::Interval;
using field::Point;  // x = q1, y = p1 throughout
using field::Rect;
using field::ScalarField2D;

class Web2Error : public std::runtime_error {
 public:
  enum class Kind { Domain, NotBracketed, NotMonotone, Transversality, Degenerate, SignChange, Geometry, Precondition,
                    Derivative };
  Web2Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// The constrained factor-demand web: the induced map (q1, p1) -> (q2, p2)
/// whose level sets p2 = const and q2 = const are the two demand families.
class DemandWeb {
 public:
  enum class Source { Families, Map };

  /// Families q1 = f1(p1; p2) and q1 = f2(p1; q2), inverted for p2 and q2
  /// inside the given brackets.
  static DemandWeb families(const expr::Expression& f1, const expr::Expression& f2, Rect domain,
                            Interval p2_bracket, Interval q2_bracket, double floor = 1e-6);
  /// The induced map given directly. Fields are over (q1, p1); both closed
  /// form (charts are merged by unknown name) or both grids of one geometry.
  /// Grid webs default to the region where the density's (1,1) partial exists.
  static DemandWeb map(ScalarField2D q2, ScalarField2D p2, std::optional<Rect> domain = std::nullopt,
                       double floor = 1e-6);

  Source source() const { return source_; }
  bool is_grid() const { return q2_.is_grid(); }
  const ScalarField2D& q2() const { return q2_; }
  const ScalarField2D& p2() const { return p2_; }
  /// a = det d(q2, p2)/d(q1, p1) as a field (symbolic through the chart, or a nodal grid).
  const ScalarField2D& density() const { return a_; }
  /// |a| as a field; sign constancy is checked at construction.
  const ScalarField2D& abs_density() const { return abs_a_; }
  const Rect& domain() const { return domain_; }
  double floor() const { return floor_; }
  int orientation() const { return sign_; }  // sign of a on the domain
  /// Smallest |sin| of the angle between grad q2 and grad p2 seen by the sweep.
  double measured_transversality() const { return measured_; }

  /// (q2, p2) at p, solving any chart once for both components.
  Point map_values(Point p) const;

  /// Same web in coordinates (Q, P) = (lambda q1, p1 / lambda).
  DemandWeb rescaled(double lambda) const;

  /// Closed-form family expressions when built by families(); empty otherwise.
  const std::optional<expr::Expression>& f1() const { return f1_; }
  const std::optional<expr::Expression>& f2() const { return f2_; }

 private:
  DemandWeb(ScalarField2D q2, ScalarField2D p2) : q2_(std::move(q2)), p2_(std::move(p2)), a_(q2_), abs_a_(q2_) {}
  void finish(std::optional<Rect> domain);

  Source source_ = Source::Map;
  ScalarField2D q2_;
  ScalarField2D p2_;
  ScalarField2D a_;
  ScalarField2D abs_a_;
  Rect domain_;
  double floor_ = 1e-6;
  int sign_ = 0;
  double measured_ = 0.0;
  std::optional<expr::Expression> f1_;
  std::optional<expr::Expression> f2_;
  struct Compiled {
    expr::Program q2;
    expr::Program p2;
  };
  std::shared_ptr<const Compiled> compiled_;  // closed form only
};

struct InducedMapSample {
  Point at;  // (q1, p1)
  double q2 = 0;
  double p2 = 0;
  double jacobian[2][2] = {{0, 0}, {0, 0}};  // rows (q2, p2), columns (q1, p1)
  double det = 0;
};

InducedMapSample induced_map(const DemandWeb& web, Point p);

/// det + 1; zero exactly when the graph is Lagrangian at p.
double lagrangian_residual(const DemandWeb& web, Point p);
double jacobian_density(const DemandWeb& web, Point p);
/// (ln|a|)_{q1 p1}.
double samuelson_residual(const DemandWeb& web, Point p);

struct TaylorResidual {
  double direct = 0;         // a a_{q1p1} - a_{q1} a_{p1}
  double reconstructed = 0;  // S_{qp} S_{qqpp} - S_{qqp} S_{qpp}, S double integral of a about p
};
TaylorResidual taylor_identity_residual(const DemandWeb& web, Point p);

/// Area in the (q1, p1) plane of the cell bounded by the leaves p2 = p2_leaves[0..1]
/// and q2 = q2_leaves[0..1]; positive.
double quadrilateral_area(const DemandWeb& web, Interval p2_leaves, Interval q2_leaves);

/// Signed area of the image of the coordinate rectangle spanned by (eps, delta) at p.
double cell_image_area(const DemandWeb& web, Point p, double eps, double delta);

/// |A(e,d) A(-e,-d) / (A(e,-d) A(-e,d)) - 1|.
double area_ratio_check(const DemandWeb& web, Point base, double eps, double delta);

struct FactorOptions {
  int nq = 65;
  int np = 65;
  double tol = -1.0;  // S tolerance; < 0 picks the default for the web kind
};

struct Factorization {
  Point anchor;
  web3::Table f;  // over q1
  web3::Table g;  // over p1
  double max_error = 0.0;  // max |f g - |a|| / max |a| over the table lattice
};

Factorization factor_density(const DemandWeb& web, Point anchor, const FactorOptions& opt = {});

struct Rectification {
  Factorization factors;
  web3::Table F;  // Q = F(q1), F' = f
  web3::Table G;  // P = G(p1), G' = g
  std::vector<Point> probes;
  std::vector<double> rectified_det;  // |a| / (F' G') at the probes
  double max_det_deviation = 0.0;
};

Rectification rectify(const DemandWeb& web, Point anchor, const FactorOptions& opt = {});

/// Thomsen gap on the 3-web of verticals, horizontals and level curves of |a|.
web3::HexagonReport hexagon_on_density(const DemandWeb& web, double x0, double y0, double x1, double x2);

// ------------------------------------------------------------- audit

enum class Outcome { Pass, Fail, Vacuous, Inconclusive };
const char* to_string(Outcome o);

struct Tolerances {
  double lagrangian = -1.0;  // < 0: 1e-6 closed form, 1e-4 grid
  double samuelson = -1.0;  // < 0: 1e-6 closed form, 1e-3 grid
  double taylor = -1.0;     // < 0: same as samuelson
  double area_ratio = 1e-5;
  double hexagon = -1.0;    // gap / domain height; < 0: 1e-8 closed form, 1e-5 grid
};

/// Tolerances with every automatic entry resolved for `web`.
Tolerances resolve(const Tolerances& t, const DemandWeb& web);

struct AuditOptions {
  int n = 5;
  double eps = 0.05;  // area-ratio cell offsets
  double delta = 0.05;
  int hexagon_family = 3;  // k x k base quadruples
  Tolerances tol;
};

struct Residual {
  Point p;
  std::optional<double> value;
  std::string error;
};

struct TestResult {
  std::string name;
  std::vector<Residual> residuals;
  double tolerance = 0;
  double max_abs = 0;
  Point worst;
  int failed = 0;
  Outcome outcome = Outcome::Inconclusive;
  std::string note;
};

struct IntegrabilityReport {
  int n = 0;
  Tolerances tolerances;
  std::vector<TestResult> tests;  // lagrangian, samuelson, taylor, area_ratio, hexagon_on_density
  std::vector<std::string> inconsistencies;
  const TestResult& test(const std::string& name) const;
};

IntegrabilityReport audit(const DemandWeb& web, const AuditOptions& opt = {});

}  // namespace webaudit::web2
