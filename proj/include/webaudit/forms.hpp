#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "webaudit/expr.hpp"

namespace webaudit::forms {

class FormError : public std::runtime_error {
 public:
  enum class Kind { CoordinateMismatch, MissingCoordinate, UnknownCoordinate, Definition };
  FormError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Ordered, duplicate-free list of coordinate names.
class CoordinateSystem {
 public:
  explicit CoordinateSystem(std::vector<std::string> names);

  const std::vector<std::string>& names() const { return names_; }
  int dimension() const { return static_cast<int>(names_.size()); }
  /// Position of `name`; throws UnknownCoordinate.
  int index_of(const std::string& name) const;
  bool contains(const std::string& name) const;

  friend bool operator==(const CoordinateSystem& a, const CoordinateSystem& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
};

using Coordinates = std::shared_ptr<const CoordinateSystem>;
Coordinates coordinates(std::vector<std::string> names);

/// Indices into the coordinate list, strictly increasing.
using IndexTuple = std::vector<int>;

/// A k-form: sum of coefficient * dx_{i1} ^ ... ^ dx_{ik} over strictly
/// increasing tuples. Coefficients that simplify to the constant 0 are dropped.
class DifferentialForm {
 public:
  DifferentialForm(Coordinates coords, int degree);  // the zero k-form

  static DifferentialForm function(Coordinates coords, const expr::Expression& f);  // 0-form
  static DifferentialForm basis(Coordinates coords, const std::string& name);        // d name
  /// coefficient * dx_{names[0]} ^ ... ; names in any order, the sign is absorbed.
  static DifferentialForm monomial(Coordinates coords, const expr::Expression& coefficient,
                                   const std::vector<std::string>& names);

  const Coordinates& coords() const { return coords_; }
  int degree() const { return degree_; }
  const std::map<IndexTuple, expr::Expression>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  /// Coefficient of the tuple given by names (any order, sign applied); 0 when absent.
  expr::Expression coefficient(const std::vector<std::string>& names) const;

  DifferentialForm operator+(const DifferentialForm& other) const;
  DifferentialForm operator-(const DifferentialForm& other) const;
  DifferentialForm operator-() const;
  DifferentialForm scaled(const expr::Expression& factor) const;

 private:
  void add_term(IndexTuple tuple, const expr::Expression& c);

  Coordinates coords_;
  int degree_ = 0;
  std::map<IndexTuple, expr::Expression> terms_;
};

DifferentialForm wedge(const DifferentialForm& a, const DifferentialForm& b);
DifferentialForm exterior_derivative(const DifferentialForm& a);

/// Pull `a` back along base -> target, where `map` gives every target
/// coordinate as an expression in the base coordinates.
DifferentialForm pullback(const DifferentialForm& a, const std::map<std::string, expr::Expression>& map,
                          Coordinates base);

/// "dx^dy + 2 x dz" style text; "0" for the zero form.
std::string to_string(const DifferentialForm& a);

struct EqualityOptions {
  int points = 50;
  double lo = 0.5;
  double hi = 2.0;
  double tol = 1e-10;  // relative to max(1, term magnitude of lhs and rhs)
  std::uint64_t seed = 0x5eed;
};

struct EqualityCheck {
  bool equal = false;
  double max_deviation = 0.0;
  int evaluated = 0;  // points at which every coefficient was defined
};

/// Probabilistic equality: simplified coefficient differences evaluated at
/// random points of [lo, hi]^n.
EqualityCheck compare(const DifferentialForm& a, const DifferentialForm& b, const EqualityOptions& opt = {});
bool probably_equal(const DifferentialForm& a, const DifferentialForm& b, const EqualityOptions& opt = {});

struct IdentityCheck {
  std::string name;
  std::string lhs;
  std::string rhs;
  bool holds = false;
  double max_deviation = 0.0;
};

struct ContactChainReport {
  std::vector<std::string> coordinates;  // Pi, q1, p1, q2, p2
  std::string omega;
  std::vector<IdentityCheck> identities;
  int literal_triple_degree = 0;  // degree of d omega ^ d omega ^ d omega
  bool literal_triple_zero = false;
  bool omega_squared_zero = false;
  bool top_form_nonzero = false;
  bool all_hold() const;
};

/// The contact form dPi + q1 dp1 + q2 dp2 and its derived identities on (Pi, q1, p1, q2, p2).
ContactChainReport verify_contact_chain();

/// Coefficient of dq1^dp1 in the pullback of dq1^dp1 + dq2^dp2 to the graph
/// (q1, p1) -> (q2, p2); equal to det d(q2,p2)/d(q1,p1) + 1.
expr::Expression lagrangian_coefficient(const expr::Expression& q2, const expr::Expression& p2);

}  // namespace webaudit::forms
