#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "webaudit/field.hpp"
#include "webaudit/web2.hpp"

namespace webaudit::scenarios {

using field::Interval;
using field::Rect;
using field::ScalarField2D;
using web2::DemandWeb;

class ScenarioError : public std::runtime_error {
 public:
  enum class Kind { Transversality, Degenerate, NotMonotone, Parameter, Schema, Io };
  ScenarioError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// ------------------------------------------------------------- profit models

struct ProfitModel {
  expr::Expression profit;  // in p1, p2
  Rect rectangle;           // web domain, x = q1, y = p1
  std::optional<Interval> p2_bracket;  // chosen from the p1 range when absent
};

/// Sign of dq1/dp2 = -Pi_{p1p2} over the web domain. Positive shifts each
/// demand curve q1(p1) to the right as p2 rises.
struct ComparativeStatics {
  double min_dq1_dp2 = 0.0;
  double max_dq1_dp2 = 0.0;
  int direction = 0;  // +1 right, -1 left, 0 mixed
};

struct HotellingWeb {
  DemandWeb web;
  ComparativeStatics statics;
  Interval p2_bracket;
};

/// q1 = -Pi_{p1}, q2 = -Pi_{p2}, with p2 recovered from the first equation
/// by a monotone root solve over (q1, p1).
HotellingWeb hotelling_demands(const ProfitModel& m);

// ------------------------------------------------------------- 3-web fields

struct SeparableField {
  ScalarField2D field;   // psi(U1(x) + U2(y))
  expr::Expression u1;   // in x
  expr::Expression u2;   // in y
  expr::Expression psi;  // in t
};

/// psi(U1 + U2) on `domain`; psi must be strictly monotone on the sampled range of U1 + U2.
SeparableField separable_field(const expr::Expression& u1, const expr::Expression& u2, const expr::Expression& psi,
                               const Rect& domain);

/// Separable field whose pieces are drawn from a fixed monotone family using `seed`.
SeparableField random_separable(std::uint64_t seed, const Rect& domain);

// ------------------------------------------------------------- perturbation

/// q2 multiplied by (1 + size * bump), bump in (q1, p1).
DemandWeb perturb(const DemandWeb& web, const expr::Expression& bump, double size);

// ------------------------------------------------------------- web files

inline constexpr const char* kWebSchema = "webaudit.web";
inline constexpr int kWebSchemaVersion = 1;

/// Writes dir/manifest.json plus dir/q2.csv and dir/p2.csv for grid webs.
void export_web(const DemandWeb& web, const std::string& dir);
DemandWeb import_web(const std::string& dir);

// ------------------------------------------------------------- scenario files

struct Perturbation {
  std::string bump;
  double size = 0.0;
};

/// kinds: hotelling, perturbed, map-web, separable-utility, nonseparable-utility.
/// Web kinds read rectangle {q1, p1}; utility kinds read rectangle {x, y}.
struct Scenario {
  int version = 1;
  std::string kind;
  std::map<std::string, std::string> expressions;
  Rect rectangle;
  std::optional<Perturbation> perturbation;
  std::optional<Interval> p2_bracket;
  std::uint64_t seed = 0;
};

inline constexpr int kScenarioVersion = 1;

Scenario scenario_from_json_text(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json_text(const Scenario& s);

struct Generated {
  std::optional<DemandWeb> web;  // web kinds
  std::optional<ComparativeStatics> statics;  // hotelling and perturbed
  std::optional<ScalarField2D> field;  // utility kinds
  std::optional<SeparableField> separable;  // separable-utility
};

/// Validates parameters against the kind and builds the web or field.
Generated generate(const Scenario& s);

}  // namespace webaudit::scenarios
