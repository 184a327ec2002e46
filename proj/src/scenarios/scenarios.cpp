#include "webaudit/scenarios.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace webaudit::scenarios {

using expr::Expression;
using field::FieldError;
using field::ImplicitUnknown;
using field::Point;
using web2::Web2Error;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(ScenarioError::Kind k, const std::string& what) { throw ScenarioError(k, what); }

void require_vars(const Expression& e, const std::set<std::string>& allowed, const std::string& what) {
  for (const auto& v : expr::free_variables(e))
    if (!allowed.count(v)) fail(ScenarioError::Kind::Parameter, what + " uses '" + v + "'");
}

Expression parse_in(const std::string& text, std::vector<std::string> vars, const std::string& what) {
  try {
    return expr::parse(text, vars);
  } catch (const expr::ParseError& e) {
    fail(ScenarioError::Kind::Parameter, what + ": " + e.what());
  }
}

// Web construction failures in scenario terms.
template <class F>
auto build_web(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Web2Error& e) {
    switch (e.kind()) {
      case Web2Error::Kind::Transversality:
      case Web2Error::Kind::SignChange:
        fail(ScenarioError::Kind::Transversality, e.what());
      case Web2Error::Kind::NotMonotone:
      case Web2Error::Kind::NotBracketed:
        fail(ScenarioError::Kind::NotMonotone, e.what());
      default:
        fail(ScenarioError::Kind::Degenerate, e.what());
    }
  } catch (const FieldError& e) {
    if (e.kind() == FieldError::Kind::Chart) fail(ScenarioError::Kind::NotMonotone, e.what());
    fail(ScenarioError::Kind::Degenerate, e.what());
  }
}

// Lattice over r including its edges.
std::vector<Point> sweep(const Rect& r, int n) {
  std::vector<Point> pts;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      pts.push_back({r.x.lo + r.x.width() * i / (n - 1), r.y.lo + r.y.width() * j / (n - 1)});
  return pts;
}

constexpr int kSweep = 9;

}  // namespace

// ------------------------------------------------------------- profit models

HotellingWeb hotelling_demands(const ProfitModel& m) {
  require_vars(m.profit, {"p1", "p2"}, "profit function");
  const Rect& r = m.rectangle;
  if (!(r.x.lo < r.x.hi && r.y.lo < r.y.hi)) fail(ScenarioError::Kind::Parameter, "empty web rectangle");
  auto d = [](const Expression& e, const char* v) { return expr::simplify(expr::differentiate(e, v)); };
  Expression pi1 = d(m.profit, "p1");
  Expression pi2 = d(m.profit, "p2");
  Expression pi11 = d(pi1, "p1");
  Expression pi22 = d(pi2, "p2");
  Expression pi12 = d(pi1, "p2");
  if (pi12.is_constant(0.0))
    fail(ScenarioError::Kind::Transversality, "Pi_p1p2 vanishes identically; the demand families are not transverse");

  Expression q1 = Expression::variable("q1");
  Expression equation = expr::simplify(expr::fold::sub(expr::fold::neg(pi1), q1));
  Expression q2 = expr::simplify(expr::fold::neg(pi2));

  auto chart_for = [&](Interval b) {
    return ScalarField2D::closed_form(Expression::variable("p2"), "q1", "p1", r, {ImplicitUnknown{"p2", equation, b}});
  };
  // Solves p2 over the sweep; empty when the bracket misses a root.
  auto solve_sweep = [&](Interval b) -> std::optional<std::vector<double>> {
    auto f = chart_for(b);
    std::vector<double> out;
    for (const auto& p : sweep(r, kSweep)) {
      try {
        out.push_back(f.value(p));
      } catch (const FieldError& e) {
        if (e.not_monotone())
          fail(ScenarioError::Kind::NotMonotone, std::string("inversion for p2 is not monotone: ") + e.what());
        if (e.kind() != FieldError::Kind::Chart) fail(ScenarioError::Kind::NotMonotone, e.what());
        return std::nullopt;
      }
    }
    return out;
  };

  Interval bracket;
  std::optional<std::vector<double>> p2s;
  if (m.p2_bracket) {
    bracket = *m.p2_bracket;
    if (!(bracket.lo < bracket.hi)) fail(ScenarioError::Kind::Parameter, "empty p2 bracket");
    p2s = solve_sweep(bracket);
  } else {
    for (int k = 1; k <= 6 && !p2s; ++k) {
      double f = std::pow(4.0, k);
      bracket = r.y.lo > 0 ? Interval{r.y.lo / f, r.y.hi * f}
                           : Interval{r.y.mid() - f * r.y.width(), r.y.mid() + f * r.y.width()};
      p2s = solve_sweep(bracket);
    }
  }
  if (!p2s) fail(ScenarioError::Kind::NotMonotone, "no root of -Pi_p1 = q1 in the p2 bracket over the rectangle");

  ComparativeStatics st;
  st.min_dq1_dp2 = INFINITY;
  st.max_dq1_dp2 = -INFINITY;
  auto pts = sweep(r, kSweep);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    expr::Bindings env{{"p1", pts[k].y}, {"p2", (*p2s)[k]}};
    double h11, h22, h12;
    try {
      h11 = expr::evaluate(pi11, env);
      h22 = expr::evaluate(pi22, env);
      h12 = expr::evaluate(pi12, env);
    } catch (const expr::EvalError& e) {
      fail(ScenarioError::Kind::Parameter, std::string("second partials of Pi undefined: ") + e.what());
    }
    if (std::abs(h11 * h22 - h12 * h12) <= 1e-9 * (std::abs(h11 * h22) + h12 * h12))
      fail(ScenarioError::Kind::Degenerate, "Hessian of Pi is singular; the two demands are not independent");
    st.min_dq1_dp2 = std::min(st.min_dq1_dp2, -h12);
    st.max_dq1_dp2 = std::max(st.max_dq1_dp2, -h12);
  }
  if (st.min_dq1_dp2 <= 0 && st.max_dq1_dp2 >= 0)
    fail(ScenarioError::Kind::Transversality, "Pi_p1p2 vanishes or changes sign on the rectangle");
  st.direction = st.min_dq1_dp2 > 0 ? 1 : -1;

  ImplicitUnknown chart{"p2", equation, bracket};
  DemandWeb web = build_web([&] {
    return DemandWeb::map(ScalarField2D::closed_form(q2, "q1", "p1", r, {chart}),
                          ScalarField2D::closed_form(Expression::variable("p2"), "q1", "p1", r, {chart}), r);
  });
  return {std::move(web), st, bracket};
}

// ------------------------------------------------------------- 3-web fields

SeparableField separable_field(const Expression& u1, const Expression& u2, const Expression& psi, const Rect& domain) {
  require_vars(u1, {"x"}, "U1");
  require_vars(u2, {"y"}, "U2");
  require_vars(psi, {"t"}, "psi");
  if (!(domain.x.lo < domain.x.hi && domain.y.lo < domain.y.hi)) fail(ScenarioError::Kind::Parameter, "empty domain");
  Expression s = expr::fold::add(u1, u2);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& p : sweep(domain, 33)) {
    double v;
    try {
      v = expr::evaluate(s, {{"x", p.x}, {"y", p.y}});
    } catch (const expr::EvalError& e) {
      fail(ScenarioError::Kind::Parameter, std::string("U1 + U2 undefined on the domain: ") + e.what());
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) fail(ScenarioError::Kind::Parameter, "U1 + U2 is constant on the domain");
  const int n = 257;
  int sign = 0;
  double prev = 0;
  for (int k = 0; k < n; ++k) {
    double t = lo + (hi - lo) * k / (n - 1), v;
    try {
      v = expr::evaluate(psi, {{"t", t}});
    } catch (const expr::EvalError& e) {
      fail(ScenarioError::Kind::NotMonotone, std::string("psi undefined on the range of U1 + U2: ") + e.what());
    }
    if (k > 0) {
      int sg = v > prev ? 1 : v < prev ? -1 : 0;
      if (sg == 0 || (sign != 0 && sg != sign))
        fail(ScenarioError::Kind::NotMonotone, "psi is not strictly monotone on the range of U1 + U2");
      sign = sg;
    }
    prev = v;
  }
  Expression f = expr::simplify(expr::substitute(psi, {{"t", s}}));
  return {ScalarField2D::closed_form(f, "x", "y", domain), u1, u2, psi};
}

SeparableField random_separable(std::uint64_t seed, const Rect& domain) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double a, double b) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::round((a + (b - a) * u) * 1000) / 1000;
  };
  auto piece = [&](const std::string& v) {
    std::ostringstream os;
    switch (rng() % 3) {
      case 0:
        os << uniform(0.5, 2) << "*" << v;
        break;
      case 1:
        os << uniform(0.5, 2) << "*" << v << " + " << uniform(0.1, 1) << "*" << v << "^3";
        break;
      default:
        os << uniform(0.5, 2) << "*exp(" << uniform(0.3, 1.5) << "*" << v << ")";
    }
    return expr::parse(os.str());
  };
  Expression u1 = piece("x");
  Expression u2 = piece("y");
  static const char* kPsi[] = {"t", "exp(t)", "t^3 + t"};
  Expression psi = expr::parse(kPsi[rng() % 3]);
  return separable_field(u1, u2, psi, domain);
}

// ------------------------------------------------------------- perturbation

DemandWeb perturb(const DemandWeb& web, const Expression& bump, double size) {
  if (!(size >= 0) || !std::isfinite(size)) fail(ScenarioError::Kind::Parameter, "perturbation size must be >= 0");
  require_vars(bump, {"q1", "p1"}, "bump");
  if (size == 0) return web;
  Expression factor = expr::fold::add(Expression::constant(1.0), expr::fold::mul(Expression::constant(size), bump));
  const ScalarField2D& q2 = web.q2();
  ScalarField2D out = q2;
  if (q2.is_grid()) {
    field::GridData g = q2.grid_data();
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        try {
          g.values[static_cast<std::size_t>(j) * g.nx + i] *=
              expr::evaluate(factor, {{"q1", g.x_at(i)}, {"p1", g.y_at(j)}});
        } catch (const expr::EvalError& e) {
          fail(ScenarioError::Kind::Parameter, std::string("bump undefined on the grid: ") + e.what());
        }
      }
    out = ScalarField2D::grid(std::move(g), q2.interpolation_order());
  } else {
    Expression b = expr::substitute(factor, {{"q1", Expression::variable(q2.x_name())},
                                             {"p1", Expression::variable(q2.y_name())}});
    out = ScalarField2D::closed_form(expr::simplify(expr::fold::mul(q2.expression(), b)), q2.x_name(), q2.y_name(),
                                     q2.domain(), q2.chart());
  }
  return build_web([&] { return DemandWeb::map(out, web.p2(), web.domain(), web.floor()); });
}

// ------------------------------------------------------------- web files

namespace {

json interval_json(Interval i) { return json::array({i.lo, i.hi}); }

Interval interval_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(ScenarioError::Kind::Schema, what + " must be [lo, hi]");
  Interval i{j[0].get<double>(), j[1].get<double>()};
  if (!(i.lo < i.hi)) fail(ScenarioError::Kind::Schema, what + " must satisfy lo < hi");
  return i;
}

const json& member(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(ScenarioError::Kind::Schema, where + " lacks '" + key + "'");
  return j.at(key);
}

std::string string_member(const json& j, const std::string& key, const std::string& where) {
  const json& v = member(j, key, where);
  if (!v.is_string()) fail(ScenarioError::Kind::Schema, where + "." + key + " must be a string");
  return v.get<std::string>();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) fail(ScenarioError::Kind::Io, "cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ScenarioError::Kind::Io, "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json component_json(const ScalarField2D& f) {
  json chart = json::array();
  for (const auto& u : f.chart())
    chart.push_back({{"name", u.name}, {"equation", expr::to_string(u.equation)}, {"bracket", interval_json(u.bracket)}});
  return {{"expression", expr::to_string(f.expression())}, {"chart", chart}};
}

ScalarField2D component_from(const json& j, const std::string& what, const Rect& domain) {
  std::vector<ImplicitUnknown> chart;
  try {
    Expression e = expr::parse(string_member(j, "expression", what));
    if (j.contains("chart")) {
      const json& c = j.at("chart");
      if (!c.is_array()) fail(ScenarioError::Kind::Schema, what + ".chart must be an array");
      for (const auto& u : c)
        chart.push_back({string_member(u, "name", what + ".chart"),
                         expr::parse(string_member(u, "equation", what + ".chart")),
                         interval_from(member(u, "bracket", what + ".chart"), what + ".chart.bracket")});
    }
    return ScalarField2D::closed_form(e, "q1", "p1", domain, chart);
  } catch (const expr::ParseError& e) {
    fail(ScenarioError::Kind::Schema, what + ": " + e.what());
  } catch (const FieldError& e) {
    fail(ScenarioError::Kind::Schema, what + ": " + e.what());
  }
}

}  // namespace

void export_web(const DemandWeb& web, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ScenarioError::Kind::Io, "cannot create " + dir + ": " + ec.message());
  json m;
  m["schema"] = kWebSchema;
  m["version"] = kWebSchemaVersion;
  m["domain"] = {{"q1", interval_json(web.domain().x)}, {"p1", interval_json(web.domain().y)}};
  m["floor"] = web.floor();
  if (web.is_grid()) {
    m["representation"] = "grid";
    m["interpolation_order"] = web.q2().interpolation_order();
    m["q2"] = {{"file", "q2.csv"}};
    m["p2"] = {{"file", "p2.csv"}};
    write_text(fs::path(dir) / "q2.csv", field::grid_to_csv_text(web.q2().grid_data()));
    write_text(fs::path(dir) / "p2.csv", field::grid_to_csv_text(web.p2().grid_data()));
  } else {
    if (web.q2().x_name() != "q1" || web.q2().y_name() != "p1")
      fail(ScenarioError::Kind::Parameter, "closed-form webs must be expressed in q1, p1 to export");
    m["representation"] = "closed-form";
    m["q2"] = component_json(web.q2());
    m["p2"] = component_json(web.p2());
  }
  write_text(fs::path(dir) / "manifest.json", m.dump(2) + "\n");
}

DemandWeb import_web(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(ScenarioError::Kind::Io, "web directory " + dir + " does not exist");
  fs::path mpath = fs::path(dir) / "manifest.json";
  if (!fs::exists(mpath)) fail(ScenarioError::Kind::Io, "missing " + mpath.string());
  json m;
  try {
    m = json::parse(read_text(mpath));
  } catch (const json::parse_error& e) {
    fail(ScenarioError::Kind::Schema, "manifest is not valid JSON: " + std::string(e.what()));
  }
  if (string_member(m, "schema", "manifest") != kWebSchema) fail(ScenarioError::Kind::Schema, "unknown manifest schema");
  const json& version = member(m, "version", "manifest");
  if (!version.is_number_integer() || version.get<int>() != kWebSchemaVersion)
    fail(ScenarioError::Kind::Schema, "unsupported manifest version " + version.dump());
  const json& dom = member(m, "domain", "manifest");
  Rect domain{interval_from(member(dom, "q1", "domain"), "domain.q1"), interval_from(member(dom, "p1", "domain"), "domain.p1")};
  double floor = 1e-6;
  if (m.contains("floor")) {
    if (!m["floor"].is_number()) fail(ScenarioError::Kind::Schema, "floor must be a number");
    floor = m["floor"].get<double>();
  }
  std::string rep = string_member(m, "representation", "manifest");
  if (rep == "grid") {
    int order = 3;
    if (m.contains("interpolation_order")) {
      if (!m["interpolation_order"].is_number_integer()) fail(ScenarioError::Kind::Schema, "bad interpolation_order");
      order = m["interpolation_order"].get<int>();
    }
    auto load = [&](const char* c) {
      std::string file = string_member(member(m, c, "manifest"), "file", c);
      fs::path p = fs::path(dir) / file;
      if (!fs::exists(p)) fail(ScenarioError::Kind::Io, "missing " + p.string());
      try {
        return ScalarField2D::grid(field::grid_from_csv_text(read_text(p)), order);
      } catch (const FieldError& e) {
        fail(ScenarioError::Kind::Schema, p.string() + ": " + e.what());
      }
    };
    auto q2 = load("q2");
    auto p2 = load("p2");
    return DemandWeb::map(q2, p2, domain, floor);
  }
  if (rep != "closed-form") fail(ScenarioError::Kind::Schema, "unknown representation '" + rep + "'");
  auto q2 = component_from(member(m, "q2", "manifest"), "q2", domain);
  auto p2 = component_from(member(m, "p2", "manifest"), "p2", domain);
  return DemandWeb::map(q2, p2, domain, floor);
}

// ------------------------------------------------------------- scenario files

namespace {

const std::set<std::string> kWebKinds{"hotelling", "perturbed", "map-web"};
const std::set<std::string> kFieldKinds{"separable-utility", "nonseparable-utility"};

std::pair<std::string, std::string> axes_of(const std::string& kind) {
  return kWebKinds.count(kind) ? std::pair<std::string, std::string>{"q1", "p1"}
                               : std::pair<std::string, std::string>{"x", "y"};
}

void check_keys(const Scenario& s, const std::set<std::string>& required, const std::set<std::string>& optional) {
  for (const auto& k : required)
    if (!s.expressions.count(k))
      fail(ScenarioError::Kind::Parameter, "kind '" + s.kind + "' needs expressions." + k);
  for (const auto& [k, _] : s.expressions)
    if (!required.count(k) && !optional.count(k))
      fail(ScenarioError::Kind::Parameter, "kind '" + s.kind + "' does not take expressions." + k);
}

void validate(const Scenario& s) {
  if (!kWebKinds.count(s.kind) && !kFieldKinds.count(s.kind))
    fail(ScenarioError::Kind::Parameter, "unknown scenario kind '" + s.kind + "'");
  if (s.kind == "hotelling" || s.kind == "perturbed") check_keys(s, {"profit"}, {});
  if (s.kind == "map-web") check_keys(s, {"q2", "p2"}, {});
  if (s.kind == "nonseparable-utility") check_keys(s, {"f"}, {});
  if (s.kind == "separable-utility") {
    check_keys(s, {}, {"U1", "U2", "psi"});
    if (s.expressions.count("U1") != s.expressions.count("U2"))
      fail(ScenarioError::Kind::Parameter, "separable-utility needs both U1 and U2, or neither");
  }
  if (s.kind == "perturbed" && !s.perturbation)
    fail(ScenarioError::Kind::Parameter, "kind 'perturbed' needs a perturbation");
  if (s.perturbation && kFieldKinds.count(s.kind))
    fail(ScenarioError::Kind::Parameter, "kind '" + s.kind + "' does not take a perturbation");
  if (s.perturbation && !(s.perturbation->size >= 0))
    fail(ScenarioError::Kind::Parameter, "perturbation size must be >= 0");
  if (s.p2_bracket && s.kind == "map-web")
    fail(ScenarioError::Kind::Parameter, "kind 'map-web' does not take a p2 bracket");
  if (s.p2_bracket && kFieldKinds.count(s.kind))
    fail(ScenarioError::Kind::Parameter, "kind '" + s.kind + "' does not take a p2 bracket");
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ScenarioError::Kind::Schema, "scenario is not valid JSON: " + std::string(e.what()));
  }
  Scenario s;
  const json& v = member(j, "version", "scenario");
  if (!v.is_number_integer() || v.get<int>() != kScenarioVersion)
    fail(ScenarioError::Kind::Schema, "unsupported scenario version " + v.dump());
  s.version = v.get<int>();
  s.kind = string_member(j, "kind", "scenario");
  if (j.contains("expressions")) {
    const json& e = j["expressions"];
    if (!e.is_object()) fail(ScenarioError::Kind::Schema, "expressions must be an object");
    for (const auto& [k, val] : e.items()) {
      if (!val.is_string()) fail(ScenarioError::Kind::Schema, "expressions." + k + " must be a string");
      s.expressions[k] = val.get<std::string>();
    }
  }
  auto [ax, ay] = axes_of(s.kind);
  const json& r = member(j, "rectangle", "scenario");
  s.rectangle = {interval_from(member(r, ax, "rectangle"), "rectangle." + ax),
                 interval_from(member(r, ay, "rectangle"), "rectangle." + ay)};
  if (j.contains("perturbation") && !j["perturbation"].is_null()) {
    const json& p = j["perturbation"];
    const json& size = member(p, "size", "perturbation");
    if (!size.is_number()) fail(ScenarioError::Kind::Schema, "perturbation.size must be a number");
    s.perturbation = Perturbation{string_member(p, "bump", "perturbation"), size.get<double>()};
  }
  if (j.contains("p2_bracket")) s.p2_bracket = interval_from(j["p2_bracket"], "p2_bracket");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) fail(ScenarioError::Kind::Schema, "seed must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  if (!fs::is_regular_file(path)) fail(ScenarioError::Kind::Io, "cannot read scenario " + path);
  return scenario_from_json_text(read_text(path));
}

std::string scenario_to_json_text(const Scenario& s) {
  json j;
  j["version"] = s.version;
  j["kind"] = s.kind;
  j["expressions"] = json::object();
  for (const auto& [k, v] : s.expressions) j["expressions"][k] = v;
  auto [ax, ay] = axes_of(s.kind);
  j["rectangle"] = {{ax, interval_json(s.rectangle.x)}, {ay, interval_json(s.rectangle.y)}};
  if (s.perturbation) j["perturbation"] = {{"bump", s.perturbation->bump}, {"size", s.perturbation->size}};
  if (s.p2_bracket) j["p2_bracket"] = interval_json(*s.p2_bracket);
  j["seed"] = s.seed;
  return j.dump(2) + "\n";
}

Generated generate(const Scenario& s) {
  validate(s);
  Generated g;
  const auto& ex = s.expressions;
  if (s.kind == "hotelling" || s.kind == "perturbed") {
    ProfitModel m{parse_in(ex.at("profit"), {"p1", "p2"}, "profit"), s.rectangle, s.p2_bracket};
    auto h = hotelling_demands(m);
    g.web = std::move(h.web);
    g.statics = h.statics;
  } else if (s.kind == "map-web") {
    Expression q2 = parse_in(ex.at("q2"), {"q1", "p1"}, "q2");
    Expression p2 = parse_in(ex.at("p2"), {"q1", "p1"}, "p2");
    g.web = build_web([&] {
      return DemandWeb::map(ScalarField2D::closed_form(q2, "q1", "p1", s.rectangle),
                            ScalarField2D::closed_form(p2, "q1", "p1", s.rectangle), s.rectangle);
    });
  } else if (s.kind == "separable-utility") {
    if (ex.count("U1")) {
      Expression psi = ex.count("psi") ? parse_in(ex.at("psi"), {"t"}, "psi") : Expression::variable("t");
      g.separable = separable_field(parse_in(ex.at("U1"), {"x"}, "U1"), parse_in(ex.at("U2"), {"y"}, "U2"), psi,
                                    s.rectangle);
    } else {
      g.separable = random_separable(s.seed, s.rectangle);
    }
    g.field = g.separable->field;
  } else {
    g.field = ScalarField2D::closed_form(parse_in(ex.at("f"), {"x", "y"}, "f"), "x", "y", s.rectangle);
  }
  if (s.perturbation && g.web)
    g.web = perturb(*g.web, parse_in(s.perturbation->bump, {"q1", "p1"}, "bump"), s.perturbation->size);
  return g;
}

}  // namespace webaudit::scenarios
