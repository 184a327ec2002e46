#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include "report.hpp"
#include "svg.hpp"
#include "webaudit/expr.hpp"
#include "webaudit/field.hpp"
#include "webaudit/forms.hpp"
#include "webaudit/scenarios.hpp"
#include "webaudit/web2.hpp"
#include "webaudit/web3.hpp"

#ifndef WEBAUDIT_VERSION
#define WEBAUDIT_VERSION "0.0.0"
#endif

namespace webaudit::cli {

namespace fs = std::filesystem;
using field::Interval;
using field::ScalarField2D;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const Rect kDefaultDomain{{0.5, 1.5}, {0.5, 1.5}};

// ------------------------------------------------------------ shared state

struct Options {
  std::string out;
  std::string svg;
  bool full = false;

  std::string f, grid, scenario, web, spec, tables, route = "auto", tol_set = "default";
  std::vector<double> domain, base, anchor;
  std::vector<std::string> tol_overrides;
  double tol = -1;
  int n = 5, nq = 65, np = 65, leaves = 10;
  double eps = 0.05, delta = 0.05;
};

struct Context {
  Json tests = Json::array();
  Json details = Json::object();
  std::string digest_input;
  std::string svg_text;
  std::string report_path;  // overrides Options::out
};

Rect rect_of(const std::vector<double>& v, const char* what) {
  if (v.size() != 4) throw UsageError(std::string(what) + " needs four numbers xlo,xhi,ylo,yhi");
  Rect r{{v[0], v[1]}, {v[2], v[3]}};
  if (!(r.x.lo < r.x.hi && r.y.lo < r.y.hi)) throw UsageError(std::string(what) + " must satisfy lo < hi on both axes");
  return r;
}

Json rect_json(const Rect& r, const char* xname, const char* yname) {
  return {{xname, {r.x.lo, r.x.hi}}, {yname, {r.y.lo, r.y.hi}}};
}

Json point_json(Point p, const char* xname, const char* yname) { return {{xname, p.x}, {yname, p.y}}; }

Json table_json(const web3::Table& t) {
  Json out;
  out["t"] = t.t;
  out["v"] = t.v;
  out["dv"] = t.dv;
  return out;
}

void write_table_csv(const web3::Table& t, const fs::path& path) {
  std::string text = "t,v,dv\n";
  char buf[96];
  for (std::size_t k = 0; k < t.t.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t.t[k], t.v[k], t.dv[k]);
    text += buf;
  }
  write_atomic(path.string(), text);
}

Json test_json(const std::string& name, const std::vector<Sample>& samples, double tolerance, const std::string& verdict,
               bool full, const char* xname, const char* yname) {
  Json t;
  t["name"] = name;
  if (full) t["residuals"] = residual_array(samples, xname, yname);
  t["summary"] = summarize(samples, xname, yname);
  t["tolerance"] = number(tolerance);
  t["verdict"] = verdict;
  return t;
}

std::string echo(const std::vector<std::string>& args) {
  std::string out;
  for (const auto& a : args) {
    if (!out.empty()) out += ' ';
    bool plain = !a.empty() && std::all_of(a.begin(), a.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("-_.,/=:+").find(c) != std::string_view::npos;
    });
    out += plain ? a : "'" + a + "'";
  }
  return out;
}

// ------------------------------------------------------------ inputs

expr::Expression parse_f(const std::string& text) { return expr::parse(text, std::vector<std::string>{"x", "y"}); }

struct LoadedWeb {
  std::optional<web2::DemandWeb> web;
  Json origin;
  std::optional<scenarios::ComparativeStatics> statics;
};

LoadedWeb load_web(const Options& o, Context& ctx) {
  if (o.scenario.empty() == o.web.empty()) throw UsageError("give exactly one of --scenario and --web");
  LoadedWeb out;
  if (!o.scenario.empty()) {
    if (!fs::is_regular_file(o.scenario))
      throw scenarios::ScenarioError(scenarios::ScenarioError::Kind::Io, "cannot read scenario " + o.scenario);
    std::string text = read_file(o.scenario);
    ctx.digest_input += text;
    auto s = scenarios::scenario_from_json_text(text);
    auto g = scenarios::generate(s);
    if (!g.web) throw UsageError("scenario kind '" + s.kind + "' does not define a demand web");
    out.web = std::move(g.web);
    out.statics = g.statics;
    out.origin = {{"scenario", o.scenario}, {"kind", s.kind}, {"seed", s.seed}};
    out.origin["expressions"] = Json(s.expressions);
    if (s.perturbation) out.origin["perturbation"] = {{"bump", s.perturbation->bump}, {"size", s.perturbation->size}};
  } else {
    if (!fs::is_directory(o.web))
      throw scenarios::ScenarioError(scenarios::ScenarioError::Kind::Io, "web directory " + o.web + " does not exist");
    std::vector<fs::path> files;
    // the web's own data only; a generate run also leaves its report here
    for (const auto& e : fs::directory_iterator(o.web))
      if (e.is_regular_file() && (e.path().filename() == "manifest.json" || e.path().extension() == ".csv"))
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) ctx.digest_input += f.filename().string() + "\n" + read_file(f.string());
    out.web = scenarios::import_web(o.web);
    out.origin = {{"web", o.web}};
  }
  return out;
}

Json web_json(const web2::DemandWeb& w) {
  Json j;
  j["source"] = w.source() == web2::DemandWeb::Source::Families ? "families" : "map";
  j["representation"] = w.is_grid() ? "grid" : "closed-form";
  j["domain"] = rect_json(w.domain(), "q1", "p1");
  j["orientation"] = w.orientation();
  j["transversality"] = number(w.measured_transversality());
  j["floor"] = w.floor();
  return j;
}

// ------------------------------------------------------------ figures

std::vector<double> levels_of(const std::vector<double>& v, int count) {
  double lo = INFINITY, hi = -INFINITY;
  for (double x : v)
    if (std::isfinite(x)) lo = std::min(lo, x), hi = std::max(hi, x);
  std::vector<double> out;
  if (!(hi > lo)) return out;
  for (int k = 1; k <= count; ++k) out.push_back(lo + (hi - lo) * k / (count + 1));
  return out;
}

void level_panel(Svg& svg, const Frame& fr, const std::function<double(Point)>& g, const std::string& family,
                 const std::string& stroke, int lattice = 49) {
  // sample once, contour from the cache
  std::vector<double> cache;
  std::map<std::pair<int, int>, double> idx;
  const Rect& r = fr.data;
  auto key = [&](Point p) {
    return std::pair<int, int>{static_cast<int>(std::lround((p.x - r.x.lo) / r.x.width() * (lattice - 1))),
                               static_cast<int>(std::lround((p.y - r.y.lo) / r.y.width() * (lattice - 1)))};
  };
  for (int j = 0; j < lattice; ++j)
    for (int i = 0; i < lattice; ++i) {
      Point p{r.x.lo + r.x.width() * i / (lattice - 1), r.y.lo + r.y.width() * j / (lattice - 1)};
      double v;
      try {
        v = g(p);
      } catch (const std::exception&) {
        v = NAN;
      }
      idx[key(p)] = v;
      cache.push_back(v);
    }
  auto lookup = [&](Point p) { return idx.at(key(p)); };
  for (double level : levels_of(cache, 9)) {
    char buf[48];
    std::snprintf(buf, sizeof buf, " data-family=\"%s\" data-level=\"%.6g\"", family.c_str(), level);
    svg.segments(fr, contour(lookup, r, lattice, level), "leaf", stroke, buf);
  }
}

double heat_of(const Sample& s, double tol) {
  if (!s.value) return 3.0;
  double a = std::abs(*s.value);
  if (tol <= 0) return a == 0 ? -3.0 : 3.0;
  return a == 0 ? -3.0 : std::log10(a / tol);
}

void heat_panel(Svg& svg, const Frame& fr, const std::vector<Sample>& samples, double tol, int n,
                const std::string& name) {
  double w = fr.data.x.width() / (n + 1), h = fr.data.y.width() / (n + 1);
  bool lattice = static_cast<int>(samples.size()) == n * n;
  for (const auto& s : samples) {
    char title[160];
    if (s.value)
      std::snprintf(title, sizeof title, "%s at (%.4g, %.4g): %.3e", name.c_str(), s.x, s.y, *s.value);
    else
      std::snprintf(title, sizeof title, "%s at (%.4g, %.4g): %s", name.c_str(), s.x, s.y, s.error.c_str());
    if (lattice)
      svg.probe_cell(fr, {s.x, s.y}, w, h, heat_colour(heat_of(s, tol)), title);
    else
      svg.probe_dot(fr, {s.x, s.y}, heat_colour(heat_of(s, tol)), title);
  }
}

// ------------------------------------------------------------ commands

int cmd_separability(const Options& o, Context& ctx) {
  if (o.f.empty() == o.grid.empty()) throw UsageError("give exactly one of --f and --grid");
  std::optional<Rect> domain;
  if (!o.domain.empty()) domain = rect_of(o.domain, "--domain");
  std::optional<ScalarField2D> field;
  if (!o.f.empty()) {
    ctx.digest_input += "f=" + o.f;
    if (!domain) domain = kDefaultDomain;
    field = ScalarField2D::closed_form(parse_f(o.f), "x", "y", domain);
  } else {
    std::string text = read_file(o.grid);
    ctx.digest_input += text;
    field = ScalarField2D::grid(field::grid_from_csv_text(text));
  }
  web3::Route route = o.route == "symbolic" ? web3::Route::Symbolic
                      : o.route == "numeric" ? web3::Route::Numeric
                                             : web3::Route::Auto;
  double tol = o.tol >= 0 ? o.tol : field->is_grid() ? 1e-3 : 1e-8;
  if (o.n < 3) throw UsageError("--n must be at least 3");
  web3::Web3 web(*field, domain);
  auto rep = web3::separability_test(web, o.n, tol, route);

  std::vector<Sample> residuals, curvature;
  for (const auto& p : rep.probes) {
    residuals.push_back({p.p.x, p.p.y, p.residual, p.error});
    curvature.push_back({p.p.x, p.p.y, p.curvature, p.error});
  }
  Json t = test_json("saint_robert_residual", residuals, tol, web3::to_string(rep.verdict), o.full, "x", "y");
  t["curvature"] = summarize(curvature, "x", "y");
  if (o.full) t["curvature_values"] = residual_array(curvature, "x", "y");
  ctx.tests.push_back(t);

  ctx.details["input"] = field->is_grid() ? "grid" : "closed-form";
  if (!o.f.empty()) ctx.details["f"] = o.f;
  ctx.details["domain"] = rect_json(web.domain(), "x", "y");
  ctx.details["n"] = o.n;
  ctx.details["route"] = web.resolve(rep.route) == web3::Route::Symbolic ? "symbolic" : "numeric";
  ctx.details["min_abs_gradient"] = number(web.measured_floor());
  ctx.details["max_abs_curvature"] = number(rep.max_abs_curvature);
  ctx.details["max_abs_residual"] = number(rep.max_abs_residual);

  if (!o.svg.empty()) {
    Svg svg(700, 360, "separability: " + (o.f.empty() ? o.grid : o.f));
    Frame left{web.domain(), 60, 40, 260, 260}, right{web.domain(), 400, 40, 260, 260};
    svg.frame(left, "level curves", "x", "y");
    svg.frame(right, "Chern curvature", "x", "y");
    level_panel(svg, left, [&](Point p) { return field->value(p); }, "f", "#1b7837");
    double kmax = std::max(rep.max_abs_curvature, 1e-300);
    heat_panel(svg, right, curvature, std::max(tol, kmax / 1000), o.n, "K");
    ctx.svg_text = svg.str();
  }
  return rep.verdict == web3::Verdict::Inconclusive ? kInconclusive : kDefinitive;
}

int cmd_hexagon(const Options& o, Context& ctx) {
  if (o.f.empty()) throw UsageError("--f is required");
  if (o.base.size() != 4) throw UsageError("--base needs four numbers x0,y0,x1,x2");
  const double x0 = o.base[0], y0 = o.base[1], x1 = o.base[2], x2 = o.base[3];
  ctx.digest_input += "f=" + o.f;
  auto e = parse_f(o.f);
  double tol = o.tol >= 0 ? o.tol : 1e-10;

  std::optional<web3::HexagonReport> rep;
  std::optional<web3::Web3> web;
  try {
    if (!o.domain.empty()) {
      Rect d = rect_of(o.domain, "--domain");
      web.emplace(ScalarField2D::closed_form(e, "x", "y", d), d);
      rep = web3::thomsen_closure_gap(*web, x0, y0, x1, x2);
    } else {
      double s = std::max(std::abs(x1 - x0), std::abs(x2 - x0));
      if (!(s > 0)) throw UsageError("--base needs x1, x2 different from x0");
      double xlo = std::min({x0, x1, x2}) - s / 2, xhi = std::max({x0, x1, x2}) + s / 2;
      // widen the ordinate range until the three solves are bracketed
      for (int k = 1;; k *= 2) {
        Rect d{{xlo, xhi}, {y0 - k * s, y0 + k * s}};
        try {
          web.emplace(ScalarField2D::closed_form(e, "x", "y", d), d);
          rep = web3::thomsen_closure_gap(*web, x0, y0, x1, x2);
          break;
        } catch (const web3::WebError& err) {
          if (err.kind() != web3::WebError::Kind::NotBracketed || k >= 16) throw;
        }
      }
    }
  } catch (const web3::WebError& err) {
    throw UsageError(std::string("hexagon construction failed: ") + err.what());
  }

  Json t;
  t["name"] = "thomsen_gap";
  t["summary"] = {{"gap", number(rep->gap)},   {"abs_gap", number(std::abs(rep->gap))}, {"y1", number(rep->y1)},
                  {"y2", number(rep->y2)},     {"y2_prime", number(rep->y2_prime)},     {"vacuous", rep->vacuous}};
  t["tolerance"] = tol;
  t["verdict"] = std::abs(rep->gap) <= tol ? "closed" : "open";
  if (!rep->note.empty()) t["note"] = rep->note;
  ctx.tests.push_back(t);
  ctx.details["f"] = o.f;
  ctx.details["base"] = {{"x0", x0}, {"y0", y0}, {"x1", x1}, {"x2", x2}};
  ctx.details["domain"] = rect_json(web->domain(), "x", "y");
  if (o.full) {
    Json polys = Json::array();
    for (const auto& pl : rep->polylines) {
      Json pts = Json::array();
      for (const auto& p : pl.points) pts.push_back({p.x, p.y});
      polys.push_back({{"kind", pl.kind}, {"points", pts}});
    }
    ctx.details["polylines"] = polys;
  }

  if (!o.svg.empty()) {
    // frame the construction with a small margin
    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const auto& pl : rep->polylines)
      for (const auto& p : pl.points) {
        xlo = std::min(xlo, p.x), xhi = std::max(xhi, p.x);
        ylo = std::min(ylo, p.y), yhi = std::max(yhi, p.y);
      }
    double mx = 0.08 * (xhi - xlo) + 1e-12, my = 0.08 * (yhi - ylo) + 1e-12;
    Frame fr{{{xlo - mx, xhi + mx}, {ylo - my, yhi + my}}, 70, 40, 360, 360};
    Svg svg(480, 460, "hexagon: " + o.f);
    svg.frame(fr, "closure gap " + [&] {
      char b[32];
      std::snprintf(b, sizeof b, "%.3e", rep->gap);
      return std::string(b);
    }(), "x", "y");
    for (const auto& pl : rep->polylines) {
      if (pl.kind == "defect")
        svg.polyline(fr, pl.points, "defect", "#d6604d", 3.0, " data-kind=\"defect\"");
      else
        svg.polyline(fr, pl.points, "leaf", pl.kind == "level" ? "#1b7837" : "#4d4d4d", 1.2,
                     " data-kind=\"" + pl.kind + "\"");
    }
    const std::pair<const char*, Point> vertices[] = {
        {"(x0, y0)", {x0, y0}},         {"(x1, y0)", {x1, y0}},      {"(x2, y0)", {x2, y0}},
        {"(x0, y1)", {x0, rep->y1}},    {"(x2, y1)", {x2, rep->y1}}, {"(x1, y2)", {x1, rep->y2}},
        {"(x0, y2')", {x0, rep->y2_prime}}};
    for (const auto& [label, p] : vertices) svg.probe_dot(fr, p, "#2166ac", label);
    ctx.svg_text = svg.str();
  }
  return kDefinitive;
}

web2::Tolerances tolerances_for(const Options& o, const web2::DemandWeb& web) {
  web2::Tolerances t = web2::resolve({}, web);
  double scale = 1.0;
  if (o.tol_set == "strict") scale = 1e-2;
  else if (o.tol_set == "loose") scale = 1e2;
  else if (o.tol_set != "default" && o.tol_set != "custom")
    throw UsageError("--tol-set must be default, strict, loose or custom");
  t.lagrangian *= scale;
  t.samuelson *= scale;
  t.taylor *= scale;
  t.area_ratio *= scale;
  t.hexagon *= scale;
  if (o.tol_set == "custom" && o.tol_overrides.empty()) throw UsageError("--tol-set custom needs --tol name=value");
  if (o.tol_set != "custom" && !o.tol_overrides.empty()) throw UsageError("--tol name=value needs --tol-set custom");
  for (const auto& kv : o.tol_overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--tol expects name=value, got '" + kv + "'");
    std::string name = kv.substr(0, eq);
    double v;
    try {
      std::size_t used = 0;
      v = std::stod(kv.substr(eq + 1), &used);
      if (used != kv.size() - eq - 1) throw std::invalid_argument(kv);
    } catch (const std::exception&) {
      throw UsageError("--tol value in '" + kv + "' is not a number");
    }
    if (!(v > 0)) throw UsageError("--tol values must be positive");
    if (name == "lagrangian") t.lagrangian = v;
    else if (name == "samuelson") t.samuelson = v;
    else if (name == "taylor") t.taylor = v;
    else if (name == "area_ratio") t.area_ratio = v;
    else if (name == "hexagon") t.hexagon = v;
    else throw UsageError("unknown tolerance '" + name + "'");
  }
  return t;
}

std::vector<Sample> samples_of(const web2::TestResult& t) {
  std::vector<Sample> out;
  for (const auto& r : t.residuals) out.push_back({r.p.x, r.p.y, r.value, r.error});
  return out;
}

int cmd_audit(const Options& o, Context& ctx) {
  auto loaded = load_web(o, ctx);
  const auto& web = *loaded.web;
  web2::AuditOptions opt;
  if (o.n < 2) throw UsageError("--n must be at least 2");
  opt.n = o.n;
  opt.eps = o.eps;
  opt.delta = o.delta;
  opt.tol = tolerances_for(o, web);
  auto rep = web2::audit(web, opt);

  bool inconclusive = false;
  for (const auto& t : rep.tests) {
    auto samples = samples_of(t);
    Json j = test_json(t.name, samples, t.tolerance, web2::to_string(t.outcome), o.full, "q1", "p1");
    if (!t.note.empty()) j["note"] = t.note;
    ctx.tests.push_back(j);
    inconclusive |= t.outcome == web2::Outcome::Inconclusive;
  }
  ctx.details["input"] = loaded.origin;
  ctx.details["web"] = web_json(web);
  ctx.details["tolerance_set"] = o.tol_set;
  ctx.details["n"] = opt.n;
  ctx.details["area_offsets"] = {{"eps", opt.eps}, {"delta", opt.delta}};
  ctx.details["inconsistencies"] = rep.inconsistencies;
  if (loaded.statics)
    ctx.details["comparative_statics"] = {{"min_dq1_dp2", number(loaded.statics->min_dq1_dp2)},
                                          {"max_dq1_dp2", number(loaded.statics->max_dq1_dp2)},
                                          {"direction", loaded.statics->direction}};

  if (!o.svg.empty()) {
    Svg svg(1020, 680, "integrability audit");
    const Rect& d = web.domain();
    auto panel = [&](int k) { return Frame{d, 60.0 + (k % 3) * 320.0, 40.0 + (k / 3) * 320.0, 240, 240}; };
    Frame wf = panel(0);
    svg.frame(wf, "demand web: p2 and q2 leaves", "q1", "p1");
    level_panel(svg, wf, [&](Point p) { return web.map_values(p).y; }, "p2", "#2166ac");
    level_panel(svg, wf, [&](Point p) { return web.map_values(p).x; }, "q2", "#b2182b");
    for (std::size_t k = 0; k < rep.tests.size() && k < 5; ++k) {
      const auto& t = rep.tests[k];
      Frame fr = panel(static_cast<int>(k) + 1);
      svg.frame(fr, t.name + ": " + web2::to_string(t.outcome), "q1", "p1");
      heat_panel(svg, fr, samples_of(t), t.tolerance, opt.n, t.name);
    }
    ctx.svg_text = svg.str();
  }
  return inconclusive ? kInconclusive : kDefinitive;
}

int cmd_rectify(const Options& o, Context& ctx) {
  auto loaded = load_web(o, ctx);
  const auto& web = *loaded.web;
  Point anchor{web.domain().x.mid(), web.domain().y.mid()};
  if (!o.anchor.empty()) {
    if (o.anchor.size() != 2) throw UsageError("--anchor needs two numbers q1,p1");
    anchor = {o.anchor[0], o.anchor[1]};
  }
  double tol = o.tol >= 0 ? o.tol : 1e-6;
  ctx.details["input"] = loaded.origin;
  ctx.details["web"] = web_json(web);
  ctx.details["anchor"] = point_json(anchor, "q1", "p1");
  web2::Rectification r;
  try {
    r = web2::rectify(web, anchor, {o.nq, o.np, -1.0});
  } catch (const web2::Web2Error& e) {
    if (e.kind() != web2::Web2Error::Kind::Precondition) throw;
    Json t;
    t["name"] = "samuelson_precondition";
    t["verdict"] = "fail";
    t["summary"] = {{"message", e.what()}};
    ctx.tests.push_back(t);
    throw PreconditionError(e.what());
  }
  std::vector<Sample> dev;
  for (std::size_t k = 0; k < r.probes.size(); ++k)
    dev.push_back({r.probes[k].x, r.probes[k].y, r.rectified_det[k] - 1.0, ""});
  Json fac;
  fac["name"] = "factorization";
  fac["summary"] = {{"max_error", number(r.factors.max_error)}};
  fac["verdict"] = "pass";
  ctx.tests.push_back(fac);
  ctx.tests.push_back(test_json("rectified_det", dev, tol, r.max_det_deviation <= tol ? "rectified" : "not-rectified",
                                o.full, "q1", "p1"));
  auto slope = [](const web3::Table& t) {
    auto [lo, hi] = std::minmax_element(t.dv.begin(), t.dv.end());
    return Json{{"min", *lo}, {"max", *hi}};
  };
  ctx.details["F_slope"] = slope(r.F);
  ctx.details["G_slope"] = slope(r.G);
  ctx.details["max_det_deviation"] = number(r.max_det_deviation);
  ctx.details["F"] = table_json(r.F);
  ctx.details["G"] = table_json(r.G);
  if (!o.tables.empty()) {
    fs::create_directories(o.tables);
    write_table_csv(r.F, fs::path(o.tables) / "F.csv");
    write_table_csv(r.G, fs::path(o.tables) / "G.csv");
  }
  return kDefinitive;
}

int cmd_recover(const Options& o, Context& ctx) {
  if (o.f.empty()) throw UsageError("--f is required");
  ctx.digest_input += "f=" + o.f;
  Rect d = o.domain.empty() ? kDefaultDomain : rect_of(o.domain, "--domain");
  Point anchor{d.x.mid(), d.y.mid()};
  if (!o.anchor.empty()) {
    if (o.anchor.size() != 2) throw UsageError("--anchor needs two numbers x,y");
    anchor = {o.anchor[0], o.anchor[1]};
  }
  double tol = o.tol >= 0 ? o.tol : 1e-6;
  web3::Web3 web(ScalarField2D::closed_form(parse_f(o.f), "x", "y", d), d);
  web3::RecoverOptions ro;
  ro.leaves = o.leaves;
  web3::AdditiveRepresentation rep;
  try {
    rep = web3::recover_additive(web, anchor, ro);
  } catch (const web3::WebError& e) {
    if (e.kind() == web3::WebError::Kind::NonTrivial) throw PreconditionError(e.what());
    throw;
  }
  Json t;
  t["name"] = "leaf_spread";
  t["summary"] = {{"leaf_spread", number(rep.leaf_spread)}, {"leaves_checked", rep.leaves_checked}};
  t["tolerance"] = tol;
  t["verdict"] = rep.leaf_spread <= tol ? "consistent" : "inconsistent";
  ctx.tests.push_back(t);
  ctx.details["f"] = o.f;
  ctx.details["domain"] = rect_json(d, "x", "y");
  ctx.details["anchor"] = point_json(anchor, "x", "y");
  ctx.details["gauge"] = "U1(x*) = U2(y*) = 0, U1'(x*) = 1";
  ctx.details["U1"] = table_json(rep.u1);
  ctx.details["U2"] = table_json(rep.u2);
  ctx.details["phi"] = table_json(rep.phi);
  if (!o.tables.empty()) {
    fs::create_directories(o.tables);
    write_table_csv(rep.u1, fs::path(o.tables) / "U1.csv");
    write_table_csv(rep.u2, fs::path(o.tables) / "U2.csv");
    write_table_csv(rep.phi, fs::path(o.tables) / "phi.csv");
  }
  return kDefinitive;
}

int cmd_forms_verify(const Options&, Context& ctx) {
  ctx.digest_input += "contact-chain";
  auto r = forms::verify_contact_chain();
  forms::EqualityOptions eq;
  for (const auto& c : r.identities) {
    Json t;
    t["name"] = c.name;
    t["summary"] = {{"lhs", c.lhs}, {"rhs", c.rhs}, {"max_deviation", number(c.max_deviation)}};
    t["tolerance"] = eq.tol;
    t["verdict"] = c.holds ? "holds" : "fails";
    ctx.tests.push_back(t);
  }
  Json lit;
  lit["name"] = "d omega ^ d omega ^ d omega";
  lit["summary"] = {{"degree", r.literal_triple_degree}, {"dimension", r.coordinates.size()}};
  lit["verdict"] = r.literal_triple_zero ? "zero" : "nonzero";
  ctx.tests.push_back(lit);
  Json sq;
  sq["name"] = "omega ^ omega";
  sq["verdict"] = r.omega_squared_zero ? "zero" : "nonzero";
  ctx.tests.push_back(sq);
  Json top;
  top["name"] = "contact condition";
  top["summary"] = {{"form", "omega ^ d omega ^ d omega"}};
  top["verdict"] = r.top_form_nonzero ? "nonzero" : "zero";
  ctx.tests.push_back(top);
  ctx.details["coordinates"] = r.coordinates;
  ctx.details["omega"] = r.omega;
  ctx.details["equality"] = {{"points", eq.points}, {"box", {eq.lo, eq.hi}}, {"seed", eq.seed}};
  ctx.details["note"] = "d omega ^ d omega ^ d omega has degree 6 on a 5-dimensional space and vanishes; the nonzero top form is omega ^ d omega ^ d omega";
  return kDefinitive;
}

int cmd_generate(const Options& o, Context& ctx) {
  if (o.spec.empty()) throw UsageError("--spec is required");
  if (o.out.empty()) throw UsageError("--out directory is required");
  if (!fs::is_regular_file(o.spec))
    throw scenarios::ScenarioError(scenarios::ScenarioError::Kind::Io, "cannot read scenario " + o.spec);
  std::string text = read_file(o.spec);
  ctx.digest_input += text;
  auto s = scenarios::scenario_from_json_text(text);
  auto g = scenarios::generate(s);
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw scenarios::ScenarioError(scenarios::ScenarioError::Kind::Io, "cannot create " + o.out);
  ctx.report_path = (dir / "report.json").string();
  write_atomic((dir / "scenario.json").string(), scenarios::scenario_to_json_text(s));
  Json files = Json::array({"scenario.json"});
  if (g.web) {
    scenarios::export_web(*g.web, dir.string());
    files.push_back("manifest.json");
    if (g.web->is_grid()) files.insert(files.end(), {"q2.csv", "p2.csv"});
    ctx.details["web"] = web_json(*g.web);
  } else {
    const auto& f = *g.field;
    write_atomic((dir / "field.csv").string(), field::grid_to_csv_text(field::sample_to_grid(f, s.rectangle, 65)));
    Json m;
    m["schema"] = "webaudit.field";
    m["version"] = 1;
    m["expression"] = expr::to_string(f.expression());
    m["domain"] = rect_json(s.rectangle, "x", "y");
    m["grid"] = "field.csv";
    if (g.separable) {
      m["U1"] = expr::to_string(g.separable->u1);
      m["U2"] = expr::to_string(g.separable->u2);
      m["psi"] = expr::to_string(g.separable->psi);
    }
    m["seed"] = s.seed;
    write_atomic((dir / "field.json").string(), m.dump(2) + "\n");
    files.insert(files.end(), {"field.json", "field.csv"});
    ctx.details["field"] = m;
  }
  Json t;
  t["name"] = "generate";
  t["summary"] = {{"kind", s.kind}, {"files", files}};
  t["verdict"] = "generated";
  ctx.tests.push_back(t);
  ctx.details["kind"] = s.kind;
  ctx.details["seed"] = s.seed;
  if (g.statics)
    ctx.details["comparative_statics"] = {{"min_dq1_dp2", number(g.statics->min_dq1_dp2)},
                                          {"max_dq1_dp2", number(g.statics->max_dq1_dp2)},
                                          {"direction", g.statics->direction}};
  return kDefinitive;
}

// ------------------------------------------------------------ errors

int classify(std::exception_ptr ep, std::string& kind, std::string& message) {
  auto set = [&](const char* k, const std::exception& e, int code) {
    kind = k;
    message = e.what();
    return code;
  };
  try {
    std::rethrow_exception(ep);
  } catch (const UsageError& e) {
    return set("usage", e, kUsage);
  } catch (const PreconditionError& e) {
    return set("precondition", e, kInconclusive);
  } catch (const expr::ParseError& e) {
    return set("parse", e, kUsage);
  } catch (const scenarios::ScenarioError& e) {
    using K = scenarios::ScenarioError::Kind;
    bool pre = e.kind() == K::Transversality || e.kind() == K::Degenerate || e.kind() == K::NotMonotone;
    return set(pre ? "precondition" : "input", e, pre ? kInconclusive : kUsage);
  } catch (const web3::WebError& e) {
    using K = web3::WebError::Kind;
    bool pre = e.kind() == K::Regularity || e.kind() == K::NonTrivial;
    return set(pre ? "precondition" : "input", e, pre ? kInconclusive : kUsage);
  } catch (const web2::Web2Error& e) {
    using K = web2::Web2Error::Kind;
    bool pre = e.kind() == K::Precondition || e.kind() == K::Transversality || e.kind() == K::SignChange ||
               e.kind() == K::Degenerate;
    return set(pre ? "precondition" : "input", e, pre ? kInconclusive : kUsage);
  } catch (const std::exception& e) {
    return set("input", e, kUsage);
  }
  return kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Integrability and separability audits for webs of curves", "webaudit"};
  app.set_version_flag("--version", WEBAUDIT_VERSION);
  app.require_subcommand(1);

  auto add_out = [&](CLI::App* c) {
    c->add_option("--out", o.out, "report path (stdout when omitted)");
    c->add_flag("--full", o.full, "include residual arrays");
  };
  auto add_svg = [&](CLI::App* c) { c->add_option("--svg", o.svg, "SVG figure path"); };
  auto add_web = [&](CLI::App* c) {
    auto* s = c->add_option("--scenario", o.scenario, "scenario JSON file");
    auto* w = c->add_option("--web", o.web, "exported web directory");
    s->excludes(w);
  };

  auto* sep = app.add_subcommand("separability", "curvature test of a 3-web of level curves");
  auto* sf = sep->add_option("--f", o.f, "f(x, y)");
  auto* sg = sep->add_option("--grid", o.grid, "CSV grid of f");
  sf->excludes(sg);
  sep->add_option("--domain", o.domain, "xlo,xhi,ylo,yhi")->delimiter(',')->expected(4);
  sep->add_option("--tol", o.tol, "residual tolerance");
  sep->add_option("--n", o.n, "probes per axis");
  sep->add_option("--route", o.route, "auto, symbolic or numeric")
      ->check(CLI::IsMember({"auto", "symbolic", "numeric"}));
  add_out(sep);
  add_svg(sep);

  auto* hex = app.add_subcommand("hexagon", "Thomsen closure gap of one hexagon");
  hex->add_option("--f", o.f, "f(x, y)");
  hex->add_option("--base", o.base, "x0,y0,x1,x2")->delimiter(',')->expected(4)->required();
  hex->add_option("--domain", o.domain, "xlo,xhi,ylo,yhi")->delimiter(',')->expected(4);
  hex->add_option("--tol", o.tol, "gap tolerance");
  add_out(hex);
  add_svg(hex);

  auto* aud = app.add_subcommand("audit", "integrability audit of a demand web");
  add_web(aud);
  aud->add_option("--tol-set", o.tol_set, "default, strict, loose or custom");
  aud->add_option("--tol", o.tol_overrides, "name=value with --tol-set custom");
  aud->add_option("--n", o.n, "probes per axis");
  aud->add_option("--eps", o.eps, "area cell offset in q1");
  aud->add_option("--delta", o.delta, "area cell offset in p1");
  add_out(aud);
  add_svg(aud);

  auto* rec = app.add_subcommand("rectify", "factor the density and build the rectifying maps");
  add_web(rec);
  rec->add_option("--anchor", o.anchor, "q1,p1")->delimiter(',')->expected(2);
  rec->add_option("--tol", o.tol, "tolerance on the rectified determinant");
  rec->add_option("--nq", o.nq, "table nodes in q1");
  rec->add_option("--np", o.np, "table nodes in p1");
  rec->add_option("--tables", o.tables, "directory for F.csv and G.csv");
  add_out(rec);

  auto* rcv = app.add_subcommand("recover", "recover an additive representation");
  rcv->add_option("--f", o.f, "f(x, y)");
  rcv->add_option("--domain", o.domain, "xlo,xhi,ylo,yhi")->delimiter(',')->expected(4);
  rcv->add_option("--anchor", o.anchor, "x,y")->delimiter(',')->expected(2);
  rcv->add_option("--leaves", o.leaves, "level curves traced for the consistency check");
  rcv->add_option("--tol", o.tol, "leaf spread tolerance");
  rcv->add_option("--tables", o.tables, "directory for U1.csv, U2.csv and phi.csv");
  add_out(rcv);

  auto* frm = app.add_subcommand("forms-verify", "check the contact-form identities");
  add_out(frm);

  auto* gen = app.add_subcommand("generate", "build a scenario and write its data");
  gen->add_option("--spec", o.spec, "scenario JSON file");
  gen->add_option("--out", o.out, "output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kDefinitive : kUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  std::map<std::string, std::function<int(const Options&, Context&)>> handlers{
      {"separability", cmd_separability}, {"hexagon", cmd_hexagon}, {"audit", cmd_audit},
      {"rectify", cmd_rectify},           {"recover", cmd_recover}, {"forms-verify", cmd_forms_verify},
      {"generate", cmd_generate}};

  Context ctx;
  auto start = std::chrono::steady_clock::now();
  int code;
  std::string kind, message;
  try {
    code = handlers.at(cmd->get_name())(o, ctx);
  } catch (...) {
    code = classify(std::current_exception(), kind, message);
    err << "webaudit " << cmd->get_name() << ": " << message << "\n";
  }
  double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  Json report;
  report["version"] = kReportVersion;
  report["tool_version"] = WEBAUDIT_VERSION;
  report["command"] = echo(args);
  report["input_digest"] = fnv1a_hex(ctx.digest_input);
  report["tests"] = ctx.tests;
  report["details"] = ctx.details;
  if (!kind.empty()) report["error"] = {{"kind", kind}, {"message", message}};
  report["exit_code"] = code;
  report["timing"] = {{"wall_ms", wall}};
  std::string text = report.dump(2) + "\n";

  std::string path = !ctx.report_path.empty() ? ctx.report_path : cmd->get_name() == "generate" ? "" : o.out;
  try {
    if (path.empty())
      out << text;
    else
      write_atomic(path, text);
    if (code != kUsage && kind.empty() && !o.svg.empty() && !ctx.svg_text.empty()) write_atomic(o.svg, ctx.svg_text);
  } catch (const std::exception& e) {
    err << "webaudit " << cmd->get_name() << ": " << e.what() << "\n";
    return kUsage;
  }
  return code;
}

}  // namespace webaudit::cli
