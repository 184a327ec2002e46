// Acceptance checks. One [PASS]/[FAIL] line per criterion; exit status is
// the number of failures. Tolerances and budgets are pinned below.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "random_forms.hpp"
#include "report.hpp"
#include "webaudit/forms.hpp"
#include "webaudit/scenarios.hpp"
#include "webaudit/web2.hpp"
#include "webaudit/web3.hpp"
#include "xml_check.hpp"

using namespace webaudit;
using field::Point;
using field::Rect;
using field::ScalarField2D;
using web2::DemandWeb;
using web2::Outcome;
using web3::Route;
using web3::Web3;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances
constexpr double kSepClosedTol = 1e-8;
constexpr double kSepGridTol = 1e-3;
constexpr double kSepBudgetS = 5.0;
constexpr double kKSymbolicTol = 1e-9;
constexpr double kKNumericTol = 1e-5;
constexpr double kHexFlatRel = 1e-7;  // times domain height
constexpr double kHexHalvingRatio = 4.0;
constexpr double kHexFloor = 1e-12;  // gaps below this count as closed
constexpr double kHotellingTol = 1e-8;
constexpr double kHotellingAreaTol = 1e-6;
constexpr double kHotellingBudgetS = 10.0;
constexpr double kScaledExact = 1e-12;
constexpr double kFactorRel = 1e-6;
constexpr double kRectifiedDet = 1e-6;
constexpr double kTaylorRel = 1e-4;
constexpr double kTaylorProduct = 1e-8;
constexpr double kFormsRouteTol = 1e-9;
constexpr double kRecoverRel = 1e-4;
constexpr double kLeafSpread = 1e-6;

// ---- frozen oracle values (tests/oracles/oracles.py)
constexpr double kK11 = -1.0 / 27.0;
constexpr double kGapOracle = -4.524886877828054e-4;  // x + y + x^2 y at (1, 1, 1.1, 1.2)

const Rect kUnit{{0.5, 1.5}, {0.5, 1.5}};
const Rect kOneTwo{{1, 2}, {1, 2}};
const Rect kPrices{{0.8, 1.25}, {0.8, 1.25}};
const Rect kUnit01{{0, 1}, {0, 1}};

struct Outcome_ {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

expr::Expression E(const std::string& t) { return expr::parse(t); }

ScalarField2D over(const std::string& text, const Rect& dom) {
  return ScalarField2D::closed_form(E(text), "q1", "p1", dom);
}

DemandWeb map_web(const std::string& q2, const std::string& p2, const Rect& dom) {
  return DemandWeb::map(over(q2, dom), over(p2, dom), dom);
}

DemandWeb hotelling() { return scenarios::hotelling_demands({E("1/(p1*p2)"), kPrices, std::nullopt}).web; }

std::vector<Point> probes(const Rect& d, int n = 5) {
  std::vector<Point> out;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out.push_back(d.probe(i, j, n));
  return out;
}

// Quadruples whose solves stay inside the domain: the ordinates move away
// from the side the base starts on.
std::vector<std::array<double, 4>> quadruple_family(const Web3& w) {
  const Rect& d = w.domain();
  Point mid{d.x.mid(), d.y.mid()};
  bool rising = w.f().partial({1, 0}, mid) * w.f().partial({0, 1}, mid) > 0;
  double eps = d.x.width() / 40;
  std::vector<std::array<double, 4>> out;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      double x0 = d.x.lo + d.x.width() * (0.1 + 0.15 * i);
      double t = 0.1 + 0.05 * j;
      double y0 = rising ? d.y.lo + d.y.width() * t : d.y.hi - d.y.width() * t;
      out.push_back({x0, y0, x0 + eps, x0 + 2 * eps});
    }
  return out;
}

// ---- criteria

Outcome_ ac1() {
  auto t0 = std::chrono::steady_clock::now();
  double worst_closed = 0, worst_grid = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto s = scenarios::random_separable(seed, kUnit);
    auto closed = web3::separability_test(Web3(s.field, kUnit), 5, kSepClosedTol);
    auto grid_field = ScalarField2D::grid(field::sample_to_grid(s.field, kUnit, 65));
    auto grid = web3::separability_test(Web3(grid_field), 5, kSepGridTol);
    if (closed.failed || grid.failed) return {false, "probe failures on seed " + std::to_string(seed)};
    worst_closed = std::max(worst_closed, closed.max_abs_residual);
    worst_grid = std::max(worst_grid, grid.max_abs_residual);
  }
  double t = seconds_since(t0);
  bool ok = worst_closed <= kSepClosedTol && worst_grid <= kSepGridTol && t < kSepBudgetS;
  return {ok, fmt("10 fields; max residual closed %.2e, grid %.2e; %.2f s", worst_closed, worst_grid, t)};
}

Outcome_ ac2() {
  Web3 w(ScalarField2D::closed_form(E("x + y + x^2*y")), kUnit);
  double sym = web3::chern_curvature(w, {1, 1}, Route::Symbolic);
  double num = web3::chern_curvature(w, {1, 1}, Route::Numeric);
  double es = std::abs(sym - kK11), en = std::abs(num - kK11);
  return {es <= kKSymbolicTol && en <= kKNumericTol, fmt("K(1,1) symbolic err %.2e, numeric err %.2e", es, en)};
}

Outcome_ ac3() {
  std::vector<Web3> flat;
  for (const char* t : {"x*y", "exp(x + y)", "(x^2 + y)^3 + x^2 + y", "ln(x) + sqrt(y)", "x/y", "x^3*exp(2*y)"})
    flat.emplace_back(ScalarField2D::closed_form(E(t)), kOneTwo);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) flat.emplace_back(scenarios::random_separable(seed, kUnit).field, kUnit);
  double worst_flat = 0;
  int quads = 0;
  for (const auto& w : flat)
    for (auto q : quadruple_family(w)) {
      double g = std::abs(web3::thomsen_closure_gap(w, q[0], q[1], q[2], q[3]).gap) / w.domain().y.width();
      worst_flat = std::max(worst_flat, g);
      ++quads;
    }

  Web3 curved(ScalarField2D::closed_form(E("x + y + x^2*y")), kUnit);
  double gap = web3::thomsen_closure_gap(curved, 1, 1, 1.1, 1.2).gap;
  bool nonzero = std::abs(gap) >= 0.99 * std::abs(kGapOracle) && std::abs(gap - kGapOracle) <= 1e-9;

  std::vector<Web3> all = flat;
  for (const char* t : {"x + y + x^2*y", "x*y + y^2", "exp(x*y/2) + x", "ln(1 + x + 2*y) + x*y^2"})
    all.emplace_back(ScalarField2D::closed_form(E(t)), kUnit);
  double worst_ratio = INFINITY;
  for (const auto& w : all) {
    const Rect& d = w.domain();
    auto q = quadruple_family(w)[12];
    double prev = -1;
    for (double eps = d.x.width() / 20; eps >= d.x.width() / 160; eps /= 2) {
      double g = std::abs(web3::thomsen_closure_gap(w, q[0], q[1], q[0] + eps, q[0] + 2 * eps).gap);
      if (prev > kHexFloor) worst_ratio = std::min(worst_ratio, prev / std::max(g, 1e-300));
      prev = g;
    }
  }
  bool ok = worst_flat <= kHexFlatRel && nonzero && worst_ratio >= kHexHalvingRatio;
  return {ok, fmt("flat max gap/height %.2e over %g quadruples; curved gap %.6e", worst_flat, quads, gap) +
                  fmt("; min halving ratio %.2f", worst_ratio)};
}

Outcome_ ac4() {
  auto t0 = std::chrono::steady_clock::now();
  auto web = hotelling();
  double lag = 0, sam = 0;
  for (Point p : probes(web.domain())) {
    lag = std::max(lag, std::abs(web2::lagrangian_residual(web, p)));
    sam = std::max(sam, std::abs(web2::samuelson_residual(web, p)));
  }
  web2::AuditOptions opt;
  opt.eps = opt.delta = 0.05;
  auto rep = web2::audit(web, opt);
  const auto& area = rep.test("area_ratio");
  const auto& hex = rep.test("hexagon_on_density");
  double t = seconds_since(t0);
  bool ok = lag <= kHotellingTol && sam <= kHotellingTol && area.failed == 0 && area.max_abs <= kHotellingAreaTol &&
            hex.outcome == Outcome::Vacuous && t < kHotellingBudgetS;
  return {ok, fmt("lagrangian %.2e, samuelson %.2e, area %.2e", lag, sam, area.max_abs) + ", hexagon " +
                  web2::to_string(hex.outcome) + fmt("; %.2f s", t)};
}

Outcome_ ac5() {
  auto scaled = scenarios::perturb(hotelling(), E("1"), 1.0);  // q2 doubled
  double worst = 0;
  for (Point p : probes(scaled.domain())) worst = std::max(worst, std::abs(std::abs(web2::lagrangian_residual(scaled, p)) - 1));
  auto rep = web2::audit(scaled);
  bool ok = worst <= kScaledExact && rep.test("lagrangian").outcome == Outcome::Fail &&
            rep.test("samuelson").outcome == Outcome::Pass && rep.test("area_ratio").outcome == Outcome::Pass;
  return {ok, fmt("| |lagrangian| - 1 | <= %.1e; ", worst) + "lagrangian " +
                  web2::to_string(rep.test("lagrangian").outcome) + ", samuelson " +
                  web2::to_string(rep.test("samuelson").outcome) + ", area " +
                  web2::to_string(rep.test("area_ratio").outcome)};
}

Outcome_ ac6() {
  const char* families[] = {"lagrangian", "samuelson", "taylor", "area_ratio"};
  std::vector<web2::IntegrabilityReport> reps;
  for (double size : {0.1, 0.05, 0.025}) reps.push_back(web2::audit(scenarios::perturb(hotelling(), E("p1*q1"), size)));
  std::string detail;
  bool ok = true;
  for (const char* f : families) {
    double a = reps[0].test(f).max_abs, b = reps[1].test(f).max_abs, c = reps[2].test(f).max_abs;
    ok &= c > 0 && a > b && b > c;
    for (const auto& r : reps) ok &= r.test(f).failed == 0;
    detail += std::string(f) + fmt(" %.2e>%.2e>%.2e; ", a, b, c);
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

Outcome_ ac7() {
  auto web = map_web("(q1 + q1^2/2)*exp(p1)", "-p1", kUnit01);  // a = -(1 + q1) exp(p1)
  auto fz = web2::factor_density(web, {0, 0});
  double rel = 0;
  for (std::size_t k = 0; k < fz.f.t.size(); ++k) {
    double s = fz.f.t[k];
    rel = std::max(rel, std::abs(fz.f.v[k] - (1 + s)) / (1 + s));
  }
  for (std::size_t k = 0; k < fz.g.t.size(); ++k) {
    double s = fz.g.t[k];
    rel = std::max(rel, std::abs(fz.g.v[k] - std::exp(s)) / std::exp(s));
  }
  auto r = web2::rectify(web, {0, 0});
  double dev = 0;
  for (double d : r.rectified_det) dev = std::max(dev, std::abs(std::abs(d) - 1));
  bool ok = rel <= kFactorRel && r.rectified_det.size() == 25 && dev <= kRectifiedDet;
  return {ok, fmt("factor relative error %.2e; rectified |det| deviation %.2e on %g probes", rel, dev,
                  static_cast<double>(r.rectified_det.size()))};
}

Outcome_ ac8() {
  std::vector<DemandWeb> corpus = {map_web("q1*exp(q1*p1)", "p1", kUnit), map_web("q1 + q1^2*p1/2 + q1^3", "p1", kUnit),
                                   map_web("(1 + q1^2)*p1^2 + q1", "p1", kUnit),
                                   scenarios::perturb(hotelling(), E("p1*q1"), 0.1)};
  double worst_rel = 0;
  int compared = 0;
  for (const auto& w : corpus)
    for (Point p : probes(w.domain(), 3)) {
      auto r = web2::taylor_identity_residual(w, p);
      if (std::abs(r.direct) <= 1e-10) continue;
      worst_rel = std::max(worst_rel, std::abs(r.reconstructed - r.direct) / std::abs(r.direct));
      ++compared;
    }
  std::vector<DemandWeb> products = {hotelling(), map_web("(q1 + q1^2/2)*exp(p1)", "-p1", kUnit01),
                                     map_web("q1^3*(1 + p1^2)", "p1", kUnit)};
  double worst_product = 0;
  for (const auto& w : products)
    for (Point p : probes(w.domain(), 3)) {
      auto r = web2::taylor_identity_residual(w, p);
      worst_product = std::max({worst_product, std::abs(r.direct), std::abs(r.reconstructed)});
    }
  bool ok = compared > 0 && worst_rel <= kTaylorRel && worst_product <= kTaylorProduct;
  return {ok, fmt("routes agree to %.2e relative over %g probes; product densities %.2e", worst_rel,
                  static_cast<double>(compared), worst_product)};
}

Outcome_ ac9() {
  auto chain = forms::verify_contact_chain();
  bool identities = chain.all_hold();

  auto cs = forms::coordinates({"x", "y", "z", "w"});
  std::mt19937_64 rng(2024);
  int held = 0;
  for (int i = 0; i < 200; ++i) {
    auto a = testing::random_form(rng, cs, testing::random_degree(rng));
    auto b = testing::random_form(rng, cs, testing::random_degree(rng));
    bool dd = forms::probably_equal(exterior_derivative(exterior_derivative(a)),
                                    forms::DifferentialForm(cs, a.degree() + 2));
    auto sign = expr::Expression::constant(a.degree() % 2 == 0 ? 1.0 : -1.0);
    bool leibniz = forms::probably_equal(exterior_derivative(wedge(a, b)),
                                         wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)).scaled(sign));
    held += dd && leibniz;
  }

  struct Map {
    const char* q2;
    const char* p2;
  };
  const Map maps[] = {{"p1^3*q1^2", "1/(p1^2*q1)"},
                      {"(1 + 0.1*p1*q1)*p1^3*q1^2", "1/(p1^2*q1)"},
                      {"2*p1^3*q1^2", "1/(p1^2*q1)"},
                      {"(1+q1)*exp(p1)", "p1"},
                      {"q1 + q1^2*p1", "-p1 + 0.2*q1"}};
  double worst = 0;
  for (const auto& m : maps) {
    auto coef = forms::lagrangian_coefficient(E(m.q2), E(m.p2));
    auto web = map_web(m.q2, m.p2, kPrices);
    for (Point p : probes(kPrices)) {
      double via_forms = expr::evaluate(coef, expr::Bindings{{"q1", p.x}, {"p1", p.y}});
      worst = std::max(worst, std::abs(via_forms - web2::lagrangian_residual(web, p)));
    }
  }
  bool ok = identities && chain.literal_triple_zero && held == 200 && worst <= kFormsRouteTol;
  return {ok, std::string("contact identities ") + (identities ? "hold" : "fail") + fmt("; d^2 and Leibniz on %g/200 forms; forms route vs det+1 %.2e", held, worst)};
}

Outcome_ ac10() {
  Web3 w(ScalarField2D::closed_form(E("x*y")), kUnit);
  const Point anchor{1, 1};
  auto rep = web3::recover_additive(w, anchor);
  // gauge U1(x*) = U2(y*) = 0, U1'(x*) = 1 gives U1 = x* ln(x/x*), U2 = x* ln(y/y*)
  auto rel_err = [&](const web3::Table& t, double star) {
    double err = 0, scale = 0;
    for (std::size_t k = 0; k < t.t.size(); ++k) {
      double want = anchor.x * std::log(t.t[k] / star);
      err = std::max(err, std::abs(t.v[k] - want));
      scale = std::max(scale, std::abs(want));
    }
    return err / scale;
  };
  double e1 = rel_err(rep.u1, anchor.x), e2 = rel_err(rep.u2, anchor.y);
  bool ok = e1 <= kRecoverRel && e2 <= kRecoverRel && rep.leaves_checked == 10 && rep.leaf_spread <= kLeafSpread;
  return {ok, fmt("U1 vs ln rel %.2e, U2 vs ln rel %.2e, leaf spread %.2e over 10 leaves", e1, e2, rep.leaf_spread)};
}

int shell(const std::string& cmd) {
  int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome_ ac11() {
  const std::string bin = std::string("'") + WEBAUDIT_BIN + "'";
  const std::string sc = WEBAUDIT_SCENARIO_DIR;
  fs::path root = fs::temp_directory_path() / ("webaudit_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::vector<std::string> commands = {
      "separability --f 'x+y+x^2*y' --full --out sep.json --svg sep.svg",
      "separability --f 'x*y' --domain 1,2,1,2 --out sep_flat.json --svg sep_flat.svg",
      "hexagon --f 'x+y+x^2*y' --base 1,1,1.1,1.2 --out hex.json --svg hex.svg",
      "audit --scenario '" + sc + "/hotelling.json' --full --out audit_hot.json --svg audit_hot.svg",
      "audit --scenario '" + sc + "/perturbed.json' --full --out audit_pert.json --svg audit_pert.svg",
      "rectify --scenario '" + sc + "/hotelling.json' --out rect.json --tables rect",
      "recover --f 'x*y' --out rec.json --tables rec",
      "forms-verify --out forms.json",
      "generate --spec '" + sc + "/separable.json' --out gen_sep",
      "generate --spec '" + sc + "/perturbed.json' --out gen_pert",
      "separability --grid gen_sep/field.csv --out sep_grid.json --svg sep_grid.svg",
      "audit --web gen_pert --out audit_web.json --svg audit_web.svg",
  };
  for (const char* pass : {"a", "b"}) {
    fs::create_directories(root / pass);
    for (const auto& c : commands)
      if (shell("cd '" + (root / pass).string() + "' && " + bin + " " + c) != 0) {
        fs::remove_all(root);
        return {false, "command failed: " + c};
      }
  }
  int json = 0, svg = 0, other = 0, mismatched = 0, malformed = 0;
  std::string first_mismatch;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    fs::path rel = fs::relative(e.path(), root / "a");
    std::string a = cli::read_file(e.path().string());
    fs::path other_path = root / "b" / rel;
    std::string b = fs::exists(other_path) ? cli::read_file(other_path.string()) : std::string("\x01missing");
    std::string ext = rel.extension().string();
    if (ext == ".json") {
      ++json;
      a = cli::mask_wall_time(a);
      b = cli::mask_wall_time(b);
    } else if (ext == ".svg") {
      ++svg;
      malformed += !xml_well_formed(a);
      malformed += count_of(a, "class=\"probe\"") != std::stoi(a.substr(a.find("data-probes=\"") + 13));
    } else {
      ++other;
    }
    if (a != b && mismatched++ == 0) first_mismatch = rel.string();
  }
  fs::remove_all(root);
  bool ok = mismatched == 0 && malformed == 0 && json >= 12 && svg == 7;
  return {ok, fmt("%g JSON, %g SVG, ", json, svg) + fmt("%g data files identical across two runs; ", other) +
                  fmt("%g mismatched, %g malformed", mismatched, malformed) +
                  (first_mismatch.empty() ? "" : " (first: " + first_mismatch + ")")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* title;
    std::function<Outcome_()> run;
  };
  const Criterion criteria[] = {
      {"AC1", "flat curvature on separable families", ac1},
      {"AC2", "curvature value K(1,1) = -1/27", ac2},
      {"AC3", "Thomsen closure", ac3},
      {"AC4", "Hotelling integrability", ac4},
      {"AC5", "Lagrangian versus S condition on the scaled web", ac5},
      {"AC6", "perturbation sensitivity", ac6},
      {"AC7", "factorization and rectification round trip", ac7},
      {"AC8", "Taylor identity routes", ac8},
      {"AC9", "forms engine", ac9},
      {"AC10", "additive representation recovery", ac10},
      {"AC11", "CLI determinism", ac11},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome_ r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failures += !r.pass;
    std::printf("[%s] %s %s: %s\n", r.pass ? "PASS" : "FAIL", c.id, c.title, r.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
