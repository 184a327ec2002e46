#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cli.hpp"
#include "report.hpp"
#include "xml_check.hpp"

using namespace webaudit::cli;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = WEBAUDIT_SCENARIO_DIR;
const std::string kGolden = WEBAUDIT_GOLDEN_DIR;

struct Run {
  int code;
  std::string out, err;
  Json report() const { return Json::parse(out); }
};

Run call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("webaudit_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int system_run(const std::string& cmd) {
  int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const std::string& s) { return "'" + s + "'"; }

}  // namespace

TEST_CASE("exit-code matrix") {
  TempDir tmp;
  const std::string hot = kScenarios + "/hotelling.json", pert = kScenarios + "/perturbed.json";
  struct Row {
    std::vector<std::string> args;
    int code;
  };
  std::ofstream(tmp / "bad.json") << R"j({"version": 1, "kind": "bad", "rectangle": {"x": [0, 1], "y": [0, 1]}})j";
  std::ofstream(tmp / "trunc.json") << R"j({"version": 1, "kind": )j";
  const std::vector<Row> rows = {
      {{"separability", "--f", "x*y", "--domain", "1,2,1,2"}, kDefinitive},
      {{"separability", "--f", "x+y+x^2*y"}, kDefinitive},
      {{"separability", "--f", "x+y", "--grid", tmp / "g.csv"}, kUsage},
      {{"separability"}, kUsage},
      {{"separability", "--f", "x+"}, kUsage},
      {{"separability", "--f", "x+z"}, kUsage},
      {{"separability", "--f", "x*y", "--domain", "2,1,1,2"}, kUsage},
      {{"separability", "--f", "x*y", "--domain", "1,2,1"}, kUsage},
      {{"separability", "--f", "x*y", "--route", "guess"}, kUsage},
      {{"separability", "--grid", tmp / "missing.csv"}, kUsage},
      {{"separability", "--f", "x^2+y", "--domain", "-1,1,0,1"}, kInconclusive},
      {{"hexagon", "--f", "x+y", "--base", "0,0,0.1,0.2"}, kDefinitive},
      {{"hexagon", "--f", "x+y+x^2*y", "--base", "1,1,1.1,1.2"}, kDefinitive},
      {{"hexagon", "--f", "x+y", "--base", "0,0,0.1"}, kUsage},
      {{"hexagon", "--f", "x+y", "--base", "0,0,0.1,0.2", "--domain", "0,0.3,0,0.01"}, kUsage},
      {{"audit", "--scenario", hot}, kDefinitive},
      {{"audit", "--scenario", pert}, kDefinitive},
      {{"audit", "--web", tmp / "missing-dir"}, kUsage},
      {{"audit", "--scenario", hot, "--web", tmp.path.string()}, kUsage},
      {{"audit", "--scenario", kScenarios + "/separable.json"}, kUsage},
      {{"audit", "--scenario", tmp / "trunc.json"}, kUsage},
      {{"audit", "--scenario", hot, "--tol-set", "strict"}, kDefinitive},
      {{"audit", "--scenario", hot, "--tol-set", "custom", "--tol", "lagrangian=1e-3"}, kDefinitive},
      {{"audit", "--scenario", hot, "--tol-set", "custom", "--tol", "bogus=1"}, kUsage},
      {{"audit", "--scenario", hot, "--tol", "lagrangian=1e-3"}, kUsage},
      {{"audit", "--scenario", hot, "--tol-set", "weird"}, kUsage},
      {{"rectify", "--scenario", hot}, kDefinitive},
      {{"rectify", "--scenario", pert}, kInconclusive},
      {{"rectify", "--scenario", hot, "--anchor", "1"}, kUsage},
      {{"recover", "--f", "x*y"}, kDefinitive},
      {{"recover", "--f", "x+y+x^2*y"}, kInconclusive},
      {{"recover"}, kUsage},
      {{"forms-verify"}, kDefinitive},
      {{"generate", "--spec", kScenarios + "/hotelling.json", "--out", tmp / "gen"}, kDefinitive},
      {{"generate", "--spec", tmp / "bad.json", "--out", tmp / "gen-bad"}, kUsage},
      {{"generate", "--spec", tmp / "absent.json", "--out", tmp / "gen-absent"}, kUsage},
      {{"generate", "--out", tmp / "gen"}, kUsage},
      {{"bogus"}, kUsage},
      {{}, kUsage},
      {{"--help"}, kDefinitive},
      {{"--version"}, kDefinitive},
  };
  for (const auto& row : rows) {
    std::string line;
    for (const auto& a : row.args) line += a + " ";
    CAPTURE(line);
    Run r = call(row.args);
    CHECK(r.code == row.code);
    bool envelope = !row.args.empty() && row.args[0] != "bogus" && row.args[0][0] != '-' && !r.out.empty() &&
                    r.out.front() == '{';
    if (envelope && row.args[0] != "generate") {
      Json j = r.report();
      CHECK(j["exit_code"] == r.code);
      CHECK(j["version"] == kReportVersion);
      CHECK(j.contains("input_digest"));
      CHECK(j["timing"].contains("wall_ms"));
      if (r.code == kUsage) CHECK(j.contains("error"));
    }
  }
}

TEST_CASE("report contents") {
  SUBCASE("separability summary carries the extreme probes") {
    Run r = call({"separability", "--f", "x+y+x^2*y", "--full"});
    Json j = r.report();
    const Json& t = j["tests"][0];
    CHECK(t["name"] == "saint_robert_residual");
    CHECK(t["verdict"] == "non-trivial");
    CHECK(t["residuals"].size() == 25);
    CHECK(t["curvature"]["min"].get<double>() == doctest::Approx(-0.20545178412062193).epsilon(1e-9));
    // verdict reproducible from the residual array and tolerance
    double worst = 0;
    for (const auto& p : t["residuals"]) worst = std::max(worst, std::abs(p["value"].get<double>()));
    CHECK(worst == t["summary"]["max_abs"].get<double>());
    CHECK((worst <= t["tolerance"].get<double>()) == (t["verdict"] == "trivial"));
    CHECK(j["details"]["route"] == "symbolic");
  }
  SUBCASE("hexagon gap") {
    Json j = call({"hexagon", "--f", "x+y+x^2*y", "--base", "1,1,1.1,1.2"}).report();
    CHECK(j["tests"][0]["summary"]["gap"].get<double>() == doctest::Approx(-4.524886877828054e-4).epsilon(1e-8));
    CHECK(j["tests"][0]["verdict"] == "open");
    Json z = call({"hexagon", "--f", "x*y", "--base", "1,1,1.1,1.2"}).report();
    CHECK(std::abs(z["tests"][0]["summary"]["gap"].get<double>()) <= 1e-10);
  }
  SUBCASE("audit verdicts") {
    Json h = call({"audit", "--scenario", kScenarios + "/hotelling.json"}).report();
    for (const auto& t : h["tests"]) CHECK(std::string(t["verdict"]).find("pass") != std::string::npos);
    Json p = call({"audit", "--scenario", kScenarios + "/perturbed.json"}).report();
    CHECK(p["tests"][0]["name"] == "lagrangian");
    CHECK(p["tests"][0]["verdict"] == "fail");
    CHECK(p["tests"][0]["summary"]["max_abs_at"].contains("q1"));
    CHECK(p["details"]["inconsistencies"].empty());
  }
  SUBCASE("strict and loose scale the tolerances") {
    auto tol = [](const char* set) {
      return call({"audit", "--scenario", kScenarios + "/hotelling.json", "--tol-set", set})
          .report()["tests"][0]["tolerance"]
          .get<double>();
    };
    CHECK(tol("strict") == doctest::Approx(tol("default") * 1e-2));
    CHECK(tol("loose") == doctest::Approx(tol("default") * 1e2));
  }
  SUBCASE("rectify names the failing residual") {
    Run r = call({"rectify", "--scenario", kScenarios + "/perturbed.json"});
    CHECK(r.code == kInconclusive);
    CHECK(r.err.find("S condition") != std::string::npos);
  }
  SUBCASE("forms-verify") {
    Json j = call({"forms-verify"}).report();
    int holds = 0;
    for (const auto& t : j["tests"]) holds += t["verdict"] == "holds";
    CHECK(holds == 3);
    CHECK(j["tests"][3]["verdict"] == "zero");
    CHECK(j["tests"][3]["summary"]["degree"] == 6);
  }
}

TEST_CASE("tables and generated files") {
  TempDir tmp;
  CHECK(call({"recover", "--f", "x*y", "--tables", tmp / "rec"}).code == kDefinitive);
  for (const char* f : {"U1.csv", "U2.csv", "phi.csv"}) CHECK(fs::exists(tmp.path / "rec" / f));
  CHECK(call({"rectify", "--scenario", kScenarios + "/hotelling.json", "--tables", tmp / "rt"}).code == kDefinitive);
  CHECK(fs::exists(tmp.path / "rt" / "F.csv"));

  CHECK(call({"generate", "--spec", kScenarios + "/separable.json", "--out", tmp / "sep"}).code == kDefinitive);
  for (const char* f : {"scenario.json", "field.json", "field.csv", "report.json"}) CHECK(fs::exists(tmp.path / "sep" / f));
  Run grid = call({"separability", "--grid", tmp / "sep/field.csv"});
  CHECK(grid.code == kDefinitive);
  CHECK(grid.report()["tests"][0]["verdict"] == "trivial");

  CHECK(call({"generate", "--spec", kScenarios + "/hotelling.json", "--out", tmp / "hot"}).code == kDefinitive);
  Run viaweb = call({"audit", "--web", tmp / "hot"});
  CHECK(viaweb.code == kDefinitive);
  CHECK(viaweb.report()["tests"][0]["verdict"] == "pass");
  // the digest covers the web data, not the report generate leaves beside it
  std::ofstream(tmp / "hot/report.json") << "{}";
  CHECK(call({"audit", "--web", tmp / "hot"}).report()["input_digest"] == viaweb.report()["input_digest"]);

  Run to_file = call({"forms-verify", "--out", tmp / "forms.json"});
  CHECK(to_file.out.empty());
  CHECK(Json::parse(read_file(tmp / "forms.json"))["exit_code"] == 0);
  CHECK(call({"forms-verify", "--out", tmp / "no/such/dir/forms.json"}).code == kUsage);
}

TEST_CASE("svg figures are well formed and declare their probes") {
  TempDir tmp;
  struct Fig {
    std::vector<std::string> args;
    int probes;
  };
  const std::vector<Fig> figs = {
      {{"separability", "--f", "x+y+x^2*y", "--n", "6"}, 36},
      {{"hexagon", "--f", "x+y+x^2*y", "--base", "1,1,1.1,1.2"}, 7},
      {{"audit", "--scenario", kScenarios + "/hotelling.json"}, 100},
      {{"audit", "--scenario", kScenarios + "/perturbed.json"}, 109},
  };
  int k = 0;
  for (auto fig : figs) {
    std::string path = tmp / ("f" + std::to_string(k++) + ".svg");
    fig.args.insert(fig.args.end(), {"--svg", path});
    CAPTURE(fig.args[0]);
    REQUIRE(call(fig.args).code == kDefinitive);
    std::string svg = read_file(path);
    CHECK(xml_well_formed(svg));
    CHECK(count_of(svg, "class=\"probe\"") == fig.probes);
    CHECK(svg.find("data-probes=\"" + std::to_string(fig.probes) + "\"") != std::string::npos);
    CHECK(count_of(svg, "class=\"leaf\"") > 0);
  }
  CHECK_FALSE(xml_well_formed("<svg><g></svg></g>"));
  CHECK_FALSE(xml_well_formed("<svg><rect/>"));
  CHECK(xml_well_formed("<?xml version=\"1.0\"?>\n<svg a=\"x>y\"><title>a &amp; b</title><g/></svg>\n"));
  CHECK_FALSE(xml_well_formed("<svg>a & b</svg>"));
}

TEST_CASE("binary runs are byte-identical modulo wall time") {
  TempDir tmp;
  const std::string bin = quoted(WEBAUDIT_BIN);
  const std::vector<std::string> commands = {
      "separability --f 'x+y+x^2*y' --full",
      "hexagon --f 'x+y+x^2*y' --base 1,1,1.1,1.2",
      "audit --scenario " + quoted(kScenarios + "/perturbed.json") + " --full",
      "rectify --scenario " + quoted(kScenarios + "/hotelling.json"),
      "recover --f 'x*y'",
      "forms-verify",
  };
  int k = 0;
  for (const auto& c : commands) {
    CAPTURE(c);
    // the command echo includes output paths, so both passes use the same relative names
    bool svg = c.rfind("separability", 0) == 0 || c.rfind("hexagon", 0) == 0 || c.rfind("audit", 0) == 0;
    std::string stem = "r" + std::to_string(k++);
    for (const char* pass : {"a", "b"}) {
      fs::create_directories(tmp.path / pass);
      std::string cmd = "cd " + quoted(tmp / pass) + " && " + bin + " " + c + " --out " + stem + ".json" +
                        (svg ? " --svg " + stem + ".svg" : "");
      REQUIRE(system_run(cmd) == 0);
    }
    std::string a = tmp / ("a/" + stem), b = tmp / ("b/" + stem);
    CHECK(mask_wall_time(read_file(a + ".json")) == mask_wall_time(read_file(b + ".json")));
    if (svg) CHECK(read_file(a + ".svg") == read_file(b + ".svg"));
  }
  CHECK(system_run(bin + " audit --web " + quoted(tmp / "absent")) == kUsage);
  CHECK(system_run(bin + " rectify --scenario " + quoted(kScenarios + "/perturbed.json")) == kInconclusive);
}

TEST_CASE("checked-in golden files") {
  TempDir tmp;
  auto same = [&](const std::vector<std::string>& args, const std::string& golden, bool svg) {
    std::string out = tmp / "out.svg";
    std::vector<std::string> a = args;
    if (svg) a.insert(a.end(), {"--svg", out});
    Run r = call(a);
    REQUIRE(r.code == kDefinitive);
    std::string got = svg ? read_file(out) : mask_wall_time(r.out);
    if (std::getenv("WEBAUDIT_UPDATE_GOLDEN")) {
      std::ofstream(kGolden + "/" + golden) << got;
      return;
    }
    CHECK(got == read_file(kGolden + "/" + golden));
  };
  same({"forms-verify"}, "forms-verify.json", false);
  same({"hexagon", "--f", "x+y+x^2*y", "--base", "1,1,1.1,1.2"}, "hexagon.svg", true);
}

TEST_CASE("report helpers") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(mask_wall_time("{\"wall_ms\": 12.5, \"x\": 1}") == "{\"wall_ms\": 0, \"x\": 1}");
  CHECK(number(std::nan("")).is_null());
  std::vector<Sample> s = {{0, 1, 2.0, ""}, {1, 0, -3.0, ""}, {2, 2, std::nullopt, "outside"}};
  Json j = summarize(s, "x", "y");
  CHECK(j["count"] == 2);
  CHECK(j["failed"] == 1);
  CHECK(j["max_abs"] == 3.0);
  CHECK(j["max_abs_at"]["x"] == 1.0);
  CHECK(j["mean"] == -0.5);
}
