#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "webaudit/field.hpp"

namespace webaudit::field {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw FieldError(FieldError::Kind::Format, msg); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view s, const std::string& context) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    bad(context + ": '" + std::string(s) + "' is not a real number");
  if (std::isnan(v)) bad(context + ": NaN cell");
  if (!std::isfinite(v)) bad(context + ": non-finite cell");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t k = s.find(sep, start);
    out.push_back(s.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start));
    if (k == std::string_view::npos) return out;
    start = k + 1;
  }
}

void check_axis(const std::vector<double>& axis, double origin, double h, int n, const char* name) {
  if (static_cast<int>(axis.size()) != n)
    bad(std::string(name) + " axis lists " + std::to_string(axis.size()) + " coordinates, expected " +
        std::to_string(n));
  for (int k = 1; k < n; ++k)
    if (!(axis[k] > axis[k - 1])) bad(std::string(name) + " axis is not strictly increasing");
  if (std::abs(axis[0] - origin) > 1e-9 * std::max(std::abs(h), std::abs(origin)))
    bad(std::string(name) + " axis does not start at the declared origin");
  for (int k = 1; k < n; ++k) {
    double step = axis[k] - axis[k - 1];
    if (std::abs(step - h) > 1e-9 * std::abs(h))
      bad(std::string(name) + " axis spacing is not uniform (step " + std::to_string(k) + ")");
  }
}

std::string shortest(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

GridData grid_from_csv_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::map<std::string, std::string, std::less<>> header;
  std::vector<double> xs;
  std::vector<double> ys;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      std::string_view body = trim(s.substr(1));
      if (!have_header) {
        std::istringstream words{std::string(body)};
        std::string w;
        while (words >> w) {
          auto eq = w.find('=');
          if (eq == std::string::npos) bad("header token '" + w + "' is not key=value");
          header[w.substr(0, eq)] = w.substr(eq + 1);
        }
        have_header = true;
      } else if (body.starts_with("x=") || body.starts_with("y=")) {
        auto& axis = body.front() == 'x' ? xs : ys;
        for (auto cell : split(body.substr(2), ',')) axis.push_back(parse_real(cell, "axis line"));
      }
      continue;
    }
    if (!have_header) bad("missing '# x0=... y0=... hx=... hy=... nx=... ny=...' header");
    std::vector<double> row;
    for (auto cell : split(s, ',')) row.push_back(parse_real(cell, "line " + std::to_string(line_no)));
    rows.push_back(std::move(row));
  }
  if (!have_header) bad("empty grid file");
  for (const char* key : {"x0", "y0", "hx", "hy", "nx", "ny"})
    if (!header.count(key)) bad(std::string("header lacks '") + key + "'");

  GridData g;
  g.x0 = parse_real(header["x0"], "x0");
  g.y0 = parse_real(header["y0"], "y0");
  g.hx = parse_real(header["hx"], "hx");
  g.hy = parse_real(header["hy"], "hy");
  double nx = parse_real(header["nx"], "nx");
  double ny = parse_real(header["ny"], "ny");
  if (nx != std::floor(nx) || ny != std::floor(ny) || nx < 2 || ny < 2 || nx > 1e6 || ny > 1e6)
    bad("nx and ny must be integers >= 2");
  g.nx = static_cast<int>(nx);
  g.ny = static_cast<int>(ny);
  if (!(g.hx > 0) || !(g.hy > 0)) bad("non-monotone axes: spacing must be positive");
  if (!xs.empty()) check_axis(xs, g.x0, g.hx, g.nx, "x");
  if (!ys.empty()) check_axis(ys, g.y0, g.hy, g.ny, "y");
  if (static_cast<int>(rows.size()) != g.ny)
    bad("expected " + std::to_string(g.ny) + " rows, found " + std::to_string(rows.size()));
  g.values.reserve(static_cast<std::size_t>(g.nx) * g.ny);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != g.nx)
      bad("ragged row " + std::to_string(r) + ": " + std::to_string(rows[r].size()) + " cells, expected " +
          std::to_string(g.nx));
    g.values.insert(g.values.end(), rows[r].begin(), rows[r].end());
  }
  return g;
}

GridData grid_from_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) bad("cannot open grid file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return grid_from_csv_text(ss.str());
}

std::string grid_to_csv_text(const GridData& g) {
  std::string out = "# x0=" + shortest(g.x0) + " y0=" + shortest(g.y0) + " hx=" + shortest(g.hx) +
                    " hy=" + shortest(g.hy) + " nx=" + std::to_string(g.nx) + " ny=" + std::to_string(g.ny) + "\n";
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (i) out += ',';
      out += shortest(g.at(i, j));
    }
    out += '\n';
  }
  return out;
}

void grid_to_csv(const GridData& g, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) bad("cannot write grid file '" + path + "'");
  f << grid_to_csv_text(g);
  if (!f) bad("write failed for '" + path + "'");
}

}  // namespace webaudit::field
