#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace webaudit::cli {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

Svg::Svg(double width, double height, std::string title) : width_(width), height_(height), title_(std::move(title)) {}

void Svg::frame(const Frame& f, const std::string& caption, const char* xname, const char* yname) {
  body_.push_back("<rect class=\"frame\" x=\"" + fmt(f.left) + "\" y=\"" + fmt(f.top) + "\" width=\"" + fmt(f.width) +
                  "\" height=\"" + fmt(f.height) + "\" fill=\"none\" stroke=\"#444\"/>");
  text(f.left + f.width / 2, f.top - 8, caption);
  text(f.left + f.width / 2, f.top + f.height + 28, xname);
  text(f.left - 30, f.top + f.height / 2, yname);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", f.data.x.lo);
  text(f.left, f.top + f.height + 14, buf, "start", 9);
  std::snprintf(buf, sizeof buf, "%.4g", f.data.x.hi);
  text(f.left + f.width, f.top + f.height + 14, buf, "end", 9);
  std::snprintf(buf, sizeof buf, "%.4g", f.data.y.lo);
  text(f.left - 4, f.top + f.height, buf, "end", 9);
  std::snprintf(buf, sizeof buf, "%.4g", f.data.y.hi);
  text(f.left - 4, f.top + 9, buf, "end", 9);
}

void Svg::polyline(const Frame& f, const std::vector<Point>& pts, const std::string& cls, const std::string& stroke,
                   double width, const std::string& extra) {
  if (pts.size() < 2) return;
  std::string s = "<polyline class=\"" + cls + "\"" + extra + " fill=\"none\" stroke=\"" + stroke +
                  "\" stroke-width=\"" + fmt(width) + "\" points=\"";
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (k) s += ' ';
    s += fmt(f.px(pts[k].x)) + "," + fmt(f.py(pts[k].y));
  }
  body_.push_back(s + "\"/>");
}

void Svg::segments(const Frame& f, const std::vector<std::pair<Point, Point>>& segs, const std::string& cls,
                   const std::string& stroke, const std::string& extra) {
  if (segs.empty()) return;
  std::string d;
  for (const auto& [a, b] : segs)
    d += "M" + fmt(f.px(a.x)) + " " + fmt(f.py(a.y)) + "L" + fmt(f.px(b.x)) + " " + fmt(f.py(b.y));
  body_.push_back("<path class=\"" + cls + "\"" + extra + " fill=\"none\" stroke=\"" + stroke + "\" d=\"" + d + "\"/>");
}

void Svg::probe_cell(const Frame& f, Point c, double w, double h, const std::string& fill, const std::string& title) {
  double x0 = f.px(c.x - w / 2), x1 = f.px(c.x + w / 2);
  double y0 = f.py(c.y + h / 2), y1 = f.py(c.y - h / 2);
  body_.push_back("<rect class=\"probe\" x=\"" + fmt(x0) + "\" y=\"" + fmt(y0) + "\" width=\"" + fmt(x1 - x0) +
                  "\" height=\"" + fmt(y1 - y0) + "\" fill=\"" + fill + "\"><title>" + escape(title) +
                  "</title></rect>");
  ++probes_;
}

void Svg::probe_dot(const Frame& f, Point c, const std::string& fill, const std::string& title) {
  body_.push_back("<circle class=\"probe\" cx=\"" + fmt(f.px(c.x)) + "\" cy=\"" + fmt(f.py(c.y)) +
                  "\" r=\"3.000\" fill=\"" + fill + "\"><title>" + escape(title) + "</title></circle>");
  ++probes_;
}

void Svg::text(double x, double y, const std::string& s, const std::string& anchor, int size) {
  body_.push_back("<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" text-anchor=\"" + anchor + "\" font-size=\"" +
                  std::to_string(size) + "\" font-family=\"sans-serif\">" + escape(s) + "</text>");
}

std::string Svg::str() const {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width_) + "\" height=\"" + fmt(height_) +
         "\" viewBox=\"0 0 " + fmt(width_) + " " + fmt(height_) + "\" data-probes=\"" + std::to_string(probes_) +
         "\">\n";
  out += "<title>" + escape(title_) + "</title>\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + fmt(width_) + "\" height=\"" + fmt(height_) + "\" fill=\"white\"/>\n";
  for (const auto& b : body_) out += b + "\n";
  out += "</svg>\n";
  return out;
}

std::string heat_colour(double ratio_log10) {
  // blue (33,102,172) -> white -> red (178,24,43) over [-3, 3]
  double t = std::clamp(ratio_log10 / 3.0, -1.0, 1.0);
  int r, g, b;
  if (t < 0) {
    double u = -t;
    r = static_cast<int>(std::lround(255 + (33 - 255) * u));
    g = static_cast<int>(std::lround(255 + (102 - 255) * u));
    b = static_cast<int>(std::lround(255 + (172 - 255) * u));
  } else {
    r = static_cast<int>(std::lround(255 + (178 - 255) * t));
    g = static_cast<int>(std::lround(255 + (24 - 255) * t));
    b = static_cast<int>(std::lround(255 + (43 - 255) * t));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::vector<std::pair<Point, Point>> contour(const std::function<double(Point)>& g, const Rect& r, int n,
                                             double level) {
  std::vector<double> v(static_cast<std::size_t>(n) * n);
  auto node = [&](int i, int j) { return Point{r.x.lo + r.x.width() * i / (n - 1), r.y.lo + r.y.width() * j / (n - 1)}; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(j) * n + i] = g(node(i, j)) - level;
  auto at = [&](int i, int j) { return v[static_cast<std::size_t>(j) * n + i]; };
  auto cross = [&](int i0, int j0, int i1, int j1) {
    double a = at(i0, j0), b = at(i1, j1);
    double t = a / (a - b);
    Point p = node(i0, j0), q = node(i1, j1);
    return Point{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
  };
  std::vector<std::pair<Point, Point>> out;
  for (int j = 0; j + 1 < n; ++j) {
    for (int i = 0; i + 1 < n; ++i) {
      double c[4] = {at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
      if (!std::all_of(c, c + 4, [](double x) { return std::isfinite(x); })) continue;
      // edges: bottom, right, top, left
      const int e[4][4] = {{i, j, i + 1, j}, {i + 1, j, i + 1, j + 1}, {i + 1, j + 1, i, j + 1}, {i, j + 1, i, j}};
      std::vector<Point> hits;
      for (int k = 0; k < 4; ++k) {
        double a = c[k], b = c[(k + 1) % 4];
        if ((a < 0) != (b < 0)) hits.push_back(cross(e[k][0], e[k][1], e[k][2], e[k][3]));
      }
      if (hits.size() == 2) out.push_back({hits[0], hits[1]});
      if (hits.size() == 4) {
        out.push_back({hits[0], hits[1]});
        out.push_back({hits[2], hits[3]});
      }
    }
  }
  return out;
}

}  // namespace webaudit::cli
