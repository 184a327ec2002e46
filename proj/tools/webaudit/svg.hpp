#pragma once

#include <functional>
#include <string>
#include <vector>

#include "webaudit/field.hpp"

namespace webaudit::cli {

using field::Point;
using field::Rect;

/// Maps a data rectangle onto a pixel box, y up.
struct Frame {
  Rect data;
  double left = 0, top = 0, width = 300, height = 300;
  double px(double x) const { return left + (x - data.x.lo) / data.x.width() * width; }
  double py(double y) const { return top + height - (y - data.y.lo) / data.y.width() * height; }
};

/// Minimal SVG document with fixed three-decimal coordinates.
class Svg {
 public:
  Svg(double width, double height, std::string title);

  /// Number of elements of class "probe", written as data-probes on the root.
  int probes() const { return probes_; }

  void frame(const Frame& f, const std::string& caption, const char* xname, const char* yname);
  void polyline(const Frame& f, const std::vector<Point>& pts, const std::string& cls, const std::string& stroke,
                double width = 1.0, const std::string& extra = "");
  /// Disjoint segments drawn as one path.
  void segments(const Frame& f, const std::vector<std::pair<Point, Point>>& segs, const std::string& cls,
                const std::string& stroke, const std::string& extra = "");
  void probe_cell(const Frame& f, Point c, double w, double h, const std::string& fill, const std::string& title);
  void probe_dot(const Frame& f, Point c, const std::string& fill, const std::string& title);
  void text(double x, double y, const std::string& s, const std::string& anchor = "middle", int size = 11);

  std::string str() const;

 private:
  double width_, height_;
  std::string title_;
  std::vector<std::string> body_;
  int probes_ = 0;
};

std::string fmt(double v);
std::string escape(const std::string& s);

/// Diverging colour for log10(|r| / tol): blue well inside, white at the tolerance, red beyond.
std::string heat_colour(double ratio_log10);

/// Marching-squares segments of g = level on an n x n lattice of r; NaN cells skipped.
std::vector<std::pair<Point, Point>> contour(const std::function<double(Point)>& g, const Rect& r, int n,
                                             double level);

}  // namespace webaudit::cli
