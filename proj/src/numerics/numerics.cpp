#include "webaudit/numerics.hpp"

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace webaudit::numerics {

double solve_monotone(const std::function<double(double)>& g, const std::function<double(double)>& dg, double lo,
                      double hi, double target, const RootOptions& opt) {
  if (!(lo < hi)) throw RootError(RootError::Kind::NotBracketed, "empty root bracket");
  auto h = [&](double u) {
    double v = 0.0;
    try {
      v = g(u) - target;
    } catch (const std::exception& e) {
      throw RootError(RootError::Kind::Evaluation, std::string("evaluation failed in root solve: ") + e.what());
    }
    if (!std::isfinite(v)) throw RootError(RootError::Kind::Evaluation, "non-finite value in root solve");
    return v;
  };

  const int n = std::max(opt.monotone_samples, 0) + 2;
  std::vector<double> samples(n);
  for (int k = 0; k < n; ++k) samples[k] = h(lo + (hi - lo) * k / (n - 1));
  double dir = 0.0;
  for (int k = 1; k < n; ++k) {
    double step = samples[k] - samples[k - 1];
    double s = step > 0 ? 1.0 : step < 0 ? -1.0 : 0.0;
    if (s == 0.0 || (dir != 0.0 && s != dir))
      throw RootError(RootError::Kind::NotMonotone, "function is not strictly monotone on the bracket");
    dir = s;
  }
  double flo = samples.front();
  double fhi = samples.back();
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw RootError(RootError::Kind::NotBracketed, "root not bracketed");

  // Narrow to the sample cell containing the sign change.
  for (int k = 1; k < n; ++k) {
    if ((samples[k - 1] > 0) != (samples[k] > 0) || samples[k] == 0.0) {
      double a = lo + (hi - lo) * (k - 1) / (n - 1);
      double b = lo + (hi - lo) * k / (n - 1);
      lo = a;
      hi = b;
      flo = samples[k - 1];
      break;
    }
  }

  const double stop = opt.bisect_rel * (hi - lo) * (n - 1);
  while (hi - lo > stop) {
    double mid = 0.5 * (lo + hi);
    double fm = h(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }

  double u = 0.5 * (lo + hi);
  for (int it = 0; it < opt.max_newton; ++it) {
    double fu = h(u);
    if (fu == 0.0) return u;
    if ((fu > 0) == (flo > 0)) {
      lo = u;
    } else {
      hi = u;
    }
    double d = 0.0;
    try {
      d = dg(u);
    } catch (const std::exception&) {
      d = 0.0;
    }
    double next = (d != 0.0 && std::isfinite(d)) ? u - fu / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    double step = std::abs(next - u);
    u = next;
    if (step <= opt.newton_rel * std::max(1.0, std::abs(u))) return u;
  }
  return u;
}

namespace {

GaussRule make_rule(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("Gauss-Legendre rule needs n >= 1");
  static std::mutex mu;
  static std::map<int, GaussRule> rules;
  std::lock_guard lock(mu);
  auto it = rules.find(n);
  if (it == rules.end()) it = rules.emplace(n, make_rule(n)).first;
  return it->second;
}

double integrate(const std::function<double(double)>& f, double a, double b, int points, int panels) {
  if (a == b) return 0.0;
  const GaussRule& rule = gauss_legendre(points);
  const double width = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    double left = a + p * width;
    double half = 0.5 * width;
    double mid = left + half;
    double sum = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) sum += rule.weights[k] * f(mid + half * rule.nodes[k]);
    total += half * sum;
  }
  return total;
}

std::span<const double> central_stencil(int k) {
  static constexpr std::array<double, 1> d0{1.0};
  static constexpr std::array<double, 3> d1{-0.5, 0.0, 0.5};
  static constexpr std::array<double, 3> d2{1.0, -2.0, 1.0};
  static constexpr std::array<double, 5> d3{-0.5, 1.0, 0.0, -1.0, 0.5};
  static constexpr std::array<double, 5> d4{1.0, -4.0, 6.0, -4.0, 1.0};
  switch (k) {
    case 0:
      return d0;
    case 1:
      return d1;
    case 2:
      return d2;
    case 3:
      return d3;
    case 4:
      return d4;
    default:
      throw std::invalid_argument("central stencils exist for derivative orders 0..4");
  }
}

int stencil_radius(int k) { return static_cast<int>(central_stencil(k).size() / 2); }

double richardson(std::span<const double> estimates, double& error) {
  if (estimates.empty()) throw std::invalid_argument("richardson: no estimates");
  std::vector<double> t(estimates.begin(), estimates.end());
  error = 0.0;
  const std::size_t n = t.size();
  double factor = 1.0;
  for (std::size_t level = 1; level < n; ++level) {
    factor *= 4.0;
    for (std::size_t i = 0; i + level < n; ++i) {
      // t[i] was built from finer steps than t[i+1]
      t[i] = (factor * t[i] - t[i + 1]) / (factor - 1.0);
    }
    if (level == n - 1) error = std::abs(t[0] - estimates[0]);
  }
  if (n == 1) error = 0.0;
  return t[0];
}

double richardson(std::span<const double> estimates) {
  double err = 0.0;
  return richardson(estimates, err);
}

std::vector<double> lagrange_weights(double t, int order) {
  if (order < 1) throw std::invalid_argument("interpolation order must be >= 1");
  std::vector<double> w(order + 1, 1.0);
  for (int k = 0; k <= order; ++k)
    for (int m = 0; m <= order; ++m)
      if (m != k) w[k] *= (t - m) / static_cast<double>(k - m);
  return w;
}

}  // namespace webaudit::numerics
