#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace webaudit::numerics {

class RootError : public std::runtime_error {
 public:
  enum class Kind { NotBracketed, NotMonotone, Evaluation };
  RootError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct RootOptions {
  double bisect_rel = 1e-3;   // bisection until the bracket is this fraction of its start width
  double newton_rel = 1e-12;  // Newton polish until |step| <= newton_rel * max(1, |u|)
  int monotone_samples = 9;   // interior samples used to confirm strict monotonicity
  int max_newton = 60;
};

/// Root of g(u) = target on [lo, hi] for g strictly monotone there.
/// Bracketed bisection to `bisect_rel`, then safeguarded Newton using dg.
double solve_monotone(const std::function<double(double)>& g, const std::function<double(double)>& dg, double lo,
                      double hi, double target = 0.0, const RootOptions& opt = {});

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule (n >= 1), nodes ascending.
const GaussRule& gauss_legendre(int n);

/// Composite Gauss-Legendre integral of f over [a, b]; a > b gives the signed value.
double integrate(const std::function<double(double)>& f, double a, double b, int points = 8, int panels = 1);

/// Compact second-order central difference weights for the k-th derivative
/// (k = 0..4) on unit spacing, centred; size is 2 * radius + 1.
std::span<const double> central_stencil(int k);
int stencil_radius(int k);

/// Richardson extrapolation of estimates taken at steps h, 2h, 4h, ...
/// assuming an error expansion in even powers of h.
double richardson(std::span<const double> estimates);

/// Same, also returning |best - next best| as an error estimate.
double richardson(std::span<const double> estimates, double& error);

/// Lagrange interpolation weights for nodes 0, 1, ..., order evaluated at t.
std::vector<double> lagrange_weights(double t, int order);

}  // namespace webaudit::numerics
