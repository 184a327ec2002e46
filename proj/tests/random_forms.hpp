#pragma once

#include <random>
#include <string>
#include <vector>

#include "webaudit/forms.hpp"

namespace webaudit::testing {

/// Polynomial of total degree <= 2 in `vars` with small integer coefficients.
inline expr::Expression random_poly(std::mt19937_64& rng, const std::vector<std::string>& vars) {
  using expr::Expression;
  std::uniform_int_distribution<int> c(-3, 3);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(vars.size()) - 1);
  std::uniform_int_distribution<int> terms(1, 3);
  Expression out = Expression::constant(c(rng));
  for (int k = terms(rng); k > 0; --k) {
    int deg = std::uniform_int_distribution<int>(1, 2)(rng);
    Expression m = Expression::constant(c(rng));
    for (int j = 0; j < deg; ++j) m = m * Expression::variable(vars[pick(rng)]);
    out = out + m;
  }
  return expr::simplify(out);
}

/// Sum of two random monomial forms of the given degree.
inline forms::DifferentialForm random_form(std::mt19937_64& rng, const forms::Coordinates& cs, int degree) {
  const auto& names = cs->names();
  forms::DifferentialForm out(cs, degree);
  std::uniform_int_distribution<int> pick(0, cs->dimension() - 1);
  for (int k = 0; k < 2; ++k) {
    std::vector<std::string> idx;
    for (int j = 0; j < degree; ++j) idx.push_back(names[pick(rng)]);
    out = out + forms::DifferentialForm::monomial(cs, random_poly(rng, names), idx);
  }
  return out;
}

inline int random_degree(std::mt19937_64& rng) { return std::uniform_int_distribution<int>(0, 3)(rng); }

}  // namespace webaudit::testing
