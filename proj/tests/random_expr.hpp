#pragma once

#include <random>

#include "webaudit/expr.hpp"

namespace webaudit::testing {

/// Random expression over {x, y} with at most `depth` levels of operators,
/// smooth wherever it does not overflow.
inline expr::Expression random_expression(std::mt19937_64& rng, int depth) {
  using expr::Expression;
  using expr::Op;
  std::uniform_int_distribution<int> pick(0, 99);
  if (depth <= 0 || pick(rng) < 20) {
    int leaf = pick(rng);
    if (leaf < 35) return Expression::variable("x");
    if (leaf < 70) return Expression::variable("y");
    std::uniform_int_distribution<int> c(-4, 6);
    int v = c(rng);
    return Expression::constant(leaf < 85 ? v : v / 4.0);
  }
  int k = pick(rng);
  auto sub = [&] { return random_expression(rng, depth - 1); };
  if (k < 8) return -sub();
  if (k < 14) return expr::exp(sub() / Expression::constant(4.0));
  // guarded shapes reuse one subtree so the argument stays positive
  if (k < 20) {
    Expression a = sub();
    return expr::ln(Expression::constant(1.0) + a * a);
  }
  if (k < 26) return expr::sqrt(Expression::constant(2.0) + expr::exp(sub()));
  if (k < 46) return sub() + sub();
  if (k < 60) return sub() - sub();
  if (k < 78) return sub() * sub();
  if (k < 88) {
    Expression a = sub();
    return sub() / (Expression::constant(3.0) + a * a);
  }
  std::uniform_int_distribution<int> p(0, 3);
  if (k < 94) return expr::pow(sub(), Expression::constant(p(rng)));
  Expression a = sub();
  return expr::pow(Expression::constant(1.5) + a * a, sub() / Expression::constant(5.0));
}

}  // namespace webaudit::testing
