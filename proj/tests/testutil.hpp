#pragma once

#include <hamdirac/chart.hpp>
#include <hamdirac/expr.hpp>
#include <hamdirac/rational.hpp>

#include <random>
#include <string>
#include <vector>

namespace testutil {

using hamdirac::ChartPtr;
using hamdirac::Expr;
using hamdirac::Monomial;
using hamdirac::Rational;
using hamdirac::VarId;

/// Variable by (display) name; throws if the chart does not know it.
inline Expr V(const ChartPtr& chart, const std::string& name) {
  auto v = chart->find(name);
  if (!v) throw std::invalid_argument("test variable not in chart: " + name);
  return Expr::variable(chart, *v);
}

inline Expr C(const ChartPtr& chart, long long num, long long den = 1) {
  return Expr::constant(chart, hamdirac::make_rational(num, den));
}

/// Random polynomial over the given variables: up to `max_terms` terms of
/// total degree <= `max_degree`, small rational coefficients. Terms may
/// cancel, so the result can have fewer terms or be zero.
inline Expr random_expr(const ChartPtr& chart, const std::vector<VarId>& vars,
                        std::mt19937& rng, int max_terms = 5, int max_degree = 3) {
  std::uniform_int_distribution<int> term_count(1, max_terms);
  std::uniform_int_distribution<int> degree(0, max_degree);
  std::uniform_int_distribution<std::size_t> var_pick(0, vars.size() - 1);
  std::uniform_int_distribution<long long> numer(-9, 9);
  std::uniform_int_distribution<long long> denom(1, 9);

  Expr out(chart);
  const int n_terms = term_count(rng);
  for (int t = 0; t < n_terms; ++t) {
    std::vector<Monomial::Factor> factors;
    const int d = degree(rng);
    for (int k = 0; k < d; ++k) factors.emplace_back(vars[var_pick(rng)], 1u);
    out = out + Expr::term(chart, Monomial::from_factors(std::move(factors)),
                           hamdirac::make_rational(numer(rng), denom(rng)));
  }
  return out;
}

/// Random evaluation point over the given variables, coordinates in [-2, 2].
inline std::map<VarId, double> random_point(const std::vector<VarId>& vars,
                                            std::mt19937& rng) {
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::map<VarId, double> point;
  for (VarId v : vars) point[v] = coord(rng);
  return point;
}

}  // namespace testutil
