#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "chart.hpp"
#include "expr.hpp"

namespace hamdirac {

/// Formal total derivative along trajectories: extends q_i -> q_i',
/// q_i' -> q_i'' as a derivation. Defined on expressions of jet order <= 1;
/// anything whose evolution is not prescribed by the jet structure
/// (second jets, momenta, multipliers) is rejected.
inline Expr total_derivative(const Expr& e) {
  const ChartPtr& ch = e.chart();
  Expr result(ch);
  for (const auto& [m, c] : e.terms()) {
    // D(c * prod v^e) = c * sum_v e * v^(e-1) * D(v) * rest
    for (std::size_t i = 0; i < m.factors().size(); ++i) {
      const auto [v, exp] = m.factors()[i];
      switch (ch->kind(v)) {
        case VarKind::Field:
        case VarKind::Velocity:
          break;
        case VarKind::Acceleration:
          throw std::invalid_argument(
              "total_derivative: second jet '" + ch->display_name(v) +
              "' would need a third jet, which the chart does not carry");
        default:
          throw std::invalid_argument(
              "total_derivative: variable '" + ch->display_name(v) +
              "' has no prescribed evolution");
      }
      std::vector<Monomial::Factor> rest = m.factors();
      --rest[i].second;
      Expr piece = Expr::term(ch, Monomial::from_factors(std::move(rest)),
                              c * Rational(exp));
      result = result + piece * Expr::variable(ch, ch->kind(v) == VarKind::Field
                                                       ? ch->velocity_of(v)
                                                       : ch->acceleration_of(v));
    }
  }
  return result;
}

/// Euler–Lagrange residuals E_i = dL/dq_i - D(dL/dq_i'), one per field, kept
/// unnormalized: two flows are compared by substituting them into E_i and
/// asking for the zero Expr, never by matching a particular scaled form.
struct ELSystem {
  ChartPtr chart;
  std::vector<Expr> residuals;  // aligned with chart field order
};

inline ELSystem euler_lagrange(const Expr& lagrangian) {
  const ChartPtr& ch = lagrangian.chart();
  for (VarId v : lagrangian.variables()) {
    VarKind k = ch->kind(v);
    if (k != VarKind::Field && k != VarKind::Velocity) {
      throw std::invalid_argument(
          "euler_lagrange: Lagrangian must be polynomial in fields and "
          "velocities only, found '" +
          ch->display_name(v) + "'");
    }
  }
  ELSystem out{ch, {}};
  out.residuals.reserve(ch->field_count());
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    Expr dq = partial_derivative(lagrangian, ch->field(i));
    Expr dv = partial_derivative(lagrangian, ch->velocity(i));
    out.residuals.push_back(dq - total_derivative(dv));
  }
  return out;
}

/// One-parameter flow given by infinitesimal generators xi_i(q), one per
/// field, each a polynomial in the field variables only.
class LieSystem {
 public:
  LieSystem(ChartPtr chart, std::vector<Expr> generators)
      : chart_(std::move(chart)), generators_(std::move(generators)) {
    if (!chart_) throw std::invalid_argument("LieSystem: null chart");
    if (generators_.size() != chart_->field_count()) {
      throw std::invalid_argument("LieSystem: need one generator per field");
    }
    for (const Expr& xi : generators_) {
      if (xi.chart() != chart_) {
        throw std::invalid_argument("LieSystem: generator from a different chart");
      }
      for (VarId v : xi.variables()) {
        if (chart_->kind(v) != VarKind::Field) {
          throw std::invalid_argument(
              "LieSystem: generators must contain field variables only, "
              "found '" +
              chart_->display_name(v) + "'");
        }
      }
    }
  }

  const ChartPtr& chart() const { return chart_; }
  const std::vector<Expr>& generators() const { return generators_; }
  const Expr& generator(std::size_t i) const { return generators_.at(i); }

 private:
  ChartPtr chart_;
  std::vector<Expr> generators_;
};

/// The first-order system q_i' = xi_i(q) as (velocity variable, rhs) pairs.
inline std::vector<std::pair<VarId, Expr>> lie_equations_from_generators(
    const LieSystem& gen) {
  const ChartPtr& ch = gen.chart();
  std::vector<std::pair<VarId, Expr>> eqs;
  eqs.reserve(ch->field_count());
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    eqs.emplace_back(ch->velocity(i), gen.generator(i));
  }
  return eqs;
}

/// Prolongation of the flow to second order:
/// q_i'' = sum_j (dxi_i/dq_j) * xi_j, as (acceleration variable, rhs) pairs.
inline std::vector<std::pair<VarId, Expr>> second_order_form(const LieSystem& gen) {
  const ChartPtr& ch = gen.chart();
  std::vector<std::pair<VarId, Expr>> eqs;
  eqs.reserve(ch->field_count());
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    Expr rhs(ch);
    for (std::size_t j = 0; j < ch->field_count(); ++j) {
      rhs = rhs + partial_derivative(gen.generator(i), ch->field(j)) *
                      gen.generator(j);
    }
    eqs.emplace_back(ch->acceleration(i), rhs);
  }
  return eqs;
}

/// Outcome of checking the Euler–Lagrange equations against a flow.
/// `residuals` is aligned with the chart's field order; `equivalent` holds
/// exactly when every residual is the zero Expr.
struct ElLieComparison {
  bool equivalent = false;
  std::vector<Expr> residuals;
};

/// Substitutes the flow (q' -> xi, q'' -> prolongation) into each EL residual.
inline ElLieComparison verify_el_equals_lie(const ELSystem& el,
                                            const LieSystem& gen) {
  if (el.chart != gen.chart()) {
    throw std::invalid_argument("verify_el_equals_lie: charts differ");
  }
  const ChartPtr& ch = el.chart;
  std::map<VarId, Expr> flow;
  for (const auto& [v, rhs] : lie_equations_from_generators(gen)) {
    flow.emplace(v, rhs);
  }
  for (const auto& [v, rhs] : second_order_form(gen)) {
    flow.emplace(v, rhs);
  }
  ElLieComparison out;
  out.equivalent = true;
  out.residuals.reserve(el.residuals.size());
  for (const Expr& e : el.residuals) {
    Expr r = substitute(e, flow);
    out.equivalent = out.equivalent && r.is_zero();
    out.residuals.push_back(std::move(r));
  }
  return out;
}

}  // namespace hamdirac
