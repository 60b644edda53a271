#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chart.hpp"
#include "dirac.hpp"
#include "expr.hpp"

namespace hamdirac {

/// Closed-form plane rotation; the oracle every integration test is held to.
inline std::pair<double, double> exact_rotation(double x, double y,
                                                double alpha) {
  return {x * std::cos(alpha) - y * std::sin(alpha),
          x * std::sin(alpha) + y * std::cos(alpha)};
}

/// One point of the flow: parameter value plus the state coordinates,
/// ordered (fields..., momenta...) when the full phase space is carried.
struct PhaseState {
  double alpha = 0.0;
  std::vector<double> values;
};

/// Per-state monitor values.
struct MonitorRow {
  double hamiltonian = 0.0;
  double radius2 = 0.0;
  std::vector<double> constraints;  // |phi_a|
  double em_residual = 0.0;
};

struct Trajectory {
  std::vector<PhaseState> states;
  std::vector<MonitorRow> monitors;  // aligned with states
};

/// The quantities watched along a trajectory. All are plain Exprs evaluated
/// through eval_numeric at every accepted state — the same objects the
/// symbolic layer produced, never re-derived numerics.
struct FlowMonitors {
  Expr hamiltonian;
  Expr radius2;
  std::vector<Expr> constraints;      // phi_a, recorded as absolute values
  std::optional<Expr> em_residual;    // two-field charts only
};

/// Monitors that watch nothing beyond the squared field radius.
inline FlowMonitors make_monitors(const ChartPtr& chart) {
  Expr r2(chart);
  for (std::size_t i = 0; i < chart->field_count(); ++i) {
    Expr q = Expr::variable(chart, chart->field(i));
    r2 = r2 + q * q;
  }
  return FlowMonitors{Expr(chart), std::move(r2), {}, std::nullopt};
}

/// Monitors for a derived system: the multiplier-substituted Hamiltonian,
/// the squared radius, every constraint, and — on two-field charts — the
/// residual of q0'^2 + q1'^2 = q0 q1' - q1 q0' with the velocities replaced
/// by the field equations' right sides.
inline FlowMonitors make_monitors(
    const ConstrainedSystem& sys,
    const std::vector<std::pair<VarId, Expr>>& field_equations) {
  const ChartPtr& ch = sys.chart;
  FlowMonitors mon = make_monitors(ch);
  mon.hamiltonian = sys.hamiltonian_substituted;
  for (const Constraint& c : sys.constraints) mon.constraints.push_back(c.expr);
  if (ch->field_count() == 2 && field_equations.size() >= 2) {
    const Expr& rf = field_equations[0].second;
    const Expr& rg = field_equations[1].second;
    Expr q0 = Expr::variable(ch, ch->field(0));
    Expr q1 = Expr::variable(ch, ch->field(1));
    mon.em_residual = rf * rf + rg * rg - (q0 * rg - q1 * rf);
  }
  return mon;
}

/// Right-side evaluators for a first-order flow, flattened from Exprs into
/// slot-indexed term lists. Evaluation reproduces eval_numeric of the source
/// expressions bit-for-bit: terms in canonical monomial order, factors in
/// variable order, powers by repeated multiplication, left-to-right sums.
class CompiledField {
 public:
  struct Term {
    double coeff = 0.0;
    std::vector<std::pair<std::size_t, std::uint32_t>> powers;  // slot, exp
  };

  CompiledField(ChartPtr chart, std::vector<VarId> variables,
                std::vector<std::vector<Term>> rhs,
                std::vector<std::pair<VarId, Expr>> completion,
                FlowMonitors monitors)
      : chart_(std::move(chart)),
        variables_(std::move(variables)),
        rhs_(std::move(rhs)),
        completion_(std::move(completion)),
        monitors_(std::move(monitors)) {}

  const ChartPtr& chart() const { return chart_; }
  /// The integrated variables, defining the leading state slots.
  const std::vector<VarId>& variables() const { return variables_; }
  /// Pointwise-defined trailing components (variable, velocity-free Expr in
  /// the integrated variables), appended to every accepted state.
  const std::vector<std::pair<VarId, Expr>>& completion() const {
    return completion_;
  }
  const FlowMonitors& monitors() const { return monitors_; }

  /// Full per-state layout: integrated variables then completed ones.
  std::vector<VarId> layout() const {
    std::vector<VarId> out = variables_;
    for (const auto& [v, e] : completion_) out.push_back(v);
    return out;
  }

  /// Derivatives of the integrated prefix. `state` may be longer than the
  /// prefix (completed components are ignored here).
  void eval(const std::vector<double>& state, std::vector<double>& out) const {
    out.resize(rhs_.size());
    for (std::size_t i = 0; i < rhs_.size(); ++i) {
      double acc = 0.0;
      for (const Term& t : rhs_[i]) {
        double term = t.coeff;
        for (const auto& [slot, exp] : t.powers) {
          for (std::uint32_t k = 0; k < exp; ++k) term *= state[slot];
        }
        acc += term;
      }
      out[i] = acc;
    }
  }

 private:
  ChartPtr chart_;
  std::vector<VarId> variables_;
  std::vector<std::vector<Term>> rhs_;
  std::vector<std::pair<VarId, Expr>> completion_;
  FlowMonitors monitors_;
};

namespace detail {

inline std::vector<CompiledField::Term> flatten_rhs(
    const Expr& e, const std::map<VarId, std::size_t>& slot) {
  const ChartPtr& ch = e.chart();
  std::vector<CompiledField::Term> out;
  out.reserve(e.terms().size());
  for (const auto& [m, c] : e.terms()) {
    CompiledField::Term t;
    t.coeff = to_double(c);
    for (const auto& [v, exp] : m.factors()) {
      auto it = slot.find(v);
      if (it == slot.end()) {
        VarKind k = ch->kind(v);
        if (k == VarKind::Multiplier) {
          throw std::runtime_error(
              "cannot integrate: free multiplier '" + ch->display_name(v) +
              "' in a right side (an undetermined first-class direction has "
              "no numeric flow)");
        }
        if (k == VarKind::Velocity || k == VarKind::Acceleration) {
          throw std::runtime_error("cannot integrate: jet variable '" +
                                   ch->display_name(v) +
                                   "' in a right side; eliminate velocities "
                                   "before compiling");
        }
        throw std::runtime_error("cannot integrate: right side references '" +
                                 ch->display_name(v) +
                                 "', which is not part of the integrated "
                                 "state");
      }
      t.powers.emplace_back(it->second, exp);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace detail

/// Compiles first-order equations (variable, right side) into a field.
/// Right sides must be polynomial in the integrated variables; a free
/// multiplier or leftover jet variable is an error. `completion` lists
/// pointwise-defined trailing components; `monitors` may reference both the
/// integrated and the completed variables.
inline CompiledField compile_field(
    const std::vector<std::pair<VarId, Expr>>& equations, const ChartPtr& chart,
    std::vector<std::pair<VarId, Expr>> completion = {},
    std::optional<FlowMonitors> monitors = std::nullopt) {
  std::map<VarId, std::size_t> slot;
  std::vector<VarId> variables;
  variables.reserve(equations.size());
  for (const auto& [v, rhs] : equations) {
    if (!slot.emplace(v, variables.size()).second) {
      throw std::invalid_argument("compile_field: variable '" +
                                  chart->display_name(v) +
                                  "' has two equations");
    }
    variables.push_back(v);
  }
  std::vector<std::vector<CompiledField::Term>> rhs;
  rhs.reserve(equations.size());
  for (const auto& [v, e] : equations) {
    if (e.chart() != chart) {
      throw std::invalid_argument("compile_field: equation chart mismatch");
    }
    rhs.push_back(detail::flatten_rhs(e, slot));
  }
  for (const auto& [v, e] : completion) {
    for (VarId used : e.variables()) {
      if (!slot.count(used)) {
        throw std::invalid_argument(
            "compile_field: completion for '" + chart->display_name(v) +
            "' references '" + chart->display_name(used) +
            "', which is not integrated");
      }
    }
  }
  return CompiledField(chart, std::move(variables), std::move(rhs),
                       std::move(completion),
                       monitors ? std::move(*monitors) : make_monitors(chart));
}

namespace detail {

inline MonitorRow evaluate_monitors(const FlowMonitors& mon,
                                    const std::map<VarId, double>& point) {
  MonitorRow row;
  row.hamiltonian = eval_numeric(mon.hamiltonian, point);
  row.radius2 = eval_numeric(mon.radius2, point);
  row.constraints.reserve(mon.constraints.size());
  for (const Expr& phi : mon.constraints) {
    row.constraints.push_back(std::fabs(eval_numeric(phi, point)));
  }
  row.em_residual = mon.em_residual ? eval_numeric(*mon.em_residual, point) : 0.0;
  return row;
}

}  // namespace detail

/// Classical fixed-step fourth-order Runge–Kutta from init.alpha through
/// init.alpha + alpha_max; the final step is shortened to land exactly on
/// the right endpoint. Monitors and completed components are evaluated at
/// every accepted state, init included. A non-finite value aborts with the
/// offending alpha.
inline Trajectory integrate(const CompiledField& field, const PhaseState& init,
                            double alpha_max, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("integrate: step must be positive");
  }
  if (!(alpha_max >= 0.0)) {
    throw std::invalid_argument("integrate: alpha_max must be nonnegative");
  }
  const std::size_t n = field.variables().size();
  if (init.values.size() != n) {
    throw std::invalid_argument(
        "integrate: initial state has " + std::to_string(init.values.size()) +
        " components, the field integrates " + std::to_string(n));
  }

  Trajectory traj;
  auto accept = [&](double alpha, const std::vector<double>& y) {
    for (double v : y) {
      if (!std::isfinite(v)) {
        throw std::runtime_error(
            "integrate: non-finite value at alpha=" + std::to_string(alpha));
      }
    }
    PhaseState state{alpha, y};
    std::map<VarId, double> point;
    for (std::size_t i = 0; i < n; ++i) point[field.variables()[i]] = y[i];
    for (const auto& [v, e] : field.completion()) {
      double value = eval_numeric(e, point);
      if (!std::isfinite(value)) {
        throw std::runtime_error(
            "integrate: non-finite value at alpha=" + std::to_string(alpha));
      }
      state.values.push_back(value);
      point[v] = value;
    }
    traj.monitors.push_back(detail::evaluate_monitors(field.monitors(), point));
    traj.states.push_back(std::move(state));
  };

  std::vector<double> y = init.values;
  accept(init.alpha, y);
  if (alpha_max == 0.0) return traj;

  const double r = alpha_max / step;
  std::size_t steps = static_cast<std::size_t>(std::ceil(r - 1e-9));
  if (steps == 0) steps = 1;

  std::vector<double> k1, k2, k3, k4, scratch(n);
  double alpha = init.alpha;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double target = (k == steps)
                              ? init.alpha + alpha_max
                              : init.alpha + static_cast<double>(k) * step;
    const double h = target - alpha;
    field.eval(y, k1);
    for (std::size_t i = 0; i < n; ++i) scratch[i] = y[i] + 0.5 * h * k1[i];
    field.eval(scratch, k2);
    for (std::size_t i = 0; i < n; ++i) scratch[i] = y[i] + 0.5 * h * k2[i];
    field.eval(scratch, k3);
    for (std::size_t i = 0; i < n; ++i) scratch[i] = y[i] + h * k3[i];
    field.eval(scratch, k4);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    alpha = target;
    accept(alpha, y);
  }
  return traj;
}

/// Maxima over a trajectory: drift of H and radius^2 from their initial
/// values, and absolute size of every constraint and of the on-shell
/// residual.
struct MonitorReport {
  double max_hamiltonian_drift = 0.0;
  double max_radius2_drift = 0.0;
  std::vector<double> max_constraint;
  double max_em_residual = 0.0;
};

inline MonitorReport monitor_report(const Trajectory& traj) {
  if (traj.monitors.empty()) {
    throw std::invalid_argument("monitor_report: empty trajectory");
  }
  const MonitorRow& first = traj.monitors.front();
  MonitorReport rep;
  rep.max_constraint.assign(first.constraints.size(), 0.0);
  for (const MonitorRow& row : traj.monitors) {
    rep.max_hamiltonian_drift = std::max(
        rep.max_hamiltonian_drift, std::fabs(row.hamiltonian - first.hamiltonian));
    rep.max_radius2_drift =
        std::max(rep.max_radius2_drift, std::fabs(row.radius2 - first.radius2));
    for (std::size_t a = 0; a < row.constraints.size(); ++a) {
      rep.max_constraint[a] = std::max(rep.max_constraint[a], row.constraints[a]);
    }
    rep.max_em_residual = std::max(rep.max_em_residual, std::fabs(row.em_residual));
  }
  return rep;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// CSV export: header `alpha,<state vars...>,H,radius2,<phi_a...>,em_residual`,
/// one row per accepted state, every float with 17 significant digits.
inline void write_csv(std::ostream& os, const Trajectory& traj,
                      const CompiledField& field) {
  os << "alpha";
  for (VarId v : field.layout()) os << ',' << field.chart()->display_name(v);
  os << ",H,radius2";
  for (std::size_t a = 0; a < field.monitors().constraints.size(); ++a) {
    os << ",phi_" << (a + 1);
  }
  os << ",em_residual\n";
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const PhaseState& st = traj.states[i];
    const MonitorRow& row = traj.monitors[i];
    os << detail::format_double(st.alpha);
    for (double v : st.values) os << ',' << detail::format_double(v);
    os << ',' << detail::format_double(row.hamiltonian) << ','
       << detail::format_double(row.radius2);
    for (double v : row.constraints) os << ',' << detail::format_double(v);
    os << ',' << detail::format_double(row.em_residual) << '\n';
  }
}

}  // namespace hamdirac
