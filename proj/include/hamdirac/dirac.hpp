#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chart.hpp"
#include "expr.hpp"
#include "variational.hpp"

namespace hamdirac {

/// One constraint in solved (triangular) form: phi = p - h, where p is a
/// single momentum variable with unit coefficient and h is free of velocities
/// and of every momentum that some constraint solves for. h may still involve
/// unsolved momenta (a degenerate kinetic term can tie two momenta together,
/// as in p_f = p_g).
struct Constraint {
  std::size_t index = 0;  // 1-based label: phi_<index>
  bool primary = true;
  VarId momentum;  // the solved momentum p
  Expr solved;     // h
  Expr expr;       // phi = p - h
};

enum class ConstraintClass { FirstClass, SecondClass };

namespace detail {

using RationalMatrix = std::vector<std::vector<Rational>>;

constexpr std::size_t kNoPivot = static_cast<std::size_t>(-1);

/// Reduced row echelon form of [a | rhs] over the rationals, with identical
/// row operations applied to the Expr right sides. Pivot columns are chosen
/// left to right, first nonzero row wins: fully deterministic. Returns the
/// pivot column of each row (kNoPivot for zero rows), zero rows last.
inline std::vector<std::size_t> rref(RationalMatrix& a, std::vector<Expr>& rhs) {
  const std::size_t rows = a.size();
  const std::size_t cols = rows == 0 ? 0 : a.front().size();
  std::size_t rank = 0;
  for (std::size_t col = 0; col < cols && rank < rows; ++col) {
    std::size_t pivot = kNoPivot;
    for (std::size_t r = rank; r < rows; ++r) {
      if (a[r][col] != 0) {
        pivot = r;
        break;
      }
    }
    if (pivot == kNoPivot) continue;
    std::swap(a[rank], a[pivot]);
    std::swap(rhs[rank], rhs[pivot]);
    const Rational lead = a[rank][col];
    for (Rational& entry : a[rank]) entry /= lead;
    rhs[rank] = rhs[rank] * (Rational(1) / lead);
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == rank || a[r][col] == 0) continue;
      const Rational factor = a[r][col];
      for (std::size_t cc = 0; cc < cols; ++cc) a[r][cc] -= factor * a[rank][cc];
      rhs[r] = rhs[r] - rhs[rank] * factor;
    }
    ++rank;
  }
  std::vector<std::size_t> pivots(rows, kNoPivot);
  for (std::size_t r = 0; r < rank; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (a[r][c] != 0) {
        pivots[r] = c;
        break;
      }
    }
  }
  return pivots;
}

/// Inverse of a square rational matrix, or nullopt if singular.
inline std::optional<RationalMatrix> invert_rational(RationalMatrix m) {
  const std::size_t n = m.size();
  RationalMatrix inv(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = kNoPivot;
    for (std::size_t r = col; r < n; ++r) {
      if (m[r][col] != 0) {
        pivot = r;
        break;
      }
    }
    if (pivot == kNoPivot) return std::nullopt;
    std::swap(m[col], m[pivot]);
    std::swap(inv[col], inv[pivot]);
    const Rational lead = m[col][col];
    for (std::size_t c = 0; c < n; ++c) {
      m[col][c] /= lead;
      inv[col][c] /= lead;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || m[r][col] == 0) continue;
      const Rational factor = m[r][col];
      for (std::size_t c = 0; c < n; ++c) {
        m[r][c] -= factor * m[col][c];
        inv[r][c] -= factor * inv[col][c];
      }
    }
  }
  return inv;
}

/// Splits the momentum definitions as M_i = sum_j W_ij q_j' + c_i(q) with a
/// constant rational velocity Hessian W. Anything richer (velocity-dependent
/// Hessian) is outside the supported Legendre class.
struct MomentumDecomposition {
  RationalMatrix hessian;     // W, field_count x field_count
  std::vector<Expr> offsets;  // c_i, velocity-free
};

inline MomentumDecomposition decompose_momenta(const std::vector<Expr>& momenta,
                                               const ChartPtr& chart) {
  const std::size_t n = chart->field_count();
  MomentumDecomposition out{RationalMatrix(n, std::vector<Rational>(n, Rational(0))),
                            {}};
  out.offsets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Expr offset(chart);
    for (const auto& [m, c] : momenta[i].terms()) {
      std::size_t velocity_degree = 0;
      std::size_t velocity_index = 0;
      for (const auto& [v, exp] : m.factors()) {
        if (chart->kind(v) == VarKind::Velocity) {
          velocity_degree += exp;
          velocity_index = chart->position(v);
        }
      }
      if (velocity_degree == 0) {
        offset = offset + Expr::term(chart, m, c);
      } else if (velocity_degree == 1 && m.factors().size() == 1) {
        out.hessian[i][velocity_index] += c;
      } else {
        throw std::runtime_error(
            "non-invertible Legendre transform beyond supported class: "
            "momentum of '" +
            chart->name(chart->field(i)) +
            "' has a velocity-dependent Hessian");
      }
    }
    out.offsets.push_back(std::move(offset));
  }
  return out;
}

/// Row-reduces the velocity equations W q' = p - c. Pivot rows invert
/// velocities; zero rows are the primary-constraint candidates.
struct VelocityElimination {
  std::map<VarId, Expr> inversions;   // pivot velocity -> expr (may keep free velocities)
  std::vector<Expr> constraint_rows;  // zero-row right sides: combos of (p - c)
};

inline VelocityElimination eliminate_velocities(const MomentumDecomposition& dec,
                                                const ChartPtr& chart) {
  const std::size_t n = chart->field_count();
  RationalMatrix a = dec.hessian;
  std::vector<Expr> rhs;
  rhs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs.push_back(Expr::variable(chart, chart->momentum(i)) - dec.offsets[i]);
  }
  const auto pivots = rref(a, rhs);

  VelocityElimination out;
  for (std::size_t r = 0; r < n; ++r) {
    if (pivots[r] == kNoPivot) {
      out.constraint_rows.push_back(rhs[r]);
      continue;
    }
    // Row reads q'_pivot + sum_free a[r][j] q'_j = rhs[r].
    Expr value = rhs[r];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == pivots[r] || a[r][j] == 0) continue;
      value = value - Expr::variable(chart, chart->velocity(j)) * a[r][j];
    }
    out.inversions.emplace(chart->velocity(pivots[r]), std::move(value));
  }
  return out;
}

/// Brings constraint candidates (Exprs linear in momenta with constant
/// coefficients) into triangular solved form, one row per solved momentum,
/// each h free of every solved momentum. Rows that reduce away are dropped;
/// a momentum-free nonzero row cannot be written as p = h and is an error.
inline std::vector<Constraint> triangularize(const std::vector<Expr>& candidates,
                                             const ChartPtr& chart, bool primary,
                                             std::size_t first_index) {
  const std::size_t n = chart->field_count();
  RationalMatrix a;
  std::vector<Expr> rhs;
  for (const Expr& candidate : candidates) {
    std::vector<Rational> row(n, Rational(0));
    Expr field_part = candidate;
    for (std::size_t j = 0; j < n; ++j) {
      Expr coeff = partial_derivative(candidate, chart->momentum(j));
      if (!coeff.is_constant()) {
        throw std::runtime_error(
            "constraint is not linear with constant rational coefficients in "
            "the momenta");
      }
      row[j] = coeff.constant_value();
      field_part =
          field_part - Expr::variable(chart, chart->momentum(j)) * row[j];
    }
    a.push_back(std::move(row));
    rhs.push_back(-field_part);  // row: sum coeff * p = -field_part
  }
  const auto pivots = rref(a, rhs);

  std::vector<Constraint> out;
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (pivots[r] == kNoPivot) {
      if (!rhs[r].is_zero()) {
        throw std::runtime_error(
            "constraint without momentum dependence (a pure configuration "
            "relation) is outside the supported class");
      }
      continue;  // dependent row, nothing new
    }
    const VarId momentum = chart->momentum(pivots[r]);
    // Row reads p_pivot + sum_free a[r][j] p_j = rhs[r].
    Expr h = rhs[r];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == pivots[r] || a[r][j] == 0) continue;
      h = h - Expr::variable(chart, chart->momentum(j)) * a[r][j];
    }
    Expr phi = Expr::variable(chart, momentum) - h;
    out.push_back(Constraint{first_index + out.size(), primary, momentum,
                             std::move(h), std::move(phi)});
  }
  return out;
}

}  // namespace detail

/// Canonical momenta p_i = dL/dq_i'.
inline std::vector<Expr> legendre_momenta(const Expr& lagrangian) {
  const ChartPtr& ch = lagrangian.chart();
  for (VarId v : lagrangian.variables()) {
    VarKind k = ch->kind(v);
    if (k != VarKind::Field && k != VarKind::Velocity) {
      throw std::invalid_argument(
          "legendre_momenta: Lagrangian must be polynomial in fields and "
          "velocities only, found '" +
          ch->display_name(v) + "'");
    }
  }
  std::vector<Expr> out;
  out.reserve(ch->field_count());
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    out.push_back(partial_derivative(lagrangian, ch->velocity(i)));
  }
  return out;
}

/// Primary constraints of the Legendre transform: the null directions of the
/// velocity Hessian turn the momentum definitions into relations phi = p - h
/// that contain no velocities. Returned in solved triangular form, ordered by
/// solved momentum, labelled phi_1, phi_2, ...
inline std::vector<Constraint> detect_primary_constraints(
    const std::vector<Expr>& momenta, const ChartPtr& chart) {
  if (momenta.size() != chart->field_count()) {
    throw std::invalid_argument(
        "detect_primary_constraints: need one momentum per field");
  }
  auto dec = detail::decompose_momenta(momenta, chart);
  auto elim = detail::eliminate_velocities(dec, chart);
  return detail::triangularize(elim.constraint_rows, chart, /*primary=*/true,
                               /*first_index=*/1);
}

/// Substitutes every constraint's solved form p -> h simultaneously. A ring
/// morphism; idempotent because each h is free of all solved momenta;
/// annihilates every constraint expression.
inline Expr weak_reduce(const Expr& e, const std::vector<Constraint>& constraints) {
  std::map<VarId, Expr> bindings;
  for (const Constraint& c : constraints) bindings.emplace(c.momentum, c.solved);
  return substitute(e, bindings);
}

/// Base Hamiltonian H' = sum p_i q_i' - L with all velocities eliminated:
/// invertible directions via the momentum inversions, constrained directions
/// because their velocity coefficients are constraint combinations that weak
/// reduction annihilates. H' is velocity-free and free of solved momenta.
inline Expr base_hamiltonian(const Expr& lagrangian,
                             const std::vector<Expr>& momenta,
                             const std::vector<Constraint>& constraints) {
  const ChartPtr& ch = lagrangian.chart();
  Expr energy(ch);
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    energy = energy + Expr::variable(ch, ch->momentum(i)) *
                          Expr::variable(ch, ch->velocity(i));
  }
  energy = energy - lagrangian;

  auto dec = detail::decompose_momenta(momenta, ch);
  auto elim = detail::eliminate_velocities(dec, ch);
  Expr reduced = weak_reduce(substitute(energy, elim.inversions), constraints);
  for (VarId v : reduced.variables()) {
    if (ch->kind(v) == VarKind::Velocity) {
      throw std::runtime_error(
          "Legendre elimination failed: residual velocity '" +
          ch->display_name(v) + "' in the base Hamiltonian");
    }
  }
  return reduced;
}

/// Total Hamiltonian H = H' + sum_a lambda_a phi_a over the given (primary)
/// constraints; lambda_a is the chart's a-th multiplier variable.
inline Expr total_hamiltonian(const Expr& base_h,
                              const std::vector<Constraint>& constraints) {
  const ChartPtr& ch = base_h.chart();
  Expr h = base_h;
  std::size_t k = 0;
  for (const Constraint& c : constraints) {
    h = h + Expr::variable(ch, ch->multiplier(k++)) * c.expr;
  }
  return h;
}

/// Poisson bracket {F, G} = sum_i (dF/dq_i dG/dp_i - dF/dp_i dG/dq_i).
/// Multipliers are bracket-inert symbols; velocities and accelerations are
/// not phase-space variables and are rejected.
inline Expr poisson_bracket(const Expr& f, const Expr& g) {
  if (f.chart() != g.chart()) {
    throw std::invalid_argument("poisson_bracket: operands from different charts");
  }
  const ChartPtr& ch = f.chart();
  for (const Expr* e : {&f, &g}) {
    for (VarId v : e->variables()) {
      VarKind k = ch->kind(v);
      if (k == VarKind::Velocity || k == VarKind::Acceleration) {
        throw std::invalid_argument(
            "poisson_bracket: '" + ch->display_name(v) +
            "' is not a phase-space variable");
      }
    }
  }
  Expr out(ch);
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    const VarId q = ch->field(i), p = ch->momentum(i);
    out = out + partial_derivative(f, q) * partial_derivative(g, p) -
          partial_derivative(f, p) * partial_derivative(g, q);
  }
  return out;
}

/// C_ab = {phi_a, phi_b}, each entry weakly reduced. Antisymmetric.
inline std::vector<std::vector<Expr>> constraint_matrix(
    const std::vector<Constraint>& constraints, const ChartPtr& chart) {
  std::vector<std::vector<Expr>> c;
  c.reserve(constraints.size());
  for (const Constraint& a : constraints) {
    std::vector<Expr> row;
    row.reserve(constraints.size());
    for (const Constraint& b : constraints) {
      row.push_back(
          weak_reduce(poisson_bracket(a.expr, b.expr), constraints));
    }
    c.push_back(std::move(row));
    (void)chart;
  }
  return c;
}

/// Result of imposing the consistency conditions {phi_a, H} ~ 0.
struct MultiplierSolution {
  /// One entry per primary constraint; nullopt = undetermined (first-class
  /// direction). A determined value may reference undetermined multipliers
  /// symbolically when the constraint matrix is rank-deficient but nonzero.
  std::vector<std::optional<Expr>> values;
  /// Full constraint list: the primaries, then any secondary constraints
  /// discovered during the iteration.
  std::vector<Constraint> constraints;
  /// Final constraint matrix over `constraints`, weakly reduced.
  std::vector<std::vector<Expr>> matrix;
  std::size_t rounds = 0;
  std::vector<std::string> audit;  // one line per notable event
};

/// Solves {phi_a, H_total} ~ 0 for the primary multipliers. Each round builds
/// the linear system b_a + sum_b C_ab lambda_b = 0 over ALL current
/// constraints (b_a = weakly reduced {phi_a, H'}), with the reduced C
/// required to be rational constants. Zero rows with nonzero residual yield
/// secondary constraints and trigger another round (cap: 10); zero rows with
/// zero residual leave their multiplier undetermined.
inline MultiplierSolution solve_multipliers(const Expr& base_h,
                                            std::vector<Constraint> primaries) {
  const ChartPtr& ch = base_h.chart();
  const std::size_t n_primary = primaries.size();

  MultiplierSolution out;
  out.constraints = std::move(primaries);

  constexpr std::size_t kMaxRounds = 10;
  while (true) {
    if (++out.rounds > kMaxRounds) {
      throw std::runtime_error(
          "consistency iteration exceeded " + std::to_string(kMaxRounds) +
          " rounds without closing");
    }
    out.matrix = constraint_matrix(out.constraints, ch);

    const std::size_t rows = out.constraints.size();
    detail::RationalMatrix a(rows, std::vector<Rational>(n_primary, Rational(0)));
    std::vector<Expr> rhs;
    rhs.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t b = 0; b < n_primary; ++b) {
        const Expr& entry = out.matrix[r][b];
        if (!entry.is_constant()) {
          throw std::runtime_error(
              "non-constant constraint matrix unsupported: {phi_" +
              std::to_string(out.constraints[r].index) + ", phi_" +
              std::to_string(out.constraints[b].index) + "} = " +
              "non-constant after weak reduction");
        }
        a[r][b] = entry.constant_value();
      }
      Expr b_r = weak_reduce(poisson_bracket(out.constraints[r].expr, base_h),
                             out.constraints);
      rhs.push_back(-b_r);
    }

    const auto pivots = detail::rref(a, rhs);

    std::vector<Expr> fresh;
    for (std::size_t r = 0; r < rows; ++r) {
      if (pivots[r] == detail::kNoPivot && !rhs[r].is_zero()) {
        fresh.push_back(rhs[r]);
      }
    }
    if (fresh.empty()) {
      // Closed: extract the multipliers. Pivot columns are determined; free
      // columns stay undetermined and may appear symbolically in pivots.
      out.values.assign(n_primary, std::nullopt);
      std::vector<bool> is_pivot(n_primary, false);
      for (std::size_t r = 0; r < rows; ++r) {
        if (pivots[r] != detail::kNoPivot) is_pivot[pivots[r]] = true;
      }
      for (std::size_t r = 0; r < rows; ++r) {
        if (pivots[r] == detail::kNoPivot) continue;
        Expr value = rhs[r];
        for (std::size_t b = 0; b < n_primary; ++b) {
          if (b == pivots[r] || a[r][b] == 0) continue;
          value = value - Expr::variable(ch, ch->multiplier(b)) * a[r][b];
        }
        out.values[pivots[r]] = std::move(value);
      }
      for (std::size_t b = 0; b < n_primary; ++b) {
        if (!out.values[b] && !is_pivot[b]) {
          out.audit.push_back("lambda_" + std::to_string(b + 1) +
                              " undetermined (first-class direction)");
        }
      }
      return out;
    }

    // New secondary constraints: normalize, then keep every solved form free
    // of the newly solved momenta so weak reduction stays idempotent.
    std::vector<Constraint> secondary;
    try {
      secondary = detail::triangularize(fresh, ch, /*primary=*/false,
                                        out.constraints.size() + 1);
    } catch (const std::runtime_error& err) {
      throw std::runtime_error(std::string("secondary constraint outside the "
                                           "supported class: ") +
                               err.what());
    }
    if (secondary.empty()) {
      throw std::runtime_error(
          "consistency produced only dependent residuals; cannot close");
    }
    std::map<VarId, Expr> new_bindings;
    for (const Constraint& c : secondary) new_bindings.emplace(c.momentum, c.solved);
    for (Constraint& c : out.constraints) {
      c.solved = substitute(c.solved, new_bindings);
      c.expr = Expr::variable(ch, c.momentum) - c.solved;
    }
    for (const Constraint& c : secondary) {
      out.audit.push_back("round " + std::to_string(out.rounds) +
                          ": secondary constraint phi_" +
                          std::to_string(c.index) + " solves momentum '" +
                          ch->display_name(c.momentum) + "'");
      out.constraints.push_back(c);
    }
  }
}

/// Second-class iff the constraint's row of the reduced matrix is nonzero.
inline std::vector<ConstraintClass> classify_constraints(
    const std::vector<std::vector<Expr>>& reduced_matrix) {
  std::vector<ConstraintClass> out;
  out.reserve(reduced_matrix.size());
  for (const auto& row : reduced_matrix) {
    bool zero = true;
    for (const Expr& entry : row) zero = zero && entry.is_zero();
    out.push_back(zero ? ConstraintClass::FirstClass : ConstraintClass::SecondClass);
  }
  return out;
}

/// Hamilton equations over the full phase space: (q_i, dH/dp_i) then
/// (p_i, -dH/dq_i), in chart order. Partial derivatives are taken before any
/// weak reduction; reducing the right sides is the caller's separate step.
inline std::vector<std::pair<VarId, Expr>> hamilton_equations(const Expr& h) {
  const ChartPtr& ch = h.chart();
  for (VarId v : h.variables()) {
    VarKind k = ch->kind(v);
    if (k == VarKind::Velocity || k == VarKind::Acceleration) {
      throw std::invalid_argument(
          "hamilton_equations: Hamiltonian contains the non-phase variable '" +
          ch->display_name(v) + "'");
    }
  }
  std::vector<std::pair<VarId, Expr>> eqs;
  eqs.reserve(2 * ch->field_count());
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    eqs.emplace_back(ch->field(i), partial_derivative(h, ch->momentum(i)));
  }
  for (std::size_t i = 0; i < ch->field_count(); ++i) {
    eqs.emplace_back(ch->momentum(i), -partial_derivative(h, ch->field(i)));
  }
  return eqs;
}

/// Equation of motion of an observable: F' ~ {F, H}. Callers weakly reduce
/// to land on the constraint surface.
inline Expr observable_eom(const Expr& f, const Expr& h) {
  return poisson_bracket(f, h);
}

/// Everything the Dirac treatment of one Lagrangian produces.
struct ConstrainedSystem {
  ChartPtr chart;
  Expr lagrangian;
  std::vector<Expr> momenta;            // p_i = dL/dq_i'
  std::vector<Constraint> constraints;  // primaries first, then secondaries
  std::size_t primary_count = 0;
  Expr base_hamiltonian;   // H'
  Expr total_hamiltonian;  // H' + sum lambda_a phi_a over primaries
  std::vector<std::vector<Expr>> constraint_matrix;   // final, weakly reduced
  std::vector<std::optional<Expr>> multipliers;       // per primary constraint
  std::vector<ConstraintClass> classification;        // per constraint
  Expr hamiltonian_substituted;  // determined multipliers substituted into H
  std::size_t consistency_rounds = 0;
  std::vector<std::string> audit;
};

/// Runs the whole pipeline: Legendre momenta, primary constraints, base and
/// total Hamiltonians, consistency conditions, classification, and the
/// multiplier-substituted Hamiltonian.
inline ConstrainedSystem derive_constrained_system(const Expr& lagrangian) {
  const ChartPtr& ch = lagrangian.chart();
  ConstrainedSystem sys{ch,
                        lagrangian,
                        legendre_momenta(lagrangian),
                        {},
                        0,
                        Expr(ch),
                        Expr(ch),
                        {},
                        {},
                        {},
                        Expr(ch),
                        0,
                        {}};
  std::vector<Constraint> primaries =
      detect_primary_constraints(sys.momenta, ch);
  sys.primary_count = primaries.size();
  sys.base_hamiltonian = base_hamiltonian(lagrangian, sys.momenta, primaries);
  sys.total_hamiltonian = total_hamiltonian(sys.base_hamiltonian, primaries);

  MultiplierSolution sol = solve_multipliers(sys.base_hamiltonian, primaries);
  sys.constraints = std::move(sol.constraints);
  sys.constraint_matrix = std::move(sol.matrix);
  sys.multipliers = std::move(sol.values);
  sys.consistency_rounds = sol.rounds;
  sys.audit = std::move(sol.audit);
  sys.classification = classify_constraints(sys.constraint_matrix);

  std::map<VarId, Expr> lambda_bindings;
  for (std::size_t b = 0; b < sys.multipliers.size(); ++b) {
    if (sys.multipliers[b]) {
      lambda_bindings.emplace(ch->multiplier(b), *sys.multipliers[b]);
    }
  }
  sys.hamiltonian_substituted =
      substitute(sys.total_hamiltonian, lambda_bindings);
  return sys;
}

/// Convenience overload: consistency conditions solved against an already
/// populated system (uses its base Hamiltonian and primary constraints).
inline MultiplierSolution solve_multipliers(const ConstrainedSystem& sys) {
  std::vector<Constraint> primaries(
      sys.constraints.begin(), sys.constraints.begin() + sys.primary_count);
  return solve_multipliers(sys.base_hamiltonian, std::move(primaries));
}

/// Dirac bracket {F,G}_D = {F,G} - {F,phi_a} (C^-1)_ab {phi_b,G}. Defined
/// only when every constraint is second-class and the reduced constraint
/// matrix is an invertible rational matrix.
inline Expr dirac_bracket(const Expr& f, const Expr& g,
                          const ConstrainedSystem& sys) {
  for (ConstraintClass c : sys.classification) {
    if (c == ConstraintClass::FirstClass) {
      throw std::runtime_error(
          "Dirac bracket undefined: first-class constraints present");
    }
  }
  const std::size_t m = sys.constraints.size();
  detail::RationalMatrix c(m, std::vector<Rational>(m, Rational(0)));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const Expr& entry = sys.constraint_matrix[i][j];
      if (!entry.is_constant()) {
        throw std::runtime_error(
            "Dirac bracket undefined: constraint matrix entry is not a "
            "rational constant");
      }
      c[i][j] = entry.constant_value();
    }
  }
  auto inv = detail::invert_rational(std::move(c));
  if (!inv) {
    throw std::runtime_error(
        "Dirac bracket undefined: constraint matrix is singular (a hidden "
        "first-class combination remains)");
  }
  Expr out = poisson_bracket(f, g);
  for (std::size_t a = 0; a < m; ++a) {
    Expr f_phi = poisson_bracket(f, sys.constraints[a].expr);
    if (f_phi.is_zero()) continue;
    for (std::size_t b = 0; b < m; ++b) {
      if ((*inv)[a][b] == 0) continue;
      out = out - f_phi * (*inv)[a][b] *
                      poisson_bracket(sys.constraints[b].expr, g);
    }
  }
  return out;
}

}  // namespace hamdirac
