// Walks the full constrained-dynamics pipeline on the plane-rotation
// Lagrangian L = 1/2*(f*g' - f'*g) - 1/2*(f^2 + g^2), printing each stage:
// momenta, primary constraints, Hamiltonians, the constraint matrix,
// multipliers, classification, Hamilton equations, and Dirac brackets.
#include <iostream>

#include <hamdirac.hpp>

using namespace hamdirac;

namespace {

Expr var(const ChartPtr& chart, const std::string& name) {
  return Expr::variable(chart, *chart->find(name));
}

}  // namespace

int main() {
  ChartPtr chart = make_so2_chart();
  Expr f = var(chart, "f");
  Expr g = var(chart, "g");
  Expr df = var(chart, "f'");
  Expr dg = var(chart, "g'");

  Expr lagrangian = (f * dg - df * g) * make_rational(1, 2) -
                    (f * f + g * g) * make_rational(1, 2);
  std::cout << "L = " << render_expr(lagrangian) << "\n\n";

  ConstrainedSystem sys = derive_constrained_system(lagrangian);

  std::cout << "canonical momenta:\n";
  for (std::size_t i = 0; i < sys.momenta.size(); ++i) {
    std::cout << "  " << chart->display_name(chart->momentum(i)) << " = "
              << render_expr(sys.momenta[i]) << "\n";
  }

  std::cout << "\nprimary constraints (the momenta are velocity-free, so the"
               "\nLegendre transform is degenerate):\n";
  for (const Constraint& phi : sys.constraints) {
    std::cout << "  phi_" << phi.index << " = " << render_expr(phi.expr)
              << "\n";
  }

  std::cout << "\nbase hamiltonian  H' = " << render_expr(sys.base_hamiltonian)
            << "\ntotal hamiltonian H  = " << render_expr(sys.total_hamiltonian)
            << "\n";

  std::cout << "\nconstraint matrix {phi_a, phi_b}:\n";
  for (const auto& row : sys.constraint_matrix) {
    std::cout << "  [";
    for (std::size_t j = 0; j < row.size(); ++j) {
      std::cout << (j ? ", " : " ") << render_expr(row[j]);
    }
    std::cout << " ]\n";
  }

  std::cout << "\nmultipliers fixed by the consistency conditions:\n";
  for (std::size_t k = 0; k < sys.multipliers.size(); ++k) {
    std::cout << "  lambda_" << k + 1 << " = "
              << (sys.multipliers[k] ? render_expr(*sys.multipliers[k])
                                     : std::string("undetermined"))
              << "\n";
  }

  std::cout << "\nclassification:\n";
  for (std::size_t a = 0; a < sys.constraints.size(); ++a) {
    std::cout << "  phi_" << sys.constraints[a].index << " is "
              << (sys.classification[a] == ConstraintClass::FirstClass
                      ? "first-class"
                      : "second-class")
              << "\n";
  }

  std::cout << "\nhamiltonian with multipliers substituted:\n  H = "
            << render_expr(sys.hamiltonian_substituted) << "\n";

  std::cout << "\nhamilton equations:\n";
  for (const auto& [v, rhs] : hamilton_equations(sys.hamiltonian_substituted)) {
    std::cout << "  " << chart->display_name(v) << "' = " << render_expr(rhs)
              << "\n";
  }

  std::cout << "\nselected Dirac brackets (second-class constraints become"
               "\ncentral, so these are the physical brackets):\n";
  Expr p = var(chart, "p");
  Expr s = var(chart, "s");
  struct Pair {
    const char* label;
    Expr a, b;
  };
  const Pair pairs[] = {
      {"{f, g}_D", f, g}, {"{f, p}_D", f, p}, {"{g, s}_D", g, s},
      {"{p, s}_D", p, s},
  };
  for (const Pair& q : pairs) {
    std::cout << "  " << q.label << " = "
              << render_expr(dirac_bracket(q.a, q.b, sys)) << "\n";
  }

  std::cout << "\nflow generated by H under the Dirac bracket:\n  {f, H}_D = "
            << render_expr(dirac_bracket(f, sys.base_hamiltonian, sys))
            << "\n  {g, H}_D = "
            << render_expr(dirac_bracket(g, sys.base_hamiltonian, sys))
            << "\n";
  return 0;
}
