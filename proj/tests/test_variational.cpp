#include <catch2/catch_amalgamated.hpp>

#include <hamdirac/variational.hpp>

#include <random>

#include "testutil.hpp"

using namespace hamdirac;
using testutil::C;
using testutil::V;

namespace {

struct So2 {
  ChartPtr ch = make_so2_chart();
  Expr f = V(ch, "f"), g = V(ch, "g");
  Expr df = V(ch, "f'"), dg = V(ch, "g'");
  Expr ddf = V(ch, "f''"), ddg = V(ch, "g''");
  // The worked first-order Lagrangian for plane rotations.
  Expr L = C(ch, 1, 2) * (f * dg - df * g) - C(ch, 1, 2) * (f * f + g * g);
  LieSystem rotation{ch, {-g, f}};
};

}  // namespace

TEST_CASE("total derivative advances jets", "[variational]") {
  So2 s;
  CHECK(total_derivative(C(s.ch, -1, 2) * s.g) == C(s.ch, -1, 2) * s.dg);
  CHECK(total_derivative(C(s.ch, 1, 2) * s.f) == C(s.ch, 1, 2) * s.df);
  CHECK(total_derivative(C(s.ch, 7)).is_zero());
  CHECK(total_derivative(s.f * s.g) == s.df * s.g + s.f * s.dg);
  CHECK(total_derivative(s.df) == s.ddf);
  CHECK(total_derivative(s.df * s.df) == C(s.ch, 2) * s.df * s.ddf);
}

TEST_CASE("total derivative rejects unsupported variables", "[variational]") {
  So2 s;
  CHECK_THROWS_WITH(total_derivative(s.ddf),
                    Catch::Matchers::ContainsSubstring("third jet"));
  CHECK_THROWS_AS(total_derivative(V(s.ch, "p")), std::invalid_argument);
  CHECK_THROWS_AS(total_derivative(V(s.ch, "lambda_1")), std::invalid_argument);
}

TEST_CASE("total derivative is a derivation on random expressions",
          "[variational]") {
  auto ch = make_chart({"a", "b"});
  std::vector<VarId> vars = {ch->field(0), ch->field(1), ch->velocity(0),
                             ch->velocity(1)};
  std::mt19937 rng(20240815);
  for (int trial = 0; trial < 40; ++trial) {
    Expr x = testutil::random_expr(ch, vars, rng);
    Expr y = testutil::random_expr(ch, vars, rng);
    CHECK(total_derivative(x * y) ==
          total_derivative(x) * y + x * total_derivative(y));
    CHECK(total_derivative(x + y) == total_derivative(x) + total_derivative(y));
  }
}

TEST_CASE("Euler-Lagrange equations of the rotation Lagrangian", "[variational]") {
  So2 s;
  ELSystem el = euler_lagrange(s.L);
  REQUIRE(el.residuals.size() == 2);
  // E_f = (1/2 g' - f) - D(-1/2 g) = g' - f; E_g likewise collapses.
  CHECK(el.residuals[0] == s.dg - s.f);
  CHECK(el.residuals[1] == -s.df - s.g);
}

TEST_CASE("Euler-Lagrange equations of second-order Lagrangians", "[variational]") {
  So2 s;
  Expr conventional = C(s.ch, 1, 2) * (s.df * s.df + s.dg * s.dg) -
                      C(s.ch, 1, 2) * (s.f * s.f + s.g * s.g);
  ELSystem el = euler_lagrange(conventional);
  CHECK(el.residuals[0] == -s.ddf - s.f);
  CHECK(el.residuals[1] == -s.ddg - s.g);

  auto ch1 = make_chart({"f"});
  Expr df1 = Expr::variable(ch1, ch1->velocity(0));
  ELSystem free_particle = euler_lagrange(C(ch1, 1, 2) * df1 * df1);
  CHECK(free_particle.residuals[0] == -Expr::variable(ch1, ch1->acceleration(0)));
}

TEST_CASE("Euler-Lagrange rejects non-first-order Lagrangians", "[variational]") {
  So2 s;
  CHECK_THROWS_AS(euler_lagrange(s.L + V(s.ch, "p")), std::invalid_argument);
  CHECK_THROWS_AS(euler_lagrange(s.L + V(s.ch, "lambda_1")), std::invalid_argument);
  CHECK_THROWS_AS(euler_lagrange(s.ddf * s.f), std::invalid_argument);
}

TEST_CASE("Lie equations from generators", "[variational]") {
  So2 s;
  auto eqs = lie_equations_from_generators(s.rotation);
  REQUIRE(eqs.size() == 2);
  CHECK(eqs[0].first == s.ch->velocity(0));
  CHECK(eqs[0].second == -s.g);
  CHECK(eqs[1].first == s.ch->velocity(1));
  CHECK(eqs[1].second == s.f);

  LieSystem still{s.ch, {Expr(s.ch), Expr(s.ch)}};
  for (const auto& [v, rhs] : lie_equations_from_generators(still)) {
    CHECK(rhs.is_zero());
  }

  LieSystem scaling{s.ch, {s.f, s.g}};
  auto seqs = lie_equations_from_generators(scaling);
  CHECK(seqs[0].second == s.f);
  CHECK(seqs[1].second == s.g);
}

TEST_CASE("LieSystem rejects malformed generators", "[variational]") {
  So2 s;
  CHECK_THROWS_AS(LieSystem(s.ch, {-s.g}), std::invalid_argument);
  CHECK_THROWS_AS(LieSystem(s.ch, {s.df, s.f}), std::invalid_argument);
  CHECK_THROWS_AS(LieSystem(s.ch, {V(s.ch, "p"), s.f}), std::invalid_argument);
}

TEST_CASE("second-order form prolongs the flow", "[variational]") {
  So2 s;
  auto sof = second_order_form(s.rotation);
  REQUIRE(sof.size() == 2);
  CHECK(sof[0].first == s.ch->acceleration(0));
  CHECK(sof[0].second == -s.f);  // f'' = -f: harmonic oscillation
  CHECK(sof[1].second == -s.g);

  LieSystem scaling{s.ch, {s.f, s.g}};
  auto ssof = second_order_form(scaling);
  CHECK(ssof[0].second == s.f);
  CHECK(ssof[1].second == s.g);

  LieSystem still{s.ch, {Expr(s.ch), Expr(s.ch)}};
  for (const auto& [v, rhs] : second_order_form(still)) CHECK(rhs.is_zero());
}

TEST_CASE("EL equations coincide with the Lie equations", "[variational]") {
  So2 s;

  auto first_order = verify_el_equals_lie(euler_lagrange(s.L), s.rotation);
  CHECK(first_order.equivalent);
  for (const Expr& r : first_order.residuals) CHECK(r.is_zero());

  Expr conventional = C(s.ch, 1, 2) * (s.df * s.df + s.dg * s.dg) -
                      C(s.ch, 1, 2) * (s.f * s.f + s.g * s.g);
  auto second_order = verify_el_equals_lie(euler_lagrange(conventional), s.rotation);
  CHECK(second_order.equivalent);

  // A perturbed Lagrangian shifts dL/df by 1 and nothing else.
  auto perturbed = verify_el_equals_lie(euler_lagrange(s.L + s.f), s.rotation);
  CHECK_FALSE(perturbed.equivalent);
  CHECK(perturbed.residuals[0] == C(s.ch, 1));
  CHECK(perturbed.residuals[1].is_zero());
}

TEST_CASE("on-shell identity of the two Lagrangian densities", "[variational]") {
  So2 s;
  std::map<VarId, Expr> flow = {{*s.ch->find("f'"), -s.g}, {*s.ch->find("g'"), s.f}};
  Expr difference = s.df * s.df + s.dg * s.dg - (s.f * s.dg - s.g * s.df);
  CHECK(substitute(difference, flow).is_zero());
  // Off the extremals the densities differ: the identity is on-shell only.
  CHECK_FALSE(difference.is_zero());
}

TEST_CASE("verdict is invariant under rescaling the Lagrangian", "[variational]") {
  So2 s;
  std::mt19937 rng(20240816);
  std::vector<VarId> vars = {*s.ch->find("f"), *s.ch->find("g"), *s.ch->find("f'"),
                             *s.ch->find("g'")};
  for (int trial = 0; trial < 20; ++trial) {
    Expr L = testutil::random_expr(s.ch, vars, rng);
    Rational scale = make_rational((trial % 7) + 1, (trial % 3) + 1);
    auto base = verify_el_equals_lie(euler_lagrange(L), s.rotation);
    auto scaled = verify_el_equals_lie(euler_lagrange(L * scale), s.rotation);
    CHECK(base.equivalent == scaled.equivalent);
    for (std::size_t i = 0; i < base.residuals.size(); ++i) {
      CHECK(scaled.residuals[i] == base.residuals[i] * scale);
    }
  }
}
