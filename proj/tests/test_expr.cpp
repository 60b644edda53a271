#include <catch2/catch_amalgamated.hpp>

#include <hamdirac/chart.hpp>
#include <hamdirac/expr.hpp>
#include <hamdirac/rational.hpp>

#include <random>

#include "testutil.hpp"

using namespace hamdirac;
using testutil::C;
using testutil::V;

TEST_CASE("rational construction normalizes sign and reduces", "[rational]") {
  CHECK(make_rational(3, -6) == make_rational(-1, 2));
  CHECK(make_rational(-3, -6) == make_rational(1, 2));
  CHECK(make_rational(0, 5) == Rational(0));
  CHECK(to_string(make_rational(4, 6)) == "2/3");
  CHECK(to_string(make_rational(-1, 2)) == "-1/2");
  CHECK(to_string(make_rational(7, 1)) == "7");
  CHECK(is_integer(make_rational(8, 4)));
  CHECK_THROWS_AS(make_rational(1, 0), std::domain_error);
  CHECK(to_double(make_rational(1, 4)) == 0.25);
}

TEST_CASE("chart registers jet variables, momenta, multipliers in order", "[chart]") {
  auto ch = make_chart({"f", "g"});
  REQUIRE(ch->field_count() == 2);
  REQUIRE(ch->size() == 10);

  CHECK(ch->name(ch->field(0)) == "f");
  CHECK(ch->name(ch->field(1)) == "g");
  CHECK(ch->name(ch->velocity(0)) == "f'");
  CHECK(ch->name(ch->acceleration(1)) == "g''");
  CHECK(ch->name(ch->momentum(0)) == "p_f");
  CHECK(ch->name(ch->multiplier(0)) == "lambda_1");
  CHECK(ch->name(ch->multiplier(1)) == "lambda_2");

  // Registration order: fields, velocities, accelerations, momenta, multipliers.
  CHECK(ch->field(0) < ch->field(1));
  CHECK(ch->field(1) < ch->velocity(0));
  CHECK(ch->velocity(1) < ch->acceleration(0));
  CHECK(ch->acceleration(1) < ch->momentum(0));
  CHECK(ch->momentum(1) < ch->multiplier(0));

  CHECK(ch->kind(ch->velocity(1)) == VarKind::Velocity);
  CHECK(ch->kind(ch->momentum(0)) == VarKind::Momentum);
  CHECK(ch->velocity_of(ch->field(1)) == ch->velocity(1));
  CHECK(ch->acceleration_of(ch->field(0)) == ch->acceleration(0));
  CHECK(ch->acceleration_of(ch->velocity(0)) == ch->acceleration(0));
  CHECK(ch->momentum_of(ch->field(1)) == ch->momentum(1));
  CHECK(ch->field_of(ch->momentum(1)) == ch->field(1));
  CHECK(ch->field_of(ch->velocity(0)) == ch->field(0));

  CHECK(ch->find("g'") == ch->velocity(1));
  CHECK(ch->find("p_g") == ch->momentum(1));
  CHECK_FALSE(ch->find("h").has_value());
  CHECK(ch->parameter() == "alpha");
}

TEST_CASE("chart aliases resolve and display", "[chart]") {
  auto ch = make_so2_chart();
  REQUIRE(ch->find("p").has_value());
  CHECK(ch->find("p") == ch->momentum(0));
  CHECK(ch->find("s") == ch->momentum(1));
  CHECK(ch->find("p_f") == ch->momentum(0));  // canonical name still works
  CHECK(ch->display_name(ch->momentum(0)) == "p");
  CHECK(ch->display_name(ch->momentum(1)) == "s");
  CHECK(ch->display_name(ch->field(0)) == "f");
  CHECK(ch->name(ch->momentum(0)) == "p_f");
}

TEST_CASE("chart rejects bad names and collisions", "[chart]") {
  CHECK_THROWS_AS(make_chart({}), std::invalid_argument);
  CHECK_THROWS_AS(make_chart({"2f"}), std::invalid_argument);
  CHECK_THROWS_AS(make_chart({"f", "f"}), std::invalid_argument);
  // momentum of "f" collides with a declared field named p_f
  CHECK_THROWS_AS(make_chart({"f", "p_f"}), std::invalid_argument);
  // alias collides with an existing variable
  CHECK_THROWS_AS(make_chart({"f", "g"}, "alpha", {{"p_f", "g"}}),
                  std::invalid_argument);
  // parameter collides with a variable
  CHECK_THROWS_AS(make_chart({"alpha"}), std::invalid_argument);
}

TEST_CASE("monomial ordering is lexicographic in registration order", "[expr]") {
  auto ch = make_so2_chart();
  auto f = ch->field(0), g = ch->field(1);

  auto m = [](std::vector<Monomial::Factor> fs) {
    return Monomial::from_factors(std::move(fs));
  };
  CHECK(Monomial::lex_compare(m({{f, 2}}), m({{f, 1}, {g, 5}})) > 0);
  CHECK(Monomial::lex_compare(m({{f, 1}}), m({{g, 3}})) > 0);
  CHECK(Monomial::lex_compare(m({{g, 1}}), m({})) > 0);
  CHECK(Monomial::lex_compare(m({{f, 1}, {g, 1}}), m({{f, 1}})) > 0);
  CHECK(Monomial::lex_compare(m({{f, 1}, {g, 1}}), m({{f, 1}, {g, 1}})) == 0);

  // Term maps iterate leading-first.
  Expr e = V(ch, "g") + V(ch, "f") + C(ch, 3) + pow(V(ch, "f"), 2);
  std::vector<std::uint64_t> degrees_in_f;
  for (const auto& [mono, c] : e.terms()) degrees_in_f.push_back(mono.degree_in(f));
  CHECK(degrees_in_f == std::vector<std::uint64_t>{2, 1, 0, 0});
}

TEST_CASE("canonical form drops zero coefficients", "[expr]") {
  auto ch = make_so2_chart();
  Expr f = V(ch, "f"), g = V(ch, "g");

  CHECK((f - f).is_zero());
  CHECK((f * g - g * f).is_zero());
  CHECK((C(ch, 0) * f).is_zero());
  CHECK(Expr::constant(ch, Rational(0)).is_zero());
  CHECK((f + g - g) == f);
  CHECK((C(ch, 1, 2) * f + C(ch, 1, 2) * f) == f);

  Expr zero(ch);
  CHECK(zero.terms().empty());
  CHECK(zero.is_constant());
  CHECK(zero.constant_value() == 0);
  CHECK((f + zero) == f);
}

TEST_CASE("ring axioms hold exactly on random expressions", "[expr]") {
  auto ch = make_chart({"a", "b", "c"});
  std::vector<VarId> vars;
  for (std::size_t i = 0; i < 3; ++i) {
    vars.push_back(ch->field(i));
    vars.push_back(ch->velocity(i));
  }

  std::mt19937 rng(20240811);
  for (int trial = 0; trial < 50; ++trial) {
    Expr x = testutil::random_expr(ch, vars, rng);
    Expr y = testutil::random_expr(ch, vars, rng);
    Expr z = testutil::random_expr(ch, vars, rng);

    CHECK((x + y) == (y + x));
    CHECK((x * y) == (y * x));
    CHECK(((x + y) + z) == (x + (y + z)));
    CHECK(((x * y) * z) == (x * (y * z)));
    CHECK((x * (y + z)) == (x * y + x * z));
    CHECK((x - x).is_zero());
    CHECK((x + (-x)).is_zero());
  }
}

TEST_CASE("pow expands powers exactly", "[expr]") {
  auto ch = make_so2_chart();
  Expr f = V(ch, "f"), g = V(ch, "g");

  CHECK(pow(f + g, 0) == C(ch, 1));
  CHECK(pow(f + g, 1) == f + g);
  CHECK(pow(f + g, 2) == f * f + C(ch, 2) * f * g + g * g);
  CHECK(pow(f - g, 3) ==
        f * f * f - C(ch, 3) * f * f * g + C(ch, 3) * f * g * g - g * g * g);
  CHECK(pow(Expr(ch), 0) == C(ch, 1));  // 0^0 = 1 by the empty-product rule
  CHECK(pow(Expr(ch), 5).is_zero());
}

TEST_CASE("partial derivatives match the worked Lagrangian", "[expr]") {
  auto ch = make_so2_chart();
  Expr f = V(ch, "f"), g = V(ch, "g"), df = V(ch, "f'"), dg = V(ch, "g'");
  Expr L = C(ch, 1, 2) * (f * dg - df * g) - C(ch, 1, 2) * (f * f + g * g);

  CHECK(partial_derivative(L, *ch->find("f")) == C(ch, 1, 2) * dg - f);
  CHECK(partial_derivative(L, *ch->find("f'")) == C(ch, -1, 2) * g);
  CHECK(partial_derivative(L, *ch->find("g")) == C(ch, -1, 2) * df - g);
  CHECK(partial_derivative(L, *ch->find("g'")) == C(ch, 1, 2) * f);
  CHECK(partial_derivative(g * g, *ch->find("f")).is_zero());
}

TEST_CASE("derivation axioms hold on random expressions", "[expr]") {
  auto ch = make_chart({"a", "b"});
  std::vector<VarId> vars = {ch->field(0), ch->field(1), ch->velocity(0),
                             ch->velocity(1)};
  std::mt19937 rng(20240812);

  for (int trial = 0; trial < 50; ++trial) {
    Expr x = testutil::random_expr(ch, vars, rng);
    Expr y = testutil::random_expr(ch, vars, rng);
    VarId v = vars[trial % vars.size()];

    CHECK(partial_derivative(x * y, v) ==
          partial_derivative(x, v) * y + x * partial_derivative(y, v));
    CHECK(partial_derivative(x + y, v) ==
          partial_derivative(x, v) + partial_derivative(y, v));
  }

  for (VarId v : vars) {
    for (VarId w : vars) {
      Expr dvw = partial_derivative(Expr::variable(ch, v), w);
      CHECK(dvw == (v == w ? C(ch, 1) : Expr(ch)));
    }
  }
}

TEST_CASE("substitution checks the rotation identity", "[expr]") {
  auto ch = make_so2_chart();
  Expr f = V(ch, "f"), g = V(ch, "g"), df = V(ch, "f'"), dg = V(ch, "g'");

  std::map<VarId, Expr> lie = {{*ch->find("f'"), -g}, {*ch->find("g'"), f}};

  CHECK(substitute(f * dg - g * df, lie) == f * f + g * g);
  CHECK(substitute(df * df + dg * dg, lie) == f * f + g * g);

  Expr e = f * dg - g * df;
  CHECK(substitute(e, {}) == e);
}

TEST_CASE("substitution is simultaneous, not sequential", "[expr]") {
  auto ch = make_so2_chart();
  Expr f = V(ch, "f"), g = V(ch, "g");
  // f -> g, g -> f swaps the variables; sequential application would collapse
  // everything onto f.
  std::map<VarId, Expr> swap = {{*ch->find("f"), g}, {*ch->find("g"), f}};
  CHECK(substitute(f + C(ch, 2) * g, swap) == g + C(ch, 2) * f);
}

TEST_CASE("substitution is a ring morphism", "[expr]") {
  auto ch = make_chart({"a", "b"});
  std::vector<VarId> vars = {ch->field(0), ch->field(1), ch->velocity(0),
                             ch->velocity(1)};
  std::mt19937 rng(20240813);

  for (int trial = 0; trial < 30; ++trial) {
    Expr x = testutil::random_expr(ch, vars, rng);
    Expr y = testutil::random_expr(ch, vars, rng);
    // Bind velocities to field polynomials; images are free of the domain, so
    // applying the substitution twice equals applying it once.
    std::map<VarId, Expr> sigma = {
        {ch->velocity(0),
         testutil::random_expr(ch, {ch->field(0), ch->field(1)}, rng)},
        {ch->velocity(1),
         testutil::random_expr(ch, {ch->field(0), ch->field(1)}, rng)}};

    CHECK(substitute(x + y, sigma) == substitute(x, sigma) + substitute(y, sigma));
    CHECK(substitute(x * y, sigma) == substitute(x, sigma) * substitute(y, sigma));
    CHECK(substitute(substitute(x, sigma), sigma) == substitute(x, sigma));
  }
}

TEST_CASE("numeric evaluation is exact on the worked examples", "[expr]") {
  auto ch = make_so2_chart();
  Expr f = V(ch, "f"), g = V(ch, "g"), p = V(ch, "p"), s = V(ch, "s");

  std::map<VarId, double> pt1 = {{*ch->find("f"), 1.0}, {*ch->find("g"), 0.0}};
  CHECK(eval_numeric(f * f + g * g, pt1) == 1.0);

  std::map<VarId, double> pt2 = {{*ch->find("f"), 1.0},
                                 {*ch->find("g"), 0.0},
                                 {*ch->find("p"), 0.0},
                                 {*ch->find("s"), 0.5}};
  CHECK(eval_numeric(f * s - g * p, pt2) == 0.5);
  CHECK(eval_numeric(Expr(ch), {}) == 0.0);

  CHECK_THROWS_WITH(eval_numeric(f + g, pt1 = {{*ch->find("f"), 1.0}}),
                    Catch::Matchers::ContainsSubstring("g"));
}

TEST_CASE("partial derivative agrees with central finite differences", "[expr]") {
  auto ch = make_chart({"a", "b"});
  std::vector<VarId> vars = {ch->field(0), ch->field(1), ch->velocity(0),
                             ch->velocity(1)};
  std::mt19937 rng(20240814);
  const double h = 1e-6;

  for (int trial = 0; trial < 5; ++trial) {
    Expr e = testutil::random_expr(ch, vars, rng);
    for (VarId v : vars) {
      Expr de = partial_derivative(e, v);
      for (int k = 0; k < 20; ++k) {
        auto point = testutil::random_point(vars, rng);
        auto hi = point, lo = point;
        hi[v] += h;
        lo[v] -= h;
        double fd = (eval_numeric(e, hi) - eval_numeric(e, lo)) / (2 * h);
        double exact = eval_numeric(de, point);
        double scale = std::max(1.0, std::abs(exact));
        CHECK(std::abs(fd - exact) / scale < 1e-6);
      }
    }
  }
}

TEST_CASE("operations across charts are rejected", "[expr]") {
  auto ch1 = make_so2_chart();
  auto ch2 = make_so2_chart();  // same shape, different object
  Expr a = V(ch1, "f"), b = V(ch2, "f");

  CHECK_FALSE(a == b);  // different charts never compare equal
  CHECK_THROWS_AS(a + b, std::invalid_argument);
  CHECK_THROWS_AS(a * b, std::invalid_argument);
  CHECK_THROWS_AS(substitute(a, *ch1->find("f"), b), std::invalid_argument);
}
