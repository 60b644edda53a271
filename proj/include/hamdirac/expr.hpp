#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "chart.hpp"
#include "rational.hpp"

namespace hamdirac {

/// Product of chart variables with positive integer exponents, kept sorted by
/// VarId. The empty monomial is the constant 1.
class Monomial {
 public:
  using Factor = std::pair<VarId, std::uint32_t>;

  Monomial() = default;

  static Monomial variable(VarId v, std::uint32_t exponent = 1) {
    Monomial m;
    if (exponent > 0) m.factors_.emplace_back(v, exponent);
    return m;
  }

  /// Builds from arbitrary (variable, exponent) pairs: sorts, merges repeats,
  /// and drops zero exponents.
  static Monomial from_factors(std::vector<Factor> raw) {
    std::sort(raw.begin(), raw.end(),
              [](const Factor& a, const Factor& b) { return a.first < b.first; });
    Monomial m;
    for (const auto& [v, e] : raw) {
      if (e == 0) continue;
      if (!m.factors_.empty() && m.factors_.back().first == v) {
        m.factors_.back().second += e;
      } else {
        m.factors_.emplace_back(v, e);
      }
    }
    return m;
  }

  const std::vector<Factor>& factors() const { return factors_; }
  bool is_constant() const { return factors_.empty(); }

  std::uint32_t degree_in(VarId v) const {
    for (const auto& [var, exp] : factors_) {
      if (var == v) return exp;
      if (v < var) break;
    }
    return 0;
  }

  std::uint64_t total_degree() const {
    std::uint64_t d = 0;
    for (const auto& [var, exp] : factors_) d += exp;
    return d;
  }

  Monomial times(const Monomial& other) const {
    Monomial out;
    auto a = factors_.begin(), ae = factors_.end();
    auto b = other.factors_.begin(), be = other.factors_.end();
    while (a != ae || b != be) {
      if (b == be || (a != ae && a->first < b->first)) {
        out.factors_.push_back(*a++);
      } else if (a == ae || b->first < a->first) {
        out.factors_.push_back(*b++);
      } else {
        out.factors_.emplace_back(a->first, a->second + b->second);
        ++a;
        ++b;
      }
    }
    return out;
  }

  friend bool operator==(const Monomial&, const Monomial&) = default;

  /// Three-way lexicographic comparison scanning variables in registration
  /// order: at the first variable where the exponents differ, the monomial
  /// with the larger exponent is the greater. Returns <0, 0, >0.
  static int lex_compare(const Monomial& a, const Monomial& b) {
    auto ai = a.factors_.begin(), ae = a.factors_.end();
    auto bi = b.factors_.begin(), be = b.factors_.end();
    while (ai != ae || bi != be) {
      if (bi == be) return 1;                  // a has a variable b lacks
      if (ai == ae) return -1;                 // b has a variable a lacks
      if (ai->first < bi->first) return 1;     // a's exponent there > 0 = b's
      if (bi->first < ai->first) return -1;
      if (ai->second != bi->second) return ai->second > bi->second ? 1 : -1;
      ++ai;
      ++bi;
    }
    return 0;
  }

 private:
  std::vector<Factor> factors_;
};

/// Orders term maps leading-monomial first.
struct LexGreater {
  bool operator()(const Monomial& a, const Monomial& b) const {
    return Monomial::lex_compare(a, b) > 0;
  }
};

/// Multivariate polynomial over the rationals in the variables of one
/// JetChart, held in canonical form: a sorted term map with no zero
/// coefficients. Exprs are immutable values; all operations are pure.
/// Mixing Exprs from different charts is an error.
class Expr {
 public:
  using TermMap = std::map<Monomial, Rational, LexGreater>;

  /// The zero polynomial on `chart`.
  explicit Expr(ChartPtr chart) : chart_(checked(std::move(chart))) {}

  static Expr constant(ChartPtr chart, Rational value) {
    Expr e(std::move(chart));
    if (value != 0) e.terms_.emplace(Monomial(), std::move(value));
    return e;
  }

  static Expr variable(ChartPtr chart, VarId v) {
    Expr e(std::move(chart));
    if (v.index >= e.chart_->size()) {
      throw std::out_of_range("Expr::variable: id not in chart");
    }
    e.terms_.emplace(Monomial::variable(v), Rational(1));
    return e;
  }

  /// Single-term polynomial c·m.
  static Expr term(ChartPtr chart, Monomial m, Rational c) {
    Expr e(std::move(chart));
    for (const auto& [v, exp] : m.factors()) {
      if (v.index >= e.chart_->size()) {
        throw std::out_of_range("Expr::term: id not in chart");
      }
    }
    if (c != 0) e.terms_.emplace(std::move(m), std::move(c));
    return e;
  }

  const ChartPtr& chart() const { return chart_; }
  const TermMap& terms() const { return terms_; }

  bool is_zero() const { return terms_.empty(); }

  bool is_constant() const {
    return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.is_constant());
  }

  /// Value of a constant Expr (zero included).
  Rational constant_value() const {
    if (terms_.empty()) return Rational(0);
    if (!is_constant()) {
      throw std::logic_error("Expr::constant_value: expression is not constant");
    }
    return terms_.begin()->second;
  }

  Rational coeff(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  std::uint64_t total_degree() const {
    std::uint64_t d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.total_degree());
    return d;
  }

  std::uint32_t degree_in(VarId v) const {
    std::uint32_t d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.degree_in(v));
    return d;
  }

  bool contains(VarId v) const {
    for (const auto& [m, c] : terms_) {
      if (m.degree_in(v) > 0) return true;
    }
    return false;
  }

  /// Distinct variables occurring with nonzero exponent, ascending.
  std::vector<VarId> variables() const {
    std::set<VarId> seen;
    for (const auto& [m, c] : terms_) {
      for (const auto& [v, e] : m.factors()) seen.insert(v);
    }
    return {seen.begin(), seen.end()};
  }

  /// Exact structural equality: same chart, identical canonical term maps.
  friend bool operator==(const Expr& a, const Expr& b) {
    return a.chart_ == b.chart_ && a.terms_ == b.terms_;
  }

  friend Expr operator-(const Expr& a) {
    Expr out(a.chart_);
    for (const auto& [m, c] : a.terms_) out.terms_.emplace(m, -c);
    return out;
  }

  friend Expr operator+(const Expr& a, const Expr& b) {
    same_chart(a, b);
    Expr out = a;
    for (const auto& [m, c] : b.terms_) out.add_term(m, c);
    return out;
  }

  friend Expr operator-(const Expr& a, const Expr& b) {
    same_chart(a, b);
    Expr out = a;
    for (const auto& [m, c] : b.terms_) out.add_term(m, -c);
    return out;
  }

  friend Expr operator*(const Expr& a, const Expr& b) {
    same_chart(a, b);
    Expr out(a.chart_);
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) {
        out.add_term(ma.times(mb), ca * cb);
      }
    }
    return out;
  }

  friend Expr operator*(const Expr& a, const Rational& k) {
    Expr out(a.chart_);
    if (k == 0) return out;
    for (const auto& [m, c] : a.terms_) out.terms_.emplace(m, c * k);
    return out;
  }

  friend Expr operator*(const Rational& k, const Expr& a) { return a * k; }

  friend Expr operator+(const Expr& a, const Rational& k) {
    return a + Expr::constant(a.chart_, k);
  }

  friend Expr operator-(const Expr& a, const Rational& k) {
    return a - Expr::constant(a.chart_, k);
  }

 private:
  static ChartPtr checked(ChartPtr chart) {
    if (!chart) throw std::invalid_argument("Expr: null chart");
    return chart;
  }

  static void same_chart(const Expr& a, const Expr& b) {
    if (a.chart_ != b.chart_) {
      throw std::invalid_argument("Expr: operands belong to different charts");
    }
  }

  void add_term(const Monomial& m, const Rational& c) {
    if (c == 0) return;
    auto [it, inserted] = terms_.emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  ChartPtr chart_;
  TermMap terms_;
};

/// Nonnegative integer power by repeated squaring; e^0 = 1.
inline Expr pow(const Expr& base, std::uint32_t exponent) {
  Expr result = Expr::constant(base.chart(), Rational(1));
  Expr square = base;
  while (exponent > 0) {
    if (exponent & 1u) result = result * square;
    exponent >>= 1u;
    if (exponent > 0) square = square * square;
  }
  return result;
}

/// Formal partial derivative with respect to one chart variable.
/// Linear, satisfies the product rule; exact.
inline Expr partial_derivative(const Expr& e, VarId v) {
  if (v.index >= e.chart()->size()) {
    throw std::out_of_range("partial_derivative: id not in chart");
  }
  Expr out(e.chart());
  for (const auto& [m, c] : e.terms()) {
    std::uint32_t exp = m.degree_in(v);
    if (exp == 0) continue;
    std::vector<Monomial::Factor> factors = m.factors();
    for (auto& [var, ex] : factors) {
      if (var == v) --ex;
    }
    out = out + Expr::term(e.chart(), Monomial::from_factors(std::move(factors)),
                           c * Rational(exp));
  }
  return out;
}

/// Simultaneous substitution: every variable in `bindings` is replaced by its
/// image in one pass (images are never re-substituted). A ring morphism.
inline Expr substitute(const Expr& e, const std::map<VarId, Expr>& bindings) {
  for (const auto& [v, image] : bindings) {
    if (v.index >= e.chart()->size()) {
      throw std::out_of_range("substitute: id not in chart");
    }
    if (image.chart() != e.chart()) {
      throw std::invalid_argument("substitute: binding from a different chart");
    }
  }
  Expr out(e.chart());
  for (const auto& [m, c] : e.terms()) {
    Expr term = Expr::constant(e.chart(), c);
    for (const auto& [v, exp] : m.factors()) {
      auto it = bindings.find(v);
      const Expr image =
          it == bindings.end() ? Expr::variable(e.chart(), v) : it->second;
      term = term * pow(image, exp);
    }
    out = out + term;
  }
  return out;
}

inline Expr substitute(const Expr& e, VarId v, const Expr& image) {
  return substitute(e, std::map<VarId, Expr>{{v, image}});
}

/// Double-precision evaluation. The operation order is fixed — terms in
/// monomial order, factors in variable order, powers by repeated
/// multiplication — so results are reproducible bit-for-bit, and compiled
/// evaluators can match them exactly by following the same recipe.
inline double eval_numeric(const Expr& e, const std::map<VarId, double>& point) {
  double acc = 0.0;
  for (const auto& [m, c] : e.terms()) {
    double term = to_double(c);
    for (const auto& [v, exp] : m.factors()) {
      auto it = point.find(v);
      if (it == point.end()) {
        throw std::invalid_argument("eval_numeric: unbound variable '" +
                                    e.chart()->display_name(v) + "'");
      }
      for (std::uint32_t k = 0; k < exp; ++k) term *= it->second;
    }
    acc += term;
  }
  return acc;
}

}  // namespace hamdirac
