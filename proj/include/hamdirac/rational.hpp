#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <string>

namespace hamdirac {

using BigInt = boost::multiprecision::cpp_int;

/// Exact rational scalar. Always stored reduced, with a positive denominator;
/// zero is 0/1. Equality is exact value equality.
using Rational = boost::multiprecision::cpp_rational;

/// Builds a rational from a (possibly unnormalized) fraction. The sign is
/// moved to the numerator; a zero denominator is rejected here rather than
/// deep inside the arithmetic backend.
inline Rational make_rational(BigInt numerator, BigInt denominator = 1) {
  if (denominator == 0) {
    throw std::domain_error("make_rational: zero denominator");
  }
  if (denominator < 0) {
    numerator = -numerator;
    denominator = -denominator;
  }
  return Rational(std::move(numerator), std::move(denominator));
}

inline Rational make_rational(long long numerator, long long denominator) {
  return make_rational(BigInt(numerator), BigInt(denominator));
}

inline bool is_integer(const Rational& r) { return denominator(r) == 1; }

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// "n" for integers, "n/d" otherwise; matches the expression grammar's
/// rational literals (modulo a leading '-', which renderers handle).
inline std::string to_string(const Rational& r) {
  std::string out = numerator(r).str();
  if (!is_integer(r)) {
    out += '/';
    out += denominator(r).str();
  }
  return out;
}

}  // namespace hamdirac
