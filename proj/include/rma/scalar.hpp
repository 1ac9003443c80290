#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <charconv>
#include <cmath>
#include <cstring>
#include <string>
#include <string_view>
#include <system_error>

#include "rma/error.hpp"

namespace rma {

/// Exact rational, always normalized (gcd(|p|, q) = 1, q >= 1) by GMP.
using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational, boost::multiprecision::et_off>;

enum class ScalarKind { Float64, Rational };

template <typename T>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr ScalarKind kind = ScalarKind::Float64;
  static constexpr std::string_view tag = "f64";
  static constexpr bool exact = false;

  static double to_double(double v) { return v; }
  static double from_int(long long v) { return static_cast<double>(v); }
  static bool is_zero(double v) { return v == 0.0; }

  static double sqrt(double v) { return std::sqrt(v); }

  // Shortest round-trip decimal.
  static std::string format(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  }

  static double parse(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw Error(ErrorKind::ParseError, "bad f64 entry '" + std::string(s) + "'");
    return v;
  }

  static bool bitwise_equal(double a, double b) {
    return std::memcmp(&a, &b, sizeof(double)) == 0;
  }
};

template <>
struct ScalarTraits<Rational> {
  static constexpr ScalarKind kind = ScalarKind::Rational;
  static constexpr std::string_view tag = "rat";
  static constexpr bool exact = true;

  static double to_double(const Rational& v) { return v.convert_to<double>(); }
  static Rational from_int(long long v) { return Rational(v); }
  static bool is_zero(const Rational& v) { return v == 0; }

  [[noreturn]] static Rational sqrt(const Rational&) {
    throw Error(ErrorKind::UnsupportedScalar, "square root of a rational scalar");
  }

  // `p/q`, or a bare integer when q = 1.
  static std::string format(const Rational& v) { return v.str(); }

  static Rational parse(std::string_view s) {
    if (s.empty()) throw Error(ErrorKind::ParseError, "empty rational entry");
    auto valid = [](std::string_view part) {
      if (part.empty()) return false;
      std::size_t i = (part[0] == '-' || part[0] == '+') ? 1 : 0;
      if (i == part.size()) return false;
      for (; i < part.size(); ++i)
        if (part[i] < '0' || part[i] > '9') return false;
      return true;
    };
    auto slash = s.find('/');
    std::string_view num = s.substr(0, slash);
    std::string_view den = slash == std::string_view::npos ? std::string_view{"1"} : s.substr(slash + 1);
    if (!valid(num) || !valid(den) || den[0] == '-' || den[0] == '+')
      throw Error(ErrorKind::ParseError, "bad rational entry '" + std::string(s) + "'");
    boost::multiprecision::mpz_int p{std::string(num[0] == '+' ? num.substr(1) : num)};
    boost::multiprecision::mpz_int q{std::string(den)};
    if (q == 0) throw Error(ErrorKind::ParseError, "zero denominator in '" + std::string(s) + "'");
    return Rational(p, q);
  }

  static bool bitwise_equal(const Rational& a, const Rational& b) { return a == b; }
};

template <typename T>
inline constexpr bool is_float_scalar_v = ScalarTraits<T>::kind == ScalarKind::Float64;

}  // namespace rma
