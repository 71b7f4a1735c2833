#pragma once

// Exact rational numbers backed by GMP. Every value is kept in lowest terms
// with a positive denominator, so equal values have identical representations.

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace arctic {

class Rational {
 public:
  Rational() = default;
  Rational(long value) : value_(value) {}  // NOLINT(google-explicit-constructor)
  Rational(int value) : value_(static_cast<long>(value)) {}  // NOLINT
  Rational(long num, long den) {
    if (den == 0) throw std::domain_error("rational with zero denominator");
    value_ = mpq_class(num, den);
    value_.canonicalize();
  }
  explicit Rational(const mpz_class& integer) : value_(integer) {}
  explicit Rational(mpq_class value) : value_(std::move(value)) { value_.canonicalize(); }

  // Accepts "7", "-7", "3/2", "-3/2". Whitespace and decimal points are rejected.
  static Rational parse(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("empty rational literal");
    auto slash = text.find('/');
    auto valid_integer = [](std::string_view s, bool allow_sign) {
      if (s.empty()) return false;
      std::size_t k = 0;
      if (allow_sign && (s[0] == '-' || s[0] == '+')) k = 1;
      if (k == s.size()) return false;
      for (; k < s.size(); ++k)
        if (s[k] < '0' || s[k] > '9') return false;
      return true;
    };
    std::string_view num = text.substr(0, slash);
    std::string_view den = slash == std::string_view::npos ? std::string_view{} : text.substr(slash + 1);
    if (!valid_integer(num, true) || (slash != std::string_view::npos && !valid_integer(den, false)))
      throw std::invalid_argument("malformed rational literal '" + std::string(text) + "'");
    std::string num_str(num[0] == '+' ? num.substr(1) : num);
    Rational r;
    mpz_class n(num_str, 10);
    if (slash == std::string_view::npos) {
      r.value_ = mpq_class(n);
      return r;
    }
    mpz_class d{std::string(den), 10};
    if (d == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
    r.value_ = mpq_class(n, d);
    r.value_.canonicalize();
    return r;
  }

  // Decimal integer when the denominator is 1, otherwise "p/q".
  std::string str() const { return value_.get_str(10); }

  const mpq_class& raw() const { return value_; }
  mpz_class numerator() const { return value_.get_num(); }
  mpz_class denominator() const { return value_.get_den(); }

  int sign() const { return sgn(value_); }
  bool is_zero() const { return sign() == 0; }
  bool is_positive() const { return sign() > 0; }
  bool is_negative() const { return sign() < 0; }
  bool is_integer() const { return value_.get_den() == 1; }

  Rational abs() const {
    Rational r;
    mpq_abs(r.value_.get_mpq_t(), value_.get_mpq_t());
    return r;
  }
  Rational inverse() const {
    if (is_zero()) throw std::domain_error("inverse of zero");
    Rational r;
    mpq_inv(r.value_.get_mpq_t(), value_.get_mpq_t());
    return r;
  }

  // Largest integer not exceeding the value.
  mpz_class floor() const {
    mpz_class q;
    mpz_fdiv_q(q.get_mpz_t(), value_.get_num_mpz_t(), value_.get_den_mpz_t());
    return q;
  }

  double to_double() const { return value_.get_d(); }

  Rational& operator+=(const Rational& o) {
    mpq_add(value_.get_mpq_t(), value_.get_mpq_t(), o.value_.get_mpq_t());
    return *this;
  }
  Rational& operator-=(const Rational& o) {
    mpq_sub(value_.get_mpq_t(), value_.get_mpq_t(), o.value_.get_mpq_t());
    return *this;
  }
  Rational& operator*=(const Rational& o) {
    mpq_mul(value_.get_mpq_t(), value_.get_mpq_t(), o.value_.get_mpq_t());
    return *this;
  }
  Rational& operator/=(const Rational& o) {
    if (o.is_zero()) throw std::domain_error("division by zero");
    mpq_div(value_.get_mpq_t(), value_.get_mpq_t(), o.value_.get_mpq_t());
    return *this;
  }

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }
  friend Rational operator-(const Rational& a) {
    Rational r;
    mpq_neg(r.value_.get_mpq_t(), a.value_.get_mpq_t());
    return r;
  }

  friend bool operator==(const Rational& a, const Rational& b) {
    return mpq_equal(a.value_.get_mpq_t(), b.value_.get_mpq_t()) != 0;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    int c = mpq_cmp(a.value_.get_mpq_t(), b.value_.get_mpq_t());
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

 private:
  mpq_class value_;
};

inline const Rational& min(const Rational& a, const Rational& b) { return b < a ? b : a; }
inline const Rational& max(const Rational& a, const Rational& b) { return a < b ? b : a; }

// base^exponent for a nonnegative integer exponent.
inline Rational pow(const Rational& base, unsigned long exponent) {
  mpz_class num, den;
  mpz_pow_ui(num.get_mpz_t(), base.raw().get_num_mpz_t(), exponent);
  mpz_pow_ui(den.get_mpz_t(), base.raw().get_den_mpz_t(), exponent);
  return Rational(mpq_class(num, den));
}

}  // namespace arctic
