#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace dpost::calc {

// Exact rational with 64-bit numerator/denominator, always reduced and with a
// positive denominator. Arithmetic that would leave the 64-bit range throws
// ParseError: the calculator treats out-of-range values like malformed input.
class Rational {
 public:
  Rational() = default;
  Rational(int64_t value) : num_(value) {}  // NOLINT(google-explicit-constructor)
  Rational(int64_t num, int64_t den);

  // Parses an unsigned decimal literal such as "12", "2.5" or "0.125".
  static Rational from_decimal(std::string_view literal);

  int64_t num() const { return num_; }
  int64_t den() const { return den_; }
  bool is_integer() const { return den_ == 1; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  // Integer if integral, otherwise the shortest decimal with at most six
  // fractional digits (rounded half away from zero).
  std::string canonical() const;

  Rational operator-() const;
  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  // Throws DivisionByZero.
  friend Rational operator/(const Rational& a, const Rational& b);

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

 private:
  static Rational from_wide(__int128 num, __int128 den);

  int64_t num_ = 0;
  int64_t den_ = 1;
};

inline constexpr int kCanonicalFractionDigits = 6;

}  // namespace dpost::calc
