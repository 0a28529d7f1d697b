#include "dpost/calc/rational.h"

#include <cstdlib>
#include <limits>

#include "dpost/common/error.h"

namespace dpost::calc {
namespace {

__int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

bool fits64(__int128 v) {
  return v >= std::numeric_limits<int64_t>::min() && v <= std::numeric_limits<int64_t>::max();
}

}  // namespace

Rational::Rational(int64_t num, int64_t den) {
  if (den == 0) throw DivisionByZero("rational with zero denominator");
  *this = from_wide(num, den);
}

Rational Rational::from_wide(__int128 num, __int128 den) {
  if (den == 0) throw DivisionByZero("division by zero");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (!fits64(num) || !fits64(den)) throw ParseError("value out of calculator range");
  Rational r;
  r.num_ = static_cast<int64_t>(num);
  r.den_ = static_cast<int64_t>(den);
  return r;
}

Rational Rational::from_decimal(std::string_view literal) {
  if (literal.empty()) throw ParseError("empty number");
  __int128 num = 0;
  __int128 den = 1;
  bool seen_point = false;
  bool seen_digit = false;
  constexpr __int128 kLimit = static_cast<__int128>(1) << 100;
  for (char c : literal) {
    if (c == '.') {
      if (seen_point) throw ParseError("number has two decimal points");
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') throw ParseError("bad digit in number");
    seen_digit = true;
    num = num * 10 + (c - '0');
    if (seen_point) den *= 10;
    if (num > kLimit || den > kLimit) throw ParseError("number too long");
  }
  if (!seen_digit) throw ParseError("number without digits");
  return from_wide(num, den);
}

std::string Rational::canonical() const {
  if (den_ == 1) return std::to_string(num_);
  bool negative = num_ < 0;
  __int128 n = num_;
  if (negative) n = -n;
  __int128 scale = 1;
  for (int i = 0; i < kCanonicalFractionDigits; ++i) scale *= 10;
  // round(n / den * scale), half away from zero
  __int128 scaled = (n * scale * 2 + den_) / (static_cast<__int128>(den_) * 2);
  __int128 whole = scaled / scale;
  __int128 frac = scaled % scale;
  std::string out;
  if (negative && scaled != 0) out.push_back('-');
  out += std::to_string(static_cast<long long>(whole));
  if (frac != 0) {
    std::string digits = std::to_string(static_cast<long long>(frac));
    digits.insert(0, static_cast<size_t>(kCanonicalFractionDigits) - digits.size(), '0');
    while (!digits.empty() && digits.back() == '0') digits.pop_back();
    out += '.';
    out += digits;
  }
  return out;
}

Rational Rational::operator-() const { return from_wide(-static_cast<__int128>(num_), den_); }

Rational operator+(const Rational& a, const Rational& b) {
  return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                             static_cast<__int128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
  return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_ - static_cast<__int128>(b.num_) * a.den_,
                             static_cast<__int128>(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return Rational::from_wide(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  if (b.num_ == 0) throw DivisionByZero("division by zero");
  return Rational::from_wide(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
  __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

}  // namespace dpost::calc
