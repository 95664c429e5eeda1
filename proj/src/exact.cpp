#include "kochfiber/exact.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace kochfiber {

namespace {

using wide = __int128;

wide wide_abs(wide v) { return v < 0 ? -v : v; }

wide wide_gcd(wide a, wide b) {
  a = wide_abs(a);
  b = wide_abs(b);
  while (b != 0) {
    wide t = a % b;
    a = b;
    b = t;
  }
  return a;
}

constexpr wide kMax = std::numeric_limits<std::int64_t>::max();

}  // namespace

Rational::Rational(std::int64_t n, std::int64_t d) {
  *this = from_wide(n, d);
}

Rational Rational::from_wide(wide n, wide d) {
  if (d == 0) throw std::domain_error("rational with zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  wide g = wide_gcd(n, d);
  if (g > 1) {
    n /= g;
    d /= g;
  }
  if (n == 0) d = 1;
  if (wide_abs(n) > kMax || d > kMax) throw std::overflow_error("rational overflow");
  Rational r;
  r.num_ = static_cast<std::int64_t>(n);
  r.den_ = static_cast<std::int64_t>(d);
  return r;
}

Rational operator+(const Rational& a, const Rational& b) {
  if (a.den_ == b.den_) return Rational::from_wide(wide(a.num_) + b.num_, a.den_);
  return Rational::from_wide(wide(a.num_) * b.den_ + wide(b.num_) * a.den_, wide(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

Rational operator*(const Rational& a, const Rational& b) {
  return Rational::from_wide(wide(a.num_) * b.num_, wide(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  return Rational::from_wide(wide(a.num_) * b.den_, wide(a.den_) * b.num_);
}

Rational Rational::operator-() const {
  Rational r;
  r.num_ = -num_;
  r.den_ = den_;
  return r;
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  wide l = wide(a.num_) * b.den_;
  wide r = wide(b.num_) * a.den_;
  if (l < r) return std::strong_ordering::less;
  if (l > r) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

Rational Rational::parse(const std::string& text) {
  auto slash = text.find('/');
  if (slash != std::string::npos) {
    return parse(text.substr(0, slash)) / parse(text.substr(slash + 1));
  }
  std::string s = text;
  std::int64_t exp10 = 0;
  auto e = s.find_first_of("eE");
  if (e != std::string::npos) {
    exp10 = std::stoll(s.substr(e + 1));
    s = s.substr(0, e);
  }
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s = s.substr(1);
  }
  if (s.empty()) throw std::invalid_argument("empty number");
  wide num = 0;
  std::int64_t frac_digits = 0;
  bool seen_dot = false;
  for (char c : s) {
    if (c == '.') {
      if (seen_dot) throw std::invalid_argument("bad number: " + text);
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') throw std::invalid_argument("bad number: " + text);
    num = num * 10 + (c - '0');
    if (num > kMax) throw std::overflow_error("number too long: " + text);
    if (seen_dot) ++frac_digits;
  }
  exp10 -= frac_digits;
  wide den = 1;
  for (; exp10 > 0; --exp10) num *= 10;
  for (; exp10 < 0; ++exp10) den *= 10;
  return from_wide(neg ? -num : num, den);
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

double QSqrt3::to_double() const {
  long double v = static_cast<long double>(a_.num()) / a_.den() +
                  static_cast<long double>(b_.num()) / b_.den() * 1.7320508075688772935274463415058723L;
  return static_cast<double>(v);
}

int QSqrt3::sign() const {
  int sa = a_.sign();
  int sb = b_.sign();
  if (sb == 0) return sa;
  if (sa == 0) return sb;
  if (sa == sb) return sa;
  // Compare a^2 with 3 b^2 exactly.
  using boost::multiprecision::int256_t;
  int256_t p = a_.num(), q = a_.den(), r = b_.num(), s = b_.den();
  int256_t lhs = p * p * s * s;
  int256_t rhs = 3 * r * r * q * q;
  if (lhs > rhs) return sa;
  return sb;
}

QSqrt3 operator*(const QSqrt3& x, const QSqrt3& y) {
  return {x.a_ * y.a_ + Rational(3) * x.b_ * y.b_, x.a_ * y.b_ + x.b_ * y.a_};
}

QSqrt3 operator/(const QSqrt3& x, const QSqrt3& y) {
  Rational norm = y.a_ * y.a_ - Rational(3) * y.b_ * y.b_;
  if (norm.sign() == 0) throw std::domain_error("division by zero in Q(sqrt3)");
  QSqrt3 num = x * y.conj();
  return {num.a_ / norm, num.b_ / norm};
}

std::string QSqrt3::str() const {
  if (b_.sign() == 0) return a_.str();
  if (a_.sign() == 0) return b_.str() + "*sqrt3";
  return a_.str() + (b_.sign() > 0 ? "+" : "") + b_.str() + "*sqrt3";
}

bool operator<(const ExactPoint& p, const ExactPoint& q) {
  if (p.x != q.x) return p.x < q.x;
  return p.y < q.y;
}

std::string ExactPoint::str() const { return "(" + x.str() + ", " + y.str() + ")"; }

QSqrt3 cross(const ExactPoint& u, const ExactPoint& v) { return u.x * v.y - u.y * v.x; }

QSqrt3 twice_signed_area(const std::vector<ExactPoint>& poly) {
  QSqrt3 s;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    s += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return s;
}

std::size_t hash_value(const Rational& r) {
  std::size_t h = std::hash<std::int64_t>{}(r.num());
  return h ^ (std::hash<std::int64_t>{}(r.den()) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

std::size_t hash_value(const QSqrt3& q) {
  std::size_t h = hash_value(q.a());
  return h ^ (hash_value(q.b()) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

std::size_t hash_value(const ExactPoint& p) {
  std::size_t h = hash_value(p.x);
  return h ^ (hash_value(p.y) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }
std::ostream& operator<<(std::ostream& os, const QSqrt3& q) { return os << q.str(); }
std::ostream& operator<<(std::ostream& os, const ExactPoint& p) { return os << p.str(); }

}  // namespace kochfiber
