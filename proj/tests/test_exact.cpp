#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include <boost/multiprecision/cpp_int.hpp>

#include "kochfiber/exact.hpp"

using namespace kochfiber;
using BigQ = boost::multiprecision::cpp_rational;

namespace {

BigQ big(const Rational& r) { return BigQ(r.num(), r.den()); }

// Sign of a + b sqrt3 in arbitrary precision.
int big_sign(const BigQ& a, const BigQ& b) {
  const int sa = a.sign(), sb = b.sign();
  if (sb == 0) return sa;
  if (sa == 0) return sb;
  if (sa == sb) return sa;
  const BigQ lhs = a * a, rhs = 3 * b * b;
  if (lhs == rhs) return 0;
  return lhs > rhs ? sa : sb;
}

Rational random_rational(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> num(-2000, 2000), den(1, 97);
  return {num(rng), den(rng)};
}

}  // namespace

TEST_CASE("rational normalization and parsing") {
  CHECK(Rational(6, -4) == Rational(-3, 2));
  CHECK(Rational(6, -4).den() == 2);
  CHECK(Rational(0, 5) == Rational(0));
  CHECK_THROWS_AS(Rational(1, 0), std::domain_error);
  CHECK(Rational::parse("0.125") == Rational(1, 8));
  CHECK(Rational::parse("-3") == Rational(-3));
  CHECK(Rational::parse("1/8") == Rational(1, 8));
  CHECK(Rational::parse("2.5e-2") == Rational(1, 40));
  CHECK(Rational::parse("3/50").str() == "3/50");
  CHECK(Rational(7).str() == "7");
  CHECK(Rational(1, 3) < Rational(1, 2));
  CHECK(Rational(-1, 3) > Rational(-1, 2));
}

TEST_CASE("rational arithmetic against arbitrary precision") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 500; ++k) {
    const Rational a = random_rational(rng), b = random_rational(rng);
    CHECK(big(a + b) == big(a) + big(b));
    CHECK(big(a - b) == big(a) - big(b));
    CHECK(big(a * b) == big(a) * big(b));
    if (b.sign() != 0) CHECK(big(a / b) == big(a) / big(b));
    CHECK((a < b) == (big(a) < big(b)));
  }
}

TEST_CASE("overflow is detected, not wrapped") {
  const Rational huge(std::int64_t{1} << 62, 3);
  CHECK_THROWS_AS(huge * huge, std::overflow_error);
}

TEST_CASE("signs and order in Q(sqrt3)") {
  CHECK(QSqrt3(Rational(2), Rational(-1)).sign() == 1);   // 2 - sqrt3
  CHECK(QSqrt3(Rational(-7, 4), Rational(1)).sign() == -1);  // sqrt3 - 7/4
  CHECK(QSqrt3(Rational(-5, 3), Rational(1)).sign() == 1);   // sqrt3 - 5/3
  CHECK(QSqrt3().sign() == 0);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 1000; ++k) {
    const QSqrt3 x(random_rational(rng), random_rational(rng));
    CHECK(x.sign() == big_sign(big(x.a()), big(x.b())));
    const QSqrt3 y(random_rational(rng), random_rational(rng));
    const QSqrt3 p = x * y;
    CHECK(big(p.a()) == big(x.a()) * big(y.a()) + 3 * big(x.b()) * big(y.b()));
    CHECK(big(p.b()) == big(x.a()) * big(y.b()) + big(x.b()) * big(y.a()));
    if (y.sign() != 0) CHECK((p / y) == x);
    CHECK(std::abs(x.to_double() - (x.a().to_double() + x.b().to_double() * std::sqrt(3.0))) <= 1e-12 * (1 + std::abs(x.to_double())));
  }
}

TEST_CASE("exact polygons and hashing") {
  const QSqrt3 h(Rational(0), Rational(1, 2));
  const std::vector<ExactPoint> tri{{QSqrt3(0), QSqrt3(0)}, {QSqrt3(1), QSqrt3(0)}, {QSqrt3(Rational(1, 2)), h}};
  CHECK(twice_signed_area(tri) == h);
  const std::vector<ExactPoint> rev(tri.rbegin(), tri.rend());
  CHECK(twice_signed_area(rev) == -h);
  std::unordered_set<ExactPoint, ExactPointHash> set(tri.begin(), tri.end());
  set.insert(ExactPoint{QSqrt3(Rational(2, 4)), h});
  CHECK(set.size() == 3);
  CHECK(QSqrt3(Rational(-1, 2), Rational(3)).str() == "-1/2+3*sqrt3");
}
