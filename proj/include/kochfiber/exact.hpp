#pragma once

// Exact arithmetic in the ring Q(sqrt 3). Every vertex of the prefractal,
// its cells and its fiber patches has coordinates a + b*sqrt(3), a, b rational.

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kochfiber {

class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT
  Rational(std::int64_t n, std::int64_t d);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  bool is_integer() const { return den_ == 1; }
  int sign() const { return (num_ > 0) - (num_ < 0); }

  // Parses "0.125", "-3", "1/8", "2.5e-2".
  static Rational parse(const std::string& s);

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  Rational operator-() const;
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }

  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

  std::string str() const;

 private:
  static Rational from_wide(__int128 n, __int128 d);
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

// a + b*sqrt(3)
class QSqrt3 {
 public:
  constexpr QSqrt3() = default;
  QSqrt3(Rational a) : a_(a) {}  // NOLINT
  QSqrt3(std::int64_t a) : a_(a) {}  // NOLINT
  QSqrt3(Rational a, Rational b) : a_(a), b_(b) {}

  const Rational& a() const { return a_; }
  const Rational& b() const { return b_; }
  double to_double() const;
  int sign() const;
  QSqrt3 conj() const { return {a_, -b_}; }
  bool is_rational() const { return b_.sign() == 0; }

  friend QSqrt3 operator+(const QSqrt3& x, const QSqrt3& y) { return {x.a_ + y.a_, x.b_ + y.b_}; }
  friend QSqrt3 operator-(const QSqrt3& x, const QSqrt3& y) { return {x.a_ - y.a_, x.b_ - y.b_}; }
  friend QSqrt3 operator*(const QSqrt3& x, const QSqrt3& y);
  friend QSqrt3 operator/(const QSqrt3& x, const QSqrt3& y);
  QSqrt3 operator-() const { return {-a_, -b_}; }
  QSqrt3& operator+=(const QSqrt3& o) { return *this = *this + o; }
  QSqrt3& operator-=(const QSqrt3& o) { return *this = *this - o; }

  friend bool operator==(const QSqrt3& x, const QSqrt3& y) = default;
  friend bool operator<(const QSqrt3& x, const QSqrt3& y) { return (x - y).sign() < 0; }
  friend bool operator>(const QSqrt3& x, const QSqrt3& y) { return (x - y).sign() > 0; }
  friend bool operator<=(const QSqrt3& x, const QSqrt3& y) { return (x - y).sign() <= 0; }

  std::string str() const;

 private:
  Rational a_;
  Rational b_;
};

struct ExactPoint {
  QSqrt3 x;
  QSqrt3 y;

  friend ExactPoint operator+(const ExactPoint& p, const ExactPoint& q) { return {p.x + q.x, p.y + q.y}; }
  friend ExactPoint operator-(const ExactPoint& p, const ExactPoint& q) { return {p.x - q.x, p.y - q.y}; }
  friend ExactPoint operator*(const QSqrt3& s, const ExactPoint& p) { return {s * p.x, s * p.y}; }
  friend bool operator==(const ExactPoint& p, const ExactPoint& q) = default;
  friend bool operator<(const ExactPoint& p, const ExactPoint& q);

  Eigen::Vector2d to_vec() const { return {x.to_double(), y.to_double()}; }
  std::string str() const;
};

QSqrt3 cross(const ExactPoint& u, const ExactPoint& v);
// Twice the signed area of a closed polygon.
QSqrt3 twice_signed_area(const std::vector<ExactPoint>& poly);

std::size_t hash_value(const Rational& r);
std::size_t hash_value(const QSqrt3& q);
std::size_t hash_value(const ExactPoint& p);

struct ExactPointHash {
  std::size_t operator()(const ExactPoint& p) const { return hash_value(p); }
};

std::ostream& operator<<(std::ostream& os, const Rational& r);
std::ostream& operator<<(std::ostream& os, const QSqrt3& q);
std::ostream& operator<<(std::ostream& os, const ExactPoint& p);

}  // namespace kochfiber
