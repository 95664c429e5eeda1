#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <set>

#include "kochfiber/geometry.hpp"

using namespace kochfiber;
using cd = std::complex<double>;

namespace {

const double s3 = std::sqrt(3.0);

// Independent oracle: the four maps written directly in complex arithmetic.
cd psi(int i, cd z) {
  const cd rot_m(0.5, -s3 / 2), rot_p(0.5, s3 / 2);
  switch (i) {
    case 1: return z / 3.0;
    case 2: return z / 3.0 * rot_m + 1.0 / 3.0;
    case 3: return z / 3.0 * rot_p + cd(0.5, -s3 / 6);
    default: return (z + 2.0) / 3.0;
  }
}

cd to_c(const ExactPoint& p) { return {p.x.to_double(), p.y.to_double()}; }

ExactPoint pt(Rational x, Rational y, Rational ys = 0) { return {QSqrt3(x), QSqrt3(y, ys)}; }

}  // namespace

TEST_CASE("unit maps on curve 1") {
  auto m = unit_maps(1);
  CHECK(m[0].apply(kB) == pt(Rational(1, 3), 0));
  CHECK(m[1].apply(kC) == pt(Rational(2, 3), 0));
  CHECK(m[2].apply(kC) == pt(Rational(1, 3), 0));
  const cd C(0.5, s3 / 2);
  for (int i = 1; i <= 4; ++i) {
    for (cd z : {cd(0, 0), cd(1, 0), C, cd(0.3, -0.2)}) {
      ExactPoint e{QSqrt3(Rational::parse(std::to_string(z.real()))), QSqrt3(Rational::parse(std::to_string(z.imag())))};
      CHECK(std::abs(to_c(m[i - 1].apply(e)) - psi(i, to_c(e))) < 1e-14);
    }
  }
}

TEST_CASE("curves 2 and 3 carry side AB to BC and CA with outward bumps") {
  for (int c = 2; c <= 3; ++c) {
    auto m = unit_maps(c);
    for (const auto& f : m) CHECK(f.scale == Rational(1, 3));
    CellAddress tip{c, {2}};
    auto tri = cell_triangle(tip);
    // Bump tip lies outside the unit triangle.
    cd t = to_c(tri[1]);
    cd g(0.5, s3 / 6);
    CHECK(std::abs(t - g) > 0.5);
  }
  CHECK(cell_triangle({2, {}})[0] == kB);
  CHECK(cell_triangle({3, {}})[0] == kC);
}

TEST_CASE("compose examples") {
  CHECK(compose({1, {}}) == Similitude::identity());
  CHECK(compose({2, {}}) == Similitude::identity());
  CHECK(compose({1, {1, 1}}).apply(kB) == pt(Rational(1, 9), 0));
  CHECK(compose({1, {2, 1}}).apply(kC) == pt(Rational(4, 9), 0));
  CHECK(std::abs(to_c(compose({1, {2, 1}}).apply(kC)) - psi(2, psi(1, cd(0.5, s3 / 2)))) < 1e-15);
  CHECK(compose({3, {4, 2, 1}}).scale == Rational(1, 27));
}

TEST_CASE("cell triangles") {
  auto t1 = cell_triangle({1, {1}});
  CHECK(t1[0] == pt(0, 0));
  CHECK(t1[1] == pt(Rational(1, 3), 0));
  CHECK(t1[2] == pt(Rational(1, 6), 0, Rational(1, 6)));
  auto t2 = cell_triangle({1, {2}});
  auto t3 = cell_triangle({1, {3}});
  std::set<ExactPoint> a(t2.begin(), t2.end()), b(t3.begin(), t3.end());
  CHECK(a == b);
  CHECK(a.count(pt(Rational(1, 2), 0, Rational(-1, 6))) == 1);
  for (const auto& addr : all_addresses(3)) {
    auto t = cell_triangle(addr);
    CHECK(std::abs(std::abs(to_c(t[1]) - to_c(t[0])) - 1.0 / 27.0) < 1e-15);
    auto c = compose(addr);
    auto f = curve_frame(addr.curve);
    CHECK(c.apply(f.apply(kA)) == t[0]);
    CHECK(c.apply(f.apply(kC)) == t[2]);
  }
}

TEST_CASE("prefractal counts and areas") {
  auto p0 = prefractal(0);
  CHECK(p0.segments.size() == 3);
  auto p1 = prefractal(1);
  CHECK(p1.segments.size() == 12);
  bool has_tip = false;
  for (const auto& v : p1.vertices) has_tip |= v == pt(Rational(1, 2), 0, Rational(-1, 6));
  CHECK(has_tip);
  CHECK(prefractal_area(p1) == QSqrt3(Rational(0), Rational(1, 3)));
  double prev = 0.0;
  for (int n = 0; n <= 6; ++n) {
    auto p = prefractal(n);
    CHECK(p.segments.size() == 3 * (std::size_t{1} << (2 * n)));
    double area = prefractal_area(p).to_double();
    double series = s3 / 4 * (1.0 + (1.0 / 3.0) * (1.0 - std::pow(4.0 / 9.0, n)) / (1.0 - 4.0 / 9.0));
    CHECK(std::abs(area - series) < 1e-12);
    CHECK(area > prev);
    prev = area;
    for (const auto& s : p.segments) {
      CHECK(std::abs(std::abs(to_c(s[1]) - to_c(s[0])) - std::pow(3.0, -n)) < 1e-13);
    }
  }
  CHECK(std::abs(prev - 2 * s3 / 5) < 1e-2);
  CHECK_THROWS_AS(prefractal(9), ResourceLimit);
}

TEST_CASE("Hausdorff distance between consecutive prefractals") {
  for (int n = 0; n <= 3; ++n) {
    auto a = prefractal(n), b = prefractal(n + 1);
    auto dist_to_poly = [](cd z, const Prefractal& p) {
      double best = 1e9;
      for (const auto& s : p.segments) {
        cd u = to_c(s[0]), v = to_c(s[1]);
        double t = std::clamp(std::real((z - u) * std::conj(v - u)) / std::norm(v - u), 0.0, 1.0);
        best = std::min(best, std::abs(z - (u + t * (v - u))));
      }
      return best;
    };
    double h = 0;
    for (const auto& v : b.vertices) h = std::max(h, dist_to_poly(to_c(v), a));
    for (const auto& v : a.vertices) h = std::max(h, dist_to_poly(to_c(v), b));
    CHECK(h <= s3 / 2 * std::pow(3.0, -(n + 1)) + 1e-14);
  }
}

TEST_CASE("unit fibers") {
  QSqrt3 eps = parse_amplitude("0.1");
  auto u = unit_fibers(eps);
  const double c1 = 2 - s3;
  auto p1 = u.inner_trapezoid[0][1].to_vec();
  CHECK(p1.x() == doctest::Approx(0.1 / c1).epsilon(1e-14));
  CHECK(p1.x() == doctest::Approx(0.37320).epsilon(1e-5));
  CHECK(p1.y() == doctest::Approx(-0.05));
  // Oblique side of the triangle at A: y = -C1 x / 2.
  auto tA = u.inner[0][1];
  for (const auto& q : tA) {
    auto v = q.to_vec();
    if (v.y() != 0) CHECK(std::abs(v.y() + c1 * v.x() / 2) < 1e-14);
  }
  // Pieces tile the trapezoid, both bands contained in the outer trapezoid.
  for (int l = 0; l < 3; ++l) {
    QSqrt3 inner_sum, ann_sum;
    for (int k = 0; k < 3; ++k) {
      CHECK(twice_signed_area(u.inner[l][k]).sign() > 0);
      CHECK(twice_signed_area(u.annulus[l][k]).sign() > 0);
      inner_sum += twice_signed_area(u.inner[l][k]);
      ann_sum += twice_signed_area(u.annulus[l][k]);
    }
    CHECK(inner_sum == twice_signed_area(u.inner_trapezoid[l]));
    CHECK(inner_sum + ann_sum == twice_signed_area(u.outer_trapezoid[l]));
  }
  CHECK_THROWS_AS(unit_fibers(QSqrt3(0)), AmplitudeOutOfRange);
  CHECK_THROWS_AS(unit_fibers(eps0_exact()), AmplitudeOutOfRange);
  CHECK_NOTHROW(unit_fibers(parse_amplitude("eps0/2")));
}

TEST_CASE("build_domain dedup and coincidence of cells 2 and 3") {
  auto g = build_domain(1, parse_amplitude("0.1"));
  // Base patch of cell (2) equals the side-3 patch of cell (3).
  const FiberPatch* base2 = nullptr;
  for (const auto& p : g.patches) {
    if (p.cell == CellAddress{1, {2}} && p.side == 0 && p.band == Band::Inner && p.piece == Piece::Rectangle) base2 = &p;
  }
  REQUIRE(base2 != nullptr);
  CHECK(base2->multiplicity == 2);
  auto t3 = cell_triangle({1, {3}});
  // Side 3 of cell (3) runs from its third vertex back to the first.
  CHECK(((t3[2] == cell_triangle({1, {2}})[0]) && (t3[0] == cell_triangle({1, {2}})[1])));

  for (int n = 1; n <= 3; ++n) {
    auto gn = build_domain(n, default_amplitude(n));
    int mult = 0;
    for (const auto& s : gn.strips) mult += s.multiplicity;
    CHECK(mult == 9 * (1 << (2 * n)));
    CHECK(static_cast<int>(gn.patches.size()) == 6 * static_cast<int>(gn.strips.size()));
    // Idempotence.
    auto again = build_domain(n, default_amplitude(n));
    REQUIRE(again.patches.size() == gn.patches.size());
    for (std::size_t k = 0; k < gn.patches.size(); ++k) CHECK(again.patches[k].polygon == gn.patches[k].polygon);
    // Strip trapezoids equal the union of their patches.
    for (const auto& s : gn.strips) {
      QSqrt3 in, out;
      for (int k = 0; k < 3; ++k) in += twice_signed_area(gn.patches[s.patches[k]].polygon);
      for (int k = 3; k < 6; ++k) out += twice_signed_area(gn.patches[s.patches[k]].polygon);
      CHECK(in == twice_signed_area(s.inner_trapezoid));
      CHECK(in + out == twice_signed_area(s.outer_trapezoid));
    }
  }
}

TEST_CASE("no overlap up to level 5 and brute-force overlap oracle at level 3") {
  for (int n = 1; n <= 5; ++n) CHECK_NOTHROW(build_domain(n, default_amplitude(n)));
  auto g = build_domain(3, parse_amplitude("0.12"));
  // Brute force: sample points of each outer trapezoid interior must not lie strictly in another.
  auto inside = [](const std::vector<ExactPoint>& poly, const Eigen::Vector2d& x) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
      Eigen::Vector2d a = poly[i].to_vec(), b = poly[(i + 1) % poly.size()].to_vec();
      if ((b - a).x() * (x - a).y() - (b - a).y() * (x - a).x() <= 1e-13) return false;
    }
    return true;
  };
  int violations = 0;
  for (std::size_t s = 0; s < g.strips.size(); ++s) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& q : g.strips[s].outer_trapezoid) c += q.to_vec();
    c /= 4.0;
    for (const auto& q : g.strips[s].outer_trapezoid) {
      Eigen::Vector2d probe = 0.98 * q.to_vec() + 0.02 * c;
      for (std::size_t t = 0; t < g.strips.size(); ++t) {
        if (t != s && inside(g.strips[t].outer_trapezoid, probe)) ++violations;
      }
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("domain areas and containment") {
  for (int n = 1; n <= 3; ++n) {
    auto g = build_domain(n, parse_amplitude("0.06"));
    CHECK(g.area_domain().to_double() > g.area_omega_n().to_double());
    for (const auto& s : g.strips) {
      for (const auto& q : s.outer_trapezoid) CHECK(inside_outer_box(q.to_vec()));
    }
  }
  // Exterior collar area shrinks with the amplitude schedule.
  double prev = 1e9;
  for (int n = 1; n <= 5; ++n) {
    auto g = build_domain(n, default_amplitude(n));
    double a = g.area_outer_fibers().to_double();
    CHECK(a < prev);
    prev = a;
  }
}

TEST_CASE("locate") {
  QSqrt3 eps = parse_amplitude("0.1");
  auto g = build_domain(1, eps);
  CHECK(locate({0.5, s3 / 6}, g).region == Region::Bulk);
  // Collar of the segment (1/3,0)-(2/3,0) lies on the exterior side of the bump cell, above the segment.
  const double e = 0.1;
  auto loc = locate({0.5, 0.9 * e / 2 / 3}, g);
  CHECK(loc.region == Region::InnerFiber);
  CHECK(loc.piece == Piece::Rectangle);
  CHECK(locate({0.5, -0.9 * e / 2 / 3}, g).region == Region::Bulk);
  CHECK(locate({0.5, 1.5 * e / 2 / 3}, g).region == Region::Annulus);
  CHECK(locate({1.3, 0.7}, g).region == Region::Outside);
  CHECK(locate({5.0, 5.0}, g).region == Region::Outside);
  // Outer collar of an exterior segment is inside the domain, beyond it is outside.
  CHECK(locate({1.0 / 6.0, -0.9 * e / 3}, g).region == Region::Annulus);
  CHECK(locate({1.0 / 6.0, -1.2 * e / 3}, g).region == Region::Outside);
}
