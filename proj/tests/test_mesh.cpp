#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "kochfiber/cdt.hpp"
#include "kochfiber/mesh.hpp"

using namespace kochfiber;

TEST_CASE("polygon triangulation") {
  // Square with collinear boundary points and one Steiner point.
  std::vector<Eigen::Vector2d> poly{{0, 0}, {0.5, 0}, {1, 0}, {1, 1}, {0.5, 1}, {0, 1}};
  auto tris = triangulate_polygon(poly, {{0.5, 0.5}});
  double area = 0;
  std::vector<Eigen::Vector2d> all = poly;
  all.push_back({0.5, 0.5});
  for (const auto& t : tris) {
    double a = 0.5 * orient2d(all[t[0]], all[t[1]], all[t[2]]);
    CHECK(a > 0);
    area += a;
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(tris.size() == 6);
}

TEST_CASE("edge parameters are symmetric") {
  MeshParams p;
  for (double r : {0.01, 0.2, 0.45}) {
    auto t = graded_edge_parameters(r, p);
    for (std::size_t k = 0; 2 * k < t.size(); ++k) CHECK(t[t.size() - 1 - k] == 1.0 - t[k]);
    CHECK(std::find(t.begin(), t.end(), r) != t.end());
  }
  auto c = coarse_edge_parameters(p);
  CHECK(c.size() == 4);
}

TEST_CASE("fibered mesh: regions, areas, validity") {
  for (int n = 1; n <= 3; ++n) {
    for (const char* e : {"0.1", "0.03"}) {
      auto g = build_domain(n, parse_amplitude(e));
      auto m = mesh_fibered_domain(g);
      auto rep = validate(m, 0.05, &g);
      for (const auto& v : rep.violations) MESSAGE(v);
      CHECK(rep.ok());
      const double inner = g.area_inner_fibers().to_double();
      const double outer = g.area_outer_fibers().to_double();
      CHECK(std::abs(m.region_area(Region::InnerFiber) - inner) <= 1e-12 * inner);
      CHECK(std::abs(m.region_area(Region::Annulus) - (outer - inner)) <= 1e-12 * (outer - inner));
      double total = 0;
      for (std::size_t k = 0; k < m.num_elements(); ++k) total += m.element_area(k);
      CHECK(std::abs(total - g.area_domain().to_double()) <= 1e-12);
    }
  }
}

TEST_CASE("every element lies in exactly one region") {
  auto g = build_domain(1, parse_amplitude("0.1"));
  auto m = mesh_fibered_domain(g);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto& t = m.tris[e];
    Eigen::Vector2d c = (m.nodes[t[0]] + m.nodes[t[1]] + m.nodes[t[2]]) / 3.0;
    for (int q = 0; q < 3; ++q) {
      Eigen::Vector2d probe = 0.9 * m.nodes[t[q]] + 0.1 * c;
      CHECK(locate(probe, g).region == m.region[e]);
    }
  }
}

TEST_CASE("fiber elements are similar images of reference elements") {
  auto g = build_domain(2, parse_amplitude("0.06"));
  auto m = mesh_fibered_domain(g);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto& f = m.fiber[e];
    if (f.strip < 0) continue;
    const Strip& s = g.strips[f.strip];
    for (int q = 0; q < 3; ++q) {
      Eigen::Vector2d x = s.to_physical(f.local[q]);
      CHECK((x - m.nodes[m.tris[e][q]]).norm() < 1e-14);
    }
    // Jacobian ratio equals the squared cell length.
    double ref_area = 0.5 * orient2d(f.local[0], f.local[1], f.local[2]);
    CHECK(m.element_area(e) == doctest::Approx(ref_area * f.cell_length * f.cell_length).epsilon(1e-9));
  }
}

TEST_CASE("validation catches defects") {
  auto g = build_domain(1, parse_amplitude("0.1"));
  auto m = mesh_fibered_domain(g);
  auto flipped = m;
  std::swap(flipped.tris[3][0], flipped.tris[3][1]);
  bool orient = false;
  for (const auto& v : validate(flipped).violations) orient |= v.rfind("orientation", 0) == 0;
  CHECK(orient);
  auto unmarked = m;
  for (auto it = unmarked.edge_marks.begin(); it != unmarked.edge_marks.end(); ++it) {
    if (it->second & kMarkGamma) {
      unmarked.edge_marks.erase(it);
      break;
    }
  }
  bool tag = false;
  for (const auto& v : validate(unmarked).violations) tag |= v.rfind("tag-consistency", 0) == 0;
  CHECK(tag);
}

TEST_CASE("uniform refinement") {
  auto g = build_domain(1, parse_amplitude("0.1"));
  auto m = mesh_fibered_domain(g);
  auto r2 = refine_uniform(refine_uniform(m));
  CHECK(r2.num_elements() == 16 * m.num_elements());
  auto rep = validate(r2, 0.05, &g);
  CHECK(rep.ok());
  CHECK(r2.region_area(Region::InnerFiber) == doctest::Approx(m.region_area(Region::InnerFiber)).epsilon(1e-12));
}

TEST_CASE("nested lattice meshes of the outer triangle") {
  auto c1 = prefractal(1);
  auto t1 = mesh_omega_star(1, &c1);
  auto t2 = mesh_omega_star(2, &c1);
  CHECK(validate(t1).ok());
  CHECK(validate(t2).ok());
  CHECK(t2.num_elements() == 9 * t1.num_elements());
  double area = 0;
  for (std::size_t e = 0; e < t1.num_elements(); ++e) area += t1.element_area(e);
  CHECK(area == doctest::Approx(std::sqrt(3.0)).epsilon(1e-13));
  auto idx2 = t2.lattice_node_map();
  for (const auto& p : t1.lattice) CHECK(idx2.count({p->i * 3, p->j * 3}) == 1);
  for (const auto& v : c1.vertices) CHECK(t1.lattice_node_map().count(to_lattice(v, 1)) == 1);
  MeshLocator loc(t1);
  for (std::size_t e = 0; e < t2.num_elements(); ++e) {
    const auto& t = t2.tris[e];
    Eigen::Vector2d c = (t2.nodes[t[0]] + t2.nodes[t[1]] + t2.nodes[t[2]]) / 3.0;
    int parent = loc.locate(c);
    REQUIRE(parent >= 0);
    const auto& p = t1.tris[parent];
    for (int q = 0; q < 3; ++q) {
      Eigen::Vector2d x = t2.nodes[t[q]];
      CHECK(orient2d(t1.nodes[p[0]], t1.nodes[p[1]], x) >= -1e-14);
      CHECK(orient2d(t1.nodes[p[1]], t1.nodes[p[2]], x) >= -1e-14);
      CHECK(orient2d(t1.nodes[p[2]], t1.nodes[p[0]], x) >= -1e-14);
    }
  }
  auto omega = restrict_to_prefractal(t2, c1);
  double a = 0;
  for (std::size_t e = 0; e < omega.num_elements(); ++e) a += omega.element_area(e);
  CHECK(a == doctest::Approx(std::sqrt(3.0) / 3.0).epsilon(1e-13));
  CHECK(validate(omega).ok());
}

TEST_CASE("point location") {
  auto g = build_domain(2, parse_amplitude("0.06"));
  auto m = mesh_fibered_domain(g);
  MeshLocator loc(m);
  for (std::size_t e = 0; e < m.num_elements(); e += 7) {
    const auto& t = m.tris[e];
    Eigen::Vector2d c = (m.nodes[t[0]] + m.nodes[t[1]] + m.nodes[t[2]]) / 3.0;
    Eigen::Vector3d b;
    CHECK(loc.locate(c, &b) == static_cast<int>(e));
    CHECK(b.sum() == doctest::Approx(1.0));
  }
  CHECK(loc.locate({1.4, 0.8}) == -1);
}
