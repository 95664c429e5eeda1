#include "kochfiber/cdt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "kochfiber/errors.hpp"

namespace kochfiber {

double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

double incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                const Eigen::Vector2d& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

double min_angle_deg(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  auto angle = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& r) {
    Eigen::Vector2d u = q - p, v = r - p;
    return std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v));
  };
  double m = std::min({angle(a, b, c), angle(b, c, a), angle(c, a, b)});
  return m * 180.0 / std::numbers::pi;
}

namespace {

using Tri = std::array<int, 3>;

bool in_closed_triangle(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                        const Eigen::Vector2d& c, double tol) {
  return orient2d(a, b, p) >= -tol && orient2d(b, c, p) >= -tol && orient2d(c, a, p) >= -tol;
}

std::vector<Tri> ear_clip(const std::vector<Eigen::Vector2d>& P) {
  const int n = static_cast<int>(P.size());
  double scale = 0.0;
  for (const auto& p : P) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  const double tol = 1e-14 * scale * scale;
  std::vector<int> ring(n);
  for (int i = 0; i < n; ++i) ring[i] = i;
  std::vector<Tri> out;
  while (ring.size() > 3) {
    const int m = static_cast<int>(ring.size());
    int best = -1;
    double best_q = -1.0;
    for (int k = 0; k < m; ++k) {
      const int i0 = ring[(k + m - 1) % m], i1 = ring[k], i2 = ring[(k + 1) % m];
      if (orient2d(P[i0], P[i1], P[i2]) <= tol) continue;
      bool blocked = false;
      for (int q : ring) {
        if (q == i0 || q == i1 || q == i2) continue;
        if (in_closed_triangle(P[q], P[i0], P[i1], P[i2], tol)) {
          blocked = true;
          break;
        }
      }
      if (blocked) continue;
      const double qual = min_angle_deg(P[i0], P[i1], P[i2]);
      if (qual > best_q) {
        best_q = qual;
        best = k;
      }
    }
    if (best < 0) throw MeshQualityFailure("ear clipping found no ear");
    const int mm = static_cast<int>(ring.size());
    out.push_back({ring[(best + mm - 1) % mm], ring[best], ring[(best + 1) % mm]});
    ring.erase(ring.begin() + best);
  }
  if (orient2d(P[ring[0]], P[ring[1]], P[ring[2]]) <= tol) throw MeshQualityFailure("degenerate final ear");
  out.push_back({ring[0], ring[1], ring[2]});
  return out;
}

std::pair<int, int> ekey(int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); }

void lawson(const std::vector<Eigen::Vector2d>& P, std::vector<Tri>& tris, int n_boundary) {
  auto constrained = [&](int a, int b) {
    if (a >= n_boundary || b >= n_boundary) return false;
    int d = std::abs(a - b);
    return d == 1 || d == n_boundary - 1;
  };
  for (int pass = 0; pass < 10000; ++pass) {
    std::map<std::pair<int, int>, std::vector<int>> edges;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
      for (int e = 0; e < 3; ++e) edges[ekey(tris[t][e], tris[t][(e + 1) % 3])].push_back(t);
    }
    bool flipped = false;
    for (const auto& [key, ts] : edges) {
      if (ts.size() != 2 || constrained(key.first, key.second)) continue;
      Tri& t1 = tris[ts[0]];
      Tri& t2 = tris[ts[1]];
      int a = key.first, b = key.second;
      auto opposite = [&](const Tri& t) {
        for (int v : t) {
          if (v != a && v != b) return v;
        }
        return -1;
      };
      int c = opposite(t1), d = opposite(t2);
      // Orient so that (a, b, c) is counterclockwise.
      if (orient2d(P[a], P[b], P[c]) < 0) std::swap(a, b);
      if (incircle(P[a], P[b], P[c], P[d]) <= 1e-12 * (P[a] - P[b]).squaredNorm() * (P[a] - P[b]).squaredNorm()) continue;
      const double o1 = orient2d(P[c], P[a], P[d]), o2 = orient2d(P[c], P[d], P[b]);
      if (o1 <= 0 || o2 <= 0) continue;
      t1 = {c, a, d};
      t2 = {c, d, b};
      flipped = true;
      break;
    }
    if (!flipped) return;
  }
  throw MeshQualityFailure("Lawson flips did not terminate");
}

}  // namespace

std::vector<std::array<int, 3>> triangulate_polygon(const std::vector<Eigen::Vector2d>& boundary,
                                                    const std::vector<Eigen::Vector2d>& steiner) {
  std::vector<Eigen::Vector2d> P = boundary;
  const int nb = static_cast<int>(boundary.size());
  std::vector<Tri> tris = ear_clip(boundary);
  lawson(P, tris, nb);
  for (const auto& s : steiner) {
    int host = -1;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
      const auto& T = tris[t];
      if (in_closed_triangle(s, P[T[0]], P[T[1]], P[T[2]], 0.0)) {
        host = t;
        break;
      }
    }
    if (host < 0) continue;
    const int sid = static_cast<int>(P.size());
    P.push_back(s);
    Tri T = tris[host];
    double area = orient2d(P[T[0]], P[T[1]], P[T[2]]);
    int on_edge = -1;
    for (int e = 0; e < 3; ++e) {
      if (orient2d(P[T[e]], P[T[(e + 1) % 3]], s) <= 1e-10 * area) on_edge = e;
    }
    if (on_edge < 0) {
      tris[host] = {T[0], T[1], sid};
      tris.push_back({T[1], T[2], sid});
      tris.push_back({T[2], T[0], sid});
    } else {
      const int a = T[on_edge], b = T[(on_edge + 1) % 3], c = T[(on_edge + 2) % 3];
      int other = -1;
      for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
        if (t == host) continue;
        const auto& U = tris[t];
        int hits = 0;
        for (int v : U) hits += (v == a || v == b);
        if (hits == 2) other = t;
      }
      if (other < 0) {
        P.pop_back();
        continue;
      }
      int d = -1;
      for (int v : tris[other]) {
        if (v != a && v != b) d = v;
      }
      tris[host] = {a, sid, c};
      tris.push_back({sid, b, c});
      tris[other] = {b, sid, d};
      tris.push_back({sid, a, d});
    }
    lawson(P, tris, nb);
  }
  return tris;
}

}  // namespace kochfiber
