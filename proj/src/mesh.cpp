#include "kochfiber/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "kochfiber/cdt.hpp"

namespace kochfiber {

namespace {

const double kSqrt3 = std::sqrt(3.0);
const double kC1 = 2.0 - std::sqrt(3.0);

double inner_depth(double x, double eps) { return std::min({kC1 * x / 2.0, eps / 2.0, kC1 * (1.0 - x) / 2.0}); }
double outer_depth(double x, double eps) { return std::min({kC1 * x, eps, kC1 * (1.0 - x)}); }

std::vector<double> symmetrize(std::vector<double> t) {
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }), t.end());
  const std::size_t K = t.size() - 1;
  for (std::size_t k = 0; k <= K / 2; ++k) t[K - k] = 1.0 - t[k];
  if (K % 2 == 0) t[K / 2] = 0.5;
  t.front() = 0.0;
  t.back() = 1.0;
  return t;
}

enum NodeKind { kCorner = 0, kEdge = 1, kStripNode = 2, kInterior = 3 };

struct LocalNode {
  NodeKind kind;
  int k;
  int c;
  int layer;
  Eigen::Vector2d ref;
};

struct LocalElem {
  std::array<int, 3> v;
  Region region;
  int strip_edge;
  Piece piece;
  std::array<Eigen::Vector2d, 3> local;
};

struct RefMacro {
  std::vector<LocalNode> nodes;
  std::vector<LocalElem> elems;
  std::array<const std::vector<double>*, 3> params{};
};

const std::array<Eigen::Vector2d, 3> kRefV{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                                           Eigen::Vector2d(0.5, kSqrt3 / 2)};

Eigen::Vector2d rot90(const Eigen::Vector2d& d) { return {-d.y(), d.x()}; }

class RefBuilder {
 public:
  RefBuilder(bool inside, std::array<int, 3> states, const std::vector<double>& graded,
             const std::vector<double>& coarse, double eps, double ratio, const MeshParams& p)
      : inside_(inside), states_(states), eps_(eps), ratio_(ratio), params_(p), coarse_(coarse) {
    for (int k = 0; k < 3; ++k) out_.params[k] = states[k] == 0 ? &coarse : &graded;
  }

  RefMacro build() {
    const int m = params_.fiber_layers;
    for (int k = 0; k < 3; ++k) {
      if (states_[k] == 2) strip_elements(k, m);
    }
    if (inside_) bulk(m);
    return std::move(out_);
  }

 private:
  int get(NodeKind kind, int k, int c, int layer, const Eigen::Vector2d& ref) {
    auto key = std::make_tuple(static_cast<int>(kind), k, c, layer);
    auto it = ids_.find(key);
    if (it != ids_.end()) return it->second;
    int id = static_cast<int>(out_.nodes.size());
    out_.nodes.push_back({kind, k, c, layer, ref});
    ids_.emplace(key, id);
    return id;
  }

  int corner(int k) { return get(kCorner, k % 3, 0, 0, kRefV[k % 3]); }

  const std::vector<double>& T(int k) const { return *out_.params[k]; }

  Eigen::Vector2d strip_pos(int k, double x, double d) const {
    Eigen::Vector2d dir = kRefV[(k + 1) % 3] - kRefV[k];
    return kRefV[k] + x * dir + d * rot90(dir);
  }

  double depth(double x, int j) const {
    const int m = params_.fiber_layers;
    const double di = inner_depth(x, eps_);
    if (j <= m) return di * j / m;
    return di + (outer_depth(x, eps_) - di) * (j - m) / m;
  }

  int node(int k, int c, int j) {
    const int K = static_cast<int>(T(k).size()) - 1;
    if (c == 0) return corner(k);
    if (c == K) return corner(k + 1);
    const double x = T(k)[c];
    if (j == 0) return get(kEdge, k, c, 0, strip_pos(k, x, 0.0));
    return get(kStripNode, k, c, j, strip_pos(k, x, depth(x, j)));
  }

  void strip_elements(int k, int m) {
    const auto& t = T(k);
    const int K = static_cast<int>(t.size()) - 1;
    for (int c = 0; c < K; ++c) {
      const double xm = 0.5 * (t[c] + t[c + 1]);
      Piece piece = Piece::Rectangle;
      if (xm < ratio_) piece = Piece::TriangleA;
      else if (xm > 1.0 - ratio_) piece = Piece::TriangleB;
      for (int j = 0; j < 2 * m; ++j) {
        const Region r = j < m ? Region::InnerFiber : Region::Annulus;
        auto loc = [&](int cc, int jj) {
          const double x = t[cc];
          if (cc == 0 || cc == K) return Eigen::Vector2d(x, 0.0);
          return Eigen::Vector2d(x, depth(x, jj));
        };
        if (c == 0) {
          push({node(k, 0, 0), node(k, 1, j), node(k, 1, j + 1)}, r, k, piece, {loc(0, 0), loc(1, j), loc(1, j + 1)});
        } else if (c == K - 1) {
          push({node(k, c, j), node(k, K, 0), node(k, c, j + 1)}, r, k, piece, {loc(c, j), loc(K, 0), loc(c, j + 1)});
        } else {
          push({node(k, c, j), node(k, c + 1, j), node(k, c + 1, j + 1)}, r, k, piece,
               {loc(c, j), loc(c + 1, j), loc(c + 1, j + 1)});
          push({node(k, c, j), node(k, c + 1, j + 1), node(k, c, j + 1)}, r, k, piece,
               {loc(c, j), loc(c + 1, j + 1), loc(c, j + 1)});
        }
      }
    }
  }

  void push(std::array<int, 3> v, Region r, int edge, Piece piece, std::array<Eigen::Vector2d, 3> loc) {
    out_.elems.push_back({v, r, edge, piece, loc});
  }

  void bulk(int m) {
    std::vector<int> ring;
    for (int k = 0; k < 3; ++k) {
      ring.push_back(corner(k));
      const int K = static_cast<int>(T(k).size()) - 1;
      for (int c = 1; c < K; ++c) ring.push_back(states_[k] == 2 ? node(k, c, 2 * m) : node(k, c, 0));
    }
    std::vector<Eigen::Vector2d> poly;
    for (int id : ring) poly.push_back(out_.nodes[id].ref);

    // Steiner points on the lattice of the coarse edge subdivision.
    const int N = static_cast<int>(coarse_.size()) - 1;
    const double h = 1.0 / N;
    std::vector<Eigen::Vector2d> steiner;
    for (int a = 1; a < N; ++a) {
      for (int b = 1; a + b < N; ++b) {
        Eigen::Vector2d q = kRefV[0] + a * h * (kRefV[1] - kRefV[0]) + b * h * (kRefV[2] - kRefV[0]);
        double dmin = 1e300;
        for (std::size_t s = 0; s < poly.size(); ++s) {
          const Eigen::Vector2d& u = poly[s];
          const Eigen::Vector2d& w = poly[(s + 1) % poly.size()];
          double t = std::clamp((q - u).dot(w - u) / (w - u).squaredNorm(), 0.0, 1.0);
          dmin = std::min(dmin, (q - (u + t * (w - u))).norm());
        }
        if (dmin > 0.4 * h) steiner.push_back(q);
      }
    }
    auto tris = triangulate_polygon(poly, steiner);
    std::vector<int> ids = ring;
    for (std::size_t s = 0; s < steiner.size(); ++s) ids.push_back(-1);
    for (const auto& t : tris) {
      std::array<int, 3> v{};
      for (int q = 0; q < 3; ++q) {
        if (ids[t[q]] < 0) ids[t[q]] = get(kInterior, 0, static_cast<int>(t[q]), 0, steiner[t[q] - ring.size()]);
        v[q] = ids[t[q]];
      }
      const Eigen::Vector2d z = Eigen::Vector2d::Zero();
      out_.elems.push_back({v, Region::Bulk, -1, Piece::Rectangle, {z, z, z}});
    }
  }

  bool inside_;
  std::array<int, 3> states_;
  double eps_;
  double ratio_;
  MeshParams params_;
  const std::vector<double>& coarse_;
  RefMacro out_;
  std::map<std::tuple<int, int, int, int>, int> ids_;
};

std::int64_t pack(const LatticePoint& p) {
  return ((p.i + (std::int64_t{1} << 24)) << 26) | (p.j + (std::int64_t{1} << 24));
}

struct GKey {
  int kind;
  std::int64_t a, b, c;
  friend bool operator==(const GKey&, const GKey&) = default;
};

struct GKeyHash {
  std::size_t operator()(const GKey& k) const {
    std::size_t h = std::hash<std::int64_t>{}(k.a * 4 + k.kind);
    h ^= std::hash<std::int64_t>{}(k.b) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<std::int64_t>{}(k.c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

using LatticeEdge = std::pair<LatticePoint, LatticePoint>;

void mark_edges(Mesh& m, const std::vector<std::optional<LatticeEdge>>& node_edge,
                const std::set<LatticeEdge>& curve_edges) {
  auto on_lattice_edge = [&](int v, const LatticeEdge& e) {
    if (m.lattice[v]) return *m.lattice[v] == e.first || *m.lattice[v] == e.second;
    return node_edge[v] && *node_edge[v] == e;
  };
  for (const auto& [edge, els] : m.edge_elements()) {
    std::uint8_t mark = kMarkNone;
    const int u = edge.first, v = edge.second;
    std::optional<LatticeEdge> cand;
    if (node_edge[u]) cand = node_edge[u];
    else if (node_edge[v]) cand = node_edge[v];
    else if (m.lattice[u] && m.lattice[v]) cand = canonical_edge(*m.lattice[u], *m.lattice[v]);
    if (cand && curve_edges.count(*cand) && on_lattice_edge(u, *cand) && on_lattice_edge(v, *cand)) mark |= kMarkCurve;
    if (els.size() == 1) {
      mark |= kMarkBoundary;
    } else {
      Region a = m.region[els[0]], b = m.region[els[1]];
      if (a != b) {
        if (a == Region::InnerFiber || b == Region::InnerFiber) {
          if (!(mark & kMarkCurve)) mark |= kMarkGamma;
        } else {
          mark |= kMarkLambda;
        }
      }
    }
    if (mark) m.edge_marks[edge] = mark;
  }
}

}  // namespace

double Mesh::element_area(std::size_t e) const {
  const auto& t = tris[e];
  return 0.5 * orient2d(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
}

double Mesh::region_area(Region r) const {
  double s = 0.0;
  for (std::size_t e = 0; e < tris.size(); ++e) {
    if (region[e] == r) s += element_area(e);
  }
  return s;
}

std::uint64_t Mesh::id() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : nodes) mix(p.data(), 2 * sizeof(double));
  for (const auto& t : tris) mix(t.data(), 3 * sizeof(int));
  return h;
}

std::unordered_map<LatticePoint, int, LatticePointHash> Mesh::lattice_node_map() const {
  std::unordered_map<LatticePoint, int, LatticePointHash> index;
  for (std::size_t v = 0; v < lattice.size(); ++v) {
    if (lattice[v]) index.emplace(*lattice[v], static_cast<int>(v));
  }
  return index;
}

std::map<std::pair<int, int>, std::vector<int>> Mesh::edge_elements() const {
  std::map<std::pair<int, int>, std::vector<int>> out;
  for (std::size_t e = 0; e < tris.size(); ++e) {
    for (int k = 0; k < 3; ++k) {
      int a = tris[e][k], b = tris[e][(k + 1) % 3];
      out[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(e));
    }
  }
  return out;
}

std::vector<double> graded_edge_parameters(double ratio, const MeshParams& p) {
  std::vector<double> t{0.0};
  double x = ratio;
  std::vector<double> near;
  for (int k = 0; k <= p.grading_depth; ++k) {
    near.push_back(x);
    x *= p.grading;
  }
  std::reverse(near.begin(), near.end());
  for (double v : near) t.push_back(v);
  const int nr = std::max(1, static_cast<int>(std::ceil((1.0 - 2.0 * ratio) / p.h_rel - 1e-9)));
  for (int k = 1; k < nr; ++k) t.push_back(ratio + (1.0 - 2.0 * ratio) * k / nr);
  for (double v : near) t.push_back(1.0 - v);
  t.push_back(1.0);
  return symmetrize(t);
}

std::vector<double> coarse_edge_parameters(const MeshParams& p) {
  const int nc = std::max(1, static_cast<int>(std::lround(1.0 / p.h_rel)));
  std::vector<double> t;
  for (int k = 0; k <= nc; ++k) t.push_back(static_cast<double>(k) / nc);
  return symmetrize(t);
}

Mesh mesh_fibered_domain(const DomainGeometry& g, const MeshParams& params) {
  if (params.fiber_layers < 1) throw MeshQualityFailure("fiber_layers must be positive");
  const double eps = g.eps_value();
  const double ratio = g.ratio();
  const auto graded = graded_edge_parameters(ratio, params);
  const auto coarse = coarse_edge_parameters(params);
  const double L = g.cell_length();

  std::set<LatticePoint> curve_vertices;
  for (const auto& v : g.curve.vertices) curve_vertices.insert(to_lattice(v, g.n));

  std::map<int, RefMacro> cache;
  Mesh mesh;
  mesh.lattice_level = g.n;
  mesh.curve_level = g.n;
  mesh.eps = eps;
  std::unordered_map<GKey, int, GKeyHash> gid;
  std::vector<std::optional<LatticeEdge>> node_edge;

  for (std::size_t mi_idx = 0; mi_idx < g.macros.size(); ++mi_idx) {
    const MacroInfo& mi = g.macros[mi_idx];
    std::array<int, 3> states{};
    for (int k = 0; k < 3; ++k) states[k] = mi.strip_on_edge[k] >= 0 ? 2 : (mi.edge_has_fiber[k] ? 1 : 0);
    const int key = (mi.inside ? 27 : 0) + states[0] * 9 + states[1] * 3 + states[2];
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, RefBuilder(mi.inside, states, graded, coarse, eps, ratio, params).build()).first;
    }
    const RefMacro& ref = it->second;
    const auto hv = mi.key.vertices();
    std::array<Eigen::Vector2d, 3> W;
    for (int k = 0; k < 3; ++k) W[k] = lattice_to_vec(hv[k], g.n);
    const Eigen::Vector2d d = W[1] - W[0];

    std::vector<int> local_to_global(ref.nodes.size());
    for (std::size_t ln = 0; ln < ref.nodes.size(); ++ln) {
      const LocalNode& n = ref.nodes[ln];
      GKey k{};
      Eigen::Vector2d pos;
      std::optional<LatticePoint> lat;
      std::optional<LatticeEdge> on_edge;
      if (n.kind == kCorner) {
        k = {0, pack(hv[n.k]), 0, 0};
        pos = W[n.k];
        lat = hv[n.k];
      } else if (n.kind == kEdge) {
        const auto& T = *ref.params[n.k];
        const int K = static_cast<int>(T.size()) - 1;
        LatticeEdge e = canonical_edge(hv[n.k], hv[(n.k + 1) % 3]);
        const int idx = hv[n.k] == e.first ? n.c : K - n.c;
        k = {1, pack(e.first), pack(e.second), idx};
        const Eigen::Vector2d A = lattice_to_vec(e.first, g.n), B = lattice_to_vec(e.second, g.n);
        pos = A + T[idx] * (B - A);
        on_edge = e;
      } else {
        k = {2, static_cast<std::int64_t>(mi_idx), static_cast<std::int64_t>(ln), 0};
        pos = W[0] + n.ref.x() * d + n.ref.y() * rot90(d);
      }
      auto [git, inserted] = gid.emplace(k, static_cast<int>(mesh.nodes.size()));
      if (inserted) {
        mesh.nodes.push_back(pos);
        mesh.lattice.push_back(lat);
        mesh.on_curve_vertex.push_back(lat && curve_vertices.count(*lat) ? 1 : 0);
        node_edge.push_back(on_edge);
      }
      local_to_global[ln] = git->second;
    }
    for (const auto& el : ref.elems) {
      mesh.tris.push_back({local_to_global[el.v[0]], local_to_global[el.v[1]], local_to_global[el.v[2]]});
      mesh.region.push_back(el.region);
      FiberElement fe;
      if (el.strip_edge >= 0) {
        fe.strip = mi.strip_on_edge[el.strip_edge];
        fe.piece = el.piece;
        fe.local = el.local;
        fe.cell_length = L;
        fe.multiplicity = g.multiset ? g.strips[fe.strip].multiplicity : 1;
      }
      mesh.fiber.push_back(fe);
    }
  }
  mark_edges(mesh, node_edge, g.curve_edges);
  for (int r = 0; r < params.refine; ++r) mesh = refine_uniform(mesh);
  return mesh;
}

Mesh mesh_omega_star(int level, const Prefractal* curve) {
  Mesh mesh;
  mesh.lattice_level = level;
  std::int64_t M = 1;
  for (int k = 0; k < level; ++k) M *= 3;
  std::unordered_map<LatticePoint, int, LatticePointHash> idx;
  for (std::int64_t j = -M; j <= M; ++j) {
    for (std::int64_t i = -j; i <= M; ++i) {
      LatticePoint p{i, j};
      idx.emplace(p, static_cast<int>(mesh.nodes.size()));
      mesh.nodes.push_back(lattice_to_vec(p, level));
      mesh.lattice.push_back(p);
      mesh.on_curve_vertex.push_back(0);
    }
  }
  for (std::int64_t j = -M; j < M; ++j) {
    for (std::int64_t i = -j - 1; i < M; ++i) {
      for (bool up : {true, false}) {
        MacroKey k{i, j, up};
        auto v = k.vertices();
        bool ok = true;
        std::array<int, 3> t{};
        for (int q = 0; q < 3; ++q) {
          auto f = idx.find(v[q]);
          if (f == idx.end()) {
            ok = false;
            break;
          }
          t[q] = f->second;
        }
        if (!ok) continue;
        mesh.tris.push_back(t);
        mesh.region.push_back(Region::Bulk);
        mesh.fiber.emplace_back();
      }
    }
  }
  std::vector<std::optional<LatticeEdge>> node_edge(mesh.nodes.size());
  std::set<LatticeEdge> curve_edges;
  if (curve) {
    if (curve->n > level) throw MeshQualityFailure("lattice mesh coarser than the prefractal");
    mesh.curve_level = curve->n;
    std::int64_t f = 1;
    for (int k = curve->n; k < level; ++k) f *= 3;
    for (const auto& s : curve->segments) {
      LatticePoint a = to_lattice(s[0], level), b = to_lattice(s[1], level);
      const std::int64_t di = (b.i - a.i) / f, dj = (b.j - a.j) / f;
      for (std::int64_t q = 0; q < f; ++q) {
        LatticePoint u{a.i + q * di, a.j + q * dj}, w{a.i + (q + 1) * di, a.j + (q + 1) * dj};
        curve_edges.insert(canonical_edge(u, w));
      }
      auto it = idx.find(a);
      if (it != idx.end()) mesh.on_curve_vertex[it->second] = 1;
    }
  }
  mark_edges(mesh, node_edge, curve_edges);
  return mesh;
}

Mesh restrict_to_prefractal(const Mesh& lm, const Prefractal& curve) {
  std::unordered_set<MacroKey, MacroKeyHash> inside;
  for (const auto& k : interior_macros(curve)) inside.insert(k);
  Mesh out;
  out.lattice_level = lm.lattice_level;
  out.curve_level = lm.curve_level;
  std::vector<int> remap(lm.nodes.size(), -1);
  for (std::size_t e = 0; e < lm.tris.size(); ++e) {
    const auto& t = lm.tris[e];
    Eigen::Vector2d c = (lm.nodes[t[0]] + lm.nodes[t[1]] + lm.nodes[t[2]]) / 3.0;
    if (!inside.count(lattice_locate(c, curve.n))) continue;
    std::array<int, 3> nt{};
    for (int q = 0; q < 3; ++q) {
      int& r = remap[t[q]];
      if (r < 0) {
        r = static_cast<int>(out.nodes.size());
        out.nodes.push_back(lm.nodes[t[q]]);
        out.lattice.push_back(lm.lattice[t[q]]);
        out.on_curve_vertex.push_back(lm.on_curve_vertex[t[q]]);
      }
      nt[q] = r;
    }
    out.tris.push_back(nt);
    out.region.push_back(lm.region[e]);
    out.fiber.push_back(lm.fiber[e]);
  }
  for (const auto& [edge, mark] : lm.edge_marks) {
    if (!(mark & kMarkCurve)) continue;
    int a = remap[edge.first], b = remap[edge.second];
    if (a >= 0 && b >= 0) out.edge_marks[{std::min(a, b), std::max(a, b)}] = kMarkCurve;
  }
  for (const auto& [edge, els] : out.edge_elements()) {
    if (els.size() == 1) out.edge_marks[edge] |= kMarkBoundary;
  }
  return out;
}

Mesh refine_uniform(const Mesh& m) {
  Mesh out;
  out.nodes = m.nodes;
  out.lattice = m.lattice;
  out.on_curve_vertex = m.on_curve_vertex;
  out.lattice_level = m.lattice_level;
  out.curve_level = m.curve_level;
  out.eps = m.eps;
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    int id = static_cast<int>(out.nodes.size());
    out.nodes.push_back(0.5 * (m.nodes[a] + m.nodes[b]));
    out.lattice.emplace_back();
    out.on_curve_vertex.push_back(0);
    mid.emplace(key, id);
    return id;
  };
  for (std::size_t e = 0; e < m.tris.size(); ++e) {
    const auto& t = m.tris[e];
    const int m01 = midpoint(t[0], t[1]), m12 = midpoint(t[1], t[2]), m20 = midpoint(t[2], t[0]);
    const std::array<std::array<int, 3>, 4> kids{{{t[0], m01, m20}, {m01, t[1], m12}, {m20, m12, t[2]}, {m01, m12, m20}}};
    const FiberElement& f = m.fiber[e];
    const Eigen::Vector2d l01 = 0.5 * (f.local[0] + f.local[1]), l12 = 0.5 * (f.local[1] + f.local[2]),
                          l20 = 0.5 * (f.local[2] + f.local[0]);
    const std::array<std::array<Eigen::Vector2d, 3>, 4> kid_local{
        {{f.local[0], l01, l20}, {l01, f.local[1], l12}, {l20, l12, f.local[2]}, {l01, l12, l20}}};
    for (int q = 0; q < 4; ++q) {
      out.tris.push_back(kids[q]);
      out.region.push_back(m.region[e]);
      FiberElement fk = f;
      if (f.strip >= 0) fk.local = kid_local[q];
      out.fiber.push_back(fk);
    }
  }
  for (const auto& [edge, mark] : m.edge_marks) {
    auto it = mid.find(edge);
    if (it == mid.end()) continue;
    const int c = it->second;
    out.edge_marks[{std::min(edge.first, c), std::max(edge.first, c)}] = mark;
    out.edge_marks[{std::min(edge.second, c), std::max(edge.second, c)}] = mark;
  }
  return out;
}

ValidationReport validate(const Mesh& m, double floor_deg, const DomainGeometry* g) {
  ValidationReport rep;
  auto add = [&](const std::string& s) {
    if (rep.violations.size() < 200) rep.violations.push_back(s);
  };
  for (std::size_t e = 0; e < m.tris.size(); ++e) {
    const auto& t = m.tris[e];
    if (m.element_area(e) <= 0.0) add("orientation: element " + std::to_string(e));
    const double ang = min_angle_deg(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]);
    rep.min_angle_deg = std::min(rep.min_angle_deg, ang);
    if (ang < floor_deg) add("min-angle: element " + std::to_string(e));
  }
  const auto edges = m.edge_elements();
  // Hanging nodes: a node strictly inside a boundary edge.
  {
    double hmin = 1e300;
    for (const auto& [e, els] : edges) hmin = std::min(hmin, (m.nodes[e.first] - m.nodes[e.second]).norm());
    std::unordered_map<std::int64_t, std::vector<int>> grid;
    Eigen::Vector2d lo(-1.0, -1.0);
    const double cs = std::max(hmin * 4.0, 1e-6);
    auto cell = [&](const Eigen::Vector2d& x) {
      std::int64_t cx = static_cast<std::int64_t>(std::floor((x.x() - lo.x()) / cs));
      std::int64_t cy = static_cast<std::int64_t>(std::floor((x.y() - lo.y()) / cs));
      return std::make_pair(cx, cy);
    };
    for (std::size_t v = 0; v < m.nodes.size(); ++v) {
      auto [cx, cy] = cell(m.nodes[v]);
      grid[cx * 1000003 + cy].push_back(static_cast<int>(v));
    }
    for (const auto& [e, els] : edges) {
      if (els.size() > 2) add("conformity: edge shared by more than two elements");
      if (els.size() != 1) continue;
      const Eigen::Vector2d a = m.nodes[e.first], b = m.nodes[e.second];
      auto [x0, y0] = cell(a.cwiseMin(b));
      auto [x1, y1] = cell(a.cwiseMax(b));
      if ((x1 - x0 + 1) * (y1 - y0 + 1) > 10000) continue;
      const double len2 = (b - a).squaredNorm();
      for (std::int64_t cx = x0; cx <= x1; ++cx) {
        for (std::int64_t cy = y0; cy <= y1; ++cy) {
          auto it = grid.find(cx * 1000003 + cy);
          if (it == grid.end()) continue;
          for (int v : it->second) {
            if (v == e.first || v == e.second) continue;
            const Eigen::Vector2d x = m.nodes[v];
            const double t = (x - a).dot(b - a) / len2;
            if (t <= 1e-9 || t >= 1 - 1e-9) continue;
            if (std::abs(orient2d(a, b, x)) <= 1e-12 * len2) add("conformity: hanging node " + std::to_string(v));
          }
        }
      }
    }
  }
  // Interface markers agree with region tags.
  for (const auto& [e, els] : edges) {
    auto it = m.edge_marks.find(e);
    const std::uint8_t mark = it == m.edge_marks.end() ? 0 : it->second;
    if (els.size() == 1) {
      if (!(mark & kMarkBoundary)) add("boundary marker missing");
      continue;
    }
    if (els.size() != 2) continue;
    const Region a = m.region[els[0]], b = m.region[els[1]];
    const bool iface = mark & (kMarkGamma | kMarkLambda);
    if (a != b && !iface && !(mark & kMarkCurve)) add("tag-consistency: unmarked interface edge");
    if (a == b && iface) add("tag-consistency: interface marker inside one region");
  }
  if (g) {
    for (std::size_t e = 0; e < m.tris.size(); ++e) {
      const auto& t = m.tris[e];
      Eigen::Vector2d c = (m.nodes[t[0]] + m.nodes[t[1]] + m.nodes[t[2]]) / 3.0;
      Region r = locate(c, *g).region;
      if (r != m.region[e]) add("tag-consistency: element " + std::to_string(e) + " tagged " + region_name(m.region[e]) +
                                " but lies in " + region_name(r));
    }
  }
  // Curve markers form one closed polyline through all prefractal vertices.
  if (m.curve_level >= 0) {
    std::map<int, int> degree;
    std::map<int, std::vector<int>> adj;
    double length = 0.0;
    for (const auto& [e, mark] : m.edge_marks) {
      if (!(mark & kMarkCurve)) continue;
      degree[e.first]++;
      degree[e.second]++;
      adj[e.first].push_back(e.second);
      adj[e.second].push_back(e.first);
      length += (m.nodes[e.first] - m.nodes[e.second]).norm();
    }
    const double expected = 3.0 * std::pow(4.0 / 3.0, m.curve_level);
    bool closed = !degree.empty();
    for (const auto& [v, d] : degree) closed &= d == 2;
    if (closed) {
      std::set<int> seen;
      int prev = -1, cur = degree.begin()->first;
      while (!seen.count(cur)) {
        seen.insert(cur);
        int nxt = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
        prev = cur;
        cur = nxt;
      }
      closed = seen.size() == degree.size();
    }
    if (!closed) add("curve markers do not form a closed polyline");
    if (std::abs(length - expected) > 1e-9 * expected) add("curve markers do not cover K_n");
    std::size_t flagged = 0;
    for (auto f : m.on_curve_vertex) flagged += f;
    if (flagged != 3 * (std::size_t{1} << (2 * m.curve_level))) add("prefractal vertices missing from mesh");
  }
  return rep;
}

MeshLocator::MeshLocator(const Mesh& m) : mesh_(&m) {
  lo_ = Eigen::Vector2d::Constant(1e300);
  hi_ = Eigen::Vector2d::Constant(-1e300);
  for (const auto& p : m.nodes) {
    lo_ = lo_.cwiseMin(p);
    hi_ = hi_.cwiseMax(p);
  }
  double area = 0.0;
  for (std::size_t e = 0; e < m.tris.size(); ++e) area += m.element_area(e);
  const double ext = std::max(hi_.x() - lo_.x(), hi_.y() - lo_.y());
  cell_ = std::max(std::sqrt(area / std::max<std::size_t>(1, m.tris.size())) * 2.0, ext / 2048.0);
  nx_ = static_cast<int>((hi_.x() - lo_.x()) / cell_) + 1;
  ny_ = static_cast<int>((hi_.y() - lo_.y()) / cell_) + 1;
  std::vector<int> count(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
  auto range = [&](std::size_t e, int& x0, int& x1, int& y0, int& y1) {
    const auto& t = m.tris[e];
    Eigen::Vector2d a = m.nodes[t[0]].cwiseMin(m.nodes[t[1]]).cwiseMin(m.nodes[t[2]]);
    Eigen::Vector2d b = m.nodes[t[0]].cwiseMax(m.nodes[t[1]]).cwiseMax(m.nodes[t[2]]);
    x0 = std::clamp(static_cast<int>((a.x() - lo_.x()) / cell_), 0, nx_ - 1);
    x1 = std::clamp(static_cast<int>((b.x() - lo_.x()) / cell_), 0, nx_ - 1);
    y0 = std::clamp(static_cast<int>((a.y() - lo_.y()) / cell_), 0, ny_ - 1);
    y1 = std::clamp(static_cast<int>((b.y() - lo_.y()) / cell_), 0, ny_ - 1);
  };
  for (std::size_t e = 0; e < m.tris.size(); ++e) {
    int x0, x1, y0, y1;
    range(e, x0, x1, y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) count[static_cast<std::size_t>(y) * nx_ + x + 1]++;
  }
  for (std::size_t k = 1; k < count.size(); ++k) count[k] += count[k - 1];
  start_ = count;
  items_.resize(count.back());
  std::vector<int> fill(start_.begin(), start_.end() - 1);
  for (std::size_t e = 0; e < m.tris.size(); ++e) {
    int x0, x1, y0, y1;
    range(e, x0, x1, y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) items_[fill[static_cast<std::size_t>(y) * nx_ + x]++] = static_cast<int>(e);
  }
}

int MeshLocator::locate(const Eigen::Vector2d& x, Eigen::Vector3d* bary) const {
  const double tol = 1e-12;
  if (x.x() < lo_.x() - tol || x.y() < lo_.y() - tol || x.x() > hi_.x() + tol || x.y() > hi_.y() + tol) return -1;
  const int cx = std::clamp(static_cast<int>((x.x() - lo_.x()) / cell_), 0, nx_ - 1);
  const int cy = std::clamp(static_cast<int>((x.y() - lo_.y()) / cell_), 0, ny_ - 1);
  const std::size_t c = static_cast<std::size_t>(cy) * nx_ + cx;
  int best = -1;
  double best_min = -1e300;
  Eigen::Vector3d best_b;
  for (int k = start_[c]; k < start_[c + 1]; ++k) {
    const int e = items_[k];
    const auto& t = mesh_->tris[e];
    const Eigen::Vector2d& a = mesh_->nodes[t[0]];
    const Eigen::Vector2d& b = mesh_->nodes[t[1]];
    const Eigen::Vector2d& d = mesh_->nodes[t[2]];
    const double area = orient2d(a, b, d);
    Eigen::Vector3d l(orient2d(b, d, x) / area, orient2d(d, a, x) / area, orient2d(a, b, x) / area);
    const double mn = l.minCoeff();
    if (mn >= 0.0) {
      if (bary) *bary = l;
      return e;
    }
    if (mn > best_min) {
      best_min = mn;
      best = e;
      best_b = l;
    }
  }
  if (best >= 0 && best_min >= -1e-10) {
    if (bary) *bary = best_b;
    return best;
  }
  return -1;
}

}  // namespace kochfiber
