#include "kochfiber/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kochfiber {

namespace {

const QSqrt3 kHalf{Rational(1, 2)};
const QSqrt3 kHalfSqrt3{Rational(0), Rational(1, 2)};

std::array<QSqrt3, 2> rotation_entry(int k) {
  switch (((k % 6) + 6) % 6) {
    case 0: return {QSqrt3(1), QSqrt3(0)};
    case 1: return {kHalf, kHalfSqrt3};
    case 2: return {-kHalf, kHalfSqrt3};
    case 3: return {QSqrt3(-1), QSqrt3(0)};
    case 4: return {-kHalf, -kHalfSqrt3};
    default: return {kHalf, -kHalfSqrt3};
  }
}

ExactPoint rotate(const ExactPoint& z, int k) {
  auto [c, s] = rotation_entry(k);
  return {c * z.x - s * z.y, s * z.x + c * z.y};
}

ExactPoint rot90(const ExactPoint& z) { return {-z.y, z.x}; }

std::int64_t pow3(int k) {
  std::int64_t r = 1;
  for (int i = 0; i < k; ++i) r *= 3;
  return r;
}

std::vector<ExactPoint> sorted_key(std::vector<ExactPoint> pts) {
  std::sort(pts.begin(), pts.end());
  return pts;
}

struct PointVecHash {
  std::size_t operator()(const std::vector<ExactPoint>& v) const {
    std::size_t h = v.size();
    for (const auto& p : v) h ^= hash_value(p) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

std::vector<ExactPoint> make_ccw(std::vector<ExactPoint> poly) {
  if (twice_signed_area(poly).sign() < 0) std::reverse(poly.begin(), poly.end());
  return poly;
}

double depth_inner(double x, double eps) {
  const double c1 = 2.0 - std::sqrt(3.0);
  return std::min({c1 * x / 2.0, eps / 2.0, c1 * (1.0 - x) / 2.0});
}

double depth_outer(double x, double eps) {
  const double c1 = 2.0 - std::sqrt(3.0);
  return std::min({c1 * x, eps, c1 * (1.0 - x)});
}

// Separating axis test on convex polygons; true if interiors overlap by more than tol.
bool convex_overlap(const std::vector<Eigen::Vector2d>& P, const std::vector<Eigen::Vector2d>& Q, double tol) {
  auto separated = [&](const std::vector<Eigen::Vector2d>& A, const std::vector<Eigen::Vector2d>& B) {
    for (std::size_t i = 0; i < A.size(); ++i) {
      Eigen::Vector2d e = A[(i + 1) % A.size()] - A[i];
      Eigen::Vector2d nrm(-e.y(), e.x());
      nrm.normalize();
      double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
      for (const auto& v : A) {
        amin = std::min(amin, nrm.dot(v));
        amax = std::max(amax, nrm.dot(v));
      }
      for (const auto& v : B) {
        bmin = std::min(bmin, nrm.dot(v));
        bmax = std::max(bmax, nrm.dot(v));
      }
      if (amax <= bmin + tol || bmax <= amin + tol) return true;
    }
    return false;
  };
  return !separated(P, Q) && !separated(Q, P);
}

std::vector<Eigen::Vector2d> to_vecs(const std::vector<ExactPoint>& poly) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(poly.size());
  for (const auto& p : poly) out.push_back(p.to_vec());
  return out;
}

}  // namespace

double Constants::delta(int n) const { return std::pow(0.75, n); }

Constants Constants::make(double p) {
  Constants c;
  c.p = p;
  c.p_conj = p / (p - 1.0);
  c.d_f = std::log(4.0) / std::log(3.0);
  c.eps0 = 1.0 - std::sqrt(3.0) / 2.0;
  c.c1 = 2.0 - std::sqrt(3.0);
  c.c_p = std::pow(2.0, p) + std::pow(c.c1, p) - 2.0;
  c.alpha = 1.0 - (2.0 - c.d_f) / p;
  c.beta = c.d_f * (1.0 - 1.0 / p);
  return c;
}

QSqrt3 eps0_exact() { return {Rational(1), Rational(-1, 2)}; }
QSqrt3 c1_exact() { return {Rational(2), Rational(-1)}; }

QSqrt3 default_amplitude(int n) {
  return eps0_exact() * QSqrt3(Rational(1, std::int64_t{1} << (n + 1)));
}

QSqrt3 parse_amplitude(const std::string& text) {
  if (text.rfind("eps0", 0) == 0) {
    std::string rest = text.substr(4);
    if (rest.empty()) return eps0_exact();
    Rational r = Rational::parse(rest.substr(1));
    if (rest[0] == '/') return eps0_exact() * QSqrt3(Rational(1) / r);
    if (rest[0] == '*') return eps0_exact() * QSqrt3(r);
    throw ConfigError("bad amplitude: " + text);
  }
  try {
    return QSqrt3(Rational::parse(text));
  } catch (const std::exception&) {
    throw ConfigError("bad amplitude: " + text);
  }
}

void check_amplitude(const QSqrt3& eps) {
  if (eps.sign() <= 0 || !(eps < eps0_exact())) {
    throw AmplitudeOutOfRange("fiber amplitude " + eps.str() + " outside (0, 1-sqrt3/2)");
  }
}

ExactPoint Similitude::apply(const ExactPoint& z) const {
  ExactPoint r = rotate(z, rotation);
  return ExactPoint{QSqrt3(scale) * r.x, QSqrt3(scale) * r.y} + translation;
}

Similitude Similitude::then(const Similitude& outer) const {
  Similitude s;
  s.scale = outer.scale * scale;
  s.rotation = (outer.rotation + rotation) % 6;
  s.translation = outer.apply(translation);
  return s;
}

Similitude Similitude::inverse() const {
  Similitude s;
  s.scale = Rational(1) / scale;
  s.rotation = (6 - rotation) % 6;
  ExactPoint t = rotate(translation, s.rotation);
  s.translation = ExactPoint{-QSqrt3(s.scale) * t.x, -QSqrt3(s.scale) * t.y};
  return s;
}

Similitude operator*(const Similitude& f, const Similitude& g) { return g.then(f); }

std::string CellAddress::str() const {
  std::ostringstream os;
  os << curve << ":";
  for (int w : word) os << w;
  return os.str();
}

Similitude curve_frame(int curve) {
  if (curve < 1 || curve > 3) throw GeometryError("curve index must be 1, 2 or 3");
  if (curve == 1) return Similitude::identity();
  const ExactPoint g{kHalf, QSqrt3(Rational(0), Rational(1, 6))};
  Similitude s;
  s.rotation = curve == 2 ? 2 : 4;
  s.translation = g - rotate(g, s.rotation);
  return s;
}

namespace {

std::array<Similitude, 4> base_maps() {
  const Rational third(1, 3);
  std::array<Similitude, 4> m;
  m[0] = {third, 0, {}};
  m[1] = {third, 5, {QSqrt3(third), QSqrt3(0)}};
  m[2] = {third, 1, {kHalf, QSqrt3(Rational(0), Rational(-1, 6))}};
  m[3] = {third, 0, {QSqrt3(Rational(2, 3)), QSqrt3(0)}};
  return m;
}

Similitude cell_map(const CellAddress& a) {
  static const auto psi = base_maps();
  Similitude m = curve_frame(a.curve);
  for (int w : a.word) {
    if (w < 1 || w > 4) throw GeometryError("word letters must be in 1..4");
    m = m * psi[w - 1];
  }
  return m;
}

}  // namespace

std::array<Similitude, 4> unit_maps(int curve) {
  auto psi = base_maps();
  Similitude f = curve_frame(curve);
  Similitude finv = f.inverse();
  for (auto& m : psi) m = f * m * finv;
  return psi;
}

Similitude compose(const CellAddress& address) {
  Similitude f = curve_frame(address.curve);
  return cell_map(address) * f.inverse();
}

std::array<ExactPoint, 3> cell_triangle(const CellAddress& address) {
  Similitude m = cell_map(address);
  return {m.apply(kA), m.apply(kB), m.apply(kC)};
}

std::vector<CellAddress> all_addresses(int n) {
  std::vector<CellAddress> out;
  std::int64_t count = std::int64_t{1} << (2 * n);
  out.reserve(3 * count);
  for (int c = 1; c <= 3; ++c) {
    for (std::int64_t k = 0; k < count; ++k) {
      CellAddress a;
      a.curve = c;
      a.word.resize(n);
      std::int64_t r = k;
      for (int d = n - 1; d >= 0; --d) {
        a.word[d] = static_cast<int>(r % 4) + 1;
        r /= 4;
      }
      out.push_back(std::move(a));
    }
  }
  return out;
}

Prefractal prefractal(int n, int max_level) {
  if (n < 0) throw GeometryError("level must be nonnegative");
  if (n > max_level) throw ResourceLimit("level " + std::to_string(n) + " exceeds maximum " + std::to_string(max_level));
  Prefractal pf;
  pf.n = n;
  for (const auto& a : all_addresses(n)) {
    auto tri = cell_triangle(a);
    pf.vertices.push_back(tri[0]);
    pf.segments.push_back({tri[0], tri[1]});
  }
  return pf;
}

QSqrt3 prefractal_area(const Prefractal& curve) {
  return twice_signed_area(curve.vertices) * QSqrt3(Rational(1, 2));
}

UnitFibers unit_fibers(const QSqrt3& eps) {
  check_amplitude(eps);
  UnitFibers u;
  u.eps = eps;
  const QSqrt3 a = eps / c1_exact();
  const QSqrt3 h = eps * kHalf;
  const QSqrt3 one(1);
  const ExactPoint A = kA, B = kB;
  const ExactPoint P1{a, -h}, P2{one - a, -h}, P3{a, QSqrt3(0)}, P4{one - a, QSqrt3(0)};
  const ExactPoint Q1{a, -eps}, Q2{one - a, -eps};
  for (int l = 0; l < 3; ++l) {
    Similitude f = curve_frame(l + 1);
    auto map = [&](std::vector<ExactPoint> poly) {
      for (auto& p : poly) p = f.apply(p);
      return poly;
    };
    u.inner_trapezoid[l] = map({A, P1, P2, B});
    u.outer_trapezoid[l] = map({A, Q1, Q2, B});
    u.inner[l][0] = map({P3, P1, P2, P4});
    u.inner[l][1] = map({A, P1, P3});
    u.inner[l][2] = map({P4, P2, B});
    u.annulus[l][0] = map({P1, Q1, Q2, P2});
    u.annulus[l][1] = map({A, Q1, P1});
    u.annulus[l][2] = map({P2, Q2, B});
  }
  return u;
}

std::array<LatticePoint, 3> MacroKey::vertices() const {
  if (up) return {LatticePoint{i, j}, LatticePoint{i + 1, j}, LatticePoint{i, j + 1}};
  return {LatticePoint{i + 1, j}, LatticePoint{i + 1, j + 1}, LatticePoint{i, j + 1}};
}

std::size_t MacroKeyHash::operator()(const MacroKey& k) const {
  std::size_t h = std::hash<std::int64_t>{}(k.i * 2 + (k.up ? 1 : 0));
  return h ^ (std::hash<std::int64_t>{}(k.j) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

std::size_t LatticePointHash::operator()(const LatticePoint& p) const {
  std::size_t h = std::hash<std::int64_t>{}(p.i);
  return h ^ (std::hash<std::int64_t>{}(p.j) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

LatticePoint to_lattice(const ExactPoint& p, int level) {
  if (!p.x.is_rational() || p.y.a().sign() != 0) throw GeometryError("point off the lattice: " + p.str());
  Rational s(pow3(level));
  Rational j = Rational(2) * p.y.b() * s;
  Rational i = p.x.a() * s - j * Rational(1, 2);
  if (!i.is_integer() || !j.is_integer()) throw GeometryError("point off the lattice: " + p.str());
  return {i.num(), j.num()};
}

ExactPoint from_lattice(const LatticePoint& p, int level) {
  Rational s(1, pow3(level));
  return {QSqrt3((Rational(p.i) + Rational(p.j, 2)) * s), QSqrt3(Rational(0), Rational(p.j, 2) * s)};
}

Eigen::Vector2d lattice_to_vec(const LatticePoint& p, int level) {
  const double h = std::pow(3.0, -level);
  return {(static_cast<double>(p.i) + 0.5 * static_cast<double>(p.j)) * h,
          0.5 * std::sqrt(3.0) * static_cast<double>(p.j) * h};
}

MacroKey macro_of(const std::array<LatticePoint, 3>& tri) {
  std::int64_t j0 = std::min({tri[0].j, tri[1].j, tri[2].j});
  int at_base = 0;
  std::int64_t imin = INT64_MAX;
  for (const auto& v : tri) {
    if (v.j == j0) {
      ++at_base;
      imin = std::min(imin, v.i);
    }
  }
  if (at_base == 2) return {imin, j0, true};
  return {imin - 1, j0, false};
}

MacroKey lattice_locate(const Eigen::Vector2d& x, int level, Eigen::Vector3d* bary) {
  const double s = std::pow(3.0, level);
  const double Y = x.y() * s / (0.5 * std::sqrt(3.0));
  const double X = x.x() * s - 0.5 * Y;
  const double fi0 = std::floor(X), fj0 = std::floor(Y);
  const double fi = X - fi0, fj = Y - fj0;
  MacroKey k{static_cast<std::int64_t>(fi0), static_cast<std::int64_t>(fj0), fi + fj <= 1.0};
  if (bary) {
    if (k.up) *bary = {1.0 - fi - fj, fi, fj};
    else *bary = {1.0 - fj, fi + fj - 1.0, 1.0 - fi};
  }
  return k;
}

Eigen::Vector2d Strip::to_local(const Eigen::Vector2d& x) const {
  Eigen::Vector2d s = start.to_vec(), d = end.to_vec() - s, r = x - s;
  double l2 = d.squaredNorm();
  return {r.dot(d) / l2, (d.x() * r.y() - d.y() * r.x()) / l2};
}

Eigen::Vector2d Strip::to_physical(const Eigen::Vector2d& local) const {
  Eigen::Vector2d s = start.to_vec(), d = end.to_vec() - s;
  return s + local.x() * d + local.y() * Eigen::Vector2d(-d.y(), d.x());
}

double Strip::length() const { return (end.to_vec() - start.to_vec()).norm(); }

const char* region_name(Region r) {
  switch (r) {
    case Region::Outside: return "outside";
    case Region::Bulk: return "bulk";
    case Region::InnerFiber: return "inner-fiber";
    case Region::Annulus: return "annulus";
  }
  return "?";
}

std::pair<LatticePoint, LatticePoint> canonical_edge(LatticePoint a, LatticePoint b) {
  if (b < a) std::swap(a, b);
  return {a, b};
}

double DomainGeometry::ratio() const { return (eps / c1_exact()).to_double(); }

double DomainGeometry::cell_length() const { return std::pow(3.0, -n); }

bool DomainGeometry::macro_inside(const MacroKey& k) const {
  auto it = macro_index.find(k);
  return it != macro_index.end() && macros[it->second].inside;
}

QSqrt3 DomainGeometry::area_omega_n() const { return prefractal_area(curve); }

QSqrt3 DomainGeometry::area_inner_fibers() const {
  QSqrt3 s;
  for (const auto& st : strips) s += twice_signed_area(st.inner_trapezoid);
  return s * QSqrt3(Rational(1, 2));
}

QSqrt3 DomainGeometry::area_outer_fibers() const {
  QSqrt3 s;
  for (const auto& st : strips) s += twice_signed_area(st.outer_trapezoid);
  return s * QSqrt3(Rational(1, 2));
}

QSqrt3 DomainGeometry::area_domain() const {
  QSqrt3 s;
  for (const auto& st : strips) {
    if (st.exterior) s += twice_signed_area(st.outer_trapezoid);
  }
  return area_omega_n() + s * QSqrt3(Rational(1, 2));
}

int DomainGeometry::count_cells_distinct() const {
  std::set<std::vector<ExactPoint>> cells;
  for (const auto& a : all_addresses(n)) {
    auto t = cell_triangle(a);
    cells.insert(sorted_key({t[0], t[1], t[2]}));
  }
  return static_cast<int>(cells.size());
}

std::vector<MacroKey> interior_macros(const Prefractal& curve) {
  const int n = curve.n;
  // Segments in doubled-x lattice units: X2 = 2i + j.
  std::map<std::int64_t, std::vector<std::array<double, 4>>> rows;
  std::int64_t jmin = INT64_MAX, jmax = INT64_MIN;
  for (const auto& s : curve.segments) {
    LatticePoint a = to_lattice(s[0], n), b = to_lattice(s[1], n);
    jmin = std::min({jmin, a.j, b.j});
    jmax = std::max({jmax, a.j, b.j});
    if (a.j == b.j) continue;
    if (b.j < a.j) std::swap(a, b);
    rows[a.j].push_back({static_cast<double>(2 * a.i + a.j), static_cast<double>(a.j),
                         static_cast<double>(2 * b.i + b.j), static_cast<double>(b.j)});
  }
  std::vector<MacroKey> out;
  for (std::int64_t j = jmin; j < jmax; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      const bool up = pass == 0;
      const double jc = static_cast<double>(j) + (up ? 1.0 / 3.0 : 2.0 / 3.0);
      std::vector<double> xs;
      for (const auto& s : rows[j]) xs.push_back(s[0] + (jc - s[1]) / (s[3] - s[1]) * (s[2] - s[0]));
      std::sort(xs.begin(), xs.end());
      const double offset = static_cast<double>(j) + (up ? 1.0 : 2.0);
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        auto i0 = static_cast<std::int64_t>(std::ceil((xs[k] - offset) / 2.0));
        auto i1 = static_cast<std::int64_t>(std::floor((xs[k + 1] - offset) / 2.0));
        for (std::int64_t i = i0; i <= i1; ++i) out.push_back({i, j, up});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const MacroKey& a, const MacroKey& b) {
    return std::tie(a.j, a.i, a.up) < std::tie(b.j, b.i, b.up);
  });
  return out;
}

bool inside_outer_box(const Eigen::Vector2d& x) {
  const double s3 = std::sqrt(3.0);
  const Eigen::Vector2d D(0.5, -s3 / 2), E(1.5, s3 / 2), F(-0.5, s3 / 2);
  auto side = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (b.x() - a.x()) * (x.y() - a.y()) - (b.y() - a.y()) * (x.x() - a.x());
  };
  const double tol = 1e-12;
  return side(D, E) >= -tol && side(E, F) >= -tol && side(F, D) >= -tol;
}

DomainGeometry build_domain(int n, const QSqrt3& eps, const BuildOptions& opts) {
  check_amplitude(eps);
  DomainGeometry g;
  g.n = n;
  g.eps = eps;
  g.multiset = opts.multiset;
  g.curve = prefractal(n, opts.max_level);
  const QSqrt3 s3half = kHalfSqrt3;
  g.outer_box = {ExactPoint{kHalf, -s3half}, ExactPoint{QSqrt3(Rational(3, 2)), s3half},
                 ExactPoint{-kHalf, s3half}};

  for (const auto& s : g.curve.segments) {
    g.curve_edges.insert(canonical_edge(to_lattice(s[0], n), to_lattice(s[1], n)));
  }

  for (const auto& k : interior_macros(g.curve)) {
    MacroInfo mi;
    mi.key = k;
    mi.inside = true;
    g.macro_index.emplace(k, static_cast<int>(g.macros.size()));
    g.macros.push_back(mi);
  }

  const UnitFibers unit = unit_fibers(eps);
  const QSqrt3 a = eps / c1_exact();
  const QSqrt3 h = eps * kHalf;

  std::map<std::pair<LatticePoint, LatticePoint>, int> strip_index;
  std::unordered_map<std::vector<ExactPoint>, int, PointVecHash> patch_index;

  for (const auto& addr : all_addresses(n)) {
    const Similitude m = cell_map(addr);
    const std::array<ExactPoint, 3> v{m.apply(kA), m.apply(kB), m.apply(kC)};
    for (int l = 0; l < 3; ++l) {
      const ExactPoint& cs = v[l];
      const ExactPoint& ce = v[(l + 1) % 3];
      // Host orientation: strip on the left of start -> end.
      const ExactPoint S = ce, E = cs;
      const LatticePoint ls = to_lattice(S, n), le = to_lattice(E, n);
      auto key = std::make_pair(ls, le);
      auto it = strip_index.find(key);
      int sid;
      if (it == strip_index.end()) {
        sid = static_cast<int>(g.strips.size());
        strip_index.emplace(key, sid);
        Strip st;
        st.start = S;
        st.end = E;
        const ExactPoint third = S + rotate(E - S, 1);
        st.host = macro_of({ls, le, to_lattice(third, n)});
        auto hv = st.host.vertices();
        st.host_edge = -1;
        for (int k = 0; k < 3; ++k) {
          if (hv[k] == ls && hv[(k + 1) % 3] == le) st.host_edge = k;
        }
        if (st.host_edge < 0) throw GeometryError("strip host edge not found");
        st.first_cell = addr;
        st.first_side = l;
        const ExactPoint d = E - S, nrm = rot90(d);
        const ExactPoint i1 = S + a * d + h * nrm, i2 = E - a * d + h * nrm;
        const ExactPoint o1 = S + a * d + eps * nrm, o2 = E - a * d + eps * nrm;
        st.inner_trapezoid = make_ccw({S, E, i2, i1});
        st.outer_trapezoid = make_ccw({S, E, o2, o1});
        st.patches.fill(-1);
        g.gamma.push_back({S, i1, i2, E});
        g.strips.push_back(std::move(st));
      } else {
        sid = it->second;
      }
      g.strips[sid].multiplicity += 1;

      for (int band = 0; band < 2; ++band) {
        for (int piece = 0; piece < 3; ++piece) {
          const auto& up = band == 0 ? unit.inner[l][piece] : unit.annulus[l][piece];
          std::vector<ExactPoint> poly;
          poly.reserve(up.size());
          for (const auto& p : up) poly.push_back(m.apply(p));
          auto pkey = sorted_key(poly);
          auto pit = patch_index.find(pkey);
          if (pit != patch_index.end()) {
            g.patches[pit->second].multiplicity += 1;
            continue;
          }
          FiberPatch fp;
          fp.cell = addr;
          fp.side = l;
          fp.band = band == 0 ? Band::Inner : Band::Annulus;
          fp.piece = static_cast<Piece>(piece);
          fp.polygon = std::move(poly);
          fp.strip = sid;
          patch_index.emplace(std::move(pkey), static_cast<int>(g.patches.size()));
          // Slot by position along the host edge: TriangleA of the cell sits at the host end.
          int slot = piece;
          if (piece == 1) slot = 2;
          else if (piece == 2) slot = 1;
          g.strips[sid].patches[band * 3 + slot] = static_cast<int>(g.patches.size());
          g.patches.push_back(std::move(fp));
        }
      }
    }
  }

  for (std::size_t sid = 0; sid < g.strips.size(); ++sid) {
    Strip& st = g.strips[sid];
    auto it = g.macro_index.find(st.host);
    if (it == g.macro_index.end()) {
      st.exterior = true;
      MacroInfo mi;
      mi.key = st.host;
      mi.inside = false;
      g.macro_index.emplace(st.host, static_cast<int>(g.macros.size()));
      g.macros.push_back(mi);
      it = g.macro_index.find(st.host);
    }
    MacroInfo& mi = g.macros[it->second];
    if (mi.strip_on_edge[st.host_edge] >= 0) throw GeometryError("two strips on one host edge");
    mi.strip_on_edge[st.host_edge] = static_cast<int>(sid);
    mi.edge_has_fiber[st.host_edge] = true;
  }
  // Keep macros sorted by row so mesh assembly is deterministic and local.
  std::sort(g.macros.begin(), g.macros.end(), [](const MacroInfo& a, const MacroInfo& b) {
    return std::tie(a.key.j, a.key.i, a.key.up) < std::tie(b.key.j, b.key.i, b.key.up);
  });
  g.macro_index.clear();
  for (std::size_t k = 0; k < g.macros.size(); ++k) g.macro_index.emplace(g.macros[k].key, static_cast<int>(k));

  // Mark neighbor edges that carry a strip on the far side.
  for (const auto& st : g.strips) {
    LatticePoint ls = to_lattice(st.start, n), le = to_lattice(st.end, n);
    const ExactPoint third = st.end + rotate(st.start - st.end, 1);
    MacroKey nb = macro_of({le, ls, to_lattice(third, n)});
    auto it = g.macro_index.find(nb);
    if (it == g.macro_index.end()) continue;
    auto nv = nb.vertices();
    for (int k = 0; k < 3; ++k) {
      if (nv[k] == le && nv[(k + 1) % 3] == ls) g.macros[it->second].edge_has_fiber[k] = true;
    }
  }

  for (const auto& mi : g.macros) {
    if (!mi.inside) {
      int count = 0;
      for (int s : mi.strip_on_edge) count += s >= 0;
      if (count != 1) throw GeometryError("exterior lattice triangle hosts " + std::to_string(count) + " strips");
    }
  }

  if (opts.check_overlap) {
    const double tol = 1e-9 * g.cell_length();
    for (const auto& mi : g.macros) {
      for (int e1 = 0; e1 < 3; ++e1) {
        for (int e2 = e1 + 1; e2 < 3; ++e2) {
          int s1 = mi.strip_on_edge[e1], s2 = mi.strip_on_edge[e2];
          if (s1 < 0 || s2 < 0) continue;
          if (convex_overlap(to_vecs(g.strips[s1].outer_trapezoid), to_vecs(g.strips[s2].outer_trapezoid), tol)) {
            throw OverlapViolation("fiber collars of cells " + g.strips[s1].first_cell.str() + " and " +
                                   g.strips[s2].first_cell.str() + " overlap");
          }
        }
      }
    }
  }
  return g;
}

Location locate(const Eigen::Vector2d& x, const DomainGeometry& g) {
  Location loc;
  if (!inside_outer_box(x)) return loc;
  const double tol = 1e-12;
  const double eps = g.eps_value();
  const double ar = g.ratio();
  const MacroKey k = lattice_locate(x, g.n);

  std::vector<int> candidates;
  auto collect = [&](const MacroKey& key) {
    auto it = g.macro_index.find(key);
    if (it == g.macro_index.end()) return;
    for (int s : g.macros[it->second].strip_on_edge) {
      if (s >= 0) candidates.push_back(s);
    }
  };
  collect(k);
  auto v = k.vertices();
  for (int e = 0; e < 3; ++e) {
    const LatticePoint a = v[e], b = v[(e + 1) % 3];
    // Neighbor across edge a-b: reflect the opposite vertex.
    const LatticePoint c = v[(e + 2) % 3];
    const LatticePoint r{a.i + b.i - c.i, a.j + b.j - c.j};
    collect(macro_of({a, b, r}));
  }

  int annulus_hit = -1;
  Eigen::Vector2d annulus_local;
  for (int s : candidates) {
    Eigen::Vector2d loc_s = g.strips[s].to_local(x);
    double xh = loc_s.x(), d = loc_s.y();
    if (d < -tol || xh < -tol || xh > 1.0 + tol) continue;
    double xc = std::clamp(xh, 0.0, 1.0);
    if (d <= depth_inner(xc, eps) + tol) {
      loc.region = Region::InnerFiber;
      loc.strip = s;
      loc.local = loc_s;
      loc.piece = xh < ar ? Piece::TriangleA : (xh > 1.0 - ar ? Piece::TriangleB : Piece::Rectangle);
      return loc;
    }
    if (annulus_hit < 0 && d <= depth_outer(xc, eps) + tol) {
      annulus_hit = s;
      annulus_local = loc_s;
    }
  }
  if (annulus_hit >= 0) {
    loc.region = Region::Annulus;
    loc.strip = annulus_hit;
    loc.local = annulus_local;
    double xh = annulus_local.x();
    loc.piece = xh < ar ? Piece::TriangleA : (xh > 1.0 - ar ? Piece::TriangleB : Piece::Rectangle);
    return loc;
  }
  if (g.macro_inside(k)) loc.region = Region::Bulk;
  return loc;
}

double inner_depth(double x, double eps) { return depth_inner(x, eps); }
double outer_depth(double x, double eps) { return depth_outer(x, eps); }

}  // namespace kochfiber
