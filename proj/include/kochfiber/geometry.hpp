#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "kochfiber/errors.hpp"
#include "kochfiber/exact.hpp"

namespace kochfiber {

struct Constants {
  double p = 2.0;
  double p_conj = 2.0;
  double d_f = 0.0;
  double eps0 = 0.0;
  double c1 = 0.0;
  double c_p = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  double delta(int n) const;
  static Constants make(double p);
};

// 1 - sqrt(3)/2 and 2 - sqrt(3).
QSqrt3 eps0_exact();
QSqrt3 c1_exact();
// eps0 * 2^-(n+1), the default amplitude schedule.
QSqrt3 default_amplitude(int n);
// "eps0", "eps0/8", "eps0*0.25" or a decimal such as "0.05".
QSqrt3 parse_amplitude(const std::string& text);
void check_amplitude(const QSqrt3& eps);

// z -> scale * e^{i pi rotation / 3} * z + translation
struct Similitude {
  Rational scale{1};
  int rotation = 0;
  ExactPoint translation{};

  static Similitude identity() { return {}; }
  ExactPoint apply(const ExactPoint& z) const;
  Similitude then(const Similitude& outer) const;  // outer o this
  Similitude inverse() const;
  friend bool operator==(const Similitude&, const Similitude&) = default;
};

Similitude operator*(const Similitude& f, const Similitude& g);  // f o g

struct CellAddress {
  int curve = 1;
  std::vector<int> word;

  int level() const { return static_cast<int>(word.size()); }
  std::string str() const;
  friend bool operator==(const CellAddress&, const CellAddress&) = default;
  friend auto operator<=>(const CellAddress&, const CellAddress&) = default;
};

inline const ExactPoint kA{QSqrt3(0), QSqrt3(0)};
inline const ExactPoint kB{QSqrt3(1), QSqrt3(0)};
inline const ExactPoint kC{QSqrt3(Rational(1, 2)), QSqrt3(Rational(0), Rational(1, 2))};

// Rigid motion carrying side AB onto side (curve) of the unit triangle.
Similitude curve_frame(int curve);
std::array<Similitude, 4> unit_maps(int curve);
Similitude compose(const CellAddress& address);
std::array<ExactPoint, 3> cell_triangle(const CellAddress& address);
// All addresses of level n in curve order (curve 1 words, then curve 2, then 3).
std::vector<CellAddress> all_addresses(int n);

struct Prefractal {
  int n = 0;
  std::vector<ExactPoint> vertices;  // closed polyline, counterclockwise
  std::vector<std::array<ExactPoint, 2>> segments;
};

Prefractal prefractal(int n, int max_level = 8);
QSqrt3 prefractal_area(const Prefractal& curve);

enum class Band { Inner, Annulus };
enum class Piece { Rectangle, TriangleA, TriangleB };

// Fiber collars of the unit triangle, side l = 0,1,2 for AB, BC, CA.
struct UnitFibers {
  QSqrt3 eps;
  std::array<std::vector<ExactPoint>, 3> inner_trapezoid;
  std::array<std::vector<ExactPoint>, 3> outer_trapezoid;
  // [side][piece] with piece order Rectangle, TriangleA, TriangleB
  std::array<std::array<std::vector<ExactPoint>, 3>, 3> inner;
  std::array<std::array<std::vector<ExactPoint>, 3>, 3> annulus;
};

UnitFibers unit_fibers(const QSqrt3& eps);

// Collar depths at unit abscissa x: inner band C1 x/2 | eps/2 | C1 (1-x)/2, outer band twice that.
double inner_depth(double x, double eps);
double outer_depth(double x, double eps);

struct LatticePoint {
  std::int64_t i = 0;
  std::int64_t j = 0;
  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
  friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
};

// Triangle of the level-n lattice with spacing 3^-n and basis (1,0), (1/2, sqrt3/2).
// Up: (i,j),(i+1,j),(i,j+1). Down: (i+1,j),(i+1,j+1),(i,j+1). Both counterclockwise.
struct MacroKey {
  std::int64_t i = 0;
  std::int64_t j = 0;
  bool up = true;
  std::array<LatticePoint, 3> vertices() const;
  friend bool operator==(const MacroKey&, const MacroKey&) = default;
  friend auto operator<=>(const MacroKey&, const MacroKey&) = default;
};

struct MacroKeyHash {
  std::size_t operator()(const MacroKey& k) const;
};
struct LatticePointHash {
  std::size_t operator()(const LatticePoint& p) const;
};

LatticePoint to_lattice(const ExactPoint& p, int level);
ExactPoint from_lattice(const LatticePoint& p, int level);
Eigen::Vector2d lattice_to_vec(const LatticePoint& p, int level);
MacroKey macro_of(const std::array<LatticePoint, 3>& tri);
// Lattice triangle containing a point (ties broken toward the lower-left triangle).
MacroKey lattice_locate(const Eigen::Vector2d& x, int level, Eigen::Vector3d* bary = nullptr);

// A fiber strip sits on one lattice edge inside one lattice triangle (its host).
// Local coordinates run along the host edge start -> end, depth toward the host interior.
struct Strip {
  ExactPoint start;
  ExactPoint end;
  MacroKey host;
  int host_edge = 0;
  bool exterior = false;  // base edge lies on K_n
  int multiplicity = 0;   // number of (word, side) pairs generating it
  CellAddress first_cell;
  int first_side = 0;
  std::vector<ExactPoint> inner_trapezoid;
  std::vector<ExactPoint> outer_trapezoid;
  std::array<int, 6> patches{};  // inner R, A, B then annulus R, A, B

  Eigen::Vector2d to_local(const Eigen::Vector2d& x) const;
  Eigen::Vector2d to_physical(const Eigen::Vector2d& local) const;
  double length() const;
};

struct FiberPatch {
  CellAddress cell;
  int side = 0;
  Band band = Band::Inner;
  Piece piece = Piece::Rectangle;
  std::vector<ExactPoint> polygon;
  int strip = -1;
  int multiplicity = 1;
};

struct MacroInfo {
  MacroKey key;
  bool inside = false;
  std::array<int, 3> strip_on_edge{-1, -1, -1};
  std::array<bool, 3> edge_has_fiber{false, false, false};
};

struct BuildOptions {
  bool multiset = false;
  int max_level = 8;
  bool check_overlap = true;
};

enum class Region { Outside, Bulk, InnerFiber, Annulus };
const char* region_name(Region r);

struct Location {
  Region region = Region::Outside;
  int strip = -1;
  Piece piece = Piece::Rectangle;
  Eigen::Vector2d local{0.0, 0.0};
};

struct DomainGeometry {
  int n = 0;
  QSqrt3 eps;
  bool multiset = false;
  Prefractal curve;
  std::array<ExactPoint, 3> outer_box;
  std::vector<FiberPatch> patches;
  std::vector<Strip> strips;
  std::vector<MacroInfo> macros;  // sorted by key
  std::unordered_map<MacroKey, int, MacroKeyHash> macro_index;
  std::set<std::pair<LatticePoint, LatticePoint>> curve_edges;  // canonical lattice edges of K_n
  std::vector<std::array<ExactPoint, 4>> gamma;  // inner boundary path of each strip

  double eps_value() const { return eps.to_double(); }
  double ratio() const;  // eps / C1 in unit-side coordinates
  double cell_length() const;
  bool macro_inside(const MacroKey& k) const;
  QSqrt3 area_omega_n() const;
  QSqrt3 area_inner_fibers() const;
  QSqrt3 area_outer_fibers() const;
  QSqrt3 area_domain() const;  // Omega_n plus exterior collars
  int count_cells_distinct() const;
};

std::pair<LatticePoint, LatticePoint> canonical_edge(LatticePoint a, LatticePoint b);

DomainGeometry build_domain(int n, const QSqrt3& eps, const BuildOptions& opts = {});
Location locate(const Eigen::Vector2d& x, const DomainGeometry& g);

// Scanline classification of level-n lattice triangles against the closed curve.
std::vector<MacroKey> interior_macros(const Prefractal& curve);
bool inside_outer_box(const Eigen::Vector2d& x);

}  // namespace kochfiber
