#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "kochfiber/geometry.hpp"

namespace kochfiber {

enum EdgeMark : std::uint8_t {
  kMarkNone = 0,
  kMarkCurve = 1,     // lies on K_n
  kMarkGamma = 2,     // boundary of the inner fiber off K_n
  kMarkLambda = 4,    // annulus / bulk interface
  kMarkBoundary = 8,  // boundary of the meshed domain
};

struct FiberElement {
  int strip = -1;
  Piece piece = Piece::Rectangle;
  // Strip-local (abscissa, depth) of each vertex, unit-side scaling.
  std::array<Eigen::Vector2d, 3> local{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  double cell_length = 1.0;
  int multiplicity = 1;  // generator count under multiset semantics, else 1
};

struct Mesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> tris;
  std::vector<Region> region;
  std::vector<FiberElement> fiber;                 // one per element, strip = -1 off the collars
  std::vector<std::uint8_t> on_curve_vertex;       // node belongs to V^n
  std::vector<std::optional<LatticePoint>> lattice;  // exact tag at lattice_level
  int lattice_level = 0;
  int curve_level = -1;
  double eps = 0.0;
  std::map<std::pair<int, int>, std::uint8_t> edge_marks;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_elements() const { return tris.size(); }
  double element_area(std::size_t e) const;
  double region_area(Region r) const;
  std::uint64_t id() const;
  // Node index of every lattice-tagged node.
  std::unordered_map<LatticePoint, int, LatticePointHash> lattice_node_map() const;

  std::map<std::pair<int, int>, std::vector<int>> edge_elements() const;
};

struct MeshParams {
  double h_rel = 1.0 / 3.0;  // bulk size relative to the cell length 3^-n
  int fiber_layers = 2;
  double grading = 0.5;
  int grading_depth = 4;
  int refine = 0;
  double min_angle_deg = 0.05;
};

Mesh mesh_fibered_domain(const DomainGeometry& g, const MeshParams& params = {});

// Uniform lattice triangulation of the outer triangle at spacing 3^-level.
// Vertices of the level-curve_level prefractal are flagged when curve is given.
Mesh mesh_omega_star(int level, const Prefractal* curve = nullptr);
// Elements of a lattice mesh lying inside the closed prefractal domain.
Mesh restrict_to_prefractal(const Mesh& lattice_mesh, const Prefractal& curve);

Mesh refine_uniform(const Mesh& m);

struct ValidationReport {
  std::vector<std::string> violations;
  double min_angle_deg = 180.0;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const Mesh& m, double min_angle_floor_deg = 0.05, const DomainGeometry* g = nullptr);

class MeshLocator {
 public:
  explicit MeshLocator(const Mesh& m);
  // Element containing x and its barycentric coordinates; -1 when outside.
  int locate(const Eigen::Vector2d& x, Eigen::Vector3d* bary = nullptr) const;

 private:
  const Mesh* mesh_;
  Eigen::Vector2d lo_, hi_;
  int nx_ = 1, ny_ = 1;
  double cell_ = 1.0;
  std::vector<int> start_;
  std::vector<int> items_;
};

// Edge parameters on [0,1]; symmetric under t -> 1-t.
std::vector<double> graded_edge_parameters(double ratio, const MeshParams& params);
std::vector<double> coarse_edge_parameters(const MeshParams& params);

}  // namespace kochfiber
