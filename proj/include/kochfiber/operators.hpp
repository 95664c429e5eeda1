#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "kochfiber/fem.hpp"
#include "kochfiber/fractal_energy.hpp"
#include "kochfiber/geometry.hpp"
#include "kochfiber/mesh.hpp"

namespace kochfiber {

// Continuous piecewise-affine function on the level-n lattice triangulation of the outer triangle.
class LatticeInterpolant {
 public:
  LatticeInterpolant(int level, std::shared_ptr<const Mesh> mesh, Eigen::VectorXd values);

  int level() const { return level_; }
  const Mesh& mesh() const { return *mesh_; }
  const Eigen::VectorXd& values() const { return values_; }
  FemFunction function() const { return {mesh_.get(), values_}; }

  double at(const LatticePoint& p) const;  // PointOutsideDomain off the outer triangle
  double at(const ExactPoint& p) const { return at(to_lattice(p, level_)); }
  double operator()(const Eigen::Vector2d& x) const;

 private:
  int level_;
  std::shared_ptr<const Mesh> mesh_;
  Eigen::VectorXd values_;
  std::unordered_map<LatticePoint, int, LatticePointHash> index_;
};

LatticeInterpolant interpolate_In(const ScalarField& u, int n);
// Trace on a level-n cell graph; other lattice nodes get the discrete harmonic fill.
LatticeInterpolant interpolate_In(const TraceValues& trace);

// sup over node pairs of |I(P) - I(Q)| / |P - Q|^beta.
double holder_constant(const LatticeInterpolant& interp, double beta, bool parallel = true);

// Extension on the unit cell: g off the collars, side interpolant on the inner band
// (constant along normals), blend toward g across the annulus.
double extend_G_eps(const ScalarField& g, double eps, const Eigen::Vector2d& x);
ScalarField extend_G_eps(ScalarField g, double eps);

struct RecoveryFunction {
  std::shared_ptr<const DomainGeometry> geometry;
  std::shared_ptr<const Mesh> mesh;
  FemFunction function;
  TraceValues vertex_values;  // I_n u on the level-n cell graph
  std::string source;
  int level = 0;
  double eps = 0.0;
};

RecoveryFunction recovery_sequence(const LatticeInterpolant& interp, std::shared_ptr<const DomainGeometry> geometry,
                                   std::shared_ptr<const Mesh> mesh, std::string source = {});
RecoveryFunction recovery_sequence(const ScalarField& u, int n, const QSqrt3& eps, const MeshParams& params = {},
                                   const BuildOptions& build = {}, std::string source = {});

double fiber_factor(double eps, double p);  // 1 + eps C_p / C_1

struct FiberIdentity {
  double fiber_energy = 0.0;  // delta_n^(1-p)/p int_fiber w |grad u_n|^p
  double graph_energy = 0.0;  // 4^{n(p-1)}/p sum over cells of unordered pair differences
  double factor = 1.0;
  double relative_error = 0.0;
};
// Cells counted per word under multiset geometry, once per triangle otherwise.
FiberIdentity fiber_identity(const RecoveryFunction& r, double p);

// Normal averages over the inner fiber of each strip; v must live on a fibered mesh of g.
class FiberAverager {
 public:
  FiberAverager(const FemFunction& v, const DomainGeometry& g);

  // Mean of v along the inner normal segment at strip abscissa xhat; endpoint values at 0 and 1.
  double average(int strip, double xhat) const;
  // (xhat, mean) at every element-vertex abscissa plus Gauss points in between.
  std::vector<Eigen::Vector2d> profile(int strip, int gauss_per_interval = 2) const;
  double endpoint(int strip, bool end) const;

 private:
  struct Item {
    std::array<Eigen::Vector2d, 3> local;
    std::array<double, 3> value;
    double xmin, xmax;
  };
  const DomainGeometry* g_;
  std::vector<std::vector<Item>> items_;
  std::vector<std::array<double, 2>> ends_;
};

struct VTilde {
  TraceValues vertices;  // level-n cell graph
  std::vector<std::vector<Eigen::Vector2d>> profiles;  // per strip, empty unless requested
};
VTilde v_tilde(const FemFunction& v, const DomainGeometry& g, bool with_profiles = false);

struct LiminfRow {
  double edges_energy = 0.0;      // curve segments only
  double unordered_energy = 0.0;  // apex values from the level-n minimization
  double fiber_energy = 0.0;
  double slack = 0.0;  // (fiber - edges) / max(1, fiber)
};
LiminfRow liminf_check(const FemFunction& v, const DomainGeometry& g, double p);

}  // namespace kochfiber
