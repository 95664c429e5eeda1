#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "kochfiber/mesh.hpp"

namespace kochfiber {

using ScalarField = std::function<double(const Eigen::Vector2d&)>;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct FemFunction {
  const Mesh* mesh = nullptr;
  Eigen::VectorXd values;

  double eval(const MeshLocator& loc, const Eigen::Vector2d& x) const;  // 0 outside the mesh
};

FemFunction interpolate_nodal(const ScalarField& f, const Mesh& m);

struct EnergyBreakdown {
  double bulk_mass = 0.0;     // (1/p) int |u|^p per region
  double annulus_mass = 0.0;
  double fiber_mass = 0.0;
  double lp_mass = 0.0;       // sum of the three masses
  double bulk_dirichlet = 0.0;
  double annulus_dirichlet = 0.0;
  double fiber_weighted = 0.0;  // delta_n^(1-p)/p int_fiber w |grad u|^p
  double graph_energy = 0.0;    // discrete boundary energy (fractal proxy only)
  double total = 0.0;
};

// Integral of the fiber weight over one inner-fiber element of a level-n mesh.
double fiber_weight_integral(const FiberElement& fe, int n, double eps, double p);

// Precomputed element data for the p-functional on one mesh.
// With weighted = true, inner-fiber elements carry delta_n^(1-p) w; otherwise every element has unit conductivity.
class FemModel {
 public:
  FemModel(const Mesh& mesh, double p, bool weighted = true);

  const Mesh& mesh() const { return *mesh_; }
  double p() const { return p_; }
  std::size_t num_nodes() const { return mesh_->num_nodes(); }
  // Conductivity integral over element e (area for unit conductivity).
  double coefficient(std::size_t e) const { return coef_[e]; }
  const std::array<Eigen::Vector2d, 3>& gradients(std::size_t e) const { return grad_[e]; }
  Eigen::Vector2d gradient(const Eigen::VectorXd& u, std::size_t e) const;

  // (1/p) sum coef |grad u|^p over the elements of a region (all regions when region = Outside).
  double dirichlet(const Eigen::VectorXd& u, Region region = Region::Outside, double eta = 0.0,
                   bool parallel = true) const;
  double mass(const Eigen::VectorXd& u, Region region = Region::Outside, bool parallel = true) const;
  EnergyBreakdown breakdown(const Eigen::VectorXd& u, bool parallel = true) const;

  // Nodal load b_i = int f phi_i (degree-4 rule); load(u, f) = b . u.
  Eigen::VectorXd load_vector(const ScalarField& f, bool parallel = true) const;

  // mass/p + regularized Dirichlet - b.u
  double functional(const Eigen::VectorXd& u, const Eigen::VectorXd& b, double eta, bool parallel = true) const;
  Eigen::VectorXd first_variation(const Eigen::VectorXd& u, const Eigen::VectorXd& b, double eta,
                                  bool parallel = true) const;
  SparseMatrix second_variation(const Eigen::VectorXd& u, double eta, bool parallel = true) const;

  // p = 2 system matrix (mass + stiffness); first_variation = A u - b there.
  SparseMatrix linear_operator() const;

 private:
  const Mesh* mesh_;
  double p_;
  int mass_degree_;
  std::vector<double> area_;
  std::vector<double> coef_;
  std::vector<std::array<Eigen::Vector2d, 3>> grad_;
};

double load(const FemModel& model, const Eigen::VectorXd& u, const ScalarField& f);

struct L2Options {
  int subdivisions = 243;  // background triangles per side of the outer triangle
  bool check_doubling = true;
  bool parallel = true;
};

struct L2Result {
  double distance = 0.0;
  double doubled = -1.0;  // value at twice the resolution when checked
  std::vector<std::string> warnings;
};

// || chi1 u1 - chi2 u2 ||_{L2(outer triangle)} with zero extension off each mesh.
L2Result l2_distance_omega_star(const FemFunction& u1, const FemFunction& u2, const L2Options& opts = {});
L2Result l2_norm_omega_star(const FemFunction& u, const L2Options& opts = {});

}  // namespace kochfiber
