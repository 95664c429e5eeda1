#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kochfiber/fem.hpp"
#include "kochfiber/fractal_energy.hpp"
#include "kochfiber/geometry.hpp"
#include "kochfiber/mesh.hpp"

namespace kochfiber {

struct SolveConfig {
  std::vector<double> eta_schedule{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10};
  double tolerance = 1e-13;  // normwise backward error |g| / (|H| |u| + |b|), final stage
  double stage_tolerance = 1e-8;
  int max_iterations = 100;  // per stage
  double armijo = 1e-4;
  bool parallel = true;
  std::optional<Eigen::VectorXd> initial;  // default: the p = 2 solution
  EnergyOptions graph;                     // boundary energy of the fractal proxy

  void validate() const;
};

struct IterationRecord {
  int stage = 0;
  double eta = 0.0;
  int iteration = 0;
  double functional = 0.0;
  double residual = 0.0;
  double step = 0.0;
};

// Pairs of mesh nodes coupled by the discrete boundary energy.
struct GraphCoupling {
  std::vector<std::array<int, 2>> nodes;
  std::vector<double> weight;  // pair multiplicity
  double scale = 0.0;          // 4^{(p-1)m}
};

// p-functional on a mesh: mass/p + Dirichlet/p + optional graph energy - load.u
class DiscreteProblem {
 public:
  DiscreteProblem(std::shared_ptr<const Mesh> mesh, double p, bool weighted, const ScalarField& f,
                  GraphCoupling graph = {}, bool parallel = true);

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const FemModel& model() const { return model_; }
  const Eigen::VectorXd& load() const { return load_; }
  const GraphCoupling& graph() const { return graph_; }
  double p() const { return model_.p(); }
  std::size_t size() const { return mesh_->num_nodes(); }

  double graph_energy(const Eigen::VectorXd& u, double eta = 0.0) const;
  double functional(const Eigen::VectorXd& u, double eta, bool parallel = true) const;
  Eigen::VectorXd first_variation(const Eigen::VectorXd& u, double eta, bool parallel = true) const;
  SparseMatrix second_variation(const Eigen::VectorXd& u, double eta, bool parallel = true) const;
  // p = 2 system matrix including the graph block.
  SparseMatrix linear_operator() const;
  EnergyBreakdown breakdown(const Eigen::VectorXd& u, bool parallel = true) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  FemModel model_;
  Eigen::VectorXd load_;
  GraphCoupling graph_;
};

struct SolveResult {
  std::shared_ptr<const DiscreteProblem> problem;
  std::shared_ptr<const DomainGeometry> geometry;  // null for the fractal proxy
  FemFunction solution;
  double functional = 0.0;
  EnergyBreakdown breakdown;
  double residual = 0.0;
  bool converged = false;
  std::vector<IterationRecord> trace;
  std::string kind;
  int level = 0;
  double eps = 0.0;
  double p = 2.0;
};

// Damped Newton with eta continuation; throws NonConvergence when the final stage misses the tolerance.
SolveResult solve(std::shared_ptr<const DiscreteProblem> problem, const SolveConfig& config = {});
// Direct solve of the p = 2 system.
Eigen::VectorXd linear_oracle(const DiscreteProblem& problem);

SolveResult solve_prehomogenized(std::shared_ptr<const DomainGeometry> geometry, std::shared_ptr<const Mesh> mesh,
                                 double p, const ScalarField& f, const SolveConfig& config = {});
SolveResult solve_prehomogenized(int n, const QSqrt3& eps, double p, const ScalarField& f,
                                 const MeshParams& params = {}, const SolveConfig& config = {});

// Lattice mesh of the level-m prefractal domain, refined by extra_levels lattice levels.
std::shared_ptr<const Mesh> fractal_proxy_mesh(int m, int extra_levels = 1);
GraphCoupling graph_coupling(const Mesh& mesh, int m, double p, const EnergyOptions& opts = {});
SolveResult solve_fractal(int m, double p, const ScalarField& f, int extra_levels = 1, const SolveConfig& config = {});

struct WeakFormReport {
  double basis_violation = 0.0;   // max_i |r_i| / max_i |b_i|
  double random_violation = 0.0;  // max_k |r.v_k| / (|b| |v_k|)
  double max_violation() const { return std::max(basis_violation, random_violation); }
};
WeakFormReport verify_weak_form(const DiscreteProblem& problem, const Eigen::VectorXd& u, int random_directions = 20,
                                std::uint64_t seed = 1);

}  // namespace kochfiber
