#include "kochfiber/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include <Eigen/SparseCholesky>

namespace kochfiber {

namespace {

double pair_weight(PairConvention c) { return c == PairConvention::Ordered ? 2.0 : 1.0; }

// LDLT with a growing diagonal shift until the factorization succeeds and yields descent.
Eigen::VectorXd newton_direction(const SparseMatrix& H, const Eigen::VectorXd& g) {
  double diag = 0.0;
  for (int k = 0; k < H.outerSize(); ++k) diag = std::max(diag, std::abs(H.coeff(k, k)));
  if (diag == 0.0) diag = 1.0;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  ldlt.analyzePattern(H);
  for (double shift = 0.0; shift <= diag; shift = shift == 0.0 ? 1e-14 * diag : shift * 100.0) {
    ldlt.setShift(shift);
    ldlt.factorize(H);
    if (ldlt.info() != Eigen::Success) continue;
    Eigen::VectorXd d = -ldlt.solve(g);
    if (d.allFinite() && d.dot(g) < 0.0) return d;
  }
  return -g / diag;
}

// Direct solve followed by iterative refinement against A.
Eigen::VectorXd refined_solve(const Eigen::SimplicialLDLT<SparseMatrix>& ldlt, const SparseMatrix& A,
                              const Eigen::VectorXd& b, int passes = 3) {
  Eigen::VectorXd x = ldlt.solve(b);
  for (int k = 0; k < passes; ++k) {
    const Eigen::VectorXd r = b - A * x;
    x += ldlt.solve(r);
  }
  return x;
}

// |g|_inf / (|H|_inf |u|_inf + |b|_inf)
double backward_error(const Eigen::VectorXd& g, const SparseMatrix& H, const Eigen::VectorXd& u, double binf) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(H.rows());
  for (int k = 0; k < H.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(H, k); it; ++it) rows[it.row()] += std::abs(it.value());
  }
  const double den = rows.maxCoeff() * u.lpNorm<Eigen::Infinity>() + binf;
  const double gi = g.lpNorm<Eigen::Infinity>();
  return den > 0.0 ? gi / den : gi;
}

}  // namespace

void SolveConfig::validate() const {
  if (eta_schedule.empty()) throw ConfigError("empty regularization schedule");
  for (std::size_t k = 0; k < eta_schedule.size(); ++k) {
    if (!(eta_schedule[k] >= 0.0) || (k > 0 && eta_schedule[k] >= eta_schedule[k - 1])) {
      throw ConfigError("regularization schedule must be positive and decreasing");
    }
  }
  if (!(tolerance > 0.0) || !(stage_tolerance > 0.0) || max_iterations <= 0) throw ConfigError("invalid tolerances");
  if (!(armijo > 0.0 && armijo < 0.5)) throw ConfigError("Armijo constant outside (0, 1/2)");
}

DiscreteProblem::DiscreteProblem(std::shared_ptr<const Mesh> mesh, double p, bool weighted, const ScalarField& f,
                                 GraphCoupling graph, bool parallel)
    : mesh_(std::move(mesh)), model_(*mesh_, p, weighted), graph_(std::move(graph)) {
  if (p < 2.0) throw ConfigError("exponent p must be at least 2");
  load_ = model_.load_vector(f, parallel);
}

double DiscreteProblem::graph_energy(const Eigen::VectorXd& u, double eta) const {
  if (graph_.nodes.empty()) return 0.0;
  const double p = this->p(), eta_p = eta > 0.0 ? std::pow(eta, p) : 0.0;
  double s = 0.0;
  for (std::size_t k = 0; k < graph_.nodes.size(); ++k) {
    const double d = u[graph_.nodes[k][0]] - u[graph_.nodes[k][1]];
    s += graph_.weight[k] * (std::pow(d * d + eta * eta, 0.5 * p) - eta_p);
  }
  return graph_.scale * s / p;
}

double DiscreteProblem::functional(const Eigen::VectorXd& u, double eta, bool parallel) const {
  return model_.functional(u, load_, eta, parallel) + graph_energy(u, eta);
}

Eigen::VectorXd DiscreteProblem::first_variation(const Eigen::VectorXd& u, double eta, bool parallel) const {
  Eigen::VectorXd r = model_.first_variation(u, load_, eta, parallel);
  const double p = this->p();
  for (std::size_t k = 0; k < graph_.nodes.size(); ++k) {
    const int i = graph_.nodes[k][0], j = graph_.nodes[k][1];
    const double d = u[i] - u[j], s = d * d + eta * eta;
    const double c = s > 0.0 ? graph_.scale * graph_.weight[k] * std::pow(s, 0.5 * (p - 2.0)) * d : 0.0;
    r[i] += c;
    r[j] -= c;
  }
  return r;
}

SparseMatrix DiscreteProblem::second_variation(const Eigen::VectorXd& u, double eta, bool parallel) const {
  SparseMatrix H = model_.second_variation(u, eta, parallel);
  if (graph_.nodes.empty()) return H;
  const double p = this->p();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * graph_.nodes.size());
  for (std::size_t k = 0; k < graph_.nodes.size(); ++k) {
    const int i = graph_.nodes[k][0], j = graph_.nodes[k][1];
    const double d = u[i] - u[j], s = d * d + eta * eta;
    double h = 0.0;
    if (p == 2.0) {
      h = 1.0;
    } else if (s > 0.0) {
      h = std::pow(s, 0.5 * (p - 2.0)) + (p - 2.0) * std::pow(s, 0.5 * (p - 4.0)) * d * d;
    }
    h *= graph_.scale * graph_.weight[k];
    trip.emplace_back(i, i, h);
    trip.emplace_back(j, j, h);
    trip.emplace_back(i, j, -h);
    trip.emplace_back(j, i, -h);
  }
  SparseMatrix G(H.rows(), H.cols());
  G.setFromTriplets(trip.begin(), trip.end());
  return H + G;
}

SparseMatrix DiscreteProblem::linear_operator() const {
  if (p() != 2.0) throw ConfigError("linear operator is defined for p = 2 only");
  return second_variation(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size())), 0.0, false);
}

EnergyBreakdown DiscreteProblem::breakdown(const Eigen::VectorXd& u, bool parallel) const {
  EnergyBreakdown b = model_.breakdown(u, parallel);
  b.graph_energy = graph_energy(u);
  b.total += b.graph_energy;
  return b;
}

Eigen::VectorXd linear_oracle(const DiscreteProblem& problem) {
  const SparseMatrix A = problem.linear_operator();
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw NonConvergence("p = 2 factorization failed");
  // Refinement residuals come from the matrix-free first variation: the assembled matrix mixes
  // fiber stiffness with far smaller mass entries and cannot hold the latter to full precision.
  Eigen::VectorXd x = ldlt.solve(problem.load());
  double gn = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd g = problem.first_variation(x, 0.0, false);
    const double n = g.lpNorm<Eigen::Infinity>();
    if (!(n < 0.5 * gn)) break;
    gn = n;
    x -= ldlt.solve(g);
  }
  return x;
}

SolveResult solve(std::shared_ptr<const DiscreteProblem> problem, const SolveConfig& config) {
  config.validate();
  const DiscreteProblem& P = *problem;
  const double p = P.p();
  const double binf = P.load().lpNorm<Eigen::Infinity>();

  SolveResult res;
  res.problem = problem;
  res.p = p;
  Eigen::VectorXd u;
  if (config.initial) {
    if (config.initial->size() != static_cast<Eigen::Index>(P.size())) throw ConfigError("initial iterate size mismatch");
    u = *config.initial;
  } else {
    // Quadratic start: same coefficients, exponent 2.
    SparseMatrix A = P.model().linear_operator();
    if (!P.graph().nodes.empty()) {
      std::vector<Eigen::Triplet<double>> trip;
      for (std::size_t k = 0; k < P.graph().nodes.size(); ++k) {
        const int i = P.graph().nodes[k][0], j = P.graph().nodes[k][1];
        const double h = P.graph().scale * P.graph().weight[k];
        trip.emplace_back(i, i, h);
        trip.emplace_back(j, j, h);
        trip.emplace_back(i, j, -h);
        trip.emplace_back(j, i, -h);
      }
      SparseMatrix G(A.rows(), A.cols());
      G.setFromTriplets(trip.begin(), trip.end());
      A += G;
    }
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw NonConvergence("initial factorization failed");
    u = refined_solve(ldlt, A, P.load());
  }

  // For p = 2 the regularization is inert; one stage suffices.
  std::vector<double> schedule = config.eta_schedule;
  if (p == 2.0) schedule = {schedule.back()};

  double residual = 0.0;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double eta = schedule[stage];
    const bool last = stage + 1 == schedule.size();
    const double tol = last ? config.tolerance : std::max(config.tolerance, config.stage_tolerance);
    double F = P.functional(u, eta, config.parallel);
    Eigen::VectorXd g = P.first_variation(u, eta, config.parallel);
    SparseMatrix H = P.second_variation(u, eta, config.parallel);
    residual = backward_error(g, H, u, binf);
    res.trace.push_back({static_cast<int>(stage), eta, 0, F, residual, 0.0});
    bool done = residual <= tol;
    for (int it = 1; !done && it <= config.max_iterations; ++it) {
      const Eigen::VectorXd d = newton_direction(H, g);
      const double slope = d.dot(g);
      double t = 1.0, Fn = 0.0;
      Eigen::VectorXd un;
      bool accepted = false;
      // Below the rounding level of F the decrease test is meaningless; use the gradient norm instead.
      const bool flat = -slope <= 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(F));
      const double gi = g.lpNorm<Eigen::Infinity>();
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        un = u + t * d;
        if (flat) {
          if (P.first_variation(un, eta, config.parallel).lpNorm<Eigen::Infinity>() < gi) {
            Fn = P.functional(un, eta, config.parallel);
            accepted = true;
            break;
          }
          continue;
        }
        Fn = P.functional(un, eta, config.parallel);
        if (Fn <= F + config.armijo * t * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // At the rounding floor of the functional the full step is kept only if the gradient shrinks.
        un = u + d;
        if (P.first_variation(un, eta, config.parallel).lpNorm<Eigen::Infinity>() >= g.lpNorm<Eigen::Infinity>()) break;
        t = 1.0;
        Fn = P.functional(un, eta, config.parallel);
      }
      u = std::move(un);
      F = Fn;
      g = P.first_variation(u, eta, config.parallel);
      H = P.second_variation(u, eta, config.parallel);
      residual = backward_error(g, H, u, binf);
      res.trace.push_back({static_cast<int>(stage), eta, it, F, residual, t * d.lpNorm<Eigen::Infinity>()});
      done = residual <= tol;
    }
    if (done && last) {
      // Polish: full Newton steps while the gradient keeps shrinking.
      for (int k = 0; k < 10; ++k) {
        const Eigen::VectorXd un = u + newton_direction(H, g);
        const Eigen::VectorXd gn = P.first_variation(un, eta, config.parallel);
        if (!(gn.lpNorm<Eigen::Infinity>() < 0.5 * g.lpNorm<Eigen::Infinity>())) break;
        u = un;
        g = gn;
        H = P.second_variation(u, eta, config.parallel);
        residual = backward_error(g, H, u, binf);
      }
    }
    if (!done && last) {
      res.residual = residual;
      char msg[96];
      std::snprintf(msg, sizeof msg, "Newton stalled at backward error %.3g after %zu recorded iterations", residual,
                    res.trace.size());
      throw NonConvergence(msg);
    }
  }
  res.residual = residual;
  res.converged = true;
  res.solution = {problem->mesh_ptr().get(), u};
  res.functional = P.functional(u, 0.0, config.parallel);
  res.breakdown = P.breakdown(u, config.parallel);
  return res;
}

SolveResult solve_prehomogenized(std::shared_ptr<const DomainGeometry> geometry, std::shared_ptr<const Mesh> mesh,
                                 double p, const ScalarField& f, const SolveConfig& config) {
  auto problem = std::make_shared<const DiscreteProblem>(mesh, p, true, f, GraphCoupling{}, config.parallel);
  SolveResult r = solve(problem, config);
  r.kind = "prehomogenized";
  r.level = geometry->n;
  r.eps = geometry->eps_value();
  r.geometry = std::move(geometry);
  return r;
}

SolveResult solve_prehomogenized(int n, const QSqrt3& eps, double p, const ScalarField& f, const MeshParams& params,
                                 const SolveConfig& config) {
  auto g = std::make_shared<const DomainGeometry>(build_domain(n, eps));
  auto m = std::make_shared<const Mesh>(mesh_fibered_domain(*g, params));
  return solve_prehomogenized(g, m, p, f, config);
}

std::shared_ptr<const Mesh> fractal_proxy_mesh(int m, int extra_levels) {
  if (extra_levels < 0) throw ConfigError("negative refinement");
  const Prefractal curve = prefractal(m);
  return std::make_shared<const Mesh>(restrict_to_prefractal(mesh_omega_star(m + extra_levels, &curve), curve));
}

GraphCoupling graph_coupling(const Mesh& mesh, int m, double p, const EnergyOptions& opts) {
  const CellGraph cg = cell_graph(m);
  const auto index = mesh.lattice_node_map();
  std::vector<int> node_of(cg.nodes.size());
  for (std::size_t k = 0; k < cg.nodes.size(); ++k) {
    std::optional<LatticePoint> lp;
    try {
      lp = to_lattice(cg.nodes[k], mesh.lattice_level);
    } catch (const GeometryError&) {
    }
    auto it = lp ? index.find(*lp) : index.end();
    if (it == index.end()) throw GraphNodeOutsideMesh("cell vertex " + cg.nodes[k].str() + " is not a node of the proxy mesh");
    node_of[k] = it->second;
  }
  GraphCoupling gc;
  gc.scale = std::pow(4.0, (p - 1.0) * m);
  const double w = pair_weight(opts.convention);
  for (std::size_t c = 0; c < cg.cells.size(); ++c) {
    if (opts.counting == CellCounting::Distinct && !cg.first_copy[c]) continue;
    const auto& t = cg.cells[c];
    gc.nodes.push_back({node_of[t[0]], node_of[t[1]]});
    gc.weight.push_back(w);
    if (opts.convention == PairConvention::EdgesOnly) continue;
    gc.nodes.push_back({node_of[t[1]], node_of[t[2]]});
    gc.weight.push_back(w);
    gc.nodes.push_back({node_of[t[2]], node_of[t[0]]});
    gc.weight.push_back(w);
  }
  return gc;
}

SolveResult solve_fractal(int m, double p, const ScalarField& f, int extra_levels, const SolveConfig& config) {
  auto mesh = fractal_proxy_mesh(m, extra_levels);
  auto problem =
      std::make_shared<const DiscreteProblem>(mesh, p, false, f, graph_coupling(*mesh, m, p, config.graph), config.parallel);
  SolveResult r = solve(problem, config);
  r.kind = "fractal";
  r.level = m;
  return r;
}

WeakFormReport verify_weak_form(const DiscreteProblem& problem, const Eigen::VectorXd& u, int random_directions,
                                std::uint64_t seed) {
  WeakFormReport rep;
  const Eigen::VectorXd r = problem.first_variation(u, 0.0, false);
  const double binf = problem.load().lpNorm<Eigen::Infinity>();
  const double bnorm = problem.load().norm();
  rep.basis_violation = r.lpNorm<Eigen::Infinity>() / (binf > 0.0 ? binf : 1.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int k = 0; k < random_directions; ++k) {
    Eigen::VectorXd v(r.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = N(rng);
    rep.random_violation = std::max(rep.random_violation, std::abs(r.dot(v)) / ((bnorm > 0.0 ? bnorm : 1.0) * v.norm()));
  }
  return rep;
}

}  // namespace kochfiber
