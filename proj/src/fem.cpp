#include "kochfiber/fem.hpp"

#include <cmath>

#include "kochfiber/quadrature.hpp"
#include "kochfiber/weights.hpp"

namespace kochfiber {

namespace {

template <class F>
void for_elements(std::size_t n, bool parallel, F&& f) {
  const long ne = static_cast<long>(n);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (long e = 0; e < ne; ++e) f(static_cast<std::size_t>(e));
  } else {
    for (long e = 0; e < ne; ++e) f(static_cast<std::size_t>(e));
  }
}

// Ordered sum so that serial and parallel runs agree bit for bit.
double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

const double kC1 = 2.0 - std::sqrt(3.0);

// Symmetric element matrix with constants in its kernel.
Eigen::Matrix3d zero_row_sums(Eigen::Matrix3d K) {
  for (int i = 0; i < 3; ++i) K(i, i) = -(K.row(i).sum() - K(i, i));
  return K;
}

}  // namespace

double FemFunction::eval(const MeshLocator& loc, const Eigen::Vector2d& x) const {
  Eigen::Vector3d b;
  const int e = loc.locate(x, &b);
  if (e < 0) return 0.0;
  const auto& t = mesh->tris[e];
  return b[0] * values[t[0]] + b[1] * values[t[1]] + b[2] * values[t[2]];
}

FemFunction interpolate_nodal(const ScalarField& f, const Mesh& m) {
  FemFunction u{&m, Eigen::VectorXd(m.num_nodes())};
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    const double v = f(m.nodes[i]);
    if (!std::isfinite(v)) throw Error("non-finite sample at node " + std::to_string(i));
    u.values[i] = v;
  }
  return u;
}

double fiber_weight_integral(const FiberElement& fe, int n, double eps, double p) {
  const auto& q = fe.local;
  const double ref_area = 0.5 * std::abs((q[1] - q[0]).x() * (q[2] - q[0]).y() - (q[1] - q[0]).y() * (q[2] - q[0]).x());
  const double end = std::pow(2.0, p) + std::pow(kC1, p);
  double unit;
  switch (fe.piece) {
    case Piece::Rectangle:
      unit = 2.0 / eps * ref_area;
      break;
    case Piece::TriangleA:
      unit = end / kC1 * triangle_integral_inverse_x(q);
      break;
    default: {
      std::array<Eigen::Vector2d, 3> m;
      for (int k = 0; k < 3; ++k) m[k] = {1.0 - q[k].x(), q[k].y()};
      unit = end / kC1 * triangle_integral_inverse_x(m);
    }
  }
  return fe.multiplicity * std::pow(3.0, n) * fe.cell_length * fe.cell_length * unit;
}

FemModel::FemModel(const Mesh& mesh, double p, bool weighted)
    : mesh_(&mesh), p_(p), mass_degree_(static_cast<int>(std::ceil(p)) + 2) {
  const std::size_t ne = mesh.num_elements();
  area_.resize(ne);
  coef_.resize(ne);
  grad_.resize(ne);
  const double delta_power = mesh.curve_level >= 0 ? std::pow(0.75, mesh.curve_level * (1.0 - p)) : 1.0;
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& t = mesh.tris[e];
    const Eigen::Vector2d& a = mesh.nodes[t[0]];
    const Eigen::Vector2d& b = mesh.nodes[t[1]];
    const Eigen::Vector2d& c = mesh.nodes[t[2]];
    const double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    area_[e] = 0.5 * det;
    // grad phi_k = rot(-90)(opposite edge) / det
    auto perp = [&](const Eigen::Vector2d& u, const Eigen::Vector2d& v) -> Eigen::Vector2d {
      return Eigen::Vector2d(u.y() - v.y(), v.x() - u.x()) / det;
    };
    grad_[e] = {perp(b, c), perp(c, a), perp(a, b)};
    coef_[e] = area_[e];
    if (weighted && mesh.region[e] == Region::InnerFiber && mesh.fiber[e].strip >= 0) {
      coef_[e] = delta_power * fiber_weight_integral(mesh.fiber[e], mesh.curve_level, mesh.eps, p);
    }
  }
}

Eigen::Vector2d FemModel::gradient(const Eigen::VectorXd& u, std::size_t e) const {
  const auto& t = mesh_->tris[e];
  const auto& G = grad_[e];
  // Differences keep constants exactly in the kernel.
  return (u[t[1]] - u[t[0]]) * G[1] + (u[t[2]] - u[t[0]]) * G[2];
}

double FemModel::dirichlet(const Eigen::VectorXd& u, Region region, double eta, bool parallel) const {
  std::vector<double> part(mesh_->num_elements(), 0.0);
  const double eta_p = eta > 0.0 ? std::pow(eta, p_) : 0.0;
  for_elements(part.size(), parallel, [&](std::size_t e) {
    if (region != Region::Outside && mesh_->region[e] != region) return;
    const double s = gradient(u, e).squaredNorm() + eta * eta;
    part[e] = coef_[e] * (std::pow(s, 0.5 * p_) - eta_p) / p_;
  });
  return ordered_sum(part);
}

double FemModel::mass(const Eigen::VectorXd& u, Region region, bool parallel) const {
  const TriangleRule& rule = triangle_rule(mass_degree_);
  std::vector<double> part(mesh_->num_elements(), 0.0);
  for_elements(part.size(), parallel, [&](std::size_t e) {
    if (region != Region::Outside && mesh_->region[e] != region) return;
    const auto& t = mesh_->tris[e];
    double s = 0.0;
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const double v = rule.bary[q][0] * u[t[0]] + rule.bary[q][1] * u[t[1]] + rule.bary[q][2] * u[t[2]];
      s += rule.weights[q] * std::pow(std::abs(v), p_);
    }
    part[e] = area_[e] * s / p_;
  });
  return ordered_sum(part);
}

EnergyBreakdown FemModel::breakdown(const Eigen::VectorXd& u, bool parallel) const {
  EnergyBreakdown b;
  b.bulk_mass = mass(u, Region::Bulk, parallel);
  b.annulus_mass = mass(u, Region::Annulus, parallel);
  b.fiber_mass = mass(u, Region::InnerFiber, parallel);
  b.lp_mass = b.bulk_mass + b.annulus_mass + b.fiber_mass;
  b.bulk_dirichlet = dirichlet(u, Region::Bulk, 0.0, parallel);
  b.annulus_dirichlet = dirichlet(u, Region::Annulus, 0.0, parallel);
  b.fiber_weighted = dirichlet(u, Region::InnerFiber, 0.0, parallel);
  b.total = b.lp_mass + b.bulk_dirichlet + b.annulus_dirichlet + b.fiber_weighted;
  return b;
}

Eigen::VectorXd FemModel::load_vector(const ScalarField& f, bool parallel) const {
  const TriangleRule& rule = triangle_rule(4);
  std::vector<std::array<double, 3>> local(mesh_->num_elements());
  for_elements(local.size(), parallel, [&](std::size_t e) {
    const auto& t = mesh_->tris[e];
    std::array<double, 3> r{0.0, 0.0, 0.0};
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const Eigen::Vector3d& l = rule.bary[q];
      const Eigen::Vector2d x = l[0] * mesh_->nodes[t[0]] + l[1] * mesh_->nodes[t[1]] + l[2] * mesh_->nodes[t[2]];
      const double fx = f(x);
      for (int k = 0; k < 3; ++k) r[k] += rule.weights[q] * fx * l[k];
    }
    for (int k = 0; k < 3; ++k) r[k] *= area_[e];
    local[e] = r;
  });
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh_->num_nodes());
  for (std::size_t e = 0; e < local.size(); ++e) {
    for (int k = 0; k < 3; ++k) b[mesh_->tris[e][k]] += local[e][k];
  }
  if (!b.allFinite()) throw Error("non-finite load vector");
  return b;
}

double FemModel::functional(const Eigen::VectorXd& u, const Eigen::VectorXd& b, double eta, bool parallel) const {
  return mass(u, Region::Outside, parallel) + dirichlet(u, Region::Outside, eta, parallel) - b.dot(u);
}

Eigen::VectorXd FemModel::first_variation(const Eigen::VectorXd& u, const Eigen::VectorXd& b, double eta,
                                          bool parallel) const {
  const TriangleRule& rule = triangle_rule(mass_degree_);
  std::vector<std::array<double, 3>> local(mesh_->num_elements());
  for_elements(local.size(), parallel, [&](std::size_t e) {
    const auto& t = mesh_->tris[e];
    const auto& G = grad_[e];
    std::array<double, 3> r{0.0, 0.0, 0.0};
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const Eigen::Vector3d& l = rule.bary[q];
      const double v = l[0] * u[t[0]] + l[1] * u[t[1]] + l[2] * u[t[2]];
      const double m = rule.weights[q] * std::pow(std::abs(v), p_ - 2.0) * v;
      for (int k = 0; k < 3; ++k) r[k] += m * l[k];
    }
    for (int k = 0; k < 3; ++k) r[k] *= area_[e];
    const Eigen::Vector2d g = gradient(u, e);
    const double s = g.squaredNorm() + eta * eta;
    const double c = s > 0.0 ? coef_[e] * std::pow(s, 0.5 * (p_ - 2.0)) : 0.0;
    for (int k = 0; k < 3; ++k) r[k] += c * g.dot(G[k]);
    local[e] = r;
  });
  Eigen::VectorXd r = -b;
  for (std::size_t e = 0; e < local.size(); ++e) {
    for (int k = 0; k < 3; ++k) r[mesh_->tris[e][k]] += local[e][k];
  }
  return r;
}

SparseMatrix FemModel::second_variation(const Eigen::VectorXd& u, double eta, bool parallel) const {
  const TriangleRule& rule = triangle_rule(mass_degree_);
  const std::size_t ne = mesh_->num_elements();
  std::vector<Eigen::Triplet<double>> trip(9 * ne);
  for_elements(ne, parallel, [&](std::size_t e) {
    const auto& t = mesh_->tris[e];
    const auto& G = grad_[e];
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const Eigen::Vector3d& l = rule.bary[q];
      const double v = l[0] * u[t[0]] + l[1] * u[t[1]] + l[2] * u[t[2]];
      const double m = p_ == 2.0 ? rule.weights[q] : rule.weights[q] * (p_ - 1.0) * std::pow(std::abs(v), p_ - 2.0);
      H += m * l * l.transpose();
    }
    H *= area_[e];
    const Eigen::Vector2d g = gradient(u, e);
    const double s = g.squaredNorm() + eta * eta;
    if (s > 0.0 || p_ == 2.0) {
      const double a = p_ == 2.0 ? coef_[e] : coef_[e] * std::pow(s, 0.5 * (p_ - 2.0));
      const double c = (p_ == 2.0 || g.squaredNorm() == 0.0) ? 0.0 : coef_[e] * (p_ - 2.0) * std::pow(s, 0.5 * (p_ - 4.0));
      Eigen::Matrix3d K;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) K(i, j) = a * G[i].dot(G[j]) + c * G[i].dot(g) * G[j].dot(g);
      }
      H += zero_row_sums(K);
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trip[9 * e + 3 * i + j] = {t[i], t[j], H(i, j)};
    }
  });
  SparseMatrix A(mesh_->num_nodes(), mesh_->num_nodes());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

SparseMatrix FemModel::linear_operator() const {
  const std::size_t ne = mesh_->num_elements();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& t = mesh_->tris[e];
    const auto& G = grad_[e];
    Eigen::Matrix3d K;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) K(i, j) = coef_[e] * G[i].dot(G[j]);
    }
    K = zero_row_sums(K);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) trip.emplace_back(t[i], t[j], area_[e] * (i == j ? 2.0 : 1.0) / 12.0 + K(i, j));
    }
  }
  SparseMatrix A(mesh_->num_nodes(), mesh_->num_nodes());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

double load(const FemModel& model, const Eigen::VectorXd& u, const ScalarField& f) {
  return model.load_vector(f, false).dot(u);
}

namespace {

// Outer triangle with side 2 containing every domain.
const Eigen::Vector2d kOuter0(0.5, -std::sqrt(3.0) / 2.0);
const Eigen::Vector2d kOuter1(1.5, std::sqrt(3.0) / 2.0);
const Eigen::Vector2d kOuter2(-0.5, std::sqrt(3.0) / 2.0);

double grid_l2(const FemFunction* u1, const FemFunction* u2, int k, bool parallel) {
  std::optional<MeshLocator> l1, l2;
  if (u1) l1.emplace(*u1->mesh);
  if (u2) l2.emplace(*u2->mesh);
  const Eigen::Vector2d da = (kOuter1 - kOuter0) / k, db = (kOuter2 - kOuter0) / k;
  const double tri_area = 0.5 * std::abs(da.x() * db.y() - da.y() * db.x());
  static const double kb[3][3] = {{2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}};
  auto diff2 = [&](const Eigen::Vector2d& x) {
    const double a = u1 ? u1->eval(*l1, x) : 0.0;
    const double b = u2 ? u2->eval(*l2, x) : 0.0;
    return (a - b) * (a - b);
  };
  auto tri_sum = [&](const Eigen::Vector2d& p0, const Eigen::Vector2d& p1, const Eigen::Vector2d& p2) {
    double s = 0.0;
    for (const auto& w : kb) s += diff2(w[0] * p0 + w[1] * p1 + w[2] * p2);
    return s / 3.0;
  };
  std::vector<double> rows(k, 0.0);
  for_elements(static_cast<std::size_t>(k), parallel, [&](std::size_t ar) {
    const int a = static_cast<int>(ar);
    double s = 0.0;
    for (int b = 0; a + b < k; ++b) {
      const Eigen::Vector2d p = kOuter0 + a * da + b * db;
      s += tri_sum(p, p + da, p + db);
      if (a + b + 2 <= k) s += tri_sum(p + da, p + da + db, p + db);
    }
    rows[a] = s;
  });
  return std::sqrt(tri_area * ordered_sum(rows));
}

L2Result grid_l2_checked(const FemFunction* u1, const FemFunction* u2, const L2Options& opts) {
  L2Result r;
  r.distance = grid_l2(u1, u2, opts.subdivisions, opts.parallel);
  if (opts.check_doubling) {
    r.doubled = grid_l2(u1, u2, 2 * opts.subdivisions, opts.parallel);
    const double scale = std::max(r.distance, r.doubled);
    if (scale > 0.0 && std::abs(r.doubled - r.distance) > 0.01 * scale) {
      r.warnings.push_back("L2 grid too coarse: value changes by more than 1% under grid doubling");
    }
  }
  return r;
}

}  // namespace

L2Result l2_distance_omega_star(const FemFunction& u1, const FemFunction& u2, const L2Options& opts) {
  return grid_l2_checked(&u1, &u2, opts);
}

L2Result l2_norm_omega_star(const FemFunction& u, const L2Options& opts) {
  return grid_l2_checked(&u, nullptr, opts);
}

}  // namespace kochfiber
