#include "kochfiber/operators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <Eigen/SparseCholesky>

#include "kochfiber/quadrature.hpp"

namespace kochfiber {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

const std::array<Eigen::Vector2d, 3> kUnitV{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                                            Eigen::Vector2d(0.5, kSqrt3 / 2)};

// Normal segments shorter than rounding noise collapse onto the endpoint.
bool length_guard(double xhat) { return xhat < 1e-12 || xhat > 1.0 - 1e-12; }

std::shared_ptr<const Mesh> lattice_mesh(int n) { return std::make_shared<const Mesh>(mesh_omega_star(n)); }

}  // namespace

LatticeInterpolant::LatticeInterpolant(int level, std::shared_ptr<const Mesh> mesh, Eigen::VectorXd values)
    : level_(level), mesh_(std::move(mesh)), values_(std::move(values)) {
  if (mesh_->lattice_level != level_) throw ConfigError("interpolant mesh level mismatch");
  if (values_.size() != static_cast<Eigen::Index>(mesh_->num_nodes())) throw ConfigError("interpolant size mismatch");
  index_ = mesh_->lattice_node_map();
}

double LatticeInterpolant::at(const LatticePoint& p) const {
  auto it = index_.find(p);
  if (it == index_.end()) throw PointOutsideDomain("lattice point outside the outer triangle");
  return values_[it->second];
}

double LatticeInterpolant::operator()(const Eigen::Vector2d& x) const {
  Eigen::Vector3d bary;
  const MacroKey k = lattice_locate(x, level_, &bary);
  const auto v = k.vertices();
  std::array<double, 3> val{0.0, 0.0, 0.0};
  std::array<bool, 3> present{false, false, false};
  int anchor = -1;
  for (int q = 0; q < 3; ++q) {
    auto it = index_.find(v[q]);
    if (it == index_.end()) {
      // A point on the outer boundary may land in a triangle just outside.
      if (std::abs(bary[q]) <= 1e-12) continue;
      throw PointOutsideDomain("point outside the outer triangle");
    }
    present[q] = true;
    val[q] = values_[it->second];
    if (anchor < 0 || bary[q] > bary[anchor]) anchor = q;
  }
  // Offsets from one vertex value keep constants exact.
  double s = val[anchor];
  for (int q = 0; q < 3; ++q) {
    if (present[q] && q != anchor) s += bary[q] * (val[q] - val[anchor]);
  }
  return s;
}

LatticeInterpolant interpolate_In(const ScalarField& u, int n) {
  auto mesh = lattice_mesh(n);
  return LatticeInterpolant(n, mesh, interpolate_nodal(u, *mesh).values);
}

LatticeInterpolant interpolate_In(const TraceValues& trace) {
  const CellGraph& cg = *trace.graph;
  const int n = cg.n;
  auto mesh = lattice_mesh(n);
  const auto index = mesh->lattice_node_map();
  const std::size_t N = mesh->num_nodes();
  std::vector<int> fixed(N, -1);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
  for (std::size_t k = 0; k < cg.nodes.size(); ++k) {
    const int v = index.at(to_lattice(cg.nodes[k], n));
    fixed[v] = 1;
    values[v] = trace.values[static_cast<Eigen::Index>(k)];
  }
  std::vector<int> uidx(N, -1);
  int nu = 0;
  for (std::size_t v = 0; v < N; ++v) {
    if (fixed[v] < 0) uidx[v] = nu++;
  }
  if (nu == 0) return LatticeInterpolant(n, mesh, values);

  std::set<std::pair<int, int>> edges;
  for (const auto& t : mesh->tris) {
    for (int q = 0; q < 3; ++q) edges.insert(std::minmax(t[q], t[(q + 1) % 3]));
  }
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu);
  for (const auto& [a, b] : edges) {
    for (auto [i, j] : {std::pair{a, b}, std::pair{b, a}}) {
      if (uidx[i] < 0) continue;
      trip.emplace_back(uidx[i], uidx[i], 1.0);
      if (uidx[j] >= 0) {
        trip.emplace_back(uidx[i], uidx[j], -1.0);
      } else {
        rhs[uidx[i]] += values[j];
      }
    }
  }
  SparseMatrix L(nu, nu);
  L.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SparseMatrix> solver(L);
  if (solver.info() != Eigen::Success) throw NonConvergence("harmonic fill factorization failed");
  const Eigen::VectorXd x = solver.solve(rhs);
  for (std::size_t v = 0; v < N; ++v) {
    if (uidx[v] >= 0) values[static_cast<Eigen::Index>(v)] = x[uidx[v]];
  }
  return LatticeInterpolant(n, mesh, values);
}

double holder_constant(const LatticeInterpolant& interp, double beta, bool parallel) {
  const Mesh& m = interp.mesh();
  const auto& val = interp.values();
  const int N = static_cast<int>(m.num_nodes());
  std::vector<double> best(N, 0.0);
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (int i = 0; i < N; ++i) {
    double b = 0.0;
    for (int j = i + 1; j < N; ++j) {
      const double d = (m.nodes[i] - m.nodes[j]).norm();
      b = std::max(b, std::abs(val[i] - val[j]) / std::pow(d, beta));
    }
    best[i] = b;
  }
  return *std::max_element(best.begin(), best.end());
}

double extend_G_eps(const ScalarField& g, double eps, const Eigen::Vector2d& x) {
  if (!(eps > 0.0 && eps < Constants::make(2.0).eps0)) throw AmplitudeOutOfRange("collar amplitude out of range");
  for (int l = 0; l < 3; ++l) {
    const Eigen::Vector2d s = kUnitV[l], d = kUnitV[(l + 1) % 3] - s, r = x - s;
    const double xh = r.dot(d);
    const double depth = d.y() * r.x() - d.x() * r.y();  // toward the outside of the cell
    if (xh < 0.0 || xh > 1.0 || depth < 0.0) continue;
    const double di = inner_depth(xh, eps), dout = outer_depth(xh, eps);
    if (depth > dout) continue;
    const double g0 = g(s);
    const double side = g0 + xh * (g(s + d) - g0);
    if (depth <= di || dout - di <= 0.0) return side;
    const Eigen::Vector2d normal(d.y(), -d.x());
    const double t = (dout - depth) / (dout - di);
    const double far = g(s + xh * d + dout * normal);
    return far + t * (side - far);
  }
  return g(x);
}

ScalarField extend_G_eps(ScalarField g, double eps) {
  return [g = std::move(g), eps](const Eigen::Vector2d& x) { return extend_G_eps(g, eps, x); };
}

RecoveryFunction recovery_sequence(const LatticeInterpolant& interp, std::shared_ptr<const DomainGeometry> geometry,
                                   std::shared_ptr<const Mesh> mesh, std::string source) {
  const DomainGeometry& g = *geometry;
  const int n = g.n;
  if (interp.level() != n) throw ConfigError("interpolant level differs from the geometry level");
  const double eps = g.eps_value();
  const Mesh& m = *mesh;
  const std::size_t N = m.num_nodes();

  Eigen::VectorXd u(static_cast<Eigen::Index>(N));
  for (std::size_t v = 0; v < N; ++v) u[static_cast<Eigen::Index>(v)] = interp(m.nodes[v]);

  std::vector<std::array<double, 2>> ends(g.strips.size());
  for (std::size_t s = 0; s < g.strips.size(); ++s) ends[s] = {interp.at(g.strips[s].start), interp.at(g.strips[s].end)};

  auto collar_value = [&](int s, const Eigen::Vector2d& x, bool inner) {
    const Strip& st = g.strips[s];
    const Eigen::Vector2d loc = st.to_local(x);
    const double xh = std::clamp(loc.x(), 0.0, 1.0);
    const double side = ends[s][0] + xh * (ends[s][1] - ends[s][0]);
    if (inner) return side;
    const double di = inner_depth(xh, eps), dout = outer_depth(xh, eps);
    if (dout - di <= 0.0) return side;
    const double t = std::clamp((dout - loc.y()) / (dout - di), 0.0, 1.0);
    const double far = interp(st.to_physical({xh, dout}));
    return far + t * (side - far);
  };
  // Annulus first so that nodes on the inner boundary end with the band value.
  for (Region pass : {Region::Annulus, Region::InnerFiber}) {
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
      if (m.region[e] != pass || m.fiber[e].strip < 0) continue;
      for (int v : m.tris[e]) u[v] = collar_value(m.fiber[e].strip, m.nodes[v], pass == Region::InnerFiber);
    }
  }

  auto cg = std::make_shared<const CellGraph>(cell_graph(n));
  Eigen::VectorXd tv(static_cast<Eigen::Index>(cg->nodes.size()));
  for (std::size_t k = 0; k < cg->nodes.size(); ++k) tv[static_cast<Eigen::Index>(k)] = interp.at(cg->nodes[k]);

  RecoveryFunction r;
  r.geometry = std::move(geometry);
  r.mesh = std::move(mesh);
  r.function = {r.mesh.get(), std::move(u)};
  r.vertex_values = {cg, std::move(tv)};
  r.source = std::move(source);
  r.level = n;
  r.eps = eps;
  return r;
}

RecoveryFunction recovery_sequence(const ScalarField& u, int n, const QSqrt3& eps, const MeshParams& params,
                                   const BuildOptions& build, std::string source) {
  auto g = std::make_shared<const DomainGeometry>(build_domain(n, eps, build));
  auto m = std::make_shared<const Mesh>(mesh_fibered_domain(*g, params));
  return recovery_sequence(interpolate_In(u, n), g, m, std::move(source));
}

double fiber_factor(double eps, double p) {
  const Constants c = Constants::make(p);
  return 1.0 + eps * c.c_p / c.c1;
}

FiberIdentity fiber_identity(const RecoveryFunction& r, double p) {
  FiberIdentity out;
  FemModel model(*r.mesh, p);
  out.fiber_energy = model.breakdown(r.function.values).fiber_weighted;
  EnergyOptions opts{PairConvention::Unordered, r.geometry->multiset ? CellCounting::PerWord : CellCounting::Distinct};
  out.graph_energy = discrete_energy(r.vertex_values, p, opts);
  out.factor = fiber_factor(r.eps, p);
  const double predicted = out.factor * out.graph_energy;
  const double scale = std::max(std::abs(predicted), std::abs(out.fiber_energy));
  out.relative_error = scale > 0.0 ? std::abs(out.fiber_energy - predicted) / scale : 0.0;
  return out;
}

FiberAverager::FiberAverager(const FemFunction& v, const DomainGeometry& g) : g_(&g) {
  const Mesh& m = *v.mesh;
  if (m.fiber.size() != m.num_elements()) throw ConfigError("averaging needs a fibered mesh");
  items_.resize(g.strips.size());
  ends_.assign(g.strips.size(), {std::nan(""), std::nan("")});
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const int s = m.fiber[e].strip;
    if (m.region[e] != Region::InnerFiber || s < 0) continue;
    Item it;
    for (int q = 0; q < 3; ++q) {
      const int node = m.tris[e][q];
      it.local[q] = g.strips[s].to_local(m.nodes[node]);
      it.value[q] = v.values[node];
      if (it.local[q].norm() <= 1e-12) ends_[s][0] = it.value[q];
      if ((it.local[q] - Eigen::Vector2d(1, 0)).norm() <= 1e-12) ends_[s][1] = it.value[q];
    }
    it.xmin = std::min({it.local[0].x(), it.local[1].x(), it.local[2].x()});
    it.xmax = std::max({it.local[0].x(), it.local[1].x(), it.local[2].x()});
    items_[s].push_back(it);
  }
  for (auto& list : items_) {
    std::sort(list.begin(), list.end(), [](const Item& a, const Item& b) { return a.xmin < b.xmin; });
  }
}

double FiberAverager::endpoint(int strip, bool end) const {
  const double v = ends_[strip][end ? 1 : 0];
  if (std::isnan(v)) throw GeometryError("strip endpoint is not a mesh node");
  return v;
}

double FiberAverager::average(int strip, double xhat) const {
  if (xhat <= 0.0) return endpoint(strip, false);
  if (xhat >= 1.0) return endpoint(strip, true);
  if (length_guard(xhat)) return xhat < 0.5 ? endpoint(strip, false) : endpoint(strip, true);
  const double ell = inner_depth(xhat, g_->eps_value());
  double integral = 0.0, length = 0.0;
  for (const Item& it : items_[strip]) {
    if (it.xmin > xhat) break;
    if (it.xmax <= xhat) continue;
    // The normal line crosses the element in a segment; v is affine along it.
    double dlo = 1e300, dhi = -1e300, vlo = 0.0, vhi = 0.0;
    for (int q = 0; q < 3; ++q) {
      const auto& a = it.local[q];
      const auto& b = it.local[(q + 1) % 3];
      const double fa = a.x() - xhat, fb = b.x() - xhat;
      if (fa * fb > 0.0 || a.x() == b.x()) continue;
      const double s = (xhat - a.x()) / (b.x() - a.x());
      const double d = a.y() + s * (b.y() - a.y());
      const double val = it.value[q] + s * (it.value[(q + 1) % 3] - it.value[q]);
      if (d < dlo) dlo = d, vlo = val;
      if (d > dhi) dhi = d, vhi = val;
    }
    if (dhi > dlo) {
      integral += 0.5 * (dhi - dlo) * (vlo + vhi);
      length += dhi - dlo;
    }
  }
  if (std::abs(length - ell) > 1e-9 * ell + 1e-14) {
    throw GeometryError("normal segment does not match the inner collar at abscissa " + std::to_string(xhat));
  }
  return integral / length;
}

std::vector<Eigen::Vector2d> FiberAverager::profile(int strip, int gauss_per_interval) const {
  std::vector<double> xs{0.0, 1.0};
  for (const Item& it : items_[strip]) {
    for (const auto& l : it.local) {
      const double x = std::clamp(l.x(), 0.0, 1.0);
      xs.push_back(x < 1e-12 ? 0.0 : (x > 1.0 - 1e-12 ? 1.0 : x));
    }
  }
  std::sort(xs.begin(), xs.end());
  std::vector<double> bp;
  for (double x : xs) {
    if (bp.empty() || x - bp.back() > 1e-13) bp.push_back(x);
  }
  const auto gl = gauss_legendre(std::max(gauss_per_interval, 1));
  std::vector<Eigen::Vector2d> out;
  for (std::size_t k = 0; k < bp.size(); ++k) {
    out.emplace_back(bp[k], average(strip, bp[k]));
    if (k + 1 == bp.size() || gauss_per_interval <= 0) continue;
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double x = bp[k] + gl.nodes[q] * (bp[k + 1] - bp[k]);
      out.emplace_back(x, average(strip, x));
    }
  }
  return out;
}

VTilde v_tilde(const FemFunction& v, const DomainGeometry& g, bool with_profiles) {
  const Mesh& m = *v.mesh;
  if (m.lattice_level < g.n) throw ConfigError("mesh lattice coarser than the geometry level");
  auto cg = std::make_shared<const CellGraph>(cell_graph(g.n));
  const auto index = m.lattice_node_map();
  VTilde out;
  out.vertices.graph = cg;
  out.vertices.values.resize(static_cast<Eigen::Index>(cg->nodes.size()));
  for (std::size_t k = 0; k < cg->nodes.size(); ++k) {
    auto it = index.find(to_lattice(cg->nodes[k], m.lattice_level));
    if (it == index.end()) throw GraphNodeOutsideMesh("cell vertex " + cg->nodes[k].str() + " is not a mesh node");
    out.vertices.values[static_cast<Eigen::Index>(k)] = v.values[it->second];
  }
  if (with_profiles) {
    FiberAverager avg(v, g);
    out.profiles.resize(g.strips.size());
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < static_cast<int>(g.strips.size()); ++s) out.profiles[s] = avg.profile(s);
  }
  return out;
}

LiminfRow liminf_check(const FemFunction& v, const DomainGeometry& g, double p) {
  LiminfRow row;
  const VTilde vt = v_tilde(v, g);
  row.edges_energy = discrete_energy(vt.vertices, p, {PairConvention::EdgesOnly, CellCounting::PerWord});
  const EnergyOptions unordered{PairConvention::Unordered, g.multiset ? CellCounting::PerWord : CellCounting::Distinct};
  row.unordered_energy = discrete_energy(minimize_given_curve_values(vt.vertices, g.n, p, unordered), p, unordered);
  FemModel model(*v.mesh, p);
  row.fiber_energy = model.breakdown(v.values).fiber_weighted;
  row.slack = (row.fiber_energy - row.edges_energy) / std::max(1.0, row.fiber_energy);
  return row;
}

}  // namespace kochfiber
