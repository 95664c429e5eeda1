#include "kochfiber/fractal_energy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace kochfiber {

namespace {

struct PairTerm {
  int i;  // indices below the unknown count are unknowns, the rest index the fixed values
  int j;
  double w;
};

// Pairs of one cell under a convention, as (vertex slot, vertex slot, weight).
std::vector<std::array<int, 3>> cell_pairs(PairConvention c) {
  switch (c) {
    case PairConvention::EdgesOnly:
      return {{0, 1, 1}};
    case PairConvention::Unordered:
      return {{0, 1, 1}, {1, 2, 1}, {2, 0, 1}};
    case PairConvention::Ordered:
      return {{0, 1, 2}, {1, 2, 2}, {2, 0, 2}};
  }
  return {};
}

using LinearSolve = std::function<Eigen::VectorXd(int n, const std::vector<Eigen::Triplet<double>>&, const Eigen::VectorXd&)>;

Eigen::VectorXd dense_solve(int n, const std::vector<Eigen::Triplet<double>>& trip, const Eigen::VectorXd& rhs) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (const auto& t : trip) H(t.row(), t.col()) += t.value();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  return ldlt.solve(rhs);
}

Eigen::VectorXd sparse_solve(int n, const std::vector<Eigen::Triplet<double>>& trip, const Eigen::VectorXd& rhs) {
  Eigen::SparseMatrix<double> H(n, n);
  H.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
  if (ldlt.info() != Eigen::Success) throw NonConvergence("graph energy Hessian factorization failed");
  return ldlt.solve(rhs);
}

// Minimizes sum w |x_i - x_j|^p over the unknowns; p = 2 start, guarded Newton after.
Eigen::VectorXd minimize_pairs(int nu, const std::vector<PairTerm>& terms, const Eigen::VectorXd& fixed, double p,
                               const LinearSolve& solve) {
  auto val = [&](const Eigen::VectorXd& x, int k) { return k < nu ? x[k] : fixed[k - nu]; };
  auto energy = [&](const Eigen::VectorXd& x) {
    double s = 0.0;
    for (const auto& t : terms) s += t.w * std::pow(std::abs(val(x, t.i) - val(x, t.j)), p);
    return s;
  };
  // Quadratic start.
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu);
  for (const auto& t : terms) {
    const bool ui = t.i < nu, uj = t.j < nu;
    if (ui) trip.emplace_back(t.i, t.i, t.w);
    if (uj) trip.emplace_back(t.j, t.j, t.w);
    if (ui && uj) {
      trip.emplace_back(t.i, t.j, -t.w);
      trip.emplace_back(t.j, t.i, -t.w);
    }
    if (ui && !uj) rhs[t.i] += t.w * fixed[t.j - nu];
    if (uj && !ui) rhs[t.j] += t.w * fixed[t.i - nu];
  }
  Eigen::VectorXd x = solve(nu, trip, rhs);
  if (p == 2.0) return x;

  double scale = 1.0;
  for (int k = 0; k < fixed.size(); ++k) scale = std::max(scale, std::abs(fixed[k]));
  double F = energy(x);
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nu);
    trip.clear();
    double diag_max = 0.0;
    for (const auto& t : terms) {
      const double d = val(x, t.i) - val(x, t.j);
      const double ad = std::abs(d);
      const double gp = t.w * p * std::pow(ad, p - 2.0) * d;
      const double hp = t.w * p * (p - 1.0) * std::pow(ad, p - 2.0);
      diag_max = std::max(diag_max, hp);
      if (t.i < nu) {
        g[t.i] += gp;
        trip.emplace_back(t.i, t.i, hp);
      }
      if (t.j < nu) {
        g[t.j] -= gp;
        trip.emplace_back(t.j, t.j, hp);
      }
      if (t.i < nu && t.j < nu) {
        trip.emplace_back(t.i, t.j, -hp);
        trip.emplace_back(t.j, t.i, -hp);
      }
    }
    if (g.lpNorm<Eigen::Infinity>() <= 1e-15 * std::pow(scale, p - 1.0)) return x;
    // Ridge keeps the Hessian definite where differences vanish.
    const double ridge = 1e-12 * std::max(diag_max, 1e-300);
    for (int k = 0; k < nu; ++k) trip.emplace_back(k, k, ridge);
    const Eigen::VectorXd dx = -solve(nu, trip, g);
    double step = 1.0;
    const double slope = g.dot(dx);
    Eigen::VectorXd xn;
    double Fn = F;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * dx;
      Fn = energy(xn);
      if (Fn <= F + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    if (!(Fn <= F)) return x;  // no further decrease in floating point
    const double change = (xn - x).lpNorm<Eigen::Infinity>();
    x = xn;
    F = Fn;
    if (change <= 1e-15 * scale) return x;
  }
  throw NonConvergence("graph energy minimization did not converge");
}

double pow4(int n, double p) { return std::pow(4.0, (p - 1.0) * n); }

}  // namespace

const char* convention_name(PairConvention c) {
  switch (c) {
    case PairConvention::EdgesOnly:
      return "edges";
    case PairConvention::Unordered:
      return "unordered";
    case PairConvention::Ordered:
      return "ordered";
  }
  return "?";
}

PairConvention parse_convention(const std::string& s) {
  if (s == "edges") return PairConvention::EdgesOnly;
  if (s == "unordered") return PairConvention::Unordered;
  if (s == "ordered") return PairConvention::Ordered;
  throw ConfigError("unknown pair convention '" + s + "'");
}

int CellGraph::find(const ExactPoint& p) const {
  auto it = index.find(p);
  return it == index.end() ? -1 : it->second;
}

CellGraph cell_graph(int n, const std::vector<int>& curves) {
  CellGraph g;
  g.n = n;
  std::map<std::array<int, 3>, int> seen;
  for (const auto& a : all_addresses(n)) {
    if (std::find(curves.begin(), curves.end(), a.curve) == curves.end()) continue;
    const auto tri = cell_triangle(a);
    std::array<int, 3> ids{};
    for (int k = 0; k < 3; ++k) {
      auto [it, fresh] = g.index.emplace(tri[k], static_cast<int>(g.nodes.size()));
      if (fresh) {
        g.nodes.push_back(tri[k]);
        g.coords.push_back(tri[k].to_vec());
        g.on_curve.push_back(0);
      }
      ids[k] = it->second;
    }
    g.on_curve[ids[0]] = g.on_curve[ids[1]] = 1;
    std::array<int, 3> key = ids;
    std::sort(key.begin(), key.end());
    g.first_copy.push_back(seen.emplace(key, static_cast<int>(g.cells.size())).second ? 1 : 0);
    g.cells.push_back(ids);
    g.addresses.push_back(a);
  }
  return g;
}

TraceValues sample_trace(std::shared_ptr<const CellGraph> graph,
                         const std::function<double(const Eigen::Vector2d&)>& u) {
  TraceValues t{graph, Eigen::VectorXd(graph->nodes.size())};
  for (std::size_t k = 0; k < graph->nodes.size(); ++k) {
    const double v = u(graph->coords[k]);
    if (!std::isfinite(v)) throw Error("non-finite trace value");
    t.values[k] = v;
  }
  return t;
}

double discrete_energy(const TraceValues& u, double p, const EnergyOptions& opts) {
  const CellGraph& g = *u.graph;
  if (u.values.size() != static_cast<Eigen::Index>(g.nodes.size())) throw Error("trace does not cover the cell graph");
  const auto pairs = cell_pairs(opts.convention);
  double s = 0.0;
  for (std::size_t c = 0; c < g.cells.size(); ++c) {
    if (opts.counting == CellCounting::Distinct && !g.first_copy[c]) continue;
    for (const auto& pr : pairs) {
      s += pr[2] * std::pow(std::abs(u.values[g.cells[c][pr[0]]] - u.values[g.cells[c][pr[1]]]), p);
    }
  }
  return pow4(g.n, p) / p * s;
}

std::vector<EnergyRow> energy_sequence(const std::function<double(const Eigen::Vector2d&)>& u, double p, int n_max,
                                       const EnergyOptions& opts) {
  std::vector<EnergyRow> rows;
  for (int n = 0; n <= n_max; ++n) {
    auto g = std::make_shared<const CellGraph>(cell_graph(n));
    EnergyRow r;
    r.n = n;
    r.energy = discrete_energy(sample_trace(g, u), p, opts);
    r.difference = rows.empty() ? 0.0 : r.energy - rows.back().energy;
    rows.push_back(r);
  }
  return rows;
}

namespace {

// Level-(k+1) nodes fixed by the coarse trace: the curve vertices of level k.
void split_nodes(const CellGraph& coarse, const CellGraph& fine, const Eigen::VectorXd& coarse_values,
                 std::vector<int>& fixed_of, std::vector<double>& fixed_val) {
  fixed_of.assign(fine.nodes.size(), -1);
  for (std::size_t k = 0; k < fine.nodes.size(); ++k) {
    const int c = coarse.find(fine.nodes[k]);
    if (c >= 0 && coarse.on_curve[c]) {
      fixed_of[k] = static_cast<int>(fixed_val.size());
      fixed_val.push_back(coarse_values[c]);
    }
  }
}

void check_convention(const EnergyOptions& opts) {
  if (opts.convention == PairConvention::EdgesOnly) {
    throw ConfigError("decimation needs a convention that couples apex values (unordered or ordered)");
  }
}

int find_root(std::vector<int>& parent, int a) {
  while (parent[a] != a) a = parent[a] = parent[parent[a]];
  return a;
}

}  // namespace

TraceValues decimate_step(const TraceValues& coarse, double p, const EnergyOptions& opts, bool parallel) {
  check_convention(opts);
  const CellGraph& cg = *coarse.graph;
  const int k = cg.n;
  std::vector<int> curves;
  for (const auto& a : cg.addresses) {
    if (curves.empty() || curves.back() != a.curve) curves.push_back(a.curve);
  }
  auto fine = std::make_shared<const CellGraph>(cell_graph(k + 1, curves));
  const CellGraph& fg = *fine;
  std::vector<int> fixed_of;
  std::vector<double> fixed_val;
  split_nodes(cg, fg, coarse.values, fixed_of, fixed_val);

  // Parent segments sharing an unknown are merged into one component.
  const int ncoarse = static_cast<int>(cg.cells.size());
  std::vector<int> parent(ncoarse);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<int> owner(fg.nodes.size(), -1);
  for (std::size_t c = 0; c < fg.cells.size(); ++c) {
    const int pc = static_cast<int>(c / 4);
    for (int v : fg.cells[c]) {
      if (fixed_of[v] >= 0) continue;
      if (owner[v] < 0) {
        owner[v] = pc;
      } else {
        parent[find_root(parent, owner[v])] = find_root(parent, pc);
      }
    }
  }
  std::vector<std::vector<int>> comp_cells;
  std::vector<int> comp_of(ncoarse, -1);
  for (int pc = 0; pc < ncoarse; ++pc) {
    const int r = find_root(parent, pc);
    if (comp_of[r] < 0) {
      comp_of[r] = static_cast<int>(comp_cells.size());
      comp_cells.emplace_back();
    }
    for (int q = 0; q < 4; ++q) comp_cells[comp_of[r]].push_back(4 * pc + q);
  }

  const auto pairs = cell_pairs(opts.convention);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(fg.nodes.size());
  for (std::size_t v = 0; v < fg.nodes.size(); ++v) {
    if (fixed_of[v] >= 0) out[v] = fixed_val[fixed_of[v]];
  }
  const long ncomp = static_cast<long>(comp_cells.size());
  auto solve_component = [&](long ci) {
    std::vector<int> local_unknown;
    std::unordered_map<int, int> uidx, fidx;
    std::vector<double> fixed_local;
    std::vector<PairTerm> terms;
    // First pass numbers the unknowns so fixed indices can follow.
    for (int c : comp_cells[ci]) {
      for (int v : fg.cells[c]) {
        if (fixed_of[v] < 0 && !uidx.count(v)) {
          uidx[v] = static_cast<int>(local_unknown.size());
          local_unknown.push_back(v);
        }
      }
    }
    const int nu = static_cast<int>(local_unknown.size());
    auto index_of = [&](int v) {
      if (fixed_of[v] < 0) return uidx[v];
      auto it = fidx.find(v);
      if (it != fidx.end()) return nu + it->second;
      fidx[v] = static_cast<int>(fixed_local.size());
      fixed_local.push_back(fixed_val[fixed_of[v]]);
      return nu + fidx[v];
    };
    for (int c : comp_cells[ci]) {
      if (opts.counting == CellCounting::Distinct && !fg.first_copy[c]) continue;
      for (const auto& pr : pairs) terms.push_back({index_of(fg.cells[c][pr[0]]), index_of(fg.cells[c][pr[1]]), double(pr[2])});
    }
    if (nu == 0) return;
    Eigen::VectorXd fixed = Eigen::Map<Eigen::VectorXd>(fixed_local.data(), fixed_local.size());
    Eigen::VectorXd x = minimize_pairs(nu, terms, fixed, p, dense_solve);
    for (int q = 0; q < nu; ++q) out[local_unknown[q]] = x[q];
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long ci = 0; ci < ncomp; ++ci) solve_component(ci);
  } else {
    for (long ci = 0; ci < ncomp; ++ci) solve_component(ci);
  }
  return {fine, out};
}

TraceValues decimate_extend(const TraceValues& coarse, int target_level, double p, const EnergyOptions& opts,
                            bool parallel) {
  if (target_level < coarse.graph->n) throw ConfigError("target level below the trace level");
  TraceValues t = coarse;
  while (t.graph->n < target_level) t = decimate_step(t, p, opts, parallel);
  return t;
}

TraceValues minimize_given_curve_values(const TraceValues& coarse, int target_level, double p,
                                        const EnergyOptions& opts) {
  check_convention(opts);
  const CellGraph& cg = *coarse.graph;
  std::vector<int> curves;
  for (const auto& a : cg.addresses) {
    if (curves.empty() || curves.back() != a.curve) curves.push_back(a.curve);
  }
  auto fine = std::make_shared<const CellGraph>(cell_graph(target_level, curves));
  const CellGraph& fg = *fine;
  std::vector<int> fixed_of;
  std::vector<double> fixed_val;
  split_nodes(cg, fg, coarse.values, fixed_of, fixed_val);
  std::vector<int> uidx(fg.nodes.size(), -1);
  int nu = 0;
  for (std::size_t v = 0; v < fg.nodes.size(); ++v) {
    if (fixed_of[v] < 0) uidx[v] = nu++;
  }
  auto index_of = [&](int v) { return fixed_of[v] < 0 ? uidx[v] : nu + fixed_of[v]; };
  std::vector<PairTerm> terms;
  const auto pairs = cell_pairs(opts.convention);
  for (std::size_t c = 0; c < fg.cells.size(); ++c) {
    if (opts.counting == CellCounting::Distinct && !fg.first_copy[c]) continue;
    for (const auto& pr : pairs) terms.push_back({index_of(fg.cells[c][pr[0]]), index_of(fg.cells[c][pr[1]]), double(pr[2])});
  }
  Eigen::VectorXd fixed = Eigen::Map<Eigen::VectorXd>(fixed_val.data(), fixed_val.size());
  Eigen::VectorXd x = nu > 0 ? minimize_pairs(nu, terms, fixed, p, sparse_solve) : Eigen::VectorXd();
  Eigen::VectorXd out(fg.nodes.size());
  for (std::size_t v = 0; v < fg.nodes.size(); ++v) out[v] = fixed_of[v] >= 0 ? fixed_val[fixed_of[v]] : x[uidx[v]];
  return {fine, out};
}

double mu_cell_measure(const CellAddress& address) { return std::pow(4.0, -address.level()); }

double besov_seminorm_estimate(const std::function<double(const Eigen::Vector2d&)>& u, double p, int n,
                               const BesovOptions& opts) {
  if (n > opts.max_level) throw ResourceLimit("Besov estimate level " + std::to_string(n) + " exceeds cap");
  const auto curve = prefractal(n);
  const std::size_t m = curve.segments.size();
  std::vector<Eigen::Vector2d> mid(m);
  std::vector<double> val(m);
  for (std::size_t k = 0; k < m; ++k) {
    mid[k] = 0.5 * (curve.segments[k][0].to_vec() + curve.segments[k][1].to_vec());
    val[k] = u(mid[k]);
  }
  const double expo = 2.0 * std::log(4.0) / std::log(3.0) + p - 1.0;
  const double w = std::pow(4.0, -2.0 * n);
  std::vector<double> rows(m, 0.0);
  const long lm = static_cast<long>(m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < lm; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (static_cast<std::size_t>(i) == j) continue;
      const double d = (mid[i] - mid[j]).norm();
      if (d >= 1.0) continue;
      s += std::pow(std::abs(val[i] - val[j]), p) / std::pow(d, expo);
    }
    rows[i] = w * s;
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

}  // namespace kochfiber
