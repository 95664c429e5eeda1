#include "kochfiber/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <optional>

#include "kochfiber/weights.hpp"

namespace kochfiber {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string p_label(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

// Geometry and mesh shared by every cell of one level.
struct Level {
  int n = 0;
  QSqrt3 eps;
  std::shared_ptr<const DomainGeometry> geometry;
  std::shared_ptr<const Mesh> mesh;
  std::string error;
};

std::vector<Level> build_levels(const ExperimentPlan& plan) {
  std::vector<Level> levels;
  for (int n = plan.n_min; n <= plan.n_max; ++n) {
    Level L;
    L.n = n;
    L.eps = plan.eps(n);
    try {
      L.geometry = std::make_shared<const DomainGeometry>(build_domain(n, L.eps));
      L.mesh = std::make_shared<const Mesh>(mesh_fibered_domain(*L.geometry, plan.mesh));
    } catch (const std::exception& e) {
      L.error = e.what();
    }
    levels.push_back(std::move(L));
  }
  return levels;
}

// One independent unit of a suite; fills a row or throws.
struct Cell {
  double p = 2.0;
  std::size_t level = 0;
  std::string item;
};

struct CellOutcome {
  std::vector<Table::Cell> row;
  double runtime = 0.0;
};

template <class F>
std::vector<CellOutcome> run_cells(const std::vector<Cell>& cells, bool parallel, F&& body) {
  std::vector<CellOutcome> out(cells.size());
  const long nc = static_cast<long>(cells.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (long k = 0; k < nc; ++k) {
    const auto t = Clock::now();
    out[k].row = body(cells[k]);
    out[k].runtime = seconds_since(t);
  }
  return out;
}

std::string failure(const std::exception& e) { return std::string("failed: ") + e.what(); }

// Warns when a column grows with n within a (p, label) series.
void check_monotone(const Report& r, const std::string& column, const std::string& label,
                    std::vector<std::string>& warnings) {
  const std::size_t li = r.table.column(label), ni = r.table.column("n");
  std::map<std::string, std::vector<std::pair<long long, double>>> series;
  for (std::size_t k = 0; k < r.table.rows.size(); ++k) {
    const auto& row = r.table.rows[k];
    const std::string key = "p=" + p_label(r.table.number(k, "p")) + " " + std::get<std::string>(row[li]);
    series[key].push_back({std::get<long long>(row[ni]), r.table.number(k, column)});
  }
  for (const auto& [key, s] : series) {
    for (std::size_t k = 1; k < s.size(); ++k) {
      if (!(s[k].second <= s[k - 1].second)) {
        warnings.push_back(column + " not decreasing for " + key + " at n=" + std::to_string(s[k].first));
        break;
      }
    }
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ScalarField named_field(const std::string& name) {
  using V = Eigen::Vector2d;
  if (name == "zero") return [](const V&) { return 0.0; };
  if (name == "one") return [](const V&) { return 1.0; };
  if (name == "poly") return [](const V& q) { return 1.0 + q.x() - 2.0 * q.x() * q.y(); };
  if (name == "x") return [](const V& q) { return q.x(); };
  if (name == "x2_minus_y") return [](const V& q) { return q.x() * q.x() - q.y(); };
  if (name == "xy_plus_y2") return [](const V& q) { return q.x() * q.y() + 0.5 * q.y() * q.y(); };
  if (name == "cubic") return [](const V& q) { return 1.0 + q.x() * q.x() * q.x() - 2.0 * q.y(); };
  if (name == "radial") return [](const V& q) { return (q - V(0.5, 0.3)).squaredNorm(); };
  if (name == "y3_minus_xy2") return [](const V& q) { return q.y() * q.y() * q.y() - q.x() * q.y() * q.y(); };
  if (name == "holder_a") return [](const V& q) { return std::sqrt((q - V(0.3, 0.1)).norm()) - q.x(); };
  if (name == "holder_b") return [](const V& q) { return std::pow(std::abs(q.x() - 0.5), 0.6) + q.y(); };
  throw ConfigError("unknown function '" + name + "'");
}

std::vector<std::string> smooth_catalog_names() {
  return {"x", "x2_minus_y", "xy_plus_y2", "cubic", "radial", "y3_minus_xy2"};
}

std::vector<std::string> trace_names() { return {"constant", "decimation_a", "decimation_b", "holder_a", "holder_b"}; }

LatticeInterpolant named_trace(const std::string& name, int n, double p) {
  if (name == "constant") return interpolate_In([](const Eigen::Vector2d&) { return 0.75; }, n);
  if (name == "decimation_a" || name == "decimation_b") {
    auto g0 = std::make_shared<const CellGraph>(cell_graph(0));
    TraceValues base{g0, Eigen::VectorXd::Zero(3)};
    if (name == "decimation_a") {
      base.values << 0.0, 1.0, 0.0;
    } else {
      base.values << 1.0, -0.5, 0.25;
    }
    return interpolate_In(n == 0 ? base : decimate_extend(base, n, p));
  }
  if (name == "holder_a" || name == "holder_b") return interpolate_In(named_field(name), n);
  throw ConfigError("unknown trace '" + name + "'");
}

QSqrt3 ExperimentPlan::eps(int n) const {
  if (eps_rule == "fixed") return eps_fixed;
  return eps_base * QSqrt3(Rational(1, std::int64_t{1} << (n + 1)));
}

void ExperimentPlan::validate() const {
  if (ps.empty()) throw ConfigError("field 'p': empty list");
  for (double p : ps) {
    if (!(p > 1.0)) throw ConfigError("field 'p': exponent must exceed 1");
  }
  if (n_min < 0 || n_max < n_min) throw ConfigError("field 'n_max': level range is empty");
  if (n_max > kMaxPlanLevel) throw ResourceLimit("field 'n_max': level above the cap " + std::to_string(kMaxPlanLevel));
  if (eps_rule != "halving" && eps_rule != "fixed") throw ConfigError("field 'eps_rule': expected halving or fixed");
  for (int n = n_min; n <= n_max; ++n) {
    try {
      check_amplitude(eps(n));
    } catch (const AmplitudeOutOfRange& e) {
      throw ConfigError(std::string("field 'eps': ") + e.what());
    }
  }
  if (reference_level() < n_max) throw ConfigError("field 'm_ref': below the top level");
  if (reference_level() > kMaxPlanLevel + 1) throw ResourceLimit("field 'm_ref': above the cap");
  if (extra_levels < 0 || extra_levels > 2) throw ConfigError("field 'extra_levels': expected 0, 1 or 2");
  if (balls < 1) throw ConfigError("field 'balls': must be positive");
  named_field(load);
  for (const auto& t : traces) {
    const auto all = trace_names();
    if (std::find(all.begin(), all.end(), t) == all.end()) throw ConfigError("field 'traces': unknown trace '" + t + "'");
  }
  for (const auto& f : functions) named_field(f);
}

Json ExperimentPlan::to_json() const {
  Json j;
  j["name"] = name;
  j["p"] = ps;
  j["n_min"] = n_min;
  j["n_max"] = n_max;
  j["eps_rule"] = eps_rule;
  j["eps_base"] = kochfiber::to_json(eps_base);
  j["eps_fixed"] = kochfiber::to_json(eps_fixed);
  j["delta_rule"] = "(3/4)^n";
  j["load"] = load;
  j["traces"] = traces;
  j["functions"] = functions;
  j["solved"] = solved;
  j["mesh"] = {{"h_rel", mesh.h_rel},
               {"fiber_layers", mesh.fiber_layers},
               {"grading", mesh.grading},
               {"grading_depth", mesh.grading_depth},
               {"refine", mesh.refine},
               {"min_angle_deg", mesh.min_angle_deg}};
  j["m_ref"] = reference_level();
  j["extra_levels"] = extra_levels;
  j["balls"] = balls;
  j["seed"] = seed;
  return j;
}

std::string ExperimentPlan::hash() const {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json().dump())));
  return buf;
}

ExperimentPlan ExperimentPlan::from_config(const Config& c) {
  c.require_known({"plan.name", "plan.p", "plan.n_min", "plan.n_max", "plan.eps_rule", "plan.eps_base", "plan.eps",
                   "plan.load", "plan.traces", "plan.functions", "plan.solved", "plan.m_ref", "plan.extra_levels",
                   "plan.balls", "plan.seed", "plan.parallel", "mesh.h_rel", "mesh.fiber_layers", "mesh.grading",
                   "mesh.grading_depth", "mesh.refine", "mesh.min_angle_deg"});
  ExperimentPlan p;
  p.name = c.get_string("plan.name", p.name);
  p.ps = c.get_doubles("plan.p", p.ps);
  p.n_min = c.get_int("plan.n_min", p.n_min);
  p.n_max = c.get_int("plan.n_max", p.n_max);
  p.eps_rule = c.get_string("plan.eps_rule", p.eps_rule);
  const auto amplitude = [&](const std::string& key, const QSqrt3& fallback) {
    if (!c.has(key)) return fallback;
    try {
      return parse_amplitude(c.get_string(key, ""));
    } catch (const std::exception& e) {
      c.fail(key, e.what());
    }
  };
  p.eps_base = amplitude("plan.eps_base", p.eps_base);
  if (c.has("plan.eps")) {
    p.eps_fixed = amplitude("plan.eps", p.eps_fixed);
    if (!c.has("plan.eps_rule")) p.eps_rule = "fixed";
  }
  p.load = c.get_string("plan.load", p.load);
  p.traces = c.get_strings("plan.traces", p.traces);
  p.functions = c.get_strings("plan.functions", p.functions);
  p.solved = c.get_bool("plan.solved", p.solved);
  p.m_ref = c.get_int("plan.m_ref", p.m_ref);
  p.extra_levels = c.get_int("plan.extra_levels", p.extra_levels);
  p.balls = c.get_int("plan.balls", p.balls);
  const int seed = c.get_int("plan.seed", static_cast<int>(p.seed));
  if (seed < 0) c.fail("plan.seed", "must be non-negative");
  p.seed = static_cast<std::uint64_t>(seed);
  p.parallel = c.get_bool("plan.parallel", p.parallel);
  p.mesh.h_rel = c.get_double("mesh.h_rel", p.mesh.h_rel);
  p.mesh.fiber_layers = c.get_int("mesh.fiber_layers", p.mesh.fiber_layers);
  p.mesh.grading = c.get_double("mesh.grading", p.mesh.grading);
  p.mesh.grading_depth = c.get_int("mesh.grading_depth", p.mesh.grading_depth);
  p.mesh.refine = c.get_int("mesh.refine", p.mesh.refine);
  p.mesh.min_angle_deg = c.get_double("mesh.min_angle_deg", p.mesh.min_angle_deg);
  p.validate();
  return p;
}

bool Report::ok() const {
  const auto it = std::find(table.columns.begin(), table.columns.end(), "status");
  if (it == table.columns.end()) return true;
  const std::size_t s = static_cast<std::size_t>(it - table.columns.begin());
  for (const auto& r : table.rows) {
    if (std::get<std::string>(r[s]) != "ok") return false;
  }
  return true;
}

Json Report::to_json() const {
  Json j;
  j["suite"] = suite;
  j["plan"] = plan.to_json();
  j["config_hash"] = plan.hash();
  j["table"] = kochfiber::to_json(table);
  j["warnings"] = warnings;
  j["metadata"] = {{"version", kVersion},
                   {"conventions",
                    {{"graph_energy", "unordered pairs, cells once per triangle"},
                     {"liminf_energy", "edges of K_n, per word"},
                     {"delta", "(3/4)^n"},
                     {"solver_residual", "normwise backward error"}}},
                   {"seed", plan.seed}};
  return j;
}

Report run_limsup_suite(const ExperimentPlan& plan) {
  plan.validate();
  Report rep;
  rep.suite = "limsup";
  rep.plan = plan;
  rep.table.columns = {"p",          "n",          "eps",         "trace",         "fiber_energy",   "graph_energy",
                       "factor",     "identity_error", "bulk_mass", "annulus_mass", "fiber_mass", "bulk_dirichlet",
                       "annulus_dirichlet", "functional", "limit_proxy", "annulus_mass_ratio",
                       "annulus_dirichlet_ratio", "expected_dirichlet_ratio", "status"};
  const auto levels = build_levels(plan);
  std::vector<Cell> cells;
  for (double p : plan.ps) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      for (const auto& t : plan.traces) cells.push_back({p, l, t});
    }
  }
  const auto nan = std::nan("");
  auto out = run_cells(cells, plan.parallel, [&](const Cell& c) {
    const Level& L = levels[c.level];
    std::vector<Table::Cell> row{c.p, static_cast<long long>(L.n), L.eps.to_double(), c.item};
    try {
      if (!L.error.empty()) throw GeometryError(L.error);
      const auto r = recovery_sequence(named_trace(c.item, L.n, c.p), L.geometry, L.mesh, c.item);
      const auto id = fiber_identity(r, c.p);
      const auto b = FemModel(*L.mesh, c.p, true).breakdown(r.function.values, false);
      for (double v : {id.fiber_energy, id.graph_energy, id.factor, id.relative_error, b.bulk_mass, b.annulus_mass,
                       b.fiber_mass, b.bulk_dirichlet, b.annulus_dirichlet, b.total,
                       b.bulk_mass + b.bulk_dirichlet + id.graph_energy, nan, nan, nan}) {
        row.emplace_back(v);
      }
      row.emplace_back(std::string(id.relative_error <= 1e-8 ? "ok" : "failed: identity error above 1e-8"));
    } catch (const std::exception& e) {
      row.resize(4);
      for (int k = 0; k < 14; ++k) row.emplace_back(nan);
      row.emplace_back(failure(e));
    }
    return row;
  });
  for (auto& o : out) {
    rep.table.add_row(std::move(o.row));
    rep.runtimes.push_back(o.runtime);
  }
  // Decay ratios against the previous level of the same (p, trace).
  const std::size_t am = rep.table.column("annulus_mass"), ad = rep.table.column("annulus_dirichlet");
  const std::size_t rm = rep.table.column("annulus_mass_ratio"), rd = rep.table.column("annulus_dirichlet_ratio");
  const std::size_t re = rep.table.column("expected_dirichlet_ratio");
  const std::size_t per_level = plan.traces.size();
  for (std::size_t k = 0; k < rep.table.rows.size(); ++k) {
    const std::size_t l = (k / per_level) % levels.size();
    if (l == 0) continue;
    auto& row = rep.table.rows[k];
    const auto& prev = rep.table.rows[k - per_level];
    const double p = std::get<double>(row[0]);
    row[rm] = std::get<double>(row[am]) / std::get<double>(prev[am]);
    row[rd] = std::get<double>(row[ad]) / std::get<double>(prev[ad]);
    row[re] = levels[l].eps.to_double() / levels[l - 1].eps.to_double() * std::pow(0.75, p - 2.0);
  }
  check_monotone(rep, "annulus_mass", "trace", rep.warnings);
  check_monotone(rep, "annulus_dirichlet", "trace", rep.warnings);
  return rep;
}

Report run_liminf_suite(const ExperimentPlan& plan) {
  plan.validate();
  Report rep;
  rep.suite = "liminf";
  rep.plan = plan;
  rep.table.columns = {"p",          "n",           "eps",   "function", "edges_energy", "unordered_energy",
                       "fiber_energy", "slack", "status"};
  const auto levels = build_levels(plan);
  std::vector<Cell> cells;
  for (double p : plan.ps) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      for (const auto& f : plan.functions) cells.push_back({p, l, f});
      if (plan.solved) {
        cells.push_back({p, l, "solved:" + plan.load});
        cells.push_back({p, l, "solved:one"});
      }
    }
  }
  const auto nan = std::nan("");
  auto out = run_cells(cells, plan.parallel, [&](const Cell& c) {
    const Level& L = levels[c.level];
    std::vector<Table::Cell> row{c.p, static_cast<long long>(L.n), L.eps.to_double(), c.item};
    try {
      if (!L.error.empty()) throw GeometryError(L.error);
      FemFunction v;
      if (c.item.rfind("solved:", 0) == 0) {
        SolveConfig cfg;
        cfg.parallel = false;
        v = solve_prehomogenized(L.geometry, L.mesh, c.p, named_field(c.item.substr(7)), cfg).solution;
      } else {
        v = interpolate_nodal(named_field(c.item), *L.mesh);
      }
      const auto r = liminf_check(v, *L.geometry, c.p);
      for (double x : {r.edges_energy, r.unordered_energy, r.fiber_energy, r.slack}) row.emplace_back(x);
      row.emplace_back(std::string(r.slack >= -1e-10 ? "ok" : "failed: slack below -1e-10"));
    } catch (const std::exception& e) {
      row.resize(4);
      for (int k = 0; k < 4; ++k) row.emplace_back(nan);
      row.emplace_back(failure(e));
    }
    return row;
  });
  for (auto& o : out) {
    rep.table.add_row(std::move(o.row));
    rep.runtimes.push_back(o.runtime);
  }
  return rep;
}

Report run_solution_convergence(const ExperimentPlan& plan) {
  plan.validate();
  Report rep;
  rep.suite = "convergence";
  rep.plan = plan;
  rep.table.columns = {"p",          "n",           "eps",          "kind",        "functional",    "lp_mass",
                       "bulk_dirichlet", "annulus_dirichlet", "fiber_weighted", "graph_energy", "l2_distance",
                       "l2_doubled", "muckenhoupt_sup", "residual", "iterations", "status"};
  const auto levels = build_levels(plan);
  const ScalarField f = named_field(plan.load);
  const int mref = plan.reference_level();
  const auto nan = std::nan("");

  // References first: one per exponent.
  std::vector<Cell> refs;
  for (double p : plan.ps) refs.push_back({p, 0, "fractal"});
  std::vector<std::optional<SolveResult>> ref_results(refs.size());
  std::vector<std::string> ref_errors(refs.size());
  auto ref_out = run_cells(refs, plan.parallel, [&](const Cell& c) {
    const std::size_t k = static_cast<std::size_t>(&c - refs.data());
    std::vector<Table::Cell> row{c.p, static_cast<long long>(mref), 0.0, std::string("fractal")};
    try {
      SolveConfig cfg;
      cfg.parallel = false;
      auto r = solve_fractal(mref, c.p, f, plan.extra_levels, cfg);
      for (double x : {r.functional, r.breakdown.lp_mass, r.breakdown.bulk_dirichlet, r.breakdown.annulus_dirichlet,
                       r.breakdown.fiber_weighted, r.breakdown.graph_energy, 0.0, 0.0, nan, r.residual}) {
        row.emplace_back(x);
      }
      row.emplace_back(static_cast<long long>(r.trace.size()));
      row.emplace_back(std::string("ok"));
      ref_results[k] = std::move(r);
    } catch (const std::exception& e) {
      ref_errors[k] = e.what();
      row.resize(4);
      for (int q = 0; q < 10; ++q) row.emplace_back(nan);
      row.emplace_back(0LL);
      row.emplace_back(failure(e));
    }
    return row;
  });

  std::vector<Cell> cells;
  for (std::size_t pi = 0; pi < plan.ps.size(); ++pi) {
    for (std::size_t l = 0; l < levels.size(); ++l) cells.push_back({plan.ps[pi], l, std::to_string(pi)});
  }
  auto out = run_cells(cells, plan.parallel, [&](const Cell& c) {
    const Level& L = levels[c.level];
    const std::size_t pi = static_cast<std::size_t>(std::stoul(c.item));
    std::vector<Table::Cell> row{c.p, static_cast<long long>(L.n), L.eps.to_double(), std::string("prehomogenized")};
    try {
      if (!L.error.empty()) throw GeometryError(L.error);
      if (!ref_results[pi]) throw NonConvergence("reference solve failed: " + ref_errors[pi]);
      SolveConfig cfg;
      cfg.parallel = false;
      const auto r = solve_prehomogenized(L.geometry, L.mesh, c.p, f, cfg);
      L2Options lo;
      lo.parallel = false;
      const auto d = l2_distance_omega_star(r.solution, ref_results[pi]->solution, lo);
      const auto balls = default_balls(*L.geometry, plan.balls, plan.seed);
      const auto mk = muckenhoupt_diagnostic(WeightField{L.geometry.get(), c.p}, balls, WeightExtension::FiberOnly,
                                             plan.seed, false);
      for (double x : {r.functional, r.breakdown.lp_mass, r.breakdown.bulk_dirichlet, r.breakdown.annulus_dirichlet,
                       r.breakdown.fiber_weighted, r.breakdown.graph_energy, d.distance, d.doubled, mk.supremum,
                       r.residual}) {
        row.emplace_back(x);
      }
      row.emplace_back(static_cast<long long>(r.trace.size()));
      row.emplace_back(std::string("ok"));
    } catch (const std::exception& e) {
      row.resize(4);
      for (int q = 0; q < 10; ++q) row.emplace_back(nan);
      row.emplace_back(0LL);
      row.emplace_back(failure(e));
    }
    return row;
  });
  // Per exponent: levels in order, then the reference.
  for (std::size_t pi = 0; pi < plan.ps.size(); ++pi) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      auto& o = out[pi * levels.size() + l];
      rep.table.add_row(std::move(o.row));
      rep.runtimes.push_back(o.runtime);
    }
    rep.table.add_row(std::move(ref_out[pi].row));
    rep.runtimes.push_back(ref_out[pi].runtime);
  }
  // Non-monotone distances are reported, not failed.
  for (std::size_t pi = 0; pi < plan.ps.size(); ++pi) {
    const std::size_t base = pi * (levels.size() + 1);
    for (std::size_t l = 1; l < levels.size(); ++l) {
      const double a = rep.table.number(base + l - 1, "l2_distance"), b = rep.table.number(base + l, "l2_distance");
      if (!(b <= a)) {
        rep.warnings.push_back("l2_distance not decreasing for p=" + p_label(plan.ps[pi]) + " at n=" +
                               std::to_string(levels[l].n));
        break;
      }
    }
  }
  return rep;
}

std::vector<std::filesystem::path> emit(const Report& report, const std::filesystem::path& dir,
                                        const EmitOptions& options) {
  std::vector<std::filesystem::path> files;
  const auto put = [&](const std::string& name, const std::string& content) {
    write_text(dir / name, content);
    files.push_back(dir / name);
  };
  if (options.csv) put(report.suite + ".csv", to_csv(report.table));
  if (options.json) put(report.suite + ".json", dump_json(report.to_json()));
  {
    Json timing;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    timing["timestamp"] = stamp;
    timing["runtimes_seconds"] = report.runtimes;
    put(report.suite + ".timing.json", dump_json(timing));
  }
  if (options.svg && !report.table.rows.empty()) {
    const std::size_t pc = report.table.column("p"), nc = report.table.column("n");
    for (std::size_t c = 0; c < report.table.columns.size(); ++c) {
      const std::string& metric = report.table.columns[c];
      if (c == pc || c == nc || metric == "eps") continue;
      if (!std::holds_alternative<double>(report.table.rows.front()[c])) continue;
      std::map<std::string, PlotSeries> series;
      for (std::size_t r = 0; r < report.table.rows.size(); ++r) {
        const auto& row = report.table.rows[r];
        std::string label = "p=" + p_label(report.table.number(r, "p"));
        if (std::holds_alternative<std::string>(row[3])) {
          const std::string& tag = std::get<std::string>(row[3]);
          if (tag == "fractal") continue;
          if (report.suite != "convergence") label += " " + tag;
        }
        auto& s = series[label];
        s.label = label;
        s.x.push_back(report.table.number(r, "n"));
        s.y.push_back(report.table.number(r, metric));
      }
      std::vector<PlotSeries> list;
      for (auto& kv : series) list.push_back(std::move(kv.second));
      bool positive = true;
      for (const auto& s : list) {
        for (double y : s.y) positive = positive && (y > 0.0 || std::isnan(y));
      }
      put(report.suite + "_" + metric + ".svg", line_plot_svg(report.suite + ": " + metric, "n", metric, list, positive));
    }
  }
  // One manifest per directory, one entry per suite.
  Json manifest = Json::object();
  if (std::filesystem::exists(dir / "manifest.json")) {
    try {
      manifest = read_json_file(dir / "manifest.json");
    } catch (const std::exception&) {
      manifest = Json::object();
    }
  }
  manifest["version"] = kVersion;
  Json names = Json::array();
  for (const auto& f : files) names.push_back(f.filename().string());
  manifest["suites"][report.suite] = {{"config_hash", report.plan.hash()}, {"files", std::move(names)}};
  put("manifest.json", dump_json(manifest));
  return files;
}

}  // namespace kochfiber
