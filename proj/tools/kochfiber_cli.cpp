// kochfiber command-line front end.
// Exit codes: 0 success, 1 invalid input, 2 numerical failure (diagnostic JSON path on stderr).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <omp.h>

#include "CLI11.hpp"
#include "kochfiber/harness.hpp"
#include "kochfiber/weights.hpp"

using namespace kochfiber;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string out;
  int threads = 0;
  std::uint64_t seed = 1;
  bool svg = false;
};

struct DomainArgs {
  int n = 1;
  std::string eps;  // empty: eps0 2^-(n+1)
  bool multiset = false;
  MeshParams mesh;

  QSqrt3 amplitude() const { return eps.empty() ? default_amplitude(n) : parse_amplitude(eps); }
};

void add_domain_options(CLI::App* app, DomainArgs& d) {
  app->add_option("--n", d.n, "prefractal level")->check(CLI::Range(0, kMaxPlanLevel))->capture_default_str();
  app->add_option("--eps", d.eps, "collar amplitude: decimal, p/q, eps0, eps0/k or eps0*r (default eps0 2^-(n+1))");
  app->add_flag("--multiset", d.multiset, "keep coincident cells with multiplicity");
}

void add_mesh_options(CLI::App* app, MeshParams& m) {
  app->add_option("--h-rel", m.h_rel, "bulk element size relative to the cell length")->capture_default_str();
  app->add_option("--fiber-layers", m.fiber_layers, "element layers across each fiber band")->capture_default_str();
  app->add_option("--grading", m.grading, "grading ratio toward strip ends")->capture_default_str();
  app->add_option("--grading-depth", m.grading_depth, "number of graded steps")->capture_default_str();
  app->add_option("--refine", m.refine, "uniform refinements after meshing")->capture_default_str();
}

fs::path output_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("KOCHFIBER_OUT")) return env;
  return ".";
}

void announce(const fs::path& p) { std::cout << p.string() << "\n"; }

std::shared_ptr<const DomainGeometry> make_geometry(const DomainArgs& d) {
  BuildOptions opts;
  opts.multiset = d.multiset;
  return std::make_shared<const DomainGeometry>(build_domain(d.n, d.amplitude(), opts));
}

int run_geom(const Common& c, const DomainArgs& d) {
  const auto g = make_geometry(d);
  const fs::path dir = output_dir(c);
  write_text(dir / "geometry.json", dump_json(to_json(*g)));
  announce(dir / "geometry.json");
  if (c.svg) {
    write_text(dir / "domain.svg", domain_svg(*g));
    announce(dir / "domain.svg");
  }
  return 0;
}

int run_mesh(const Common& c, const DomainArgs& d) {
  const auto g = make_geometry(d);
  const Mesh m = mesh_fibered_domain(*g, d.mesh);
  const auto v = validate(m, d.mesh.min_angle_deg, g.get());
  const fs::path dir = output_dir(c);
  Json j;
  j["n"] = d.n;
  j["eps"] = to_json(g->eps);
  j["nodes"] = m.num_nodes();
  j["elements"] = m.num_elements();
  j["min_angle_deg"] = v.min_angle_deg;
  j["violations"] = v.violations;
  j["area"] = {{"bulk", m.region_area(Region::Bulk)},
               {"annulus", m.region_area(Region::Annulus)},
               {"inner_fiber", m.region_area(Region::InnerFiber)}};
  write_text(dir / "mesh.json", dump_json(j));
  write_text(dir / "mesh.off", to_off(m));
  announce(dir / "mesh.json");
  announce(dir / "mesh.off");
  if (c.svg) {
    write_text(dir / "mesh.svg", mesh_svg(m));
    announce(dir / "mesh.svg");
  }
  if (!v.ok()) throw MeshQualityFailure("mesh validation failed: " + v.violations.front());
  return 0;
}

struct SolveArgs {
  double p = 2.0;
  std::string f = "one";
  bool fractal = false;
  int extra_levels = 1;
  double tolerance = 1e-13;
  bool nodes = true;
};

int run_solve(const Common& c, const DomainArgs& d, const SolveArgs& s) {
  SolveConfig cfg;
  cfg.tolerance = s.tolerance;
  cfg.parallel = c.threads != 1;
  cfg.validate();
  const ScalarField f = named_field(s.f);
  if (!(s.p > 1.0)) throw ConfigError("field 'p': exponent must exceed 1");
  SolveResult r = s.fractal ? solve_fractal(d.n, s.p, f, s.extra_levels, cfg)
                            : solve_prehomogenized(d.n, d.amplitude(), s.p, f, d.mesh, cfg);
  Json j = to_json(r, s.nodes);
  j["load"] = s.f;
  const fs::path path = output_dir(c) / "solve.json";
  write_text(path, dump_json(j));
  announce(path);
  return 0;
}

ExperimentPlan load_plan(const std::string& file, const Common& c, bool seed_given) {
  ExperimentPlan plan = ExperimentPlan::from_config(Config::load(file));
  if (seed_given) plan.seed = c.seed;
  if (c.threads == 1) plan.parallel = false;
  return plan;
}

int emit_report(const Common& c, const Report& r) {
  EmitOptions eo;
  eo.svg = c.svg;
  for (const auto& f : emit(r, output_dir(c), eo)) announce(f);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  if (!r.ok()) throw NonConvergence(r.suite + " suite has failed rows");
  return 0;
}

struct DiagArgs {
  double p = 2.0;
  int balls = 64;
  std::string extension = "fiber";
};

int run_diag(const Common& c, const DomainArgs& d, const DiagArgs& a) {
  const auto g = make_geometry(d);
  WeightExtension ext;
  if (a.extension == "fiber") {
    ext = WeightExtension::FiberOnly;
  } else if (a.extension == "one") {
    ext = WeightExtension::One;
  } else {
    throw ConfigError("field 'extension': expected fiber or one");
  }
  const auto balls = default_balls(*g, a.balls, c.seed);
  const auto rep = muckenhoupt_diagnostic(WeightField{g.get(), a.p}, balls, ext, c.seed, c.threads != 1);
  Json j;
  j["n"] = d.n;
  j["eps"] = to_json(g->eps);
  j["p"] = a.p;
  j["seed"] = c.seed;
  j["extension"] = a.extension;
  j["supremum"] = rep.supremum;
  j["argmax"] = rep.argmax;
  j["warnings"] = rep.warnings;
  Json rows = Json::array();
  for (const auto& b : rep.balls) {
    rows.push_back({{"center", {b.ball.center.x(), b.ball.center.y()}},
                    {"radius", b.ball.radius},
                    {"mean_weight", b.mean_weight},
                    {"mean_dual", b.mean_dual},
                    {"product", b.product},
                    {"samples", b.samples},
                    {"skipped", b.skipped}});
  }
  j["balls"] = std::move(rows);
  const fs::path path = output_dir(c) / "diag.json";
  write_text(path, dump_json(j));
  announce(path);
  return 0;
}

int numerical_failure(const Common& c, const std::string& command, const std::exception& e) {
  const fs::path path = output_dir(c) / "failure.json";
  try {
    write_text(path, dump_json(Json{{"command", command}, {"error", e.what()}}));
    std::cerr << "error: " << e.what() << "\ndiagnostic: " << path.string() << "\n";
  } catch (const std::exception&) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koch pre-fractal fiber lab: geometry, meshes, p-Laplacian solves and convergence suites"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--out", common.out, "output directory (default: $KOCHFIBER_OUT or .)");
  app.add_option("--threads", common.threads, "OpenMP thread count; 1 runs every kernel serially")
      ->check(CLI::NonNegativeNumber);
  auto* seed_opt = app.add_option("--seed", common.seed, "seed for every random sample")->capture_default_str();

  DomainArgs dom;
  SolveArgs sa;
  DiagArgs da;
  std::string plan_file, suite = "limsup", svg_dir;

  auto add_svg = [&](CLI::App* sub) {
    sub->add_option("--svg", svg_dir, "write SVG output, optionally into this directory")
        ->expected(0, 1)
        ->default_str("");
  };

  auto* geom = app.add_subcommand("geom", "build a fibered domain; writes geometry.json");
  add_domain_options(geom, dom);
  add_svg(geom);

  auto* mesh = app.add_subcommand("mesh", "mesh a fibered domain; writes mesh.json and mesh.off");
  add_domain_options(mesh, dom);
  add_mesh_options(mesh, dom.mesh);
  add_svg(mesh);

  auto* solve = app.add_subcommand("solve", "minimize the p-functional; writes solve.json");
  add_domain_options(solve, dom);
  add_mesh_options(solve, dom.mesh);
  solve->add_option("--p", sa.p, "exponent")->capture_default_str();
  solve->add_option("--f", sa.f, "load: one, zero, poly, x, ...")->capture_default_str();
  solve->add_flag("--fractal", sa.fractal, "solve the fractal proxy at level n instead");
  solve->add_option("--extra-levels", sa.extra_levels, "lattice refinement of the fractal proxy")->capture_default_str();
  solve->add_option("--tol", sa.tolerance, "final backward-error tolerance")->capture_default_str();
  solve->add_flag("!--no-nodes", sa.nodes, "omit node coordinates from the JSON");

  auto* mosco = app.add_subcommand("mosco", "run the limsup or liminf suite of a plan");
  mosco->add_option("--suite", suite, "limsup or liminf")->check(CLI::IsMember({"limsup", "liminf"}))->capture_default_str();
  mosco->add_option("--plan", plan_file, "plan file")->required();
  add_svg(mosco);

  auto* converge = app.add_subcommand("converge", "solution convergence against the fractal reference");
  converge->add_option("--plan", plan_file, "plan file")->required();
  add_svg(converge);

  auto* diag = app.add_subcommand("diag", "Muckenhoupt diagnostic of the fiber weight");
  add_domain_options(diag, dom);
  diag->add_option("--p", da.p, "exponent")->capture_default_str();
  diag->add_option("--balls", da.balls, "number of sample balls")->check(CLI::PositiveNumber)->capture_default_str();
  diag->add_option("--extension", da.extension, "weight off the fiber: fiber or one")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  if (sub->get_option_no_throw("--svg") != nullptr && sub->count("--svg") > 0) {
    common.svg = true;
    if (!svg_dir.empty() && common.out.empty()) common.out = svg_dir;
  }
  if (common.threads > 0) omp_set_num_threads(common.threads);

  try {
    if (command == "geom") return run_geom(common, dom);
    if (command == "mesh") return run_mesh(common, dom);
    if (command == "solve") return run_solve(common, dom, sa);
    if (command == "mosco") {
      const ExperimentPlan plan = load_plan(plan_file, common, seed_opt->count() > 0);
      return emit_report(common, suite == "limsup" ? run_limsup_suite(plan) : run_liminf_suite(plan));
    }
    if (command == "converge") {
      return emit_report(common, run_solution_convergence(load_plan(plan_file, common, seed_opt->count() > 0)));
    }
    if (command == "diag") return run_diag(common, dom, da);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const AmplitudeOutOfRange& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ResourceLimit& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    return numerical_failure(common, command, e);
  }
  return 1;
}
