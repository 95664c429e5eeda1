#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kochfiber/harness.hpp"

using namespace kochfiber;
namespace fs = std::filesystem;

namespace {

ExperimentPlan small_plan() {
  ExperimentPlan p;
  p.ps = {2.0, 3.0};
  p.n_min = 1;
  p.n_max = 2;
  p.m_ref = 3;
  p.balls = 16;
  return p;
}

std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("kochfiber_test_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("plan validation and config parsing") {
  ExperimentPlan p = small_plan();
  CHECK_NOTHROW(p.validate());
  CHECK(p.eps(1) == eps0_exact() * QSqrt3(Rational(1, 4)));
  p.n_max = kMaxPlanLevel + 1;
  CHECK_THROWS_AS(p.validate(), ResourceLimit);
  p = small_plan();
  p.eps_rule = "fixed";
  p.eps_fixed = eps0_exact();
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = small_plan();
  p.traces = {"nope"};
  CHECK_THROWS_AS(p.validate(), ConfigError);

  const auto c = Config::parse("[plan]\nname = demo\np = 2, 4\nn_min = 1\nn_max = 2\neps = 3/50\n[mesh]\nrefine = 0\n");
  const auto q = ExperimentPlan::from_config(c);
  CHECK(q.ps == std::vector<double>{2.0, 4.0});
  CHECK(q.eps_rule == "fixed");
  CHECK(q.eps(2) == QSqrt3(Rational(3, 50)));
  CHECK(q.hash() == ExperimentPlan::from_config(c).hash());
  CHECK(q.hash() != small_plan().hash());

  try {
    ExperimentPlan::from_config(Config::parse("[plan]\np = two\n"));
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("plan.p") != std::string::npos);
  }
  CHECK_THROWS_AS(ExperimentPlan::from_config(Config::parse("[plan]\nbogus = 1\n")), ConfigError);
  try {
    Config::parse("[plan\np = 2\n", "bad.cfg");
    FAIL("expected a syntax error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.cfg:1") != std::string::npos);
  }
}

TEST_CASE("limsup suite: identity, constants and decimation") {
  ExperimentPlan p = small_plan();
  const Report r = run_limsup_suite(p);
  CHECK(r.ok());
  REQUIRE(r.table.rows.size() == 2 * 2 * trace_names().size());
  for (std::size_t k = 0; k < r.table.rows.size(); ++k) {
    CHECK(r.table.number(k, "identity_error") <= 1e-8);
    if (std::get<std::string>(r.table.rows[k][r.table.column("trace")]) == "constant") {
      const double pp = r.table.number(k, "p");
      const auto g = build_domain(static_cast<int>(r.table.number(k, "n")), p.eps(static_cast<int>(r.table.number(k, "n"))));
      CHECK(r.table.number(k, "fiber_energy") <= 1e-20);
      CHECK(r.table.number(k, "graph_energy") == 0.0);
      CHECK(r.table.number(k, "functional") ==
            doctest::Approx(g.area_domain().to_double() * std::pow(0.75, pp) / pp).epsilon(1e-12));
    }
  }

  // Decimation trace from (0, 1, 0) at p = 2 up to level 4.
  ExperimentPlan d = p;
  d.ps = {2.0};
  d.n_max = 4;
  d.m_ref = 5;
  d.traces = {"decimation_a"};
  const Report rd = run_limsup_suite(d);
  REQUIRE(rd.table.rows.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const double factor = fiber_factor(rd.table.number(k, "eps"), 2.0);
    CHECK(rd.table.number(k, "fiber_energy") / rd.table.number(k, "graph_energy") ==
          doctest::Approx(factor).epsilon(1e-8));
    if (k > 0) {
      MESSAGE("annulus Dirichlet ratio " << rd.table.number(k, "annulus_dirichlet_ratio") << " vs "
                                         << rd.table.number(k, "expected_dirichlet_ratio"));
      CHECK(rd.table.number(k, "annulus_mass_ratio") < 1.0);
    }
  }
}

TEST_CASE("liminf suite") {
  ExperimentPlan p = small_plan();
  p.ps = {2.0, 3.0, 4.0};
  const Report r = run_liminf_suite(p);
  CHECK(r.ok());
  for (std::size_t k = 0; k < r.table.rows.size(); ++k) {
    CHECK(r.table.number(k, "slack") >= -1e-10);
    if (std::get<std::string>(r.table.rows[k][3]) == "solved:one") {
      CHECK(r.table.number(k, "edges_energy") <= 1e-20);
      CHECK(r.table.number(k, "fiber_energy") <= 1e-12);
    }
  }
  ExperimentPlan c = small_plan();
  c.functions = {};
  c.solved = false;
  CHECK(run_liminf_suite(c).table.rows.empty());
}

TEST_CASE("solution convergence: zero load and structure") {
  ExperimentPlan p = small_plan();
  p.ps = {2.0};
  p.load = "zero";
  const Report r = run_solution_convergence(p);
  CHECK(r.ok());
  REQUIRE(r.table.rows.size() == 3);
  for (std::size_t k = 0; k < r.table.rows.size(); ++k) CHECK(r.table.number(k, "l2_distance") == 0.0);
  CHECK(std::get<std::string>(r.table.rows.back()[3]) == "fractal");

  p.load = "poly";
  const Report q = run_solution_convergence(p);
  CHECK(q.ok());
  for (std::size_t k = 0; k + 1 < q.table.rows.size(); ++k) {
    CHECK(q.table.number(k, "l2_distance") > 0.0);
    CHECK(q.table.number(k, "muckenhoupt_sup") > 0.0);
    CHECK(q.table.number(k, "residual") <= 1e-13);
  }
}

TEST_CASE("emit: files, determinism and thread independence") {
  ExperimentPlan p = small_plan();
  p.traces = {"decimation_b", "holder_a"};

  ExperimentPlan empty = p;
  empty.traces = {};
  const fs::path d0 = scratch("empty");
  emit(run_limsup_suite(empty), d0);
  const std::string csv = slurp(d0 / "limsup.csv");
  CHECK(csv.rfind("p,n,eps,trace,fiber_energy,graph_energy,factor,identity_error,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);

  const fs::path d1 = scratch("a"), d2 = scratch("b"), d3 = scratch("c");
  const Report r1 = run_limsup_suite(p);
  emit(r1, d1, {true, true, true});
  emit(run_limsup_suite(p), d2);
  ExperimentPlan serial = p;
  serial.parallel = false;
  emit(run_limsup_suite(serial), d3);
  CHECK(slurp(d1 / "limsup.json") == slurp(d2 / "limsup.json"));
  CHECK(slurp(d1 / "limsup.csv") == slurp(d2 / "limsup.csv"));
  // Only the plan's parallel flag differs, and it is not part of the report.
  CHECK(slurp(d1 / "limsup.json") == slurp(d3 / "limsup.json"));
  CHECK(fs::exists(d1 / "limsup.timing.json"));

  int svgs = 0;
  for (const auto& e : fs::directory_iterator(d1)) svgs += e.path().extension() == ".svg";
  int metrics = 0;
  for (std::size_t c = 4; c < r1.table.columns.size(); ++c) metrics += r1.table.columns[c] != "status";
  CHECK(svgs == metrics);

  const Json manifest = read_json_file(d1 / "manifest.json");
  CHECK(manifest["suites"]["limsup"]["config_hash"] == p.hash());
  emit(run_liminf_suite(empty), d1);
  const Json both = read_json_file(d1 / "manifest.json");
  CHECK(both["suites"].contains("limsup"));
  CHECK(both["suites"].contains("liminf"));

  const Json j = read_json_file(d1 / "limsup.json");
  const Table back = table_from_json(j["table"]);
  CHECK(back.columns == r1.table.columns);
  CHECK(to_csv(back) == to_csv(r1.table));
}

TEST_CASE("serialization round trips") {
  for (int n : {0, 1, 2}) {
    const auto g = build_domain(n, default_amplitude(n));
    const Json j = to_json(g);
    const auto h = geometry_from_json(Json::parse(j.dump()));
    CHECK(h.curve.vertices == g.curve.vertices);
    REQUIRE(h.patches.size() == g.patches.size());
    for (std::size_t k = 0; k < g.patches.size(); ++k) CHECK(h.patches[k].polygon == g.patches[k].polygon);
  }
  Json bad = to_json(build_domain(1, default_amplitude(1)));
  bad["curve"][3][0]["a"] = "7/5";
  try {
    geometry_from_json(bad);
    FAIL("expected a mismatch");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("curve[3]") != std::string::npos);
  }
  CHECK_THROWS_AS(rational_from_json(Json(1.5)), ConfigError);
  const QSqrt3 q(Rational(-3, 7), Rational(5, 11));
  CHECK(qsqrt3_from_json(Json::parse(to_json(q).dump())) == q);

  EnergyBreakdown b;
  b.bulk_mass = 0.1;
  b.fiber_weighted = 1.0 / 3.0;
  b.total = std::nextafter(1.0, 2.0);
  const auto c = breakdown_from_json(Json::parse(to_json(b).dump()));
  CHECK(c.fiber_weighted == b.fiber_weighted);
  CHECK(c.total == b.total);
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("mesh and plot writers") {
  const auto g = build_domain(1, default_amplitude(1));
  const Mesh m = mesh_fibered_domain(g);
  const std::string off = to_off(m);
  CHECK(off.rfind("OFF\n" + std::to_string(m.num_nodes()) + " " + std::to_string(m.num_elements()) + " 0\n", 0) == 0);
  const std::string svg = domain_svg(g);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  const std::string plot = line_plot_svg("t", "n", "y<1", {{"a&b", {1, 2, 3}, {1e-3, 1e-4, 1e-5}}}, true);
  CHECK(plot.find("a&amp;b") != std::string::npos);
  CHECK(plot.find("y&lt;1") != std::string::npos);
}
