#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kochfiber/io.hpp"
#include "kochfiber/operators.hpp"
#include "kochfiber/solver.hpp"

namespace kochfiber {

inline constexpr const char* kVersion = "kochfiber 1.0.0";
inline constexpr int kMaxPlanLevel = 5;

// Named closed-form functions: loads, smooth catalog members and Hölder traces.
ScalarField named_field(const std::string& name);
std::vector<std::string> smooth_catalog_names();
// constant, decimation_a, decimation_b, holder_a, holder_b
std::vector<std::string> trace_names();
// Level-n lattice interpolant of a named trace; decimation traces are extended at exponent p.
LatticeInterpolant named_trace(const std::string& name, int n, double p);

struct ExperimentPlan {
  std::string name = "experiment";
  std::vector<double> ps{2.0};
  int n_min = 1;
  int n_max = 3;
  std::string eps_rule = "halving";  // halving: eps_base 2^-(n+1); fixed: eps_fixed at every level
  QSqrt3 eps_base = eps0_exact();
  QSqrt3 eps_fixed = QSqrt3(Rational(3, 50));
  std::string load = "poly";
  std::vector<std::string> traces = trace_names();
  std::vector<std::string> functions = smooth_catalog_names();
  bool solved = true;  // liminf suite also checks solved pre-homogenized problems
  MeshParams mesh;
  int m_ref = -1;  // default n_max + 1
  int extra_levels = 1;
  int balls = 64;  // Muckenhoupt diagnostic sample size
  std::uint64_t seed = 1;
  bool parallel = true;

  QSqrt3 eps(int n) const;
  int reference_level() const { return m_ref >= 0 ? m_ref : n_max + 1; }
  void validate() const;
  Json to_json() const;
  std::string hash() const;  // FNV-1a of the canonical JSON
  static ExperimentPlan from_config(const Config& c);
};

struct Report {
  std::string suite;
  ExperimentPlan plan;
  Table table;
  std::vector<std::string> warnings;
  std::vector<double> runtimes;  // seconds per row; sidecar only
  bool ok() const;               // every row has status "ok"
  Json to_json() const;          // deterministic: no timings
};

// Recovery sequences of the named traces: fiber identity, annulus decay, functional values.
Report run_limsup_suite(const ExperimentPlan& plan);
// Edge energy of the normal averages against the weighted fiber energy.
Report run_liminf_suite(const ExperimentPlan& plan);
// Pre-homogenized solutions against the fractal reference at the reference level.
Report run_solution_convergence(const ExperimentPlan& plan);

struct EmitOptions {
  bool csv = true;
  bool json = true;
  bool svg = false;
};
// Writes <suite>.csv/.json, a timing sidecar, optional SVG plots and manifest.json; returns the written paths.
std::vector<std::filesystem::path> emit(const Report& report, const std::filesystem::path& dir,
                                        const EmitOptions& options = {});

}  // namespace kochfiber
