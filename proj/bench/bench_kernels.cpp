// Serial vs OpenMP timings of the hot kernels; also confirms both paths agree bit for bit.
// Usage: bench_kernels [level=3] [repetitions=5]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include <omp.h>

#include "kochfiber/harness.hpp"
#include "kochfiber/weights.hpp"

using namespace kochfiber;

namespace {

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count());
  }
  return best;
}

template <class Run>
void row(const char* name, int reps, Run run) {
  decltype(run(false)) serial_out{}, parallel_out{};
  const double ts = best_of(reps, [&] { serial_out = run(false); });
  const double tp = best_of(reps, [&] { parallel_out = run(true); });
  std::printf("%-28s %10.4f %10.4f %8.2fx  %s\n", name, ts, tp, ts / tp, serial_out == parallel_out ? "same" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 3;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
  const double p = 3.0;
  std::printf("level %d, p = %g, %d OpenMP threads, best of %d\n", n, p, omp_get_max_threads(), reps);

  const auto g = std::make_shared<const DomainGeometry>(build_domain(n, default_amplitude(n)));
  const auto mesh = std::make_shared<const Mesh>(mesh_fibered_domain(*g));
  std::printf("mesh: %zu nodes, %zu elements\n\n", mesh->num_nodes(), mesh->num_elements());
  std::printf("%-28s %10s %10s %9s\n", "kernel", "serial s", "openmp s", "speedup");

  const FemModel model(*mesh, p, true);
  const Eigen::VectorXd u = interpolate_nodal(named_field("poly"), *mesh).values;
  const Eigen::VectorXd b = model.load_vector(named_field("poly"));

  row("functional", reps, [&](bool par) { return model.functional(u, b, 1e-4, par); });
  row("first variation", reps, [&](bool par) {
    const Eigen::VectorXd g1 = model.first_variation(u, b, 1e-4, par);
    return std::vector<double>(g1.data(), g1.data() + g1.size());
  });
  row("second variation", reps, [&](bool par) {
    const SparseMatrix H = model.second_variation(u, 1e-4, par);
    return std::vector<double>(H.valuePtr(), H.valuePtr() + H.nonZeros());
  });
  row("load vector", reps, [&](bool par) {
    const Eigen::VectorXd l = model.load_vector(named_field("cubic"), par);
    return std::vector<double>(l.data(), l.data() + l.size());
  });

  auto g0 = std::make_shared<const CellGraph>(cell_graph(0));
  TraceValues base{g0, Eigen::VectorXd::Zero(3)};
  base.values << 0.0, 1.0, 0.0;
  row("decimation to level n+1", reps, [&](bool par) {
    const TraceValues t = decimate_extend(base, n + 1, p, {}, par);
    return std::vector<double>(t.values.data(), t.values.data() + t.values.size());
  });

  const auto balls = default_balls(*g, 64, 1);
  row("Muckenhoupt, 64 balls", std::max(1, reps / 2), [&](bool par) {
    return muckenhoupt_diagnostic(WeightField{g.get(), p}, balls, WeightExtension::FiberOnly, 1, par).supremum;
  });

  const FemFunction uf{mesh.get(), u};
  row("L2 distance on the outer grid", std::max(1, reps / 2), [&](bool par) {
    L2Options o;
    o.parallel = par;
    o.check_doubling = false;
    return l2_norm_omega_star(uf, o).distance;
  });
  return 0;
}
