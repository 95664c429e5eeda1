#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "kochfiber/fractal_energy.hpp"

using namespace kochfiber;

namespace {

std::shared_ptr<const CellGraph> graph(int n, std::vector<int> curves = {1, 2, 3}) {
  return std::make_shared<const CellGraph>(cell_graph(n, curves));
}

TraceValues random_curve_trace(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto g = graph(n);
  TraceValues t{g, Eigen::VectorXd::Zero(g->nodes.size())};
  for (std::size_t k = 0; k < g->nodes.size(); ++k) t.values[k] = g->on_curve[k] ? U(rng) : 0.0;
  return t;
}

const auto kX = [](const Eigen::Vector2d& q) { return q.x(); };

}  // namespace

TEST_CASE("cell graphs") {
  for (int n = 0; n <= 4; ++n) {
    auto g = cell_graph(n);
    CHECK(g.cells.size() == 3u * (1u << (2 * n)));
    int curve_nodes = 0;
    for (auto c : g.on_curve) curve_nodes += c;
    CHECK(curve_nodes == 3 * (1 << (2 * n)));
    for (std::size_t k = 0; k < g.nodes.size(); ++k) CHECK(g.find(g.nodes[k]) == static_cast<int>(k));
  }
  // Cells (1,2) and (1,3) are one triangle.
  auto g1 = cell_graph(1);
  auto sorted = [&](int c) {
    auto t = g1.cells[c];
    std::sort(t.begin(), t.end());
    return t;
  };
  CHECK(sorted(1) == sorted(2));
  CHECK(g1.first_copy[1] == 1);
  CHECK(g1.first_copy[2] == 0);
}

TEST_CASE("discrete energy conventions") {
  auto g = graph(0, {1});
  auto u = sample_trace(g, kX);
  CHECK(discrete_energy(u, 2.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(discrete_energy(u, 2.0, {PairConvention::Ordered}) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(discrete_energy(u, 2.0, {PairConvention::EdgesOnly}) == doctest::Approx(0.5).epsilon(1e-15));
  auto g2 = graph(2);
  auto c = sample_trace(g2, [](const Eigen::Vector2d&) { return 4.0; });
  CHECK(discrete_energy(c, 3.0) == 0.0);
  auto v = sample_trace(g2, [](const Eigen::Vector2d& q) { return std::sin(3 * q.x()) + q.y() * q.y(); });
  for (double p : {2.0, 3.0, 4.0}) {
    TraceValues shifted{g2, v.values.array() + 7.0};
    CHECK(discrete_energy(shifted, p) == doctest::Approx(discrete_energy(v, p)).epsilon(1e-12));
    TraceValues scaled{g2, -2.0 * v.values};
    CHECK(discrete_energy(scaled, p) == doctest::Approx(std::pow(2.0, p) * discrete_energy(v, p)).epsilon(1e-13));
  }
  CHECK(parse_convention("edges") == PairConvention::EdgesOnly);
  CHECK_THROWS_AS(parse_convention("pairs"), ConfigError);
}

TEST_CASE("energy sequence of an affine function grows") {
  auto rows = energy_sequence(kX, 2.0, 5);
  for (const auto& r : rows) CHECK(std::isfinite(r.energy));
  // 4^n renormalization, 4^n cells, differences of order 3^-n.
  for (int n = 2; n <= 5; ++n) CHECK(rows[n].energy / rows[n - 1].energy == doctest::Approx(16.0 / 9.0).epsilon(1e-2));
  auto zero = energy_sequence([](const Eigen::Vector2d&) { return 1.0; }, 3.0, 3);
  for (const auto& r : zero) CHECK(r.energy == 0.0);
}

TEST_CASE("decimation: constants and symmetric bump") {
  auto g = graph(0, {1});
  TraceValues c{g, Eigen::VectorXd::Constant(3, 2.5)};
  for (double p : {2.0, 3.0}) {
    auto e = decimate_extend(c, 3, p);
    CHECK((e.values.array() - 2.5).abs().maxCoeff() <= 1e-14);
  }
  auto u = sample_trace(g, kX);  // A = 0, B = 1
  for (double p : {2.0, 3.0, 4.0}) {
    auto e = decimate_step(u, p);
    const int tip = e.graph->find({QSqrt3(Rational(1, 2)), QSqrt3(Rational(0), Rational(-1, 6))});
    REQUIRE(tip >= 0);
    CHECK(e.values[tip] == doctest::Approx(0.5).epsilon(1e-12));
  }
  CHECK_THROWS_AS(decimate_step(u, 2.0, {PairConvention::EdgesOnly}), ConfigError);
}

TEST_CASE("decimation with p = 2 matches the global linear solve") {
  for (int n : {0, 1, 2}) {
    auto t = random_curve_trace(n, 40 + n);
    for (auto counting : {CellCounting::PerWord, CellCounting::Distinct}) {
      EnergyOptions o{PairConvention::Unordered, counting};
      auto a = decimate_step(t, 2.0, o);
      auto b = minimize_given_curve_values(t, n + 1, 2.0, o);
      CHECK((a.values - b.values).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("decimation step beats random competitors") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> N(0.0, 1.0);
  for (double p : {2.0, 3.0, 4.0}) {
    auto t = random_curve_trace(1, 7);
    auto e = decimate_step(t, p);
    const double best = discrete_energy(e, p);
    const auto& fg = *e.graph;
    const auto& cg = *t.graph;
    for (std::size_t seg = 0; seg < cg.cells.size(); ++seg) {
      std::vector<int> free;
      for (int q = 0; q < 4; ++q) {
        for (int v : fg.cells[4 * seg + q]) {
          const int c = cg.find(fg.nodes[v]);
          if (!(c >= 0 && cg.on_curve[c]) && std::find(free.begin(), free.end(), v) == free.end()) free.push_back(v);
        }
      }
      for (int trial = 0; trial < 100; ++trial) {
        TraceValues w = e;
        const double amp = std::pow(10.0, -1.0 - 4.0 * (trial % 5) / 4.0);
        for (int v : free) w.values[v] += amp * N(rng);
        CHECK(discrete_energy(w, p) > best);
      }
    }
  }
}

TEST_CASE("greedy versus joint extension over two levels") {
  for (double p : {2.0, 3.0}) {
    auto t = random_curve_trace(0, 3);
    const double greedy = discrete_energy(decimate_extend(t, 2, p), p);
    const double joint = discrete_energy(minimize_given_curve_values(t, 2, p), p);
    CHECK(joint <= greedy + 1e-12);
    MESSAGE("p=" << p << " greedy " << greedy << " joint " << joint);
  }
}

TEST_CASE("decimation energy ratios are reported, serial equals parallel") {
  auto g = graph(0);
  TraceValues t = sample_trace(g, [](const Eigen::Vector2d& q) { return q.x() == 1.0 ? 1.0 : 0.0; });
  for (double p : {2.0, 3.0}) {
    TraceValues a = t, b = t;
    double prev = discrete_energy(t, p);
    for (int m = 1; m <= 4; ++m) {
      a = decimate_step(a, p, {}, true);
      b = decimate_step(b, p, {}, false);
      CHECK(a.values == b.values);
      const double e = discrete_energy(a, p);
      MESSAGE("p=" << p << " level " << m << " ratio " << e / prev);
      prev = e;
    }
  }
}

TEST_CASE("cell measure") {
  CHECK(mu_cell_measure({1, {}}) == 1.0);
  CHECK(mu_cell_measure({2, {1, 4}}) == 1.0 / 16.0);
  double s = 0;
  for (const auto& a : all_addresses(3)) s += mu_cell_measure(a);
  CHECK(s == 3.0);
}

TEST_CASE("Besov double sum") {
  CHECK(besov_seminorm_estimate([](const Eigen::Vector2d&) { return 1.0; }, 2.0, 2) == 0.0);
  auto f = [](const Eigen::Vector2d& q) { return q.x() + 0.3 * q.y(); };
  auto f2 = [&](const Eigen::Vector2d& q) { return 2.0 * f(q); };
  for (double p : {2.0, 3.0}) {
    CHECK(besov_seminorm_estimate(f2, p, 2) == doctest::Approx(std::pow(2.0, p) * besov_seminorm_estimate(f, p, 2)).epsilon(1e-13));
  }
  const double b3 = besov_seminorm_estimate(kX, 2.0, 3), b4 = besov_seminorm_estimate(kX, 2.0, 4);
  MESSAGE("u=x Besov estimate n=3 " << b3 << " n=4 " << b4 << " ratio " << b4 / b3);
  CHECK(b3 > 0.0);
  CHECK_THROWS_AS(besov_seminorm_estimate(kX, 2.0, 6), ResourceLimit);
}
