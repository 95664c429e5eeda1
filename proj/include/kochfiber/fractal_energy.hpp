#pragma once

#include <array>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "kochfiber/geometry.hpp"

namespace kochfiber {

enum class PairConvention { EdgesOnly, Unordered, Ordered };
// PerWord sums over all addresses; Distinct counts each cell triangle once.
enum class CellCounting { PerWord, Distinct };

const char* convention_name(PairConvention c);
PairConvention parse_convention(const std::string& s);

struct CellGraph {
  int n = 0;
  std::vector<ExactPoint> nodes;
  std::vector<Eigen::Vector2d> coords;
  std::vector<std::array<int, 3>> cells;  // (A, B, C) images; A-B lies on K_n
  std::vector<CellAddress> addresses;
  std::vector<std::uint8_t> first_copy;  // 0 for a cell triangle already listed
  std::vector<std::uint8_t> on_curve;    // node belongs to V^n
  std::unordered_map<ExactPoint, int, ExactPointHash> index;

  int find(const ExactPoint& p) const;  // -1 when absent
};

CellGraph cell_graph(int n, const std::vector<int>& curves = {1, 2, 3});

struct TraceValues {
  std::shared_ptr<const CellGraph> graph;
  Eigen::VectorXd values;
};

TraceValues sample_trace(std::shared_ptr<const CellGraph> graph, const std::function<double(const Eigen::Vector2d&)>& u);

struct EnergyOptions {
  PairConvention convention = PairConvention::Unordered;
  CellCounting counting = CellCounting::PerWord;
};

// 4^{(p-1)n}/p times the sum of |differences|^p over the configured pairs.
double discrete_energy(const TraceValues& u, double p, const EnergyOptions& opts = {});

struct EnergyRow {
  int n = 0;
  double energy = 0.0;
  double difference = 0.0;  // E^(n) - E^(n-1), 0 for the first row
};
std::vector<EnergyRow> energy_sequence(const std::function<double(const Eigen::Vector2d&)>& u, double p, int n_max,
                                       const EnergyOptions& opts = {});

// One level of harmonic extension: nodes of level k+1 off V^k minimize E^(k+1).
// Segments sharing unknowns (coincident corner cells) are solved together.
TraceValues decimate_step(const TraceValues& coarse, double p, const EnergyOptions& opts = {}, bool parallel = true);
TraceValues decimate_extend(const TraceValues& coarse, int target_level, double p, const EnergyOptions& opts = {},
                            bool parallel = true);
// Joint minimization of E^(m) over every node off V^n (sparse Newton); reference for decimation.
TraceValues minimize_given_curve_values(const TraceValues& coarse, int target_level, double p,
                                        const EnergyOptions& opts = {});

double mu_cell_measure(const CellAddress& address);

struct BesovOptions {
  int max_level = 5;
};
// Midpoint-rule double sum of |u(P)-u(P')|^p / |P-P'|^(2 d_f + p - 1) over cell pairs with |P-P'| < 1.
double besov_seminorm_estimate(const std::function<double(const Eigen::Vector2d&)>& u, double p, int n,
                               const BesovOptions& opts = {});

}  // namespace kochfiber
