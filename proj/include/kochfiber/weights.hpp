#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kochfiber/geometry.hpp"

namespace kochfiber {

// Band half-depth along a unit side: C1 x/(2^p+C1^p) near the ends, eps/2 in the middle.
double unit_profile(double x, double eps, double p);
// Ratio of the end branch to the middle branch at x = eps/C1.
double profile_jump_ratio(double p);

// Weight on a fiber piece at strip abscissa xhat for a level-n cell.
double piece_weight(Piece piece, double xhat, int n, double eps, double p);

struct WeightField {
  const DomainGeometry* geometry = nullptr;
  double p = 2.0;

  int level() const { return geometry->n; }
  double eps() const { return geometry->eps_value(); }
};

struct ConductivityField {
  WeightField weight;
  double delta_power() const;  // delta_n^(1-p)
};

double weight_at(const Eigen::Vector2d& x, const WeightField& field);
// Weight at a located point; 0 off the inner fiber.
double weight_at(const Location& loc, const WeightField& field);
double conductivity_at(const Eigen::Vector2d& x, const ConductivityField& field);

enum class WeightExtension {
  One,        // w := 1 on the rest of the domain
  FiberOnly,  // averages over the ball's intersection with the inner fiber
};

struct Ball {
  Eigen::Vector2d center;
  double radius = 0.0;
};

struct BallResult {
  Ball ball;
  double mean_weight = 0.0;
  double mean_dual = 0.0;  // mean of w^(-1/(p-1))
  double product = 0.0;
  std::size_t samples = 0;
  bool skipped = false;
};

struct MuckenhouptReport {
  double supremum = 0.0;
  int argmax = -1;
  std::vector<BallResult> balls;
  std::vector<std::string> warnings;
};

// Balls centered in the inner fiber with radii between eps*L/8 and L (L the cell length).
std::vector<Ball> default_balls(const DomainGeometry& g, int count, std::uint64_t seed);

MuckenhouptReport muckenhoupt_diagnostic(const WeightField& field, const std::vector<Ball>& balls,
                                         WeightExtension extension, std::uint64_t seed, bool parallel = true);

}  // namespace kochfiber
