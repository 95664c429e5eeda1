#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

namespace kochfiber {

struct LineRule {
  std::vector<double> nodes;  // on [0,1]
  std::vector<double> weights;
};

// Gauss-Legendre rule with k points mapped to [0,1].
LineRule gauss_legendre(int k);

struct TriangleRule {
  std::vector<Eigen::Vector3d> bary;
  std::vector<double> weights;  // sum to 1 (multiply by the element area)
};

// Collapsed (Duffy) product rule exact for polynomials of the given total degree.
const TriangleRule& triangle_rule(int degree);

// Exact integral of 1/x over a triangle with x >= 0 at every vertex.
// At most one vertex may sit on x = 0.
double triangle_integral_inverse_x(const std::array<Eigen::Vector2d, 3>& tri);

}  // namespace kochfiber
