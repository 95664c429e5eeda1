#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

namespace kochfiber {

// Constrained Delaunay triangulation of a simple counterclockwise polygon with
// interior Steiner points. Returned indices refer to [boundary..., steiner...].
// Boundary edges are never flipped. Steiner points outside the polygon are dropped.
std::vector<std::array<int, 3>> triangulate_polygon(const std::vector<Eigen::Vector2d>& boundary,
                                                    const std::vector<Eigen::Vector2d>& steiner);

double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c);
double incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                const Eigen::Vector2d& d);
double min_angle_deg(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c);

}  // namespace kochfiber
