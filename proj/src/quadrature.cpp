#include "kochfiber/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Eigenvalues>

#include "kochfiber/errors.hpp"

namespace kochfiber {

LineRule gauss_legendre(int k) {
  // Golub-Welsch: eigen-decomposition of the Jacobi matrix.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(k, k);
  for (int i = 1; i < k; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  LineRule r;
  for (int i = 0; i < k; ++i) {
    r.nodes.push_back(0.5 * (es.eigenvalues()(i) + 1.0));
    const double v = es.eigenvectors()(0, i);
    r.weights.push_back(v * v);  // 2 v^2 on [-1,1], halved on [0,1]
  }
  return r;
}

const TriangleRule& triangle_rule(int degree) {
  static std::mutex mu;
  static std::map<int, TriangleRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(degree);
  if (it != cache.end()) return it->second;
  // The collapse adds one degree in the first direction.
  const int k = std::max(1, (degree + 2 + 1) / 2);
  const LineRule g = gauss_legendre(k);
  TriangleRule t;
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      const double s = g.nodes[a], u = g.nodes[b];
      const double l1 = s * (1.0 - u), l2 = s * u;
      t.bary.emplace_back(1.0 - s, l1, l2);
      t.weights.push_back(2.0 * g.weights[a] * g.weights[b] * s);
    }
  }
  return cache.emplace(degree, std::move(t)).first->second;
}

namespace {

// log(b/a)/(b-a) * a for 0 <= a <= b, with the removable limits handled.
double lower_term(double a, double b) {
  if (a <= 0.0) return 0.0;
  const double t = (b - a) / a;
  if (t < 1e-8) return 1.0 - t / 2.0 + t * t / 3.0;
  return std::log1p(t) / t;
}

double upper_term(double a, double b) {
  if (a <= 0.0) throw Error("integral of 1/x diverges: edge on x = 0");
  const double t = (b - a) / a;
  if (t < 1e-8) return (1.0 + t) * (1.0 - t / 2.0 + t * t / 3.0);
  return (1.0 + t) * std::log1p(t) / t;
}

}  // namespace

double triangle_integral_inverse_x(const std::array<Eigen::Vector2d, 3>& tri) {
  std::array<Eigen::Vector2d, 3> v = tri;
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.x() < b.x(); });
  const double x0 = std::max(v[0].x(), 0.0), x1 = v[1].x(), x2 = v[2].x();
  if (x2 <= x0) return 0.0;
  // Vertical chord through the middle vertex.
  const double y_on_long = v[0].y() + (v[2].y() - v[0].y()) * (x1 - v[0].x()) / (v[2].x() - v[0].x());
  const double H = std::abs(v[1].y() - y_on_long);
  // H * [x2 log(x2/x1)/(x2-x1) - x0 log(x1/x0)/(x1-x0)]
  return H * (upper_term(x1, x2) - lower_term(x0, x1));
}

}  // namespace kochfiber
