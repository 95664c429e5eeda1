#include "kochfiber/weights.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace kochfiber {

namespace {

double c1_value() { return 2.0 - std::sqrt(3.0); }

double end_constant(double p) { return std::pow(2.0, p) + std::pow(c1_value(), p); }

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

BallResult sample_ball(const WeightField& field, const Ball& ball, WeightExtension ext, std::uint64_t seed) {
  BallResult r;
  r.ball = ball;
  const DomainGeometry& g = *field.geometry;
  const double p = field.p;
  const double thickness = 0.5 * g.eps_value() * g.cell_length();
  const int nr = std::clamp(static_cast<int>(std::ceil(8.0 * ball.radius / thickness)), 16, 256);
  const int nt = std::min(4 * nr, 512);
  std::mt19937_64 rng(splitmix(seed));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double sw = 0.0, sd = 0.0;
  std::size_t count = 0;
  for (int a = 0; a < nr; ++a) {
    for (int b = 0; b < nt; ++b) {
      // One point per equal-area polar stratum.
      const double rr = ball.radius * std::sqrt((a + U(rng)) / nr);
      const double th = 2.0 * std::numbers::pi * (b + U(rng)) / nt;
      const Eigen::Vector2d x = ball.center + rr * Eigen::Vector2d(std::cos(th), std::sin(th));
      const Location loc = locate(x, g);
      double w;
      if (loc.region == Region::InnerFiber) {
        w = weight_at(loc, field);
      } else if (loc.region == Region::Outside || ext == WeightExtension::FiberOnly) {
        continue;
      } else {
        w = 1.0;
      }
      sw += w;
      sd += std::pow(w, -1.0 / (p - 1.0));
      ++count;
    }
  }
  r.samples = count;
  if (count == 0 || !std::isfinite(sw) || !std::isfinite(sd)) {
    r.skipped = true;
    return r;
  }
  r.mean_weight = sw / count;
  r.mean_dual = sd / count;
  r.product = r.mean_weight * std::pow(r.mean_dual, p - 1.0);
  return r;
}

}  // namespace

double unit_profile(double x, double eps, double p) {
  if (!(x >= 0.0 && x <= 1.0)) throw PointOutsideFiber("abscissa outside [0,1]");
  const double c1 = c1_value();
  const double a = eps / c1;
  if (x <= a) return c1 * x / end_constant(p);
  if (x >= 1.0 - a) return (c1 - c1 * x) / end_constant(p);
  return eps / 2.0;
}

double profile_jump_ratio(double p) { return 2.0 / end_constant(p); }

double piece_weight(Piece piece, double xhat, int n, double eps, double p) {
  const double scale = std::pow(3.0, n);
  switch (piece) {
    case Piece::Rectangle:
      return scale * 2.0 / eps;
    case Piece::TriangleA:
      return scale * end_constant(p) / (c1_value() * xhat);
    case Piece::TriangleB:
      return scale * end_constant(p) / (c1_value() * (1.0 - xhat));
  }
  return 0.0;
}

double ConductivityField::delta_power() const {
  return std::pow(0.75, weight.level() * (1.0 - weight.p));
}

double weight_at(const Location& loc, const WeightField& field) {
  if (loc.region != Region::InnerFiber) return 0.0;
  const double x = std::clamp(loc.local.x(), 0.0, 1.0);
  return piece_weight(loc.piece, x, field.level(), field.eps(), field.p);
}

double weight_at(const Eigen::Vector2d& x, const WeightField& field) {
  const Location loc = locate(x, *field.geometry);
  if (loc.region != Region::InnerFiber) throw PointOutsideFiber("point is not in the inner fiber");
  return weight_at(loc, field);
}

double conductivity_at(const Eigen::Vector2d& x, const ConductivityField& field) {
  const Location loc = locate(x, *field.weight.geometry);
  if (loc.region == Region::Outside) throw PointOutsideDomain("point is outside the fibered domain");
  if (loc.region != Region::InnerFiber) return 1.0;
  return field.delta_power() * weight_at(loc, field.weight);
}

std::vector<Ball> default_balls(const DomainGeometry& g, int count, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix(seed));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double L = g.cell_length();
  const double eps = g.eps_value();
  const double a = g.ratio();
  std::vector<Ball> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const int s = static_cast<int>(U(rng) * g.strips.size()) % static_cast<int>(g.strips.size());
    // Half the centers sit near a strip end, where the weight is singular.
    double x = (k % 2 == 0) ? 2.0 * a * U(rng) : U(rng);
    if (U(rng) < 0.5) x = 1.0 - x;
    const double depth = inner_depth(x, eps) * U(rng);
    const Eigen::Vector2d c = g.strips[s].to_physical({x, depth});
    const double radius = L * eps * std::exp2(-3.0 + 3.0 * U(rng)) * std::pow(8.0 / eps, U(rng));
    out.push_back({c, std::min(radius, L)});
  }
  return out;
}

MuckenhouptReport muckenhoupt_diagnostic(const WeightField& field, const std::vector<Ball>& balls,
                                         WeightExtension extension, std::uint64_t seed, bool parallel) {
  MuckenhouptReport rep;
  rep.balls.resize(balls.size());
  const long nb = static_cast<long>(balls.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < nb; ++k) rep.balls[k] = sample_ball(field, balls[k], extension, seed + k);
  } else {
    for (long k = 0; k < nb; ++k) rep.balls[k] = sample_ball(field, balls[k], extension, seed + k);
  }
  for (long k = 0; k < nb; ++k) {
    const auto& b = rep.balls[k];
    if (b.skipped) {
      rep.warnings.push_back("ball " + std::to_string(k) + " skipped: no finite samples");
      continue;
    }
    if (b.product > rep.supremum) {
      rep.supremum = b.product;
      rep.argmax = static_cast<int>(k);
    }
  }
  return rep;
}

}  // namespace kochfiber
