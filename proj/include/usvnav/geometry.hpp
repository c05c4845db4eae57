// Planar geometry primitives shared by every module.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace usvnav {

using Vec2 = Eigen::Vector2d;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// World-frame pose of the vessel. Heading is kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double psi_) : x(x_), y(y_), psi(wrap_angle(psi_)) {}

  Vec2 position() const { return {x, y}; }

  /// Maps a body-frame point into the world frame.
  Vec2 to_world(const Vec2& body) const;
  /// Maps a world-frame point into the body frame.
  Vec2 to_body(const Vec2& world) const;

  bool operator==(const Pose2D&) const = default;
};

/// Rotates a vector by angle (counter-clockwise).
Vec2 rotate(const Vec2& v, double angle);

/// Distance from point p to segment [a, b].
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

/// Seeded random source with a platform-independent normal distribution.
///
/// std::normal_distribution is implementation-defined, so Gaussian samples
/// are produced with Box-Muller on top of the (fully specified) mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform();
  double normal(double mean = 0.0, double sigma = 1.0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace usvnav
