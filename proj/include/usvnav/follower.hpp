// Pure-pursuit path tracking over a polyline path with a straight extension
// past its endpoint.
#pragma once

#include "usvnav/geometry.hpp"
#include "usvnav/planner.hpp"

#include <vector>

namespace usvnav::follower {

struct FollowerParams {
  double lookahead = 3.0;        // L [m]
  bool v_from_profile = true;    // otherwise cruise at v_fixed
  double v_fixed = 1.0;          // [m/s]
  double extension_len = 10.0;   // [m]

  void validate() const;
};

/// Polyline with cumulative arc length.
struct Polyline {
  std::vector<Vec2> points;
  std::vector<double> s;

  static Polyline from_points(std::vector<Vec2> points);
  /// Appends a straight segment of length `len` along the final direction.
  Polyline extended(double len) const;
};

struct Projection {
  Vec2 point = Vec2::Zero();
  double s = 0.0;
  double distance = 0.0;
  double lateral = 0.0;  // signed, positive left of the path
};

/// Nearest point on the polyline. Throws std::invalid_argument if empty.
Projection project(const Polyline& path, const Vec2& p);

struct LookaheadTarget {
  Vec2 point = Vec2::Zero();
  double s = 0.0;
  bool on_circle = true;  // false: no intersection, nearest path point used
};

/// Intersection of the circle (pose, L) with the extended path having the
/// greatest arc length. Throws std::invalid_argument on an empty path or
/// L <= 0.
LookaheadTarget lookahead_target(const Polyline& extended_path, const Pose2D& pose, double L);

struct Command {
  double v = 0.0;
  double omega = 0.0;
};

/// omega = 2 v sin(alpha) / L with alpha the bearing of the target in the
/// body frame. Throws std::invalid_argument when target coincides with pose.
Command pursuit_command(const Pose2D& pose, const Vec2& target, double v_des, double L);

/// One control tick against a planned path and optional profile.
struct TrackingOutput {
  Command command;
  LookaheadTarget target;
  Projection projection;
};

class PathFollower {
 public:
  PathFollower(const planner::SampledPath& path, planner::VelocityProfile profile,
               FollowerParams params);

  TrackingOutput track(const Pose2D& pose) const;
  const Polyline& path() const { return path_; }
  const Polyline& extended_path() const { return extended_; }
  const planner::VelocityProfile& profile() const { return profile_; }

 private:
  Polyline path_;
  Polyline extended_;
  planner::VelocityProfile profile_;
  FollowerParams params_;
};

}  // namespace usvnav::follower
