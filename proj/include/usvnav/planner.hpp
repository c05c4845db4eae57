// Hermite-curve path planning.
//
// A path is a single cubic Hermite segment from the current pose to the goal
// pose. Obstacles are judged against it by projecting each obstacle point
// onto the curve (Newton on the projection condition). A hit needs an
// interior foot point, 0 < t < 1, closer than width + margin. Speed along the
// path comes from a graph search over discrete speed levels under the
// merged stop, obstacle and curvature constraints.
#pragma once

#include "usvnav/geometry.hpp"

#include <optional>
#include <vector>

namespace usvnav::planner {

struct HermiteCurve {
  Vec2 p0 = Vec2::Zero();
  Vec2 p1 = Vec2::Zero();
  Vec2 m0 = Vec2::UnitX();
  Vec2 m1 = Vec2::UnitX();

  /// Throws std::invalid_argument if a tangent vanishes.
  void validate() const;

  // Unchecked evaluation; callers guarantee t in [0, 1].
  Vec2 at(double t) const;
  Vec2 d1(double t) const;
  Vec2 d2(double t) const;
};

/// Throws std::domain_error for t outside [0, 1].
Vec2 hermite_eval(const HermiteCurve& c, double t);
Vec2 hermite_tangent(const HermiteCurve& c, double t);

/// Curve from start to goal with endpoint tangents along each heading,
/// scaled by the chord length. Throws std::invalid_argument on coincident
/// endpoints.
HermiteCurve plan_path(const Pose2D& start, const Pose2D& goal);

/// Catmull-Rom chain through the points (at least 2). Interior tangents are
/// (p[i+1] - p[i-1]) / 2; end tangents are one-sided differences.
std::vector<HermiteCurve> catmull_rom(const std::vector<Vec2>& points);

struct NearestPoint {
  double t = 0.0;
  double distance = 0.0;
  double lateral = 0.0;   // signed; positive when the point lies left of the curve
  bool fallback = false;  // Newton failed on every seed; dense sampling used
};

/// Single-seed Newton iteration on g(t) = (c(t) - q) . c'(t) with clamping to
/// [0, 1]. Returns the converged parameter or nullopt.
std::optional<double> newton_project(const HermiteCurve& c, const Vec2& q, double t0);

/// Global nearest point: Newton from 8 uniform seeds plus both endpoints.
NearestPoint nearest_point_newton(const HermiteCurve& c, const Vec2& q);

struct Hit {
  std::size_t obstacle = 0;  // index into the obstacle list
  double t = 0.0;
  double distance = 0.0;
  double lateral = 0.0;
};

std::vector<Hit> check_collision(const HermiteCurve& c, const std::vector<Vec2>& obstacles,
                                 double width, double margin);

struct WaypointPlan {
  HermiteCurve curve;
  Vec2 offset = Vec2::Zero();
};

/// Tries goal + offset for each offset in order of increasing magnitude and
/// returns the first collision-free curve. offsets.front() must be (0, 0).
std::optional<WaypointPlan> local_waypoint_search(const Pose2D& start, const Pose2D& goal,
                                                  const std::vector<Vec2>& obstacles, double width,
                                                  double margin, const std::vector<Vec2>& offsets);

/// Square grid of offsets with the given spacing and half-extent, (0, 0)
/// first.
std::vector<Vec2> offset_grid(double spacing, double extent);

// ---------------------------------------------------------------------------
// Arc-length sampling

struct SampledPath {
  std::vector<Vec2> points;
  std::vector<double> s;  // arc length stations, s.front() == 0
  std::vector<double> t;  // curve parameter per station

  double length() const { return s.empty() ? 0.0 : s.back(); }
  bool empty() const { return points.empty(); }
};

/// Samples the curve every `spacing` metres of arc length; the final station
/// is always the endpoint.
SampledPath sample_path(const HermiteCurve& c, double spacing = 0.5);

/// Arc length at parameter t on a sampled path (piecewise-linear in t).
double arc_length_at(const SampledPath& path, double t);

// ---------------------------------------------------------------------------
// Velocity planning

struct VelocityConstraint {
  std::vector<double> s;
  std::vector<double> v_max;  // +inf means unconstrained

  void validate() const;
};

struct VelocityProfile {
  std::vector<double> s;
  std::vector<double> v;
  bool infeasible = false;

  /// Planned speed on the segment containing s: v[i + 1] for
  /// s in [s[i], s[i + 1]), the final speed past the end.
  double speed_at(double s) const;
};

VelocityConstraint stop_planner(const std::vector<double>& stations, double v_cruise,
                                double a_dec);

VelocityConstraint obstacle_planner(const HermiteCurve& c, const SampledPath& path,
                                    const std::vector<Vec2>& obstacles, double width,
                                    double margin, double standoff, double a_dec);

VelocityConstraint curve_planner(const SampledPath& path, double omega_max, double v_cruise);

/// Pointwise minimum. All constraints must share the same stations.
VelocityConstraint merge_constraints(const std::vector<VelocityConstraint>& constraints);

/// `count` uniform levels over [0, v_cruise].
std::vector<double> uniform_levels(double v_cruise, std::size_t count = 21);

/// DP over the layered graph (station, speed level). Edges between adjacent
/// stations survive when |v_j^2 - v_i^2| <= 2 a_max ds. Maximizes the sum of
/// speeds; ties go to the higher speed at the earlier station. The first
/// station is pinned to v_start. An infeasible graph yields an all-zero
/// profile flagged infeasible. Throws std::invalid_argument if v_start
/// exceeds the first-station constraint.
VelocityProfile velocity_graph_search(const std::vector<VelocityConstraint>& constraints,
                                      double a_max, const std::vector<double>& v_levels,
                                      double v_start);

}  // namespace usvnav::planner
