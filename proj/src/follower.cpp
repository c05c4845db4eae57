#include "usvnav/follower.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace usvnav::follower {

void FollowerParams::validate() const {
  if (!(lookahead > 0.0)) throw std::invalid_argument("follower.lookahead must be > 0");
  if (!(extension_len >= 0.0)) throw std::invalid_argument("follower.extension_len must be >= 0");
  if (!(v_fixed >= 0.0)) throw std::invalid_argument("follower.v_fixed must be >= 0");
}

Polyline Polyline::from_points(std::vector<Vec2> points) {
  Polyline p;
  p.points = std::move(points);
  p.s.resize(p.points.size(), 0.0);
  for (std::size_t i = 1; i < p.points.size(); ++i)
    p.s[i] = p.s[i - 1] + (p.points[i] - p.points[i - 1]).norm();
  return p;
}

Polyline Polyline::extended(double len) const {
  Polyline out = *this;
  if (len <= 0.0 || points.size() < 2) return out;
  // Direction of the last non-degenerate segment.
  for (std::size_t i = points.size() - 1; i > 0; --i) {
    const Vec2 d = points[i] - points[i - 1];
    if (d.norm() > 1e-12) {
      out.points.push_back(points.back() + len * d.normalized());
      out.s.push_back(s.back() + len);
      break;
    }
  }
  return out;
}

Projection project(const Polyline& path, const Vec2& p) {
  if (path.points.empty()) throw std::invalid_argument("project: empty path");
  Projection best;
  best.point = path.points.front();
  best.distance = (p - best.point).norm();
  for (std::size_t i = 0; i + 1 < path.points.size(); ++i) {
    const Vec2 a = path.points[i];
    const Vec2 d = path.points[i + 1] - a;
    const double len2 = d.squaredNorm();
    const double frac = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    const Vec2 foot = a + frac * d;
    const double dist = (p - foot).norm();
    if (dist < best.distance) {
      const Vec2 rel = p - foot;
      best = {foot, path.s[i] + frac * (path.s[i + 1] - path.s[i]), dist,
              (d.x() * rel.y() - d.y() * rel.x()) >= 0.0 ? dist : -dist};
    }
  }
  return best;
}

LookaheadTarget lookahead_target(const Polyline& path, const Pose2D& pose, double L) {
  if (path.points.empty()) throw std::invalid_argument("lookahead_target: empty path");
  if (!(L > 0.0)) throw std::invalid_argument("lookahead_target: L must be > 0");
  const Vec2 c = pose.position();
  LookaheadTarget best{Vec2::Zero(), -std::numeric_limits<double>::infinity(), true};
  for (std::size_t i = 0; i + 1 < path.points.size(); ++i) {
    const Vec2 a = path.points[i];
    const Vec2 d = path.points[i + 1] - a;
    const double qa = d.squaredNorm();
    if (qa == 0.0) continue;
    const Vec2 f = a - c;
    const double qb = 2.0 * f.dot(d);
    const double qc = f.squaredNorm() - L * L;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    for (double root : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
      if (root < 0.0 || root > 1.0) continue;
      const double s = path.s[i] + root * (path.s[i + 1] - path.s[i]);
      if (s > best.s) best = {a + root * d, s, true};
    }
  }
  if (best.s > -std::numeric_limits<double>::infinity()) return best;
  const Projection pr = project(path, c);
  return {pr.point, pr.s, false};
}

Command pursuit_command(const Pose2D& pose, const Vec2& target, double v_des, double L) {
  const Vec2 rel = pose.to_body(target);
  if (rel.norm() == 0.0) throw std::invalid_argument("pursuit_command: target equals pose");
  const double alpha = std::atan2(rel.y(), rel.x());
  return {v_des, 2.0 * v_des * std::sin(alpha) / L};
}

PathFollower::PathFollower(const planner::SampledPath& path, planner::VelocityProfile profile,
                           FollowerParams params)
    : path_(Polyline::from_points(path.points)),
      extended_(path_.extended(params.extension_len)),
      profile_(std::move(profile)),
      params_(params) {
  params_.validate();
}

TrackingOutput PathFollower::track(const Pose2D& pose) const {
  TrackingOutput out;
  out.projection = project(path_, pose.position());
  out.target = lookahead_target(extended_, pose, params_.lookahead);
  const double v_des =
      params_.v_from_profile ? profile_.speed_at(out.projection.s) : params_.v_fixed;
  if ((out.target.point - pose.position()).norm() > 1e-9)
    out.command = pursuit_command(pose, out.target.point, v_des, params_.lookahead);
  else
    out.command = {v_des, 0.0};
  return out;
}

}  // namespace usvnav::follower
