#include "loops.hpp"
#include "usvnav/follower.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace usvnav;
using namespace usvnav::follower;

namespace {

Polyline straight(double length) {
  std::vector<Vec2> pts;
  for (double x = 0.0; x <= length + 1e-9; x += 0.5) pts.emplace_back(x, 0.0);
  return Polyline::from_points(pts);
}

}  // namespace

TEST_CASE("lookahead target") {
  const Polyline path = straight(20.0).extended(10.0);
  SUBCASE("on the path") {
    const LookaheadTarget t = lookahead_target(path, Pose2D{5, 0, 0}, 2.0);
    CHECK(t.on_circle);
    CHECK((t.point - Vec2(7, 0)).norm() < 1e-12);
    CHECK(t.s == doctest::Approx(7.0));
  }
  SUBCASE("past the end lands on the extension") {
    const LookaheadTarget t = lookahead_target(path, Pose2D{21, 0.5, 0}, 2.0);
    CHECK(t.on_circle);
    CHECK(t.point.x() > 21.0);
    CHECK(t.point.x() < 30.0);
    CHECK(std::abs(t.point.y()) < 1e-12);
  }
  SUBCASE("no intersection falls back to the nearest point") {
    const LookaheadTarget t = lookahead_target(path, Pose2D{5, 10, 0}, 2.0);
    CHECK_FALSE(t.on_circle);
    CHECK((t.point - Vec2(5, 0)).norm() < 1e-9);
  }
  SUBCASE("targets lie on the circle") {
    Rng rng(41);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Vec2> pts{Vec2::Zero()};
      for (int k = 0; k < 10; ++k) pts.push_back(pts.back() + Vec2(1.0 + rng.uniform() * 3, rng.uniform() * 4 - 2));
      const Polyline p = Polyline::from_points(pts).extended(10.0);
      const Pose2D pose(rng.uniform() * 30, rng.uniform() * 10 - 5, rng.uniform() * 6 - 3);
      const double L = 1.0 + rng.uniform() * 4;
      const LookaheadTarget t = lookahead_target(p, pose, L);
      if (t.on_circle) CHECK(std::abs((t.point - pose.position()).norm() - L) < 1e-9);
      // Deterministic.
      const LookaheadTarget again = lookahead_target(p, pose, L);
      CHECK(again.point == t.point);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(lookahead_target(Polyline{}, Pose2D{}, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(lookahead_target(path, Pose2D{}, 0.0), std::invalid_argument);
  }
}

TEST_CASE("pursuit command") {
  CHECK(pursuit_command(Pose2D{}, Vec2(3, 0), 1.0, 3.0).omega == 0.0);
  const Command c = pursuit_command(Pose2D{}, Vec2(0, 2), 1.0, 2.0);
  CHECK(c.omega == doctest::Approx(1.0));
  CHECK(c.v == 1.0);
  CHECK(pursuit_command(Pose2D{}, Vec2(1, 1), 1.0, 2.0).omega > 0.0);
  CHECK(pursuit_command(Pose2D{}, Vec2(1, -1), 1.0, 2.0).omega < 0.0);
  CHECK(pursuit_command(Pose2D{0, 0, std::numbers::pi / 2}, Vec2(-1, 1), 1.0, 2.0).omega > 0.0);
  CHECK_THROWS_AS(pursuit_command(Pose2D{1, 1, 0}, Vec2(1, 1), 1.0, 2.0), std::invalid_argument);
}

TEST_CASE("commanded speed never exceeds the profile") {
  std::vector<Vec2> pts;
  for (double x = 0.0; x <= 20.0 + 1e-9; x += 0.5) pts.emplace_back(x, 0.0);
  const auto path = loops::polyline_path(pts);
  planner::VelocityProfile prof{path.s, {}, false};
  for (double s : path.s) prof.v.push_back(1.5 * std::min(1.0, (20.0 - s) / 8.0));
  FollowerParams fp;
  const PathFollower pf(path, prof, fp);
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    const Pose2D pose(rng.uniform() * 24 - 2, rng.uniform() * 4 - 2, rng.uniform() - 0.5);
    const TrackingOutput out = pf.track(pose);
    CHECK(out.command.v <= prof.speed_at(out.projection.s) + 1e-12);
  }
}

TEST_CASE("closed loop converges onto a straight path") {
  const loops::PursuitTrace tr = loops::straight_pursuit(50.0, 2.0, 60.0);
  double settled = -1.0;
  for (std::size_t i = 0; i < tr.t.size(); ++i)
    if (tr.cross_track[i] >= 0.1) settled = tr.t[i];
  CHECK(settled < 60.0);
  CHECK(settled > 0.0);
  CHECK(*std::max_element(tr.cross_track.begin(), tr.cross_track.end()) < 2.5);
  MESSAGE("cross-track below 0.1 m from t = " << settled << " s");
}
