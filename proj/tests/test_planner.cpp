#include "oracles.hpp"
#include "usvnav/planner.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace usvnav;
using namespace usvnav::planner;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

HermiteCurve random_curve(Rng& rng) {
  const auto pt = [&](double s) { return Vec2(s * (2 * rng.uniform() - 1), s * (2 * rng.uniform() - 1)); };
  HermiteCurve c;
  c.p0 = pt(10);
  c.p1 = pt(10);
  c.m0 = pt(15);
  c.m1 = pt(15);
  return c;
}

std::vector<std::size_t> hit_ids(const std::vector<Hit>& hits) {
  std::vector<std::size_t> ids;
  for (const auto& h : hits) ids.push_back(h.obstacle);
  return ids;
}

bool satisfies(const VelocityProfile& prof, const VelocityConstraint& merged, double a_max) {
  for (std::size_t i = 0; i < prof.v.size(); ++i) {
    if (i > 0 && prof.v[i] > merged.v_max[i] + 1e-9) return false;
    if (i > 0 && std::abs(prof.v[i] * prof.v[i] - prof.v[i - 1] * prof.v[i - 1]) >
                     2 * a_max * (prof.s[i] - prof.s[i - 1]) + 1e-9)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("hermite evaluation") {
  HermiteCurve line{Vec2(0, 0), Vec2(1, 0), Vec2(1, 0), Vec2(1, 0)};
  CHECK((hermite_eval(line, 0.5) - Vec2(0.5, 0)).norm() < 1e-15);
  CHECK_THROWS_AS(hermite_eval(line, 1.5), std::domain_error);
  CHECK_THROWS_AS(hermite_tangent(line, -0.1), std::domain_error);

  Rng rng(31);
  for (int k = 0; k < 50; ++k) {
    const HermiteCurve c = random_curve(rng);
    CHECK(hermite_eval(c, 0.0) == c.p0);
    CHECK(hermite_eval(c, 1.0) == c.p1);
    CHECK(hermite_tangent(c, 0.0) == c.m0);
    CHECK(hermite_tangent(c, 1.0) == c.m1);
    for (int i = 0; i < 100; ++i) {
      const double t = 0.001 + 0.998 * rng.uniform(), h = 1e-6;
      const Vec2 fd = (hermite_eval(c, t + h) - hermite_eval(c, t - h)) / (2 * h);
      CHECK((hermite_tangent(c, t) - fd).norm() < 1e-6 * std::max(1.0, fd.norm()));
      CHECK((hermite_eval(c, t) - oracle::hermite(c, t)).norm() < 1e-12);
    }
  }
}

TEST_CASE("plan_path") {
  SUBCASE("collinear") {
    const HermiteCurve c = plan_path({0, 0, 0}, {10, 0, 0});
    for (int i = 0; i <= 100; ++i) CHECK(std::abs(hermite_eval(c, i / 100.0).y()) < 1e-9);
  }
  SUBCASE("end tangent follows the goal heading") {
    const HermiteCurve c = plan_path({0, 0, 0}, {5, 5, std::numbers::pi / 2});
    const Vec2 t = hermite_tangent(c, 1.0).normalized();
    CHECK((t - Vec2(0, 1)).norm() < 1e-6);
    CHECK(hermite_tangent(c, 1.0).norm() == doctest::Approx(std::sqrt(50.0)));
  }
  SUBCASE("coincident endpoints") { CHECK_THROWS_AS(plan_path({1, 1, 0}, {1, 1, 2}), std::invalid_argument); }
  SUBCASE("catmull-rom chain is C1") {
    const auto segs = catmull_rom({Vec2(0, 0), Vec2(5, 2), Vec2(9, -1), Vec2(14, 3)});
    REQUIRE(segs.size() == 3);
    for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
      CHECK(hermite_eval(segs[i], 1.0) == hermite_eval(segs[i + 1], 0.0));
      CHECK((hermite_tangent(segs[i], 1.0) - hermite_tangent(segs[i + 1], 0.0)).norm() < 1e-12);
    }
    CHECK((segs[0].m1 - Vec2(4.5, -0.5)).norm() < 1e-12);
  }
}

TEST_CASE("nearest point") {
  const HermiteCurve line{Vec2(0, 0), Vec2(1, 0), Vec2(1, 0), Vec2(1, 0)};
  SUBCASE("perpendicular foot") {
    const NearestPoint np = nearest_point_newton(line, Vec2(0.5, 1));
    CHECK(np.t == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(np.distance == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(np.lateral > 0.0);
  }
  SUBCASE("point on the curve") {
    Rng rng(32);
    const HermiteCurve c = random_curve(rng);
    const NearestPoint np = nearest_point_newton(c, hermite_eval(c, 0.37));
    CHECK(np.distance < 1e-9);
  }
  SUBCASE("never worse than the dense oracle") {
    Rng rng(33);
    for (int i = 0; i < 300; ++i) {
      const HermiteCurve c = random_curve(rng);
      const Vec2 q(30 * rng.uniform() - 15, 30 * rng.uniform() - 15);
      const NearestPoint np = nearest_point_newton(c, q);
      const oracle::Nearest ref = oracle::dense_nearest(c, q, 20000);
      CHECK(np.distance <= ref.distance + 1e-6);
      CHECK(std::abs((oracle::hermite(c, np.t) - q).norm() - np.distance) < 1e-9);
    }
  }
}

TEST_CASE("collision check") {
  const HermiteCurve line = plan_path({0, 0, 0}, {10, 0, 0});
  SUBCASE("direct threshold") {
    CHECK(check_collision(line, {Vec2(5, 1.0)}, 1.0, 0.5).size() == 1);
    CHECK(check_collision(line, {Vec2(5, 1.6)}, 1.0, 0.5).empty());
    // Beyond the ends the nearest point is an endpoint, which never counts.
    CHECK(check_collision(line, {Vec2(-0.5, 0), Vec2(10.5, 0)}, 1.0, 0.5).empty());
  }
  SUBCASE("monotone in margin") {
    Rng rng(34);
    for (int trial = 0; trial < 100; ++trial) {
      const HermiteCurve c = random_curve(rng);
      std::vector<Vec2> obs;
      for (int k = 0; k < 20; ++k) obs.emplace_back(24 * rng.uniform() - 12, 24 * rng.uniform() - 12);
      const double m1 = rng.uniform(), m2 = m1 + rng.uniform();
      const auto a = hit_ids(check_collision(c, obs, 0.6, m1));
      const auto b = hit_ids(check_collision(c, obs, 0.6, m2));
      CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
  }
  SUBCASE("agrees with dense sampling") {
    Rng rng(35);
    for (int trial = 0; trial < 50; ++trial) {
      const HermiteCurve c = random_curve(rng);
      const double width = 0.5 + rng.uniform(), margin = rng.uniform();
      std::vector<Vec2> obs;
      for (int k = 0; k < 10; ++k) obs.emplace_back(24 * rng.uniform() - 12, 24 * rng.uniform() - 12);
      std::vector<std::size_t> expected;
      for (std::size_t k = 0; k < obs.size(); ++k) {
        const oracle::Nearest ref = oracle::dense_nearest(c, obs[k], 20000);
        if (ref.t > 0.0 && ref.t < 1.0 && ref.distance < width + margin) expected.push_back(k);
      }
      CHECK(hit_ids(check_collision(c, obs, width, margin)) == expected);
    }
  }
}

TEST_CASE("local waypoint search") {
  const Pose2D start{0, 0, 0}, goal{10, 0, 0};
  const auto offsets = offset_grid(2.0, 2.0);
  REQUIRE(offsets.front() == Vec2::Zero());
  CHECK(offsets.size() == 9);

  SUBCASE("clear goal keeps zero offset") {
    const auto plan = local_waypoint_search(start, goal, {Vec2(5, 5)}, 0.5, 0.5, offsets);
    REQUIRE(plan);
    CHECK(plan->offset == Vec2::Zero());
  }
  SUBCASE("blocked goal shifts to a free cell") {
    // Blocks the direct path and the (-2, 0) and (0, -2) candidates.
    const std::vector<Vec2> obs{Vec2(10, 0), Vec2(9, 0), Vec2(7.5, 0), Vec2(9, -1.8)};
    const auto plan = local_waypoint_search(start, goal, obs, 0.5, 0.5, offsets);
    REQUIRE(plan);
    CHECK(plan->offset == Vec2(0, 2));
    CHECK(check_collision(plan->curve, obs, 0.5, 0.5).empty());
  }
  SUBCASE("walled in") {
    std::vector<Vec2> wall;
    for (int k = -100; k <= 100; ++k) wall.emplace_back(5.0, 0.2 * k);
    CHECK_FALSE(local_waypoint_search(start, goal, wall, 0.5, 0.5, offsets));
  }
  SUBCASE("returned plans are collision free") {
    Rng rng(36);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Vec2> obs;
      for (int k = 0; k < 8; ++k) obs.emplace_back(3 + 9 * rng.uniform(), 6 * rng.uniform() - 3);
      if (const auto plan = local_waypoint_search(start, goal, obs, 0.5, 0.5, offset_grid(2.0, 6.0)))
        CHECK(check_collision(plan->curve, obs, 0.5, 0.5).empty());
    }
  }
}

TEST_CASE("speed constraints") {
  std::vector<double> st;
  for (int i = 0; i <= 16; ++i) st.push_back(0.5 * i);
  SUBCASE("stop planner") {
    const VelocityConstraint c = stop_planner(st, 10.0, 1.0);
    CHECK(c.v_max.front() == doctest::Approx(4.0));
    CHECK(c.v_max.back() == 0.0);
    const VelocityConstraint capped = stop_planner(st, 2.0, 1.0);
    for (double v : capped.v_max) CHECK(v <= 2.0);
    CHECK(capped.v_max.front() == 2.0);
  }
  SUBCASE("obstacle planner") {
    const HermiteCurve c = plan_path({0, 0, 0}, {20, 0, 0});
    const SampledPath path = sample_path(c, 0.5);
    CHECK(path.length() == doctest::Approx(20.0).epsilon(1e-6));
    const VelocityConstraint none = obstacle_planner(c, path, {}, 1.0, 0.5, 2.0, 1.0);
    for (double v : none.v_max) CHECK(std::isinf(v));
    const VelocityConstraint hit = obstacle_planner(c, path, {Vec2(10, 0.5)}, 1.0, 0.5, 2.0, 1.0);
    CHECK(hit.v_max.front() == doctest::Approx(4.0).epsilon(1e-6));
    for (std::size_t i = 0; i < path.s.size(); ++i)
      if (path.s[i] >= 8.0 - 1e-9) CHECK(hit.v_max[i] == doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("curve planner") {
    const HermiteCurve line = plan_path({0, 0, 0}, {10, 0, 0});
    for (double v : curve_planner(sample_path(line, 0.5), 0.4, 1.5).v_max) CHECK(v == 1.5);
    SampledPath arc;
    for (int i = 0; i <= 40; ++i) {
      const double s = 0.25 * i;
      arc.s.push_back(s);
      arc.t.push_back(s / 10.0);
      arc.points.emplace_back(5 * std::sin(s / 5), 5 - 5 * std::cos(s / 5));
    }
    for (double v : curve_planner(arc, 0.4, 10.0).v_max) CHECK(v == doctest::Approx(2.0).epsilon(1e-3));
  }
  SUBCASE("merge is commutative and idempotent") {
    Rng rng(37);
    VelocityConstraint a{st, {}}, b{st, {}};
    for (std::size_t i = 0; i < st.size(); ++i) {
      a.v_max.push_back(rng.uniform() < 0.2 ? kInf : 3 * rng.uniform());
      b.v_max.push_back(rng.uniform() < 0.2 ? kInf : 3 * rng.uniform());
    }
    const VelocityConstraint ab = merge_constraints({a, b}), ba = merge_constraints({b, a});
    CHECK(ab.v_max == ba.v_max);
    CHECK(merge_constraints({ab, ab}).v_max == ab.v_max);
    CHECK(merge_constraints({a, a}).v_max == a.v_max);
    for (std::size_t i = 0; i < st.size(); ++i) CHECK(ab.v_max[i] == std::min(a.v_max[i], b.v_max[i]));
  }
}

TEST_CASE("velocity graph search") {
  std::vector<double> st;
  for (int i = 0; i <= 20; ++i) st.push_back(0.5 * i);
  const auto levels = uniform_levels(1.5, 21);
  CHECK(levels.size() == 21);
  CHECK(levels.front() == 0.0);
  CHECK(levels.back() == 1.5);

  SUBCASE("unconstrained runs at cruise") {
    const VelocityConstraint free{st, std::vector<double>(st.size(), kInf)};
    const VelocityProfile p = velocity_graph_search({free}, 100.0, levels, 1.5);
    for (double v : p.v) CHECK(v == 1.5);
  }
  SUBCASE("terminal stop") {
    const VelocityConstraint stop = stop_planner(st, 1.5, 0.3);
    const VelocityProfile p = velocity_graph_search({stop}, 0.3, levels, 0.0);
    CHECK_FALSE(p.infeasible);
    CHECK(p.v.back() == 0.0);
    CHECK(satisfies(p, stop, 0.3));
  }
  SUBCASE("v_start above the first constraint") {
    const VelocityConstraint c{st, std::vector<double>(st.size(), 1.0)};
    CHECK_THROWS_AS(velocity_graph_search({c}, 0.3, levels, 1.2), std::invalid_argument);
  }
  SUBCASE("infeasible graph") {
    std::vector<double> vmax(st.size(), kInf);
    vmax[1] = 0.0;
    const VelocityProfile p = velocity_graph_search({{st, vmax}}, 0.1, levels, 1.5);
    CHECK(p.infeasible);
    for (double v : p.v) CHECK(v == 0.0);
  }
  SUBCASE("matches enumeration and satisfies its constraints") {
    Rng rng(38);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 5);
      std::vector<double> s{0.0};
      for (std::size_t i = 1; i < n; ++i) s.push_back(s.back() + 0.2 + rng.uniform());
      std::vector<double> vmax;
      for (std::size_t i = 0; i < n; ++i) vmax.push_back(rng.uniform() < 0.3 ? kInf : 2.0 * rng.uniform());
      const auto lv = uniform_levels(1.0 + rng.uniform(), 2 + static_cast<std::size_t>(rng.uniform() * 4));
      const double a_max = 0.1 + rng.uniform();
      const double v_start = std::min(vmax[0], lv[static_cast<std::size_t>(rng.uniform() * lv.size())]);
      const VelocityConstraint c{s, vmax};
      const VelocityProfile p = velocity_graph_search({c}, a_max, lv, v_start);
      const oracle::BruteProfile ref = oracle::brute_velocity(s, vmax, lv, a_max, v_start);
      CHECK(p.infeasible == !ref.feasible);
      if (ref.feasible) {
        CHECK(p.v == ref.v);
        CHECK(satisfies(p, c, a_max));
      }
    }
  }
  SUBCASE("speed lookup uses the segment's end speed") {
    VelocityProfile p;
    p.s = {0, 1, 2};
    p.v = {0.0, 0.5, 1.0};
    CHECK(p.speed_at(0.0) == 0.5);
    CHECK(p.speed_at(0.99) == 0.5);
    CHECK(p.speed_at(1.0) == 1.0);
    CHECK(p.speed_at(5.0) == 1.0);
  }
}

TEST_CASE("arc-length sampling") {
  const HermiteCurve c = plan_path({0, 0, 0}, {8, 6, 1.0});
  const SampledPath p = sample_path(c, 0.5);
  CHECK(p.s.front() == 0.0);
  CHECK(p.points.back() == c.p1);
  for (std::size_t i = 1; i + 1 < p.s.size(); ++i) CHECK(p.s[i] - p.s[i - 1] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(arc_length_at(p, 1.0) == doctest::Approx(p.length()));
}
