#include "usvnav/simulation.hpp"

#include "usvnav/behavior.hpp"
#include "usvnav/localization.hpp"
#include "usvnav/perception.hpp"
#include "usvnav/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace usvnav::harness {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed * 0x9E3779B97F4A7C15ULL + stream;
}

struct Plan {
  Pose2D goal;
  bool pass_through = false;
  Vec2 offset = Vec2::Zero();
  bool blocked = false;
  double made_at = 0.0;
  planner::HermiteCurve curve;
  planner::SampledPath sampled;
  std::optional<follower::PathFollower> tracker;
};

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Parameter along p0->p1 where it properly crosses segment a-b.
std::optional<double> segment_crossing(const Vec2& p0, const Vec2& p1, const Vec2& a, const Vec2& b) {
  const Vec2 r = p1 - p0;
  const Vec2 s = b - a;
  const double denom = cross(r, s);
  if (denom == 0.0) return std::nullopt;
  const double t = cross(a - p0, s) / denom;
  const double u = cross(a - p0, r) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

}  // namespace

bool fires(std::size_t k, double dt, double rate_hz) {
  if (k == 0) return true;
  const double now = std::floor(static_cast<double>(k) * dt * rate_hz + 1e-9);
  const double prev = std::floor(static_cast<double>(k - 1) * dt * rate_hz + 1e-9);
  return now != prev;
}

dynamics::Wrench velocity_control(const follower::Command& cmd, double u_est, double omega_est,
                                  const dynamics::VesselParams& vessel, const ControllerGains& gains) {
  dynamics::Wrench w;
  w.fx = vessel.lin_drag(0) * cmd.v + gains.kp_surge * (cmd.v - u_est);
  w.fyaw = vessel.lin_drag(2) * cmd.omega + gains.kp_yaw * (cmd.omega - omega_est);
  return w;
}

ActuatorOutput actuate(const dynamics::Wrench& desired, double surge_speed,
                       const dynamics::VesselParams& vessel, const dynamics::PropellerParams& prop) {
  const auto forces = dynamics::inverse_allocation(desired, vessel.w, vessel.max_thrust);
  ActuatorOutput out;
  out.saturated = forces.saturated;
  const auto thruster = [&](double F, double& n) {
    const double inflow = std::max(0.0, F >= 0.0 ? surge_speed : -surge_speed);
    const auto sol = dynamics::thrust_to_rev(std::abs(F), inflow, prop);
    out.saturated = out.saturated || sol.clamped;
    n = std::copysign(sol.n, F);
    return std::copysign(dynamics::propeller_thrust(sol.n, inflow, prop), F);
  };
  const double Fr = thruster(forces.Fr, out.n_right);
  const double Fl = thruster(forces.Fl, out.n_left);
  out.applied = dynamics::allocate_thrust(Fr, Fl, vessel.w);
  return out;
}

std::string_view to_string(BtStatus s) {
  switch (s) {
    case BtStatus::Idle: return "IDLE";
    case BtStatus::Running: return "RUNNING";
    case BtStatus::Success: return "SUCCESS";
    case BtStatus::Failure: return "FAILURE";
  }
  return "?";
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Success: return "success";
    case RunStatus::Failure: return "failure";
    case RunStatus::Error: return "error";
  }
  return "?";
}

double rmse_position(const std::vector<LogRow>& rows) {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) {
    const double dx = r.x - r.est_x;
    const double dy = r.y - r.est_y;
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / static_cast<double>(rows.size()));
}

std::vector<GateCrossing> detect_gate_crossings(const std::vector<LogRow>& rows,
                                                const perception::World& world,
                                                const std::vector<GateSpec>& gates) {
  std::vector<GateCrossing> out;
  for (std::size_t g = 0; g < gates.size(); ++g) {
    GateCrossing c{g, false, 0.0};
    const Vec2 a = world.buoys.at(gates[g].first).shape.center;
    const Vec2 b = world.buoys.at(gates[g].second).shape.center;
    for (std::size_t i = 1; i < rows.size() && !c.crossed; ++i) {
      const Vec2 p0(rows[i - 1].x, rows[i - 1].y);
      const Vec2 p1(rows[i].x, rows[i].y);
      if (const auto t = segment_crossing(p0, p1, a, b)) {
        c.crossed = true;
        c.t = rows[i - 1].t + *t * (rows[i].t - rows[i - 1].t);
      }
    }
    out.push_back(c);
  }
  return out;
}

RunResult run(const Scenario& sc, const RunHooks& hooks) {
  using localization::kOmega;
  using localization::kU;

  RunResult out;
  const double dt = sc.sim.dt;
  const auto n_ticks = static_cast<std::size_t>(std::llround(sc.sim.duration / dt));
  out.rows.reserve(n_ticks + 1);

  Rng gnss_rng(stream_seed(sc.seed, 1));
  Rng imu_rng(stream_seed(sc.seed, 2));
  Rng lidar_rng(stream_seed(sc.seed, 3));
  Rng camera_rng(stream_seed(sc.seed, 4));

  dynamics::VesselState truth{sc.start, {}};

  localization::EkfState init;
  init.mean << sc.start.x, sc.start.y, sc.start.psi, 0.0, 0.0, 0.0;
  const auto& ls = sc.localization;
  init.cov.setZero();
  init.cov.diagonal() << ls.initial_sigma_pos * ls.initial_sigma_pos, ls.initial_sigma_pos * ls.initial_sigma_pos,
      ls.initial_sigma_psi * ls.initial_sigma_psi, ls.initial_sigma_vel * ls.initial_sigma_vel,
      ls.initial_sigma_vel * ls.initial_sigma_vel, ls.initial_sigma_vel * ls.initial_sigma_vel;
  localization::PlanarEkf ekf(init, ls.process_noise, 0.0);

  const double half_width = 0.5 * sc.vessel.hull_width;
  const auto& pp = sc.planner;
  const auto offsets = planner::offset_grid(pp.offset_spacing, pp.offset_extent);
  const auto levels = planner::uniform_levels(pp.v_cruise, pp.speed_levels);

  behavior::Blackboard bb;
  behavior::NodePtr root;
  std::vector<perception::FusedObject> fused;
  std::vector<perception::CameraFrame> frames;
  std::vector<Vec2> obstacles;  // world frame, from the latest scan
  BtStatus bt = BtStatus::Idle;
  bool done = false;
  std::optional<Plan> plan;
  follower::Command cmd;
  dynamics::Wrench applied;
  double min_clearance = kInf;

  const auto make_plan = [&](const Pose2D& start, const Pose2D& goal, bool pass_through, double t) {
    plan.reset();
    if ((goal.position() - start.position()).norm() < 1e-3) return;
    Plan p;
    p.goal = goal;
    p.pass_through = pass_through;
    p.made_at = t;
    if (const auto found = planner::local_waypoint_search(start, goal, obstacles, half_width, pp.margin, offsets)) {
      p.curve = found->curve;
      p.offset = found->offset;
    } else {
      p.curve = planner::plan_path(start, goal);
      p.blocked = true;
    }
    p.sampled = planner::sample_path(p.curve, pp.sample_spacing);
    std::vector<planner::VelocityConstraint> cons{
        planner::curve_planner(p.sampled, pp.omega_max, pp.v_cruise),
        planner::obstacle_planner(p.curve, p.sampled, obstacles, half_width, pp.margin, pp.standoff, pp.a_dec)};
    if (!pass_through) cons.push_back(planner::stop_planner(p.sampled.s, pp.v_cruise, pp.a_dec));
    const double first_limit = planner::merge_constraints(cons).v_max.front();
    const double v_start = std::clamp(ekf.state().mean(kU), 0.0, first_limit);
    auto profile = planner::velocity_graph_search(cons, pp.a_max, levels, v_start);
    if (profile.infeasible) profile = planner::velocity_graph_search(cons, pp.a_max, levels, 0.0);
    p.tracker.emplace(p.sampled, profile, sc.follower);
    out.paths.push_back({t, p.sampled.points, p.offset, p.blocked});
    ++out.metrics.replans;
    plan = std::move(p);
  };

  const auto needs_replan = [&](const Pose2D& ego, const Pose2D& goal, bool pass_through, double t) {
    if (!plan) return (goal.position() - ego.position()).norm() >= 1e-3;
    if (!(plan->goal == goal) || plan->pass_through != pass_through) return true;
    const double t_here = planner::nearest_point_newton(plan->curve, ego.position()).t;
    if (!plan->blocked) {
      for (const auto& h : planner::check_collision(plan->curve, obstacles, half_width, pp.margin))
        if (h.t > t_here) return true;
    }
    if ((plan->blocked || plan->offset != Vec2::Zero()) && (goal.position() - ego.position()).norm() >= 1e-3) {
      const auto direct = planner::plan_path(ego, goal);
      if (planner::check_collision(direct, obstacles, half_width, pp.margin).empty()) return true;
    }
    // Stalled short of the goal at the end of the profile.
    const double speed = std::abs(ekf.state().mean(kU));
    const auto proj = follower::project(plan->tracker->path(), ego.position());
    if (speed < 0.05 && proj.s >= plan->sampled.length() - pp.sample_spacing &&
        (goal.position() - ego.position()).norm() > 0.5 * sc.behavior.defaults.tolerance.position &&
        t - plan->made_at > 2.0)
      return true;
    return false;
  };

  try {
    root = behavior::build_tree(sc.behavior.tree, sc.behavior.defaults);
    for (std::size_t k = 0; k <= n_ticks; ++k) {
      const double t = static_cast<double>(k) * dt;

      // Sensors and localization.
      ekf.predict_to(t);
      if (fires(k, dt, sc.sensors.imu.rate_hz)) {
        localization::ImuMeasurement m;
        m.psi = wrap_angle(truth.pose.psi + imu_rng.normal(0.0, sc.sensors.imu.sigma_psi));
        m.omega = truth.vel.omega + imu_rng.normal(0.0, sc.sensors.imu.sigma_omega);
        m.sigma_psi = sc.sensors.imu.sigma_psi;
        m.sigma_omega = sc.sensors.imu.sigma_omega;
        ekf.add_imu(t, m);
      }
      if (fires(k, dt, sc.sensors.gnss.rate_hz)) {
        localization::GnssMeasurement m;
        m.x = truth.pose.x + gnss_rng.normal(0.0, sc.sensors.gnss.sigma);
        m.y = truth.pose.y + gnss_rng.normal(0.0, sc.sensors.gnss.sigma);
        m.sigma = sc.sensors.gnss.sigma;
        ekf.add_gnss(t, m);
      }
      const localization::EkfState est = ekf.state();
      const Pose2D ego = est.pose();

      // Perception.
      if (fires(k, dt, sc.sensors.camera.rate_hz)) {
        frames.clear();
        for (const auto& cam : sc.sensors.camera.mounts)
          frames.push_back({cam, perception::simulate_camera_detections(sc.world.buoys, cam, truth.pose,
                                                                        sc.sensors.camera.sim, camera_rng)});
      }
      if (fires(k, dt, sc.sensors.lidar.rate_hz)) {
        auto scan = perception::simulate_lidar(sc.world, truth.pose, sc.sensors.lidar.geometry,
                                               sc.sensors.lidar.noise_sigma, lidar_rng, t);
        scan = perception::filter_outliers(scan, sc.sensors.lidar.outlier_k, sc.sensors.lidar.outlier_thresh);
        const auto clusters = perception::segment_scan(scan, sc.perception.segmentation);
        fused = perception::fuse_cameras(clusters, frames, sc.perception.iou_gate,
                                         sc.sensors.camera.sim.object_height)
                    .objects;
        obstacles.clear();
        for (const auto& c : clusters)
          for (const auto& p : c.points) obstacles.push_back(ego.to_world(p));
      }

      // Behavior and planning.
      if (fires(k, dt, kBehaviorRateHz) && !done) {
        bb.set(behavior::keys::kEgo, est);
        bb.set(behavior::keys::kFusedObjects, fused);
        const auto s = root->tick(bb);
        if (s == behavior::NodeStatus::Running) {
          bt = BtStatus::Running;
        } else {
          bt = s == behavior::NodeStatus::Success ? BtStatus::Success : BtStatus::Failure;
          done = true;
          plan.reset();
          if (bt == BtStatus::Success) {
            out.metrics.completed = true;
            out.metrics.completion_time = t;
          }
        }
        if (!done) {
          if (const auto* goal = bb.find<Pose2D>(behavior::keys::kGoal)) {
            const auto* pass = bb.find<bool>(behavior::keys::kPassThrough);
            const bool pass_through = pass != nullptr && *pass;
            if (needs_replan(ego, *goal, pass_through, t)) make_plan(ego, *goal, pass_through, t);
          }
        }
      }

      // Control.
      if (fires(k, dt, kControlRateHz)) {
        const auto* stop = bb.find<bool>(behavior::keys::kStopRequested);
        if (done || !plan || (stop != nullptr && *stop)) cmd = {};
        else cmd = plan->tracker->track(ego).command;
        const auto desired = velocity_control(cmd, est.mean(kU), est.mean(kOmega), sc.vessel, sc.controller);
        applied = actuate(desired, truth.vel.u, sc.vessel, sc.propeller).applied;
      }

      LogRow row;
      row.t = t;
      row.x = truth.pose.x;
      row.y = truth.pose.y;
      row.psi = truth.pose.psi;
      row.u = truth.vel.u;
      row.v = truth.vel.v;
      row.omega = truth.vel.omega;
      row.est_x = est.mean(0);
      row.est_y = est.mean(1);
      row.est_psi = est.mean(2);
      row.est_u = est.mean(3);
      row.est_v = est.mean(4);
      row.est_omega = est.mean(5);
      row.fx = applied.fx;
      row.fy = applied.fy;
      row.fyaw = applied.fyaw;
      row.cmd_v = cmd.v;
      row.cmd_omega = cmd.omega;
      if (const auto* goal = bb.find<Pose2D>(behavior::keys::kGoal)) {
        row.has_goal = true;
        row.goal_x = goal->x;
        row.goal_y = goal->y;
        row.goal_psi = goal->psi;
      }
      row.bt = bt;
      row.objects = fused.size();
      out.rows.push_back(row);
      min_clearance = std::min(min_clearance, perception::clearance(sc.world, truth.pose.position()));

      if (hooks.publish) hooks.publish({t, est.mean(0), est.mean(1), heartbeat::SystemMode::Autonomous});

      if (k < n_ticks) truth = dynamics::step(truth, applied, dt, sc.vessel, sc.coriolis);
    }
  } catch (const std::exception& e) {
    out.metrics.error = e.what();
  }

  auto& m = out.metrics;
  m.ticks = out.rows.size();
  m.sim_duration = out.rows.empty() ? 0.0 : out.rows.back().t;
  m.rmse_position = rmse_position(out.rows);
  m.min_clearance = min_clearance;
  m.gates = detect_gate_crossings(out.rows, sc.world, sc.gates);
  m.gates_in_order = true;
  for (std::size_t i = 0; i < m.gates.size(); ++i) {
    if (!m.gates[i].crossed) m.gates_in_order = false;
    else if (i > 0 && m.gates[i - 1].crossed && !(m.gates[i - 1].t < m.gates[i].t)) m.gates_in_order = false;
  }
  if (!m.error.empty()) m.status = RunStatus::Error;
  else if (m.completed && m.gates_in_order) m.status = RunStatus::Success;
  else m.status = RunStatus::Failure;
  return out;
}

}  // namespace usvnav::harness
