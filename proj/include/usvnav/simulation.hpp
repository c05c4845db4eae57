// Deterministic closed-loop simulation.
//
// Per tick, in order: sensor simulation (each at its own rate), EKF,
// perception, behavior tree (10 Hz), replanning, follower and velocity
// controller (20 Hz), log row, ground-truth dynamics step. Only the sensor
// simulators and the metrics read ground truth.
#pragma once

#include "usvnav/dynamics.hpp"
#include "usvnav/follower.hpp"
#include "usvnav/heartbeat.hpp"
#include "usvnav/scenario.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace usvnav::harness {

inline constexpr double kBehaviorRateHz = 10.0;
inline constexpr double kControlRateHz = 20.0;

/// True when a sensor running at rate_hz fires on tick k of a dt-spaced
/// clock. Tick 0 always fires.
bool fires(std::size_t k, double dt, double rate_hz);

/// (v, omega) to a desired body wrench.
dynamics::Wrench velocity_control(const follower::Command& cmd, double u_est, double omega_est,
                                  const dynamics::VesselParams& vessel, const ControllerGains& gains);

struct ActuatorOutput {
  dynamics::Wrench applied;
  double n_right = 0.0;  // [rev/s], signed
  double n_left = 0.0;
  bool saturated = false;
};

/// inverse_allocation, then per-thruster shaft speed from thrust_to_rev and
/// the thrust that speed actually produces at the current inflow.
ActuatorOutput actuate(const dynamics::Wrench& desired, double surge_speed,
                       const dynamics::VesselParams& vessel, const dynamics::PropellerParams& prop);

enum class BtStatus { Idle, Running, Success, Failure };
std::string_view to_string(BtStatus s);

struct LogRow {
  double t = 0.0;
  double x = 0.0, y = 0.0, psi = 0.0, u = 0.0, v = 0.0, omega = 0.0;                // truth
  double est_x = 0.0, est_y = 0.0, est_psi = 0.0, est_u = 0.0, est_v = 0.0, est_omega = 0.0;
  double fx = 0.0, fy = 0.0, fyaw = 0.0;  // applied wrench
  double cmd_v = 0.0, cmd_omega = 0.0;
  bool has_goal = false;
  double goal_x = 0.0, goal_y = 0.0, goal_psi = 0.0;
  BtStatus bt = BtStatus::Idle;
  std::size_t objects = 0;  // fused objects
};

struct PlannedPath {
  double t = 0.0;
  std::vector<Vec2> points;
  Vec2 offset = Vec2::Zero();
  bool blocked = false;  // no collision-free offset existed
};

struct GateCrossing {
  std::size_t gate = 0;
  bool crossed = false;
  double t = 0.0;  // first crossing
};

enum class RunStatus { Success, Failure, Error };
std::string_view to_string(RunStatus s);

struct Metrics {
  RunStatus status = RunStatus::Failure;
  bool completed = false;  // behavior tree returned Success
  std::optional<double> completion_time;
  double rmse_position = 0.0;
  double min_clearance = 0.0;
  double sim_duration = 0.0;
  std::size_t ticks = 0;
  std::size_t replans = 0;
  std::vector<GateCrossing> gates;
  bool gates_in_order = true;
  std::string error;
};

struct RunResult {
  std::vector<LogRow> rows;
  std::vector<PlannedPath> paths;
  Metrics metrics;
};

struct RunHooks {
  /// Called once per tick with the estimated state; must not block.
  std::function<void(const heartbeat::VehicleSnapshot&)> publish;
};

/// Never throws for module errors; they end the run with status Error.
RunResult run(const Scenario& scenario, const RunHooks& hooks = {});

/// sqrt(mean((x - est_x)^2 + (y - est_y)^2)) over rows, in row order.
double rmse_position(const std::vector<LogRow>& rows);

/// First time the truth track crosses each gate segment.
std::vector<GateCrossing> detect_gate_crossings(const std::vector<LogRow>& rows,
                                                const perception::World& world,
                                                const std::vector<GateSpec>& gates);

}  // namespace usvnav::harness
