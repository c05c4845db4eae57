// Scenario files.
//
// A scenario is a JSON document with a versioned schema (schema_version 1).
// Every section except the required keys has defaults; unknown keys are
// rejected so typos surface as validation errors with their field path.
#pragma once

#include "usvnav/behavior.hpp"
#include "usvnav/dynamics.hpp"
#include "usvnav/follower.hpp"
#include "usvnav/heartbeat.hpp"
#include "usvnav/localization.hpp"
#include "usvnav/perception.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace usvnav::harness {

inline constexpr int kSchemaVersion = 1;

struct SimSettings {
  double duration = 60.0;  // [s]
  double dt = 0.02;        // [s]
};

/// Proportional velocity loop: f = d * v_des + kp * (v_des - v_est).
struct ControllerGains {
  double kp_surge = 50.0;
  double kp_yaw = 300.0;
};

struct GnssSpec {
  double rate_hz = 1.0;
  double sigma = 0.3;
};

struct ImuSpec {
  double rate_hz = 50.0;
  double sigma_psi = 0.02;
  double sigma_omega = 0.01;
};

struct LidarSpec {
  double rate_hz = 10.0;
  perception::ScanGeometry geometry;
  double noise_sigma = 0.02;
  int outlier_k = 1;
  double outlier_thresh = 0.5;
};

struct CameraSpec {
  double rate_hz = 10.0;
  perception::CameraSimParams sim;
  std::vector<perception::CameraModel> mounts;
};

struct SensorSpecs {
  GnssSpec gnss;
  ImuSpec imu;
  LidarSpec lidar;
  CameraSpec camera;
};

struct LocalizationSpec {
  localization::ProcessNoise process_noise;
  double initial_sigma_pos = 0.5;
  double initial_sigma_psi = 0.05;
  double initial_sigma_vel = 0.1;
};

struct PerceptionSpec {
  perception::SegmentationParams segmentation;
  double iou_gate = 0.3;
};

struct PlannerSpec {
  double margin = 0.5;       // added to the hull half-width [m]
  double a_max = 0.3;        // [m/s^2]
  double a_dec = 0.3;        // [m/s^2]
  double omega_max = 0.5;    // [rad/s]
  double v_cruise = 1.5;     // [m/s]
  double standoff = 3.0;     // stop this far before a hit [m]
  std::size_t speed_levels = 21;
  double offset_spacing = 2.0;
  double offset_extent = 6.0;
  double sample_spacing = 0.5;
};

struct BehaviorSpec {
  behavior::TreeDefaults defaults;
  behavior::NodeSpec tree;
};

/// A gate is a pair of buoy indices; crossing its segment counts as passing.
struct GateSpec {
  std::size_t first = 0;
  std::size_t second = 0;
};

struct HeartbeatSpec {
  bool enabled = false;
  heartbeat::ClientConfig client;
};

struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name;
  std::uint64_t seed = 0;
  SimSettings sim;
  dynamics::VesselParams vessel;
  dynamics::PropellerParams propeller;
  dynamics::CoriolisMode coriolis = dynamics::CoriolisMode::SkewCorrected;
  ControllerGains controller;
  perception::World world;
  Pose2D start;
  SensorSpecs sensors;
  LocalizationSpec localization;
  PerceptionSpec perception;
  PlannerSpec planner;
  follower::FollowerParams follower;
  BehaviorSpec behavior;
  std::vector<GateSpec> gates;
  HeartbeatSpec heartbeat;
};

class ScenarioError : public std::runtime_error {
 public:
  enum class Kind { Parse, Validation };

  ScenarioError(Kind kind, std::string path, const std::string& message)
      : std::runtime_error((kind == Kind::Parse ? "parse error" : "validation error") +
                           (path.empty() ? std::string() : " at " + path) + ": " + message),
        kind_(kind),
        path_(std::move(path)) {}

  Kind kind() const { return kind_; }
  const std::string& path() const { return path_; }

 private:
  Kind kind_;
  std::string path_;
};

/// Parses and validates. Throws ScenarioError.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Module-level invariants; throws ScenarioError (Validation).
void validate(const Scenario& s);

}  // namespace usvnav::harness
