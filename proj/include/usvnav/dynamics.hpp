// Planar 3-DoF vessel model for a differential-thrust catamaran.
//
//   M * nu_dot = -C(nu) * nu - D_lin * nu + tau
//
// with nu = (u, v, omega) in the body frame and tau = (fx, fy, fyaw). The
// thrust allocation maps left/right thruster forces onto tau, and the
// propeller model maps shaft speed and inflow onto thruster force.
#pragma once

#include "usvnav/geometry.hpp"

#include <Eigen/Core>

namespace usvnav::dynamics {

using Matrix3 = Eigen::Matrix3d;
using Vector3 = Eigen::Vector3d;

struct BodyVelocity {
  double u = 0.0;      // surge [m/s]
  double v = 0.0;      // sway [m/s]
  double omega = 0.0;  // yaw rate [rad/s]

  Vector3 vec() const { return {u, v, omega}; }
  static BodyVelocity from(const Vector3& x) { return {x(0), x(1), x(2)}; }
  bool operator==(const BodyVelocity&) const = default;
};

struct Wrench {
  double fx = 0.0;    // [N]
  double fy = 0.0;    // [N]
  double fyaw = 0.0;  // [N m]

  Vector3 vec() const { return {fx, fy, fyaw}; }
  bool operator==(const Wrench&) const = default;
};

struct VesselParams {
  double m = 180.0;    // rigid-body mass [kg]
  double mx = 20.0;    // added mass, surge [kg]
  double my = 120.0;   // added mass, sway [kg]
  double Iz = 250.0;   // yaw inertia [kg m^2]
  double Jz = 50.0;    // added yaw inertia [kg m^2]
  double w = 2.4;      // thruster lateral separation [m]
  double hull_width = 2.4;  // full beam; the collision half-extent is half of it [m]
  Vector3 lin_drag{60.0, 200.0, 150.0};  // diagonal linear damping
  double max_thrust = 250.0;             // per-thruster saturation [N]

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

struct PropellerParams {
  double rho = 1025.0;  // fluid density [kg/m^3]
  double Dp = 0.25;     // propeller diameter [m]
  double k0 = 0.35;
  double k1 = -0.3;
  double k2 = -0.1;
  double n_max = 40.0;  // shaft speed limit [rev/s]

  void validate() const;
};

struct VesselState {
  Pose2D pose;
  BodyVelocity vel;
  bool operator==(const VesselState&) const = default;
};

enum class CoriolisMode {
  /// The skew-symmetric variant, which conserves kinetic energy.
  SkewCorrected,
  /// The published matrix, entry for entry.
  PaperLiteral,
};

Matrix3 mass_matrix(const VesselParams& params);

Matrix3 coriolis_matrix(const VesselParams& params, const BodyVelocity& nu,
                        CoriolisMode mode = CoriolisMode::SkewCorrected);

/// Body-frame acceleration nu_dot for the given velocity and wrench.
BodyVelocity dynamics_derivative(const VesselParams& params, const BodyVelocity& nu,
                                 const Wrench& tau,
                                 CoriolisMode mode = CoriolisMode::SkewCorrected);

/// One fixed RK4 step of the coupled pose/velocity ODE. tau is held constant
/// over the step. Throws std::invalid_argument when dt <= 0.
VesselState step(const VesselState& state, const Wrench& tau, double dt,
                 const VesselParams& params,
                 CoriolisMode mode = CoriolisMode::SkewCorrected);

/// Kinetic energy 0.5 * nu^T M nu.
double kinetic_energy(const VesselParams& params, const BodyVelocity& nu);

/// Right/left thruster forces to body wrench: fx = (Fr + Fl) / 2,
/// fyaw = (w / 2) (Fr - Fl).
Wrench allocate_thrust(double Fr, double Fl, double w);

struct ThrusterForces {
  double Fr = 0.0;
  double Fl = 0.0;
  bool saturated = false;
};

/// Inverse of allocate_thrust on (fx, fyaw); fy is unactuated and ignored.
/// Each force is clamped to [-max_thrust, max_thrust].
ThrusterForces inverse_allocation(const Wrench& tau_des, double w, double max_thrust);

/// T = rho n^2 D^4 Kt(Js), Kt(J) = k2 J^2 + k1 J + k0, Js = up / (n D).
/// Defined as zero at n = 0.
double propeller_thrust(double n, double up, const PropellerParams& prop);

struct RevSolution {
  double n = 0.0;
  bool clamped = false;
};

/// Numeric inverse of propeller_thrust on the monotone branch n >= 0.
/// Requires k0 > 0 so thrust grows with n. Out-of-range targets return the
/// nearest bracket end flagged as clamped.
RevSolution thrust_to_rev(double T_des, double up, const PropellerParams& prop);

}  // namespace usvnav::dynamics
