// Planar extended Kalman filter over (x, y, psi, u, v, omega).
//
// Prediction uses a kinematic model with body velocities driven by a random
// walk; GNSS fixes update (x, y) and the IMU updates (psi, omega). All
// updates use the Joseph form and re-symmetrize the covariance.
#pragma once

#include "usvnav/geometry.hpp"

#include <Eigen/Core>

#include <optional>
#include <utility>

namespace usvnav::localization {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

enum StateIndex : int { kX = 0, kY = 1, kPsi = 2, kU = 3, kV = 4, kOmega = 5 };

struct EkfState {
  Vector6 mean = Vector6::Zero();
  Matrix6 cov = Matrix6::Identity();

  Pose2D pose() const { return {mean(kX), mean(kY), mean(kPsi)}; }
};

/// Continuous-time noise densities; Q(dt) = diag(q) * dt.
struct ProcessNoise {
  double pos = 1e-4;    // [m^2/s]
  double psi = 1e-5;    // [rad^2/s]
  double u = 0.01;      // [(m/s)^2/s]
  double v = 0.005;
  double omega = 0.001;  // [(rad/s)^2/s]

  Matrix6 discretize(double dt) const;
};

struct GnssMeasurement {
  double x = 0.0;
  double y = 0.0;
  double sigma = 1.0;
};

struct ImuMeasurement {
  double psi = 0.0;
  double omega = 0.0;
  double sigma_psi = 0.02;
  double sigma_omega = 0.01;
};

/// Outcome of a measurement update. On rejection the state is unchanged.
struct UpdateResult {
  EkfState state;
  bool accepted = true;
  Eigen::Vector2d innovation = Eigen::Vector2d::Zero();
  double nis = 0.0;  // normalized innovation squared
};

/// Kinematic motion map applied to the mean over dt.
Vector6 motion_model(const Vector6& mean, double dt);

/// Analytic Jacobian of motion_model with respect to the mean.
Matrix6 motion_jacobian(const Vector6& mean, double dt);

/// Throws std::invalid_argument when dt <= 0.
EkfState predict(const EkfState& state, double dt, const ProcessNoise& q);

UpdateResult update_gnss(const EkfState& state, const GnssMeasurement& meas);

/// The heading innovation is wrapped into (-pi, pi].
UpdateResult update_imu(const EkfState& state, const ImuMeasurement& meas);

/// Stateful wrapper that enforces monotone timestamps: measurements older than
/// the filter time are dropped.
class PlanarEkf {
 public:
  PlanarEkf(EkfState initial, ProcessNoise q, double t0 = 0.0)
      : state_(std::move(initial)), q_(q), time_(t0) {}

  /// Propagates to time t; returns false if t is in the past.
  bool predict_to(double t);
  /// Returns false when the measurement was dropped or rejected.
  bool add_gnss(double t, const GnssMeasurement& meas);
  bool add_imu(double t, const ImuMeasurement& meas);

  const EkfState& state() const { return state_; }
  double time() const { return time_; }
  std::size_t rejected_count() const { return rejected_; }
  std::size_t dropped_count() const { return dropped_; }
  std::optional<double> last_gnss_nis() const { return last_gnss_nis_; }

 private:
  bool accept(double t);

  EkfState state_;
  ProcessNoise q_;
  double time_;
  std::size_t rejected_ = 0;
  std::size_t dropped_ = 0;
  std::optional<double> last_gnss_nis_;
};

}  // namespace usvnav::localization
