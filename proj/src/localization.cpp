#include "usvnav/localization.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace usvnav::localization {

namespace {

using Matrix26 = Eigen::Matrix<double, 2, 6>;

void symmetrize(Matrix6& p) { p = 0.5 * (p + p.transpose()).eval(); }

// Generic two-row linear update in Joseph form.
UpdateResult joseph_update(const EkfState& state, const Matrix26& h, const Eigen::Vector2d& innov,
                           const Eigen::Matrix2d& r) {
  UpdateResult out{state, false, innov, 0.0};
  const Eigen::Matrix2d s = h * state.cov * h.transpose() + r;
  Eigen::LLT<Eigen::Matrix2d> llt(s);
  if (!s.allFinite() || llt.info() != Eigen::Success) return out;

  const Eigen::Matrix<double, 6, 2> k = (llt.solve(h * state.cov)).transpose();
  const Matrix6 ikh = Matrix6::Identity() - k * h;
  out.state.mean = state.mean + k * innov;
  out.state.mean(kPsi) = wrap_angle(out.state.mean(kPsi));
  out.state.cov = ikh * state.cov * ikh.transpose() + k * r * k.transpose();
  symmetrize(out.state.cov);
  out.accepted = true;
  out.nis = innov.dot(llt.solve(innov));
  return out;
}

}  // namespace

Matrix6 ProcessNoise::discretize(double dt) const {
  Vector6 d;
  d << pos, pos, psi, u, v, omega;
  return (d * dt).asDiagonal();
}

Vector6 motion_model(const Vector6& x, double dt) {
  const double c = std::cos(x(kPsi));
  const double s = std::sin(x(kPsi));
  Vector6 out = x;
  out(kX) += (x(kU) * c - x(kV) * s) * dt;
  out(kY) += (x(kU) * s + x(kV) * c) * dt;
  out(kPsi) = wrap_angle(x(kPsi) + x(kOmega) * dt);
  return out;
}

Matrix6 motion_jacobian(const Vector6& x, double dt) {
  const double c = std::cos(x(kPsi));
  const double s = std::sin(x(kPsi));
  Matrix6 f = Matrix6::Identity();
  f(kX, kPsi) = (-x(kU) * s - x(kV) * c) * dt;
  f(kX, kU) = c * dt;
  f(kX, kV) = -s * dt;
  f(kY, kPsi) = (x(kU) * c - x(kV) * s) * dt;
  f(kY, kU) = s * dt;
  f(kY, kV) = c * dt;
  f(kPsi, kOmega) = dt;
  return f;
}

EkfState predict(const EkfState& state, double dt, const ProcessNoise& q) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be > 0");
  const Matrix6 f = motion_jacobian(state.mean, dt);
  EkfState out;
  out.mean = motion_model(state.mean, dt);
  out.cov = f * state.cov * f.transpose() + q.discretize(dt);
  symmetrize(out.cov);
  return out;
}

UpdateResult update_gnss(const EkfState& state, const GnssMeasurement& meas) {
  if (!(meas.sigma > 0.0)) throw std::invalid_argument("update_gnss: sigma must be > 0");
  const Eigen::Vector2d innov(meas.x - state.mean(kX), meas.y - state.mean(kY));
  if (std::isinf(meas.sigma)) return {state, true, innov, 0.0};
  Matrix26 h = Matrix26::Zero();
  h(0, kX) = 1.0;
  h(1, kY) = 1.0;
  const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * meas.sigma * meas.sigma;
  return joseph_update(state, h, innov, r);
}

UpdateResult update_imu(const EkfState& state, const ImuMeasurement& meas) {
  if (!(meas.sigma_psi > 0.0 && meas.sigma_omega > 0.0))
    throw std::invalid_argument("update_imu: sigmas must be > 0");
  const Eigen::Vector2d innov(wrap_angle(meas.psi - state.mean(kPsi)),
                              meas.omega - state.mean(kOmega));
  if (std::isinf(meas.sigma_psi) && std::isinf(meas.sigma_omega)) return {state, true, innov, 0.0};
  Matrix26 h = Matrix26::Zero();
  h(0, kPsi) = 1.0;
  h(1, kOmega) = 1.0;
  const Eigen::Matrix2d r =
      Eigen::Vector2d(meas.sigma_psi * meas.sigma_psi, meas.sigma_omega * meas.sigma_omega)
          .asDiagonal();
  return joseph_update(state, h, innov, r);
}

bool PlanarEkf::predict_to(double t) {
  if (t < time_) return false;
  if (t > time_) state_ = predict(state_, t - time_, q_);
  time_ = t;
  return true;
}

bool PlanarEkf::accept(double t) {
  if (!predict_to(t)) {
    ++dropped_;
    return false;
  }
  return true;
}

bool PlanarEkf::add_gnss(double t, const GnssMeasurement& meas) {
  if (!accept(t)) return false;
  const UpdateResult r = update_gnss(state_, meas);
  if (!r.accepted) {
    ++rejected_;
    return false;
  }
  state_ = r.state;
  last_gnss_nis_ = r.nis;
  return true;
}

bool PlanarEkf::add_imu(double t, const ImuMeasurement& meas) {
  if (!accept(t)) return false;
  const UpdateResult r = update_imu(state_, meas);
  if (!r.accepted) {
    ++rejected_;
    return false;
  }
  state_ = r.state;
  return true;
}

}  // namespace usvnav::localization
