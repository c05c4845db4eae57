#include "usvnav/dynamics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace usvnav::dynamics {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

using StateVec = Eigen::Matrix<double, 6, 1>;

StateVec to_vec(const VesselState& s) {
  StateVec x;
  x << s.pose.x, s.pose.y, s.pose.psi, s.vel.u, s.vel.v, s.vel.omega;
  return x;
}

StateVec state_rate(const StateVec& x, const Wrench& tau, const VesselParams& params,
                    CoriolisMode mode) {
  const double psi = x(2);
  const double u = x(3);
  const double v = x(4);
  const BodyVelocity nu{u, v, x(5)};
  const BodyVelocity acc = dynamics_derivative(params, nu, tau, mode);
  StateVec dx;
  dx << u * std::cos(psi) - v * std::sin(psi), u * std::sin(psi) + v * std::cos(psi), nu.omega,
      acc.u, acc.v, acc.omega;
  return dx;
}

}  // namespace

void VesselParams::validate() const {
  require(std::isfinite(m) && m > 0.0, "vessel.m must be > 0");
  require(std::isfinite(Iz) && Iz > 0.0, "vessel.Iz must be > 0");
  require(std::isfinite(mx) && mx >= 0.0, "vessel.mx must be >= 0");
  require(std::isfinite(my) && my >= 0.0, "vessel.my must be >= 0");
  require(std::isfinite(Jz) && Jz >= 0.0, "vessel.Jz must be >= 0");
  require(std::isfinite(w) && w > 0.0, "vessel.w must be > 0");
  require(std::isfinite(hull_width) && hull_width >= 0.0, "vessel.hull_width must be >= 0");
  require(lin_drag.allFinite() && (lin_drag.array() >= 0.0).all(),
          "vessel.lin_drag entries must be >= 0");
  require(std::isfinite(max_thrust) && max_thrust > 0.0, "vessel.max_thrust must be > 0");
}

void PropellerParams::validate() const {
  require(std::isfinite(rho) && rho > 0.0, "propeller.rho must be > 0");
  require(std::isfinite(Dp) && Dp > 0.0, "propeller.Dp must be > 0");
  require(std::isfinite(k0) && std::isfinite(k1) && std::isfinite(k2),
          "propeller.k0/k1/k2 must be finite");
  require(k0 > 0.0, "propeller.k0 must be > 0");
  require(std::isfinite(n_max) && n_max > 0.0, "propeller.n_max must be > 0");
}

Matrix3 mass_matrix(const VesselParams& p) {
  return Vector3(p.m + p.mx, p.m + p.my, p.Iz + p.Jz).asDiagonal();
}

Matrix3 coriolis_matrix(const VesselParams& p, const BodyVelocity& nu, CoriolisMode mode) {
  const double mu = p.m * nu.u;
  const double mv = p.m * nu.v;
  Matrix3 c;
  if (mode == CoriolisMode::PaperLiteral) {
    c << 0.0, 0.0, -mu,
         0.0, 0.0, mv,
         mu, -mu, 0.0;
  } else {
    c << 0.0, 0.0, -mv,
         0.0, 0.0, mu,
         mv, -mu, 0.0;
  }
  return c;
}

BodyVelocity dynamics_derivative(const VesselParams& p, const BodyVelocity& nu, const Wrench& tau,
                                 CoriolisMode mode) {
  const Vector3 x = nu.vec();
  const Vector3 rhs = -coriolis_matrix(p, nu, mode) * x - p.lin_drag.cwiseProduct(x) + tau.vec();
  // M is diagonal.
  const Vector3 mdiag(p.m + p.mx, p.m + p.my, p.Iz + p.Jz);
  return BodyVelocity::from(rhs.cwiseQuotient(mdiag));
}

VesselState step(const VesselState& state, const Wrench& tau, double dt,
                 const VesselParams& params, CoriolisMode mode) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  const StateVec x = to_vec(state);
  const StateVec k1 = state_rate(x, tau, params, mode);
  const StateVec k2 = state_rate(x + 0.5 * dt * k1, tau, params, mode);
  const StateVec k3 = state_rate(x + 0.5 * dt * k2, tau, params, mode);
  const StateVec k4 = state_rate(x + dt * k3, tau, params, mode);
  const StateVec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return VesselState{Pose2D{next(0), next(1), next(2)}, BodyVelocity{next(3), next(4), next(5)}};
}

double kinetic_energy(const VesselParams& params, const BodyVelocity& nu) {
  const Vector3 x = nu.vec();
  return 0.5 * x.dot(mass_matrix(params) * x);
}

Wrench allocate_thrust(double Fr, double Fl, double w) {
  if (!(w > 0.0)) throw std::invalid_argument("allocate_thrust: w must be > 0");
  return {0.5 * (Fr + Fl), 0.0, 0.5 * w * (Fr - Fl)};
}

ThrusterForces inverse_allocation(const Wrench& tau_des, double w, double max_thrust) {
  if (!(w > 0.0)) throw std::invalid_argument("inverse_allocation: w must be > 0");
  const double fr = tau_des.fx + tau_des.fyaw / w;
  const double fl = tau_des.fx - tau_des.fyaw / w;
  ThrusterForces out;
  out.Fr = std::clamp(fr, -max_thrust, max_thrust);
  out.Fl = std::clamp(fl, -max_thrust, max_thrust);
  out.saturated = out.Fr != fr || out.Fl != fl;
  return out;
}

double propeller_thrust(double n, double up, const PropellerParams& prop) {
  if (n == 0.0) return 0.0;
  const double js = up / (n * prop.Dp);
  const double kt = prop.k2 * js * js + prop.k1 * js + prop.k0;
  return prop.rho * n * n * std::pow(prop.Dp, 4) * kt;
}

RevSolution thrust_to_rev(double T_des, double up, const PropellerParams& prop) {
  if (!(prop.k0 > 0.0)) throw std::invalid_argument("thrust_to_rev: requires k0 > 0");
  const double tol = 1e-6 * std::max(1.0, std::abs(T_des));

  // T(n) is a quadratic in n with positive leading coefficient; it increases
  // to the right of its vertex.
  const double n_lo = std::clamp(-prop.k1 * up / (2.0 * prop.k0 * prop.Dp), 0.0, prop.n_max);
  const double n_hi = prop.n_max;
  const auto f = [&](double n) { return propeller_thrust(n, up, prop) - T_des; };

  const double f_lo = f(n_lo);
  if (f_lo >= -tol) return {n_lo, std::abs(f_lo) >= tol};
  const double f_hi = f(n_hi);
  if (f_hi <= tol) return {n_hi, std::abs(f_hi) >= tol};

  double lo = n_lo;
  double hi = n_hi;
  double mid = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm) < tol) break;
    if (fm < 0.0) lo = mid; else hi = mid;
  }
  return {mid, false};
}

}  // namespace usvnav::dynamics
