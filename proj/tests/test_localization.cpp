#include "usvnav/localization.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>

using namespace usvnav;
using namespace usvnav::localization;

namespace {

EkfState random_state(Rng& rng) {
  EkfState s;
  s.mean << 20 * rng.uniform() - 10, 20 * rng.uniform() - 10, 2 * std::numbers::pi * rng.uniform() - std::numbers::pi,
      3 * rng.uniform() - 1, rng.uniform() - 0.5, rng.uniform() - 0.5;
  Matrix6 a = Matrix6::Random() * 0.3;
  s.cov = a * a.transpose() + 0.01 * Matrix6::Identity();
  return s;
}

double min_eig(const Matrix6& p) { return Eigen::SelfAdjointEigenSolver<Matrix6>(p).eigenvalues().minCoeff(); }

ProcessNoise zero_noise() { return {0, 0, 0, 0, 0}; }

}  // namespace

TEST_CASE("predict") {
  SUBCASE("stationary with zero process noise") {
    EkfState s;
    s.mean << 1, 2, 0.5, 0, 0, 0;
    s.cov = Matrix6::Zero();
    s.cov.topLeftCorner<3, 3>() = Eigen::Vector3d(0.2, 0.3, 0.05).asDiagonal();
    const EkfState p = predict(s, 0.5, zero_noise());
    CHECK(p.mean == s.mean);
    CHECK((p.cov - s.cov).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("kinematic advance") {
    EkfState s;
    s.mean << 0, 0, 0, 1, 0, 0;
    const EkfState p = predict(s, 1.0, zero_noise());
    CHECK(p.mean(kX) == doctest::Approx(1.0));
    CHECK(p.mean(kY) == doctest::Approx(0.0));
  }
  SUBCASE("analytic jacobian matches central differences") {
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
      const Vector6 x = random_state(rng).mean;
      const double dt = 0.01 + 0.5 * rng.uniform();
      const Matrix6 F = motion_jacobian(x, dt);
      Matrix6 fd;
      const double h = 1e-6;
      for (int j = 0; j < 6; ++j) {
        Vector6 xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        Vector6 diff = motion_model(xp, dt) - motion_model(xm, dt);
        diff(kPsi) = wrap_angle(diff(kPsi));
        fd.col(j) = diff / (2 * h);
      }
      CHECK((F - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("process noise grows the covariance") {
    EkfState s;
    const EkfState p = predict(s, 1.0, ProcessNoise{});
    for (int i = 0; i < 6; ++i) CHECK(p.cov(i, i) >= s.cov(i, i));
  }
}

TEST_CASE("gnss update") {
  EkfState s;
  s.mean << 3, 4, 0.1, 1, 0, 0;
  s.cov = Matrix6::Identity() * 0.5;

  SUBCASE("zero innovation keeps the mean") {
    const UpdateResult r = update_gnss(s, {3, 4, 0.3});
    CHECK(r.accepted);
    CHECK(r.state.mean(kX) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(r.state.mean(kY) == doctest::Approx(4.0).epsilon(1e-15));
  }
  SUBCASE("an uninformative fix changes nothing") {
    const UpdateResult r = update_gnss(s, {100, -50, 1e9});
    CHECK((r.state.mean - s.mean).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r.state.cov - s.cov).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("scalar posterior variance") {
    for (double sigma : {0.1, 0.3, 1.0, 3.0}) {
      const double P = s.cov(kX, kX);
      const UpdateResult r = update_gnss(s, {3.5, 4.0, sigma});
      CHECK(r.state.cov(kX, kX) == doctest::Approx(1.0 / (1.0 / P + 1.0 / (sigma * sigma))).epsilon(1e-12));
      CHECK(r.state.cov(kX, kX) <= P);
      CHECK(r.state.cov(kY, kY) <= s.cov(kY, kY));
    }
  }
  SUBCASE("non-positive sigma is an error") { CHECK_THROWS_AS(update_gnss(s, {3, 4, 0.0}), std::invalid_argument); }
  SUBCASE("infinite sigma is a no-op") {
    const UpdateResult r = update_gnss(s, {3, 4, std::numeric_limits<double>::infinity()});
    CHECK(r.state.mean == s.mean);
  }
}

TEST_CASE("imu update") {
  EkfState s;
  s.mean << 0, 0, 3.1, 0, 0, 0;
  s.cov = Matrix6::Identity() * 0.1;

  SUBCASE("heading innovation is wrapped") {
    const UpdateResult r = update_imu(s, {-3.1, 0.0, 0.02, 0.01});
    CHECK(std::abs(r.innovation(0)) == doctest::Approx(2 * std::numbers::pi - 6.2).epsilon(1e-9));
    CHECK(r.innovation(0) == doctest::Approx(wrap_angle(-3.1 - 3.1)));
    // Moves through +pi, not back across zero.
    CHECK(std::abs(wrap_angle(r.state.mean(kPsi) - (-3.1))) < 0.01);
  }
  SUBCASE("zero innovation keeps the mean") {
    const UpdateResult r = update_imu(s, {3.1, 0.0, 0.02, 0.01});
    CHECK((r.state.mean - s.mean).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("repeated updates contract the heading error") {
    EkfState cur = s;
    cur.mean(kPsi) = 0.0;
    double err = 1.0;
    for (int i = 0; i < 20; ++i) {
      cur = update_imu(cur, {1.0, 0.0, 0.3, 0.3}).state;
      const double e = std::abs(wrap_angle(cur.mean(kPsi) - 1.0));
      CHECK(e < err);
      err = e;
    }
  }
  SUBCASE("posterior heading variance never grows") {
    const UpdateResult r = update_imu(s, {2.0, 0.4, 0.5, 0.5});
    CHECK(r.state.cov(kPsi, kPsi) <= s.cov(kPsi, kPsi));
    CHECK(r.state.cov(kOmega, kOmega) <= s.cov(kOmega, kOmega));
  }
}

TEST_CASE("covariance stays symmetric and positive semidefinite") {
  Rng rng(12);
  EkfState s;
  const ProcessNoise q;
  for (int i = 0; i < 10000; ++i) {
    s = predict(s, 0.02, q);
    if (i % 3 == 0)
      s = update_imu(s, {2 * std::numbers::pi * rng.uniform() - std::numbers::pi, rng.normal(0, 0.3), 0.02, 0.01})
              .state;
    if (i % 50 == 0) s = update_gnss(s, {rng.normal(0, 5), rng.normal(0, 5), 0.3}).state;
    if (i % 500 == 0) {
      CHECK((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(min_eig(s.cov) >= -1e-9);
    }
  }
  CHECK((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(min_eig(s.cov) >= -1e-9);
}

TEST_CASE("filter drops out-of-order measurements") {
  PlanarEkf ekf(EkfState{}, ProcessNoise{});
  CHECK(ekf.add_gnss(1.0, {0.1, 0.0, 0.3}));
  CHECK(ekf.time() == 1.0);
  CHECK_FALSE(ekf.add_imu(0.5, {0.0, 0.0, 0.02, 0.01}));
  CHECK(ekf.dropped_count() == 1);
  CHECK(ekf.last_gnss_nis().has_value());
}

TEST_CASE("tracking a constant-velocity target") {
  Rng rng(13);
  EkfState init;
  init.cov.diagonal() << 0.25, 0.25, 0.0025, 0.01, 0.01, 0.01;
  PlanarEkf ekf(init, ProcessNoise{});
  const double u = 1.0, psi = 0.4;
  double sq = 0.0;
  int n = 0;
  for (int k = 1; k <= 3000; ++k) {
    const double t = 0.02 * k;
    const double x = u * t * std::cos(psi), y = u * t * std::sin(psi);
    ekf.predict_to(t);
    ekf.add_imu(t, {wrap_angle(psi + rng.normal(0, 0.02)), rng.normal(0, 0.01), 0.02, 0.01});
    if (k % 50 == 0) ekf.add_gnss(t, {x + rng.normal(0, 0.3), y + rng.normal(0, 0.3), 0.3});
    if (t > 20) {
      sq += std::pow(ekf.state().mean(kX) - x, 2) + std::pow(ekf.state().mean(kY) - y, 2);
      ++n;
    }
  }
  // Raw fixes alone give sqrt(2) * 0.3.
  CHECK(std::sqrt(sq / n) < 0.4);
  CHECK(ekf.state().mean(kU) == doctest::Approx(u).epsilon(0.1));
}
