// Acceptance run: one PASS/FAIL line per criterion, each with its runtime
// budget. Exit status is non-zero when any criterion fails.
#include "loops.hpp"
#include "oracles.hpp"
#include "usvnav/assignment.hpp"
#include "usvnav/dynamics.hpp"
#include "usvnav/heartbeat.hpp"
#include "usvnav/outputs.hpp"
#include "usvnav/perception.hpp"
#include "usvnav/planner.hpp"
#include "usvnav/scenario.hpp"
#include "usvnav/simulation.hpp"
#include "usvnav/tcp.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>

using namespace usvnav;
using namespace std::chrono_literals;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> body;
};

std::string scenario_path(const std::string& name) { return std::string(USVNAV_SCENARIO_DIR) + "/" + name + ".json"; }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// 1 -------------------------------------------------------------------------

Outcome dynamics_residual() {
  using namespace dynamics;
  Rng rng(1001);
  double worst = 0.0, worst_power = 0.0;
  for (const bool literal : {false, true}) {
    for (int i = 0; i < 1000; ++i) {
      VesselParams p;
      p.m = 50.0 + 300.0 * rng.uniform();
      p.mx = 50.0 * rng.uniform();
      p.my = 200.0 * rng.uniform();
      p.Iz = 50.0 + 400.0 * rng.uniform();
      p.Jz = 100.0 * rng.uniform();
      p.lin_drag = {100.0 * rng.uniform(), 300.0 * rng.uniform(), 200.0 * rng.uniform()};
      const BodyVelocity nu{4.0 * rng.uniform() - 2.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
      const Wrench tau{400.0 * rng.uniform() - 200.0, 100.0 * rng.uniform() - 50.0, 200.0 * rng.uniform() - 100.0};
      const auto mode = literal ? CoriolisMode::PaperLiteral : CoriolisMode::SkewCorrected;
      const Vector3 rate = dynamics_derivative(p, nu, tau, mode).vec();
      const Vector3 r = oracle::mass(p) * rate + oracle::coriolis(p, nu.u, nu.v, literal) * nu.vec() +
                        p.lin_drag.cwiseProduct(nu.vec()) - tau.vec();
      worst = std::max(worst, r.cwiseAbs().maxCoeff());
      if (!literal)
        worst_power = std::max(worst_power, std::abs(nu.vec().dot(coriolis_matrix(p, nu, mode) * nu.vec())));
    }
  }
  return {worst < 1e-9 && worst_power < 1e-9,
          "max residual " + fmt("%.2e", worst) + ", max |nu'C nu| " + fmt("%.2e", worst_power)};
}

// 2 -------------------------------------------------------------------------

Outcome allocation_round_trip() {
  using namespace dynamics;
  double alloc_err = 0.0;
  for (double w = 0.5; w <= 3.5; w += 0.25)
    for (double fx = -100.0; fx <= 100.0; fx += 5.0)
      for (double mz = -100.0; mz <= 100.0; mz += 5.0) {
        const ThrusterForces f = inverse_allocation({fx, 0.0, mz}, w, 1e6);
        const Wrench back = allocate_thrust(f.Fr, f.Fl, w);
        alloc_err = std::max({alloc_err, std::abs(back.fx - fx), std::abs(back.fyaw - mz), std::abs(back.fy)});
      }
  const PropellerParams prop;
  double rev_err = 0.0;
  bool clamped = false;
  for (double up = 0.0; up <= 2.0; up += 0.25) {
    const double t_max = propeller_thrust(prop.n_max, up, prop);
    for (int k = 0; k <= 100; ++k) {
      const double T = t_max * k / 101.0;
      const RevSolution r = thrust_to_rev(T, up, prop);
      clamped = clamped || r.clamped;
      rev_err = std::max(rev_err, std::abs(propeller_thrust(r.n, up, prop) - T) / std::max(1.0, T));
    }
  }
  return {alloc_err < 1e-9 && rev_err < 1e-6 && !clamped,
          "allocation " + fmt("%.2e", alloc_err) + ", thrust inverse " + fmt("%.2e", rev_err)};
}

// 3 -------------------------------------------------------------------------

Outcome localization_accuracy() {
  double worst = 0.0, mean = 0.0, travelled = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const loops::LocalizationRun r = loops::figure_eight_run(seed);
    worst = std::max(worst, r.rmse);
    mean += r.rmse / 10.0;
    travelled += r.distance / 10.0;
  }
  return {worst < 0.5, "rmse over seeds 1-10: worst " + fmt("%.3f", worst) + " m, mean " + fmt("%.3f", mean) +
                           " m, " + fmt("%.0f", travelled) + " m travelled per run"};
}

// 4, 5 ----------------------------------------------------------------------

planner::HermiteCurve random_curve(Rng& rng) {
  const auto pt = [&](double s) { return Vec2(s * (2 * rng.uniform() - 1), s * (2 * rng.uniform() - 1)); };
  planner::HermiteCurve c;
  c.p0 = pt(10);
  c.p1 = pt(10);
  c.m0 = pt(15);
  c.m1 = pt(15);
  return c;
}

Outcome nearest_point() {
  Rng rng(1004);
  double worst = 0.0;
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto c = random_curve(rng);
    const Vec2 q(30 * rng.uniform() - 15, 30 * rng.uniform() - 15);
    const double d = planner::nearest_point_newton(c, q).distance;
    const double err = std::abs(d - oracle::dense_nearest(c, q).distance);
    worst = std::max(worst, err);
    bad += err >= 1e-6;
  }
  return {bad == 0, "max |d - d_dense| " + fmt("%.2e", worst) + ", " + std::to_string(bad) + " mismatches"};
}

Outcome collision_sets() {
  Rng rng(1005);
  int bad = 0;
  std::size_t hits = 0;
  for (int scene = 0; scene < 1000; ++scene) {
    const auto c = random_curve(rng);
    const double width = 0.5 + rng.uniform(), margin = rng.uniform();
    std::vector<Vec2> obs;
    for (int k = 0; k < 10; ++k) obs.emplace_back(24 * rng.uniform() - 12, 24 * rng.uniform() - 12);
    std::vector<std::size_t> expected, got;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const auto ref = oracle::dense_nearest(c, obs[k], 20000);
      if (ref.t > 0.0 && ref.t < 1.0 && ref.distance < width + margin) expected.push_back(k);
    }
    for (const auto& h : planner::check_collision(c, obs, width, margin)) got.push_back(h.obstacle);
    bad += got != expected;
    hits += expected.size();
  }
  return {bad == 0, std::to_string(bad) + " differing scenes, " + std::to_string(hits) + " hits total"};
}

// 6 -------------------------------------------------------------------------

Outcome velocity_search() {
  Rng rng(1006);
  int bad = 0, infeasible = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 5);
    std::vector<double> s{0.0};
    for (std::size_t i = 1; i < n; ++i) s.push_back(s.back() + 0.2 + rng.uniform());
    std::vector<double> vmax;
    for (std::size_t i = 0; i < n; ++i) vmax.push_back(rng.uniform() < 0.3 ? kInf : 2.0 * rng.uniform());
    const auto lv = planner::uniform_levels(1.0 + rng.uniform(), 2 + static_cast<std::size_t>(rng.uniform() * 4));
    const double a_max = 0.1 + rng.uniform();
    const double v_start = std::min(vmax[0], lv[static_cast<std::size_t>(rng.uniform() * lv.size())]);
    const planner::VelocityConstraint c{s, vmax};
    const auto p = planner::velocity_graph_search({c}, a_max, lv, v_start);
    const auto ref = oracle::brute_velocity(s, vmax, lv, a_max, v_start);
    bool ok = p.infeasible == !ref.feasible;
    if (ok && ref.feasible) {
      ok = p.v == ref.v;
      for (std::size_t i = 1; i < n && ok; ++i)
        ok = p.v[i] <= vmax[i] + 1e-9 &&
             std::abs(p.v[i] * p.v[i] - p.v[i - 1] * p.v[i - 1]) <= 2 * a_max * (s[i] - s[i - 1]) + 1e-9;
    }
    bad += !ok;
    infeasible += !ref.feasible;
  }
  return {bad == 0, std::to_string(bad) + " mismatches, " + std::to_string(infeasible) + " infeasible instances"};
}

// 7 -------------------------------------------------------------------------

Outcome hungarian() {
  Rng rng(1007);
  int bad = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 6;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = rng.uniform() < 0.2 ? 1.0 : rng.uniform();
    const auto a = perception::solve_assignment(c);
    bad += std::abs(a.total_cost - oracle::min_assignment(c)) > 1e-12;
  }
  return {bad == 0, std::to_string(bad) + " mismatches"};
}

// 8 -------------------------------------------------------------------------

Outcome segmentation() {
  using namespace perception;
  Rng rng(1008);
  int bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool wrap = trial % 2 == 0;
    const std::size_t n = 120 + static_cast<std::size_t>(rng.uniform() * 240);
    LaserScan scan;
    scan.angle_min = -std::numbers::pi;
    scan.angle_increment = wrap ? 2 * std::numbers::pi / static_cast<double>(n) : 0.004 + 0.01 * rng.uniform();
    scan.range_max = 100.0;
    scan.ranges.assign(n, kInf);
    for (std::size_t i = 0; i < n;) {
      const std::size_t len = 1 + static_cast<std::size_t>(rng.uniform() * 25);
      const double base = 2.0 + 40.0 * rng.uniform();
      const bool empty = rng.uniform() < 0.3;
      for (std::size_t k = 0; k < len && i < n; ++k, ++i)
        scan.ranges[i] = empty ? kInf : base + rng.normal(0.0, 0.05 + 0.3 * rng.uniform());
    }
    SegmentationParams q;
    q.base_thresh = 0.1 + 0.5 * rng.uniform();
    q.slope = 0.1 * rng.uniform();
    q.min_points = 1 + static_cast<std::size_t>(rng.uniform() * 4);
    std::vector<std::vector<std::size_t>> got;
    for (const auto& cl : segment_scan(scan, q)) {
      auto idx = cl.indices;
      std::sort(idx.begin(), idx.end());
      got.push_back(idx);
    }
    std::sort(got.begin(), got.end());
    bad += got != oracle::segment_union_find(scan.ranges, scan.angle_min, scan.angle_increment, q.base_thresh,
                                             q.slope, q.min_points);
  }
  return {bad == 0, std::to_string(bad) + " differing scenes"};
}

// 9 -------------------------------------------------------------------------

Outcome pure_pursuit() {
  const auto tr = loops::straight_pursuit(50.0, 2.0, 60.0);
  double settled = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    if (tr.cross_track[i] >= 0.1) settled = tr.t[i];
    peak = std::max(peak, tr.cross_track[i]);
  }
  const bool ok = settled < 60.0 && peak <= 2.0 + 1e-9 && tr.cross_track.back() < 0.1;
  return {ok, "below 0.1 m from t = " + fmt("%.2f", settled) + " s, peak " + fmt("%.3f", peak) + " m"};
}

// 10 ------------------------------------------------------------------------

Outcome two_gates() {
  const auto sc = harness::load_scenario(scenario_path("two_gates"));
  const auto r = harness::run(sc);
  const auto& m = r.metrics;
  bool crossed = m.gates.size() == 2;
  for (const auto& g : m.gates) crossed = crossed && g.crossed;
  const auto out = std::filesystem::temp_directory_path() / "usvnav_acceptance_two_gates";
  const std::string cmd = std::string(USVNAV_CLI) + " run " + scenario_path("two_gates") + " --out " + out.string() +
                          " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  std::filesystem::remove_all(out);
  std::ostringstream d;
  d << "status " << harness::to_string(m.status) << ", gates";
  for (const auto& g : m.gates) d << (g.crossed ? " " + fmt("%.1f", g.t) + " s" : " missed");
  d << ", cli exit " << rc;
  return {m.status == harness::RunStatus::Success && crossed && m.gates_in_order && rc == 0, d.str()};
}

// 11 ------------------------------------------------------------------------

Outcome heartbeat_link() {
  using namespace heartbeat;
  Rng rng(1011);
  int round_trip_bad = 0;
  HeartbeatSentence last;
  for (int i = 0; i < 1000; ++i) {
    HeartbeatSentence s;
    s.date = "081122";
    s.time = "120000";
    s.lat_udeg = static_cast<std::uint32_t>(rng.uniform() * 90e6);
    s.lat_hemi = rng.uniform() < 0.5 ? 'N' : 'S';
    s.lon_udeg = static_cast<std::uint32_t>(rng.uniform() * 180e6);
    s.lon_hemi = rng.uniform() < 0.5 ? 'E' : 'W';
    s.mode = static_cast<SystemMode>(1 + static_cast<int>(rng.uniform() * 3));
    round_trip_bad += !(decode(encode(s)) == s);
    last = s;
  }

  std::string line = encode(last);
  line.resize(line.size() - 2);
  int undetected = 0;
  for (std::size_t i = 0; i < line.size(); ++i)
    for (int b = 0; b < 256; ++b) {
      if (static_cast<char>(b) == line[i]) continue;
      std::string bad = line;
      bad[i] = static_cast<char>(b);
      try {
        decode(bad);
        ++undetected;
      } catch (const DecodeError&) {
      }
    }

  MockServer server;
  bool fragmented_ok = false;
  {
    auto fd = tcp::connect_to("127.0.0.1", server.port());
    tcp::set_nodelay(fd.get());
    const std::string wire = encode(last);
    for (char ch : wire) {
      tcp::send_all(fd.get(), std::string_view(&ch, 1));
      std::this_thread::sleep_for(1ms);
    }
    fragmented_ok = server.wait_for_valid(1, 2s) && server.records().size() == 1 &&
                    server.records()[0].sentence == last;
  }

  MockServer td;
  SnapshotChannel<VehicleSnapshot> channel;
  channel.publish({0.0, 1.0, 2.0, SystemMode::Autonomous});
  ClientConfig cfg;
  cfg.port = td.port();
  cfg.rate_hz = 1.0;
  HeartbeatClient client(cfg, channel);
  client.start();
  std::this_thread::sleep_for(10s);
  client.stop();
  std::size_t valid = 0;
  for (const auto& r : td.records()) valid += r.sentence.has_value();

  const bool ok = round_trip_bad == 0 && undetected == 0 && fragmented_ok && valid >= 9 && valid <= 11;
  return {ok, std::to_string(round_trip_bad) + " round-trip failures, " + std::to_string(undetected) +
                  " undetected corruptions, fragmented line " + (fragmented_ok ? "ok" : "lost") + ", " +
                  std::to_string(valid) + " sentences in 10 s"};
}

// 12 ------------------------------------------------------------------------

Outcome determinism() {
  int differing = 0;
  std::ostringstream d;
  for (const char* name : {"straight_goal", "two_gates", "obstacle_avoidance", "buoy_circle"}) {
    const auto sc = harness::load_scenario(scenario_path(name));
    std::ostringstream a, b;
    harness::write_log_csv(harness::run(sc).rows, a);
    harness::write_log_csv(harness::run(sc).rows, b);
    const bool same = a.str() == b.str();
    differing += !same;
    d << name << (same ? " identical" : " DIFFERS") << "; ";
  }
  std::string s = d.str();
  s.resize(s.size() - 2);
  return {differing == 0, s};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "dynamics residual", 1.0, dynamics_residual},
      {2, "allocation and propeller round trip", 1.0, allocation_round_trip},
      {3, "figure-eight localization rmse < 0.5 m", 10.0, localization_accuracy},
      {4, "newton nearest point vs dense oracle", 30.0, nearest_point},
      {5, "collision hit sets vs dense oracle", 10.0, collision_sets},
      {6, "velocity graph search vs enumeration", 10.0, velocity_search},
      {7, "hungarian vs permutations", 5.0, hungarian},
      {8, "scan segmentation vs union-find", 5.0, segmentation},
      {9, "pure pursuit convergence", 5.0, pure_pursuit},
      {10, "two-gate scenario", 30.0, two_gates},
      {11, "heartbeat codec and link", 15.0, heartbeat_link},
      {12, "scenario determinism", 60.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.ok && in_time;
    failed += !pass;
    std::printf("C%-2d %s  %s: %s (%.2f s / %.0f s%s)\n", c.id, pass ? "PASS" : "FAIL", c.name.c_str(),
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
