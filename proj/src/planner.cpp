#include "usvnav/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace usvnav::planner {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

void check_t(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("hermite: t outside [0, 1]");
}

NearestPoint describe(const HermiteCurve& c, const Vec2& q, double t, bool fallback) {
  const Vec2 diff = q - c.at(t);
  const double lat_sign = cross(c.d1(t), diff) >= 0.0 ? 1.0 : -1.0;
  const double d = diff.norm();
  return {t, d, lat_sign * d, fallback};
}

}  // namespace

void HermiteCurve::validate() const {
  if (!(m0.norm() > 0.0 && m1.norm() > 0.0))
    throw std::invalid_argument("hermite: endpoint tangents must be non-zero");
}

Vec2 HermiteCurve::at(double t) const {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * p1 +
         (t3 - t2) * m1;
}

Vec2 HermiteCurve::d1(double t) const {
  const double t2 = t * t;
  return (6 * t2 - 6 * t) * p0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * p1 +
         (3 * t2 - 2 * t) * m1;
}

Vec2 HermiteCurve::d2(double t) const {
  return (12 * t - 6) * p0 + (6 * t - 4) * m0 + (-12 * t + 6) * p1 + (6 * t - 2) * m1;
}

Vec2 hermite_eval(const HermiteCurve& c, double t) {
  check_t(t);
  return c.at(t);
}

Vec2 hermite_tangent(const HermiteCurve& c, double t) {
  check_t(t);
  return c.d1(t);
}

HermiteCurve plan_path(const Pose2D& start, const Pose2D& goal) {
  const Vec2 p0 = start.position();
  const Vec2 p1 = goal.position();
  const double chord = (p1 - p0).norm();
  if (!(chord > 0.0)) throw std::invalid_argument("plan_path: start and goal coincide");
  return {p0, p1, chord * Vec2(std::cos(start.psi), std::sin(start.psi)),
          chord * Vec2(std::cos(goal.psi), std::sin(goal.psi))};
}

std::vector<HermiteCurve> catmull_rom(const std::vector<Vec2>& pts) {
  if (pts.size() < 2) throw std::invalid_argument("catmull_rom: needs at least 2 points");
  const std::size_t n = pts.size();
  std::vector<Vec2> m(n);
  m[0] = pts[1] - pts[0];
  m[n - 1] = pts[n - 1] - pts[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) m[i] = 0.5 * (pts[i + 1] - pts[i - 1]);
  std::vector<HermiteCurve> out;
  for (std::size_t i = 0; i + 1 < n; ++i) out.push_back({pts[i], pts[i + 1], m[i], m[i + 1]});
  return out;
}

std::optional<double> newton_project(const HermiteCurve& c, const Vec2& q, double t0) {
  double t = std::clamp(t0, 0.0, 1.0);
  for (int it = 0; it < 30; ++it) {
    const Vec2 diff = c.at(t) - q;
    const Vec2 d1 = c.d1(t);
    const double g = diff.dot(d1);
    if (std::abs(g) < 1e-10) return t;
    // Stuck against a bound with the gradient pointing outward.
    if ((t == 0.0 && g > 0.0) || (t == 1.0 && g < 0.0)) return t;
    const double gp = d1.squaredNorm() + diff.dot(c.d2(t));
    double next;
    if (gp > 1e-12) {
      next = std::clamp(t - g / gp, 0.0, 1.0);
    } else {
      // Concave region: move downhill by a fixed fraction instead.
      next = std::clamp(t - std::copysign(0.05, g), 0.0, 1.0);
    }
    if (std::abs(next - t) < 1e-15) return next;
    t = next;
  }
  return std::nullopt;
}

NearestPoint nearest_point_newton(const HermiteCurve& c, const Vec2& q) {
  double best_t = 0.0;
  double best_d2 = kInf;
  bool any = false;
  const auto consider = [&](double t) {
    const double d2 = (c.at(t) - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_t = t;
    }
  };
  constexpr int kSeeds = 8;
  for (int k = 0; k < kSeeds; ++k) {
    if (auto t = newton_project(c, q, static_cast<double>(k) / (kSeeds - 1))) {
      any = true;
      consider(*t);
    }
  }
  if (any) {
    consider(0.0);
    consider(1.0);
    return describe(c, q, best_t, false);
  }
  constexpr int kDense = 4000;
  for (int k = 0; k <= kDense; ++k) consider(static_cast<double>(k) / kDense);
  return describe(c, q, best_t, true);
}

std::vector<Hit> check_collision(const HermiteCurve& c, const std::vector<Vec2>& obstacles,
                                 double width, double margin) {
  if (!(width >= 0.0 && margin >= 0.0))
    throw std::invalid_argument("check_collision: width and margin must be >= 0");
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const NearestPoint np = nearest_point_newton(c, obstacles[i]);
    if (np.t > 0.0 && np.t < 1.0 && np.distance < width + margin)
      hits.push_back({i, np.t, np.distance, np.lateral});
  }
  return hits;
}

std::optional<WaypointPlan> local_waypoint_search(const Pose2D& start, const Pose2D& goal,
                                                  const std::vector<Vec2>& obstacles, double width,
                                                  double margin, const std::vector<Vec2>& offsets) {
  if (offsets.empty() || offsets.front() != Vec2::Zero())
    throw std::invalid_argument("local_waypoint_search: offsets must start with (0, 0)");
  std::vector<Vec2> ordered = offsets;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Vec2& a, const Vec2& b) { return a.norm() < b.norm(); });
  for (const Vec2& off : ordered) {
    const Pose2D candidate{goal.x + off.x(), goal.y + off.y(), goal.psi};
    if (candidate.position() == start.position()) continue;
    HermiteCurve curve = plan_path(start, candidate);
    if (check_collision(curve, obstacles, width, margin).empty()) return WaypointPlan{curve, off};
  }
  return std::nullopt;
}

std::vector<Vec2> offset_grid(double spacing, double extent) {
  if (!(spacing > 0.0)) throw std::invalid_argument("offset_grid: spacing must be > 0");
  std::vector<Vec2> out{Vec2::Zero()};
  const int n = static_cast<int>(std::floor(extent / spacing + 1e-9));
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      if (i != 0 || j != 0) out.emplace_back(i * spacing, j * spacing);
  return out;
}

// ---------------------------------------------------------------------------

SampledPath sample_path(const HermiteCurve& c, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("sample_path: spacing must be > 0");
  constexpr int kTable = 2000;
  std::vector<double> ts(kTable + 1), ss(kTable + 1);
  ss[0] = 0.0;
  Vec2 prev = c.at(0.0);
  for (int k = 0; k <= kTable; ++k) {
    ts[k] = static_cast<double>(k) / kTable;
    if (k > 0) {
      const Vec2 p = c.at(ts[k]);
      ss[k] = ss[k - 1] + (p - prev).norm();
      prev = p;
    }
  }
  const double total = ss.back();
  SampledPath path;
  std::size_t j = 0;
  for (int k = 0;; ++k) {
    double s = k * spacing;
    const bool last = s >= total - 1e-9;
    if (last) s = total;
    while (j + 1 < ss.size() && ss[j + 1] < s) ++j;
    double t = 1.0;
    if (!last) {
      const double span = ss[j + 1] - ss[j];
      const double frac = span > 0.0 ? (s - ss[j]) / span : 0.0;
      t = ts[j] + frac * (ts[j + 1] - ts[j]);
    }
    path.s.push_back(s);
    path.t.push_back(t);
    path.points.push_back(c.at(t));
    if (last) break;
  }
  return path;
}

double arc_length_at(const SampledPath& path, double t) {
  if (path.empty()) return 0.0;
  if (t <= path.t.front()) return path.s.front();
  if (t >= path.t.back()) return path.s.back();
  const auto it = std::upper_bound(path.t.begin(), path.t.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - path.t.begin());
  const double frac = (t - path.t[i - 1]) / (path.t[i] - path.t[i - 1]);
  return path.s[i - 1] + frac * (path.s[i] - path.s[i - 1]);
}

// ---------------------------------------------------------------------------

void VelocityConstraint::validate() const {
  if (s.size() != v_max.size() || s.empty())
    throw std::invalid_argument("velocity constraint: stations and speeds must match");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1])) throw std::invalid_argument("velocity constraint: stations must increase");
  for (double v : v_max)
    if (!(v >= 0.0)) throw std::invalid_argument("velocity constraint: speeds must be >= 0");
}

double VelocityProfile::speed_at(double query) const {
  if (v.empty()) return 0.0;
  const auto it = std::upper_bound(s.begin(), s.end(), query);
  if (it == s.end()) return v.back();
  return v[static_cast<std::size_t>(it - s.begin())];
}

VelocityConstraint stop_planner(const std::vector<double>& stations, double v_cruise,
                                double a_dec) {
  if (!(a_dec > 0.0)) throw std::invalid_argument("stop_planner: a_dec must be > 0");
  VelocityConstraint out{stations, {}};
  const double total = stations.empty() ? 0.0 : stations.back();
  for (double s : stations)
    out.v_max.push_back(std::min(v_cruise, std::sqrt(2.0 * a_dec * std::max(0.0, total - s))));
  return out;
}

VelocityConstraint obstacle_planner(const HermiteCurve& c, const SampledPath& path,
                                    const std::vector<Vec2>& obstacles, double width,
                                    double margin, double standoff, double a_dec) {
  if (!(a_dec > 0.0)) throw std::invalid_argument("obstacle_planner: a_dec must be > 0");
  VelocityConstraint out{path.s, std::vector<double>(path.s.size(), kInf)};
  const std::vector<Hit> hits = check_collision(c, obstacles, width, margin);
  if (hits.empty()) return out;
  double s_hit = kInf;
  for (const Hit& h : hits) s_hit = std::min(s_hit, arc_length_at(path, h.t));
  for (std::size_t i = 0; i < path.s.size(); ++i)
    out.v_max[i] = std::sqrt(2.0 * a_dec * std::max(0.0, s_hit - standoff - path.s[i]));
  return out;
}

VelocityConstraint curve_planner(const SampledPath& path, double omega_max, double v_cruise) {
  if (!(omega_max > 0.0)) throw std::invalid_argument("curve_planner: omega_max must be > 0");
  constexpr double kEps = 1e-9;
  const std::size_t n = path.points.size();
  std::vector<double> kappa(n, 0.0);
  // Heading of each chord; curvature at interior stations is the heading
  // change over the arc length between the neighbouring chord midpoints.
  std::vector<double> heading;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec2 d = path.points[i + 1] - path.points[i];
    heading.push_back(std::atan2(d.y(), d.x()));
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double ds = 0.5 * (path.s[i + 1] - path.s[i - 1]);
    if (ds > 0.0) kappa[i] = std::abs(wrap_angle(heading[i] - heading[i - 1])) / ds;
  }
  if (n >= 3) {
    kappa[0] = kappa[1];
    kappa[n - 1] = kappa[n - 2];
  }
  VelocityConstraint out{path.s, {}};
  for (double k : kappa) out.v_max.push_back(std::min(v_cruise, omega_max / std::max(k, kEps)));
  return out;
}

VelocityConstraint merge_constraints(const std::vector<VelocityConstraint>& constraints) {
  if (constraints.empty()) throw std::invalid_argument("merge_constraints: nothing to merge");
  VelocityConstraint out = constraints.front();
  for (std::size_t c = 1; c < constraints.size(); ++c) {
    if (constraints[c].s != out.s)
      throw std::invalid_argument("merge_constraints: station mismatch");
    for (std::size_t i = 0; i < out.v_max.size(); ++i)
      out.v_max[i] = std::min(out.v_max[i], constraints[c].v_max[i]);
  }
  return out;
}

std::vector<double> uniform_levels(double v_cruise, std::size_t count) {
  if (count < 2) throw std::invalid_argument("uniform_levels: need at least 2 levels");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = v_cruise * static_cast<double>(k) / static_cast<double>(count - 1);
  return out;
}

VelocityProfile velocity_graph_search(const std::vector<VelocityConstraint>& constraints,
                                      double a_max, const std::vector<double>& v_levels,
                                      double v_start) {
  constexpr double kTol = 1e-9;
  const VelocityConstraint merged = merge_constraints(constraints);
  merged.validate();
  if (!(a_max > 0.0)) throw std::invalid_argument("velocity_graph_search: a_max must be > 0");
  if (std::find(v_levels.begin(), v_levels.end(), 0.0) == v_levels.end())
    throw std::invalid_argument("velocity_graph_search: levels must include 0");
  if (!(v_start >= 0.0) || v_start > merged.v_max.front() + kTol)
    throw std::invalid_argument("velocity_graph_search: v_start violates the first constraint");

  std::vector<double> levels = v_levels;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  const std::size_t n = merged.s.size();
  const std::size_t nl = levels.size();
  VelocityProfile out;
  out.s = merged.s;
  if (n == 1) {
    out.v = {v_start};
    return out;
  }

  const auto edge_ok = [&](double vi, double vj, double ds) {
    return std::abs(vj * vj - vi * vi) <= 2.0 * a_max * ds + kTol;
  };
  // best[i][k]: maximal speed sum over stations i..n-1 when station i runs at
  // levels[k]; -inf marks pruned nodes.
  std::vector<std::vector<double>> best(n, std::vector<double>(nl, -kInf));
  for (std::size_t k = 0; k < nl; ++k)
    if (levels[k] <= merged.v_max[n - 1] + kTol) best[n - 1][k] = levels[k];
  for (std::size_t i = n - 1; i-- > 1;) {
    const double ds = merged.s[i + 1] - merged.s[i];
    for (std::size_t k = 0; k < nl; ++k) {
      if (levels[k] > merged.v_max[i] + kTol) continue;
      double tail = -kInf;
      for (std::size_t k2 = 0; k2 < nl; ++k2)
        if (best[i + 1][k2] > -kInf && edge_ok(levels[k], levels[k2], ds))
          tail = std::max(tail, best[i + 1][k2]);
      if (tail > -kInf) best[i][k] = levels[k] + tail;
    }
  }

  // Forward reconstruction with tie-break towards the higher speed.
  out.v.push_back(v_start);
  double v_prev = v_start;
  for (std::size_t i = 1; i < n; ++i) {
    const double ds = merged.s[i] - merged.s[i - 1];
    double target = -kInf;
    for (std::size_t k = 0; k < nl; ++k)
      if (best[i][k] > -kInf && edge_ok(v_prev, levels[k], ds)) target = std::max(target, best[i][k]);
    if (target == -kInf) {
      out.v.assign(n, 0.0);
      out.infeasible = true;
      return out;
    }
    std::size_t pick = 0;
    for (std::size_t k = nl; k-- > 0;) {
      if (best[i][k] > -kInf && edge_ok(v_prev, levels[k], ds) && best[i][k] >= target - kTol) {
        pick = k;
        break;
      }
    }
    out.v.push_back(levels[pick]);
    v_prev = levels[pick];
  }
  return out;
}

}  // namespace usvnav::planner
