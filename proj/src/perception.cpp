#include "usvnav/perception.hpp"

#include "usvnav/assignment.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

namespace usvnav::perception {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double ray_circle(const Circle& c, const Vec2& origin, const Vec2& dir) {
  const Vec2 oc = origin - c.center;
  const double b = oc.dot(dir);
  const double cc = oc.squaredNorm() - c.radius * c.radius;
  const double disc = b * b - cc;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double t1 = -b - sq;
  if (t1 > 0.0) return t1;
  const double t2 = -b + sq;
  return t2 > 0.0 ? t2 : kInf;
}

double ray_polygon(const Polygon& poly, const Vec2& origin, const Vec2& dir) {
  double best = kInf;
  const std::size_t n = poly.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly.vertices[i];
    const Vec2& b = poly.vertices[(i + 1) % n];
    const Vec2 e = b - a;
    const double denom = cross(dir, e);
    if (denom == 0.0) continue;
    const Vec2 ao = a - origin;
    const double t = cross(ao, e) / denom;
    const double s = cross(ao, dir) / denom;
    if (t > 0.0 && s >= 0.0 && s <= 1.0) best = std::min(best, t);
  }
  return best;
}

bool inside_polygon(const Polygon& poly, const Vec2& p) {
  bool inside = false;
  const std::size_t n = poly.vertices.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly.vertices[i];
    const Vec2& b = poly.vertices[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

Vec2 to_camera_plane(const Vec2& body, const CameraModel& cam) {
  // x forward, y left in the camera's horizontal frame.
  return rotate(body - Vec2(cam.mount_x, cam.mount_y), -cam.mount_yaw);
}

bool joins(const LaserScan& scan, std::size_t i, std::size_t j, const SegmentationParams& p) {
  const double gap = (scan.point(i) - scan.point(j)).norm();
  return gap < p.base_thresh + p.slope * std::min(scan.ranges[i], scan.ranges[j]);
}

// Visible front arc of a circle as seen from the camera centre, in body frame.
std::vector<Vec2> silhouette(const Vec2& center, double radius, const CameraModel& cam) {
  const Vec2 eye(cam.mount_x, cam.mount_y);
  const Vec2 to_eye = eye - center;
  const double d = to_eye.norm();
  if (d <= radius) return {};
  const Vec2 e = to_eye / d;
  const double gamma = std::acos(radius / d);
  constexpr int kSamples = 17;
  std::vector<Vec2> pts;
  pts.reserve(kSamples);
  for (int k = 0; k < kSamples; ++k) {
    const double phi = -gamma + 2.0 * gamma * k / (kSamples - 1);
    pts.push_back(center + radius * rotate(e, phi));
  }
  return pts;
}

}  // namespace

double clearance(const World& world, const Vec2& p) {
  double best = kInf;
  for (const auto& c : world.circles) best = std::min(best, (p - c.center).norm() - c.radius);
  for (const auto& b : world.buoys)
    best = std::min(best, (p - b.shape.center).norm() - b.shape.radius);
  for (const auto& poly : world.polygons) {
    double d = kInf;
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0; i < n; ++i)
      d = std::min(d, point_segment_distance(p, poly.vertices[i], poly.vertices[(i + 1) % n]));
    best = std::min(best, inside_polygon(poly, p) ? -d : d);
  }
  return best;
}

double ray_cast(const World& world, const Vec2& origin, const Vec2& dir, double max_range) {
  double best = kInf;
  for (const auto& c : world.circles) best = std::min(best, ray_circle(c, origin, dir));
  for (const auto& b : world.buoys) best = std::min(best, ray_circle(b.shape, origin, dir));
  for (const auto& poly : world.polygons) best = std::min(best, ray_polygon(poly, origin, dir));
  return best <= max_range ? best : kInf;
}

// ---------------------------------------------------------------------------

bool LaserScan::valid(std::size_t i) const { return std::isfinite(ranges[i]); }

Vec2 LaserScan::point(std::size_t i) const {
  const double a = angle(i);
  return {ranges[i] * std::cos(a), ranges[i] * std::sin(a)};
}

bool LaserScan::wraps() const {
  return std::abs(angle_increment * static_cast<double>(ranges.size()) - 2.0 * std::numbers::pi) <
         1e-6;
}

void LaserScan::validate() const {
  if (!(angle_increment > 0.0)) throw std::invalid_argument("scan: angle_increment must be > 0");
  if (ranges.size() < 2) throw std::invalid_argument("scan: needs at least 2 ranges");
  if (!(range_max > 0.0)) throw std::invalid_argument("scan: range_max must be > 0");
  for (double r : ranges) {
    if (std::isnan(r)) throw std::invalid_argument("scan: NaN range");
    if (std::isfinite(r) && !(r > 0.0 && r <= range_max))
      throw std::invalid_argument("scan: range outside (0, range_max]");
    if (std::isinf(r) && r < 0.0) throw std::invalid_argument("scan: negative infinite range");
  }
}

LaserScan simulate_lidar(const World& world, const Pose2D& pose, const ScanGeometry& geometry,
                         double noise_sigma, Rng& rng, double timestamp) {
  if (!(geometry.angle_increment > 0.0) || geometry.count < 2 || !(geometry.range_max > 0.0))
    throw std::invalid_argument("simulate_lidar: invalid scan geometry");
  LaserScan scan;
  scan.angle_min = geometry.angle_min;
  scan.angle_increment = geometry.angle_increment;
  scan.range_max = geometry.range_max;
  scan.timestamp = timestamp;
  scan.ranges.resize(geometry.count);
  const Vec2 origin = pose.position();
  for (std::size_t i = 0; i < geometry.count; ++i) {
    const double a = pose.psi + scan.angle(i);
    double r = ray_cast(world, origin, Vec2(std::cos(a), std::sin(a)), geometry.range_max);
    if (std::isfinite(r) && noise_sigma > 0.0)
      r = std::clamp(r + rng.normal(0.0, noise_sigma), 1e-3, geometry.range_max);
    scan.ranges[i] = r;
  }
  return scan;
}

LaserScan simulate_lidar(const World& world, const Pose2D& pose, const ScanGeometry& geometry,
                         double noise_sigma, std::uint64_t seed, double timestamp) {
  Rng rng(seed);
  return simulate_lidar(world, pose, geometry, noise_sigma, rng, timestamp);
}

LaserScan filter_outliers(const LaserScan& scan, int k, double dist_thresh) {
  if (k < 1) throw std::invalid_argument("filter_outliers: k must be >= 1");
  LaserScan out = scan;
  const auto n = static_cast<long>(scan.ranges.size());
  const bool wraps = scan.wraps();
  for (long i = 0; i < n; ++i) {
    if (!scan.valid(static_cast<std::size_t>(i))) continue;
    bool supported = false;
    for (long off = -k; off <= k && !supported; ++off) {
      if (off == 0) continue;
      long j = i + off;
      if (wraps) j = ((j % n) + n) % n;
      if (j < 0 || j >= n || j == i) continue;
      const double rj = scan.ranges[static_cast<std::size_t>(j)];
      supported = std::isfinite(rj) && std::abs(rj - scan.ranges[static_cast<std::size_t>(i)]) <= dist_thresh;
    }
    if (!supported) out.ranges[static_cast<std::size_t>(i)] = kInf;
  }
  return out;
}

std::vector<Cluster> segment_scan(const LaserScan& scan, const SegmentationParams& params) {
  const std::size_t n = scan.ranges.size();
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    if (!scan.valid(i)) continue;
    if (i > 0 && scan.valid(i - 1) && joins(scan, i - 1, i, params))
      groups.back().push_back(i);
    else
      groups.push_back({i});
  }
  // Close the ring when the scan covers a full revolution.
  if (scan.wraps() && groups.size() > 1 && groups.front().front() == 0 &&
      groups.back().back() == n - 1 && joins(scan, n - 1, 0, params)) {
    std::vector<std::size_t> merged = std::move(groups.back());
    merged.insert(merged.end(), groups.front().begin(), groups.front().end());
    groups.front() = std::move(merged);
    groups.pop_back();
  }

  std::vector<Cluster> clusters;
  for (auto& g : groups) {
    if (g.size() < params.min_points) continue;
    Cluster c;
    c.indices = std::move(g);
    for (std::size_t i : c.indices) {
      c.points.push_back(scan.point(i));
      c.centroid += c.points.back();
    }
    c.centroid /= static_cast<double>(c.points.size());
    clusters.push_back(std::move(c));
  }
  return clusters;
}

// ---------------------------------------------------------------------------

CameraModel CameraModel::from_diagonal_fov(int width, int height, double diag_fov) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  const double diag = std::hypot(width, height);
  cam.fx = cam.fy = 0.5 * diag / std::tan(0.5 * diag_fov);
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.hfov = 2.0 * std::atan(0.5 * width / cam.fx);
  return cam;
}

void CameraModel::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw std::invalid_argument("camera: fx, fy must be > 0");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: image size must be > 0");
  if (std::abs(hfov - 2.0 * std::atan(0.5 * width / fx)) > 1e-6)
    throw std::invalid_argument("camera: hfov inconsistent with width / fx");
}

std::optional<BBox> project_points(const std::vector<Vec2>& points, const CameraModel& cam,
                                   double object_height) {
  constexpr double kNear = 0.05;
  double u_min = kInf, u_max = -kInf, z_min = kInf;
  for (const Vec2& p : points) {
    const Vec2 c = to_camera_plane(p, cam);
    const double z = c.x();
    const double x = -c.y();
    if (z <= kNear || std::abs(std::atan2(x, z)) > 0.5 * cam.hfov) continue;
    const double u = cam.fx * x / z + cam.cx;
    u_min = std::min(u_min, u);
    u_max = std::max(u_max, u);
    z_min = std::min(z_min, z);
  }
  if (!std::isfinite(z_min)) return std::nullopt;

  // The object spans [0, object_height] above the scan plane; the nearest
  // point gives the largest vertical extent.
  const double y_top = cam.mount_z - object_height;
  const double y_bottom = cam.mount_z;
  BBox box;
  box.x_min = u_min;
  box.x_max = u_max;
  box.y_min = cam.fy * std::min(y_top, y_bottom) / z_min + cam.cy;
  box.y_max = cam.fy * std::max(y_top, y_bottom) / z_min + cam.cy;
  if (box.width() < 1.0) {
    const double mid = 0.5 * (box.x_min + box.x_max);
    box.x_min = mid - 0.5;
    box.x_max = mid + 0.5;
  }
  box.x_min = std::clamp(box.x_min, 0.0, static_cast<double>(cam.width));
  box.x_max = std::clamp(box.x_max, 0.0, static_cast<double>(cam.width));
  box.y_min = std::clamp(box.y_min, 0.0, static_cast<double>(cam.height));
  box.y_max = std::clamp(box.y_max, 0.0, static_cast<double>(cam.height));
  if (!box.valid()) return std::nullopt;
  return box;
}

std::optional<BBox> project_cluster(const Cluster& cluster, const CameraModel& cam,
                                    double object_height) {
  return project_points(cluster.points, cam, object_height);
}

double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

MatchResult match_detections(const std::vector<BBox>& cluster_boxes,
                             const std::vector<Detection>& detections, double iou_gate) {
  if (!(iou_gate > 0.0 && iou_gate < 1.0))
    throw std::invalid_argument("match_detections: iou_gate must be in (0, 1)");
  const std::size_t m = cluster_boxes.size();
  const std::size_t n = detections.size();
  const std::size_t size = std::max(m, n);
  const double gate_cost = 1.0 - iou_gate;

  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(size),
                                                   static_cast<Eigen::Index>(size), gate_cost);
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                                  static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      overlap(ii, jj) = iou(cluster_boxes[i], detections[j].bbox);
      cost(ii, jj) = std::min(1.0 - overlap(ii, jj), gate_cost);
    }
  }

  MatchResult out;
  std::vector<bool> cluster_used(m, false), det_used(n, false);
  if (size > 0) {
    const Assignment a = solve_assignment(cost);
    for (std::size_t i = 0; i < m; ++i) {
      const auto j = static_cast<std::size_t>(a.col_of_row[i]);
      if (j >= n) continue;
      const double ov = overlap(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (ov < iou_gate) continue;
      out.pairs.push_back({i, j, 1.0 - ov});
      cluster_used[i] = true;
      det_used[j] = true;
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    if (!cluster_used[i]) out.unmatched_clusters.push_back(i);
  for (std::size_t j = 0; j < n; ++j)
    if (!det_used[j]) out.unmatched_detections.push_back(j);
  return out;
}

std::vector<Detection> simulate_camera_detections(const std::vector<Buoy>& buoys,
                                                  const CameraModel& cam, const Pose2D& pose,
                                                  const CameraSimParams& params, Rng& rng) {
  if (!(params.miss_rate >= 0.0 && params.miss_rate <= 1.0))
    throw std::invalid_argument("simulate_camera_detections: miss_rate must be in [0, 1]");
  std::vector<Detection> out;
  for (const Buoy& buoy : buoys) {
    const Vec2 center = pose.to_body(buoy.shape.center);
    const auto box = project_points(silhouette(center, buoy.shape.radius, cam), cam,
                                    params.object_height);
    if (!box) continue;
    if (rng.uniform() < params.miss_rate) continue;
    BBox b = *box;
    if (params.bbox_jitter_px > 0.0) {
      const double s = params.bbox_jitter_px;
      double x0 = b.x_min + rng.normal(0.0, s), x1 = b.x_max + rng.normal(0.0, s);
      double y0 = b.y_min + rng.normal(0.0, s), y1 = b.y_max + rng.normal(0.0, s);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      b = {std::clamp(x0, 0.0, cam.width - 1.0), std::clamp(y0, 0.0, cam.height - 1.0),
           std::clamp(x1, 0.0, static_cast<double>(cam.width)),
           std::clamp(y1, 0.0, static_cast<double>(cam.height))};
      b.x_max = std::max(b.x_max, b.x_min + 1.0);
      b.y_max = std::max(b.y_max, b.y_min + 1.0);
    }
    out.push_back({buoy.label, 1.0 - params.miss_rate, b});
  }
  return out;
}

std::vector<Detection> simulate_camera_detections(const std::vector<Buoy>& buoys,
                                                  const CameraModel& cam, const Pose2D& pose,
                                                  const CameraSimParams& params,
                                                  std::uint64_t seed) {
  Rng rng(seed);
  return simulate_camera_detections(buoys, cam, pose, params, rng);
}

FusionResult fuse(const std::vector<Cluster>& clusters, const std::vector<Detection>& detections,
                  const CameraModel& cam, double iou_gate, double object_height) {
  std::vector<BBox> boxes;
  std::vector<std::size_t> box_owner;
  std::vector<bool> matched(clusters.size(), false);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (auto b = project_cluster(clusters[i], cam, object_height)) {
      boxes.push_back(*b);
      box_owner.push_back(i);
    }
  }
  const MatchResult m = match_detections(boxes, detections, iou_gate);

  FusionResult out;
  for (const Match& p : m.pairs) {
    const std::size_t cid = box_owner[p.cluster];
    matched[cid] = true;
    out.objects.push_back(
        {detections[p.detection].label, clusters[cid].centroid, cid, p.detection, 0, p.cost});
  }
  std::sort(out.objects.begin(), out.objects.end(),
            [](const FusedObject& a, const FusedObject& b) { return a.cluster_id < b.cluster_id; });
  for (std::size_t i = 0; i < clusters.size(); ++i)
    if (!matched[i]) out.unmatched_clusters.push_back(i);
  out.unmatched_detections = m.unmatched_detections;
  return out;
}

FusionResult fuse_cameras(const std::vector<Cluster>& clusters,
                          const std::vector<CameraFrame>& frames, double iou_gate,
                          double object_height) {
  std::map<std::size_t, FusedObject> best;
  for (std::size_t c = 0; c < frames.size(); ++c) {
    FusionResult r = fuse(clusters, frames[c].detections, frames[c].camera, iou_gate, object_height);
    for (FusedObject& o : r.objects) {
      o.camera_id = c;
      auto it = best.find(o.cluster_id);
      if (it == best.end() || o.cost < it->second.cost) best[o.cluster_id] = o;
    }
  }
  FusionResult out;
  for (auto& [id, obj] : best) out.objects.push_back(obj);
  for (std::size_t i = 0; i < clusters.size(); ++i)
    if (!best.contains(i)) out.unmatched_clusters.push_back(i);
  return out;
}

}  // namespace usvnav::perception
