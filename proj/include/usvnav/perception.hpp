// Simulated lidar and camera sensing, plus the lidar-camera fusion pipeline:
// outlier filtering, adaptive scan segmentation, cluster projection into the
// image, and IoU-based Hungarian matching against labeled detections.
#pragma once

#include "usvnav/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace usvnav::perception {

// ---------------------------------------------------------------------------
// World description

struct Circle {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
};

/// Simple polygon, vertices in order (either winding).
struct Polygon {
  std::vector<Vec2> vertices;
};

struct Buoy {
  std::string label;  // e.g. "red", "green", "white"
  Circle shape;
};

struct World {
  std::vector<Circle> circles;
  std::vector<Polygon> polygons;
  std::vector<Buoy> buoys;
};

/// Distance from p to the surface of the nearest world object (negative
/// inside a circle). +inf for an empty world.
double clearance(const World& world, const Vec2& p);

/// Nearest hit distance of the ray origin + t * dir (|dir| = 1, t > 0),
/// +inf when nothing is hit within max_range.
double ray_cast(const World& world, const Vec2& origin, const Vec2& dir, double max_range);

// ---------------------------------------------------------------------------
// Lidar

struct ScanGeometry {
  double angle_min = -3.14159265358979323846;
  double angle_increment = 2.0 * 3.14159265358979323846 / 1440.0;
  std::size_t count = 1440;
  double range_max = 60.0;
};

struct LaserScan {
  double angle_min = 0.0;
  double angle_increment = 0.0;
  double range_max = 0.0;
  std::vector<double> ranges;  // +inf means no return
  double timestamp = 0.0;

  double angle(std::size_t i) const { return angle_min + angle_increment * static_cast<double>(i); }
  bool valid(std::size_t i) const;
  /// Body-frame point of sample i. Only meaningful for valid samples.
  Vec2 point(std::size_t i) const;
  /// True when the beams cover a full revolution so the last and first
  /// samples are angular neighbours.
  bool wraps() const;
  /// Throws std::invalid_argument on a broken invariant.
  void validate() const;
};

/// Casts every beam from the given pose. Noise is additive Gaussian on range;
/// noisy ranges are clamped into (0, range_max].
LaserScan simulate_lidar(const World& world, const Pose2D& pose, const ScanGeometry& geometry,
                         double noise_sigma, Rng& rng, double timestamp = 0.0);
LaserScan simulate_lidar(const World& world, const Pose2D& pose, const ScanGeometry& geometry,
                         double noise_sigma, std::uint64_t seed, double timestamp = 0.0);

/// Replaces isolated returns with +inf. A return is isolated when none of
/// its k angular neighbours on either side lies within dist_thresh in range.
LaserScan filter_outliers(const LaserScan& scan, int k, double dist_thresh);

struct SegmentationParams {
  double base_thresh = 0.3;  // [m]
  double slope = 0.05;       // [m per m of range]
  std::size_t min_points = 2;
};

struct Cluster {
  std::vector<std::size_t> indices;  // contiguous, possibly wrapping
  std::vector<Vec2> points;          // body frame
  Vec2 centroid = Vec2::Zero();
};

/// Breakpoint segmentation: neighbouring valid samples i, j join when the
/// gap between their points is below base_thresh + slope * min(r_i, r_j).
std::vector<Cluster> segment_scan(const LaserScan& scan, const SegmentationParams& params = {});

// ---------------------------------------------------------------------------
// Camera

struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
};

/// Pinhole camera looking along mount_yaw in the body frame. Camera axes:
/// Z forward, X right, Y down. mount_z is the height of the optical centre
/// above the scan plane.
struct CameraModel {
  double fx = 424.0;
  double fy = 424.0;
  double cx = 640.0;
  double cy = 360.0;
  int width = 1280;
  int height = 720;
  double mount_x = 0.0;
  double mount_y = 0.0;
  double mount_z = 1.5;
  double mount_yaw = 0.0;
  double hfov = 0.0;  // derived from width and fx

  /// Builds intrinsics for a centred principal point from a diagonal FOV.
  static CameraModel from_diagonal_fov(int width, int height, double diag_fov);
  void validate() const;
};

struct Detection {
  std::string label;
  double prob = 1.0;
  BBox bbox;
};

/// Projects body-frame points standing on the scan plane with the given
/// vertical extent; returns the clipped image hull or nullopt when no point
/// is in front of the camera and inside the horizontal FOV.
std::optional<BBox> project_points(const std::vector<Vec2>& points, const CameraModel& cam,
                                   double object_height);

std::optional<BBox> project_cluster(const Cluster& cluster, const CameraModel& cam,
                                    double object_height = 1.0);

double iou(const BBox& a, const BBox& b);

struct Match {
  std::size_t cluster = 0;
  std::size_t detection = 0;
  double cost = 0.0;  // 1 - IoU
};

struct MatchResult {
  std::vector<Match> pairs;
  std::vector<std::size_t> unmatched_clusters;
  std::vector<std::size_t> unmatched_detections;
};

/// Hungarian assignment on cost 1 - IoU. The matrix is padded to square with
/// dummies at the gate cost, and real costs are capped at the gate cost, so
/// leaving an item unmatched is never worse than a sub-gate pairing. Pairs
/// with IoU below iou_gate are reported unmatched.
MatchResult match_detections(const std::vector<BBox>& cluster_boxes,
                             const std::vector<Detection>& detections, double iou_gate);

struct CameraSimParams {
  double miss_rate = 0.0;
  double bbox_jitter_px = 0.0;
  double object_height = 1.0;
};

/// Stand-in for a learned detector: every visible buoy yields its exact
/// projected silhouette box, jittered, unless dropped with miss_rate.
std::vector<Detection> simulate_camera_detections(const std::vector<Buoy>& buoys,
                                                  const CameraModel& cam, const Pose2D& pose,
                                                  const CameraSimParams& params, Rng& rng);
std::vector<Detection> simulate_camera_detections(const std::vector<Buoy>& buoys,
                                                  const CameraModel& cam, const Pose2D& pose,
                                                  const CameraSimParams& params,
                                                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Fusion

struct FusedObject {
  std::string label;
  Vec2 position = Vec2::Zero();  // body frame
  std::size_t cluster_id = 0;
  std::size_t detection_id = 0;
  std::size_t camera_id = 0;
  double cost = 0.0;
};

struct FusionResult {
  std::vector<FusedObject> objects;
  std::vector<std::size_t> unmatched_clusters;
  std::vector<std::size_t> unmatched_detections;
};

FusionResult fuse(const std::vector<Cluster>& clusters, const std::vector<Detection>& detections,
                  const CameraModel& cam, double iou_gate, double object_height = 1.0);

struct CameraFrame {
  CameraModel camera;
  std::vector<Detection> detections;
};

/// Fuses against several cameras. A cluster matched in more than one camera
/// keeps its lowest-cost match. unmatched_detections is not populated.
FusionResult fuse_cameras(const std::vector<Cluster>& clusters,
                          const std::vector<CameraFrame>& frames, double iou_gate,
                          double object_height = 1.0);

}  // namespace usvnav::perception
