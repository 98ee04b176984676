#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "georeg/geometry.hpp"
#include "georeg/raster.hpp"

namespace georeg {

// Camera-to-world pose; the camera looks along its +z axis (x right, y down).
struct CameraPose {
  std::string id;
  Vec3 center = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();

  Vec3 viewing_direction() const { return orientation.col(2); }
};

// Cameras file: [{"id", "center_xyz": [x,y,z], "rotation_quaternion_wxyz": [w,x,y,z]}].
nlohmann::json to_json(const std::vector<CameraPose>& cameras);
std::vector<CameraPose> cameras_from_json(const nlohmann::json& j);

// {p : normal . p = offset}, |normal| = 1.
struct PlaneModel {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  PlaneModel flipped() const { return {-normal, -offset}; }
};

struct Observation {
  std::string image_id;
  PixelCoord pixel;
};

struct ObservedPoint {
  Vec3 position = Vec3::Zero();
  std::vector<Observation> observations;
};

// Keeps points for which at least `min_ground_fraction` of the observations
// land on mask value 1 (nearest pixel; nodata and off-image count as not
// ground). Throws InvalidArgument for an observation without a mask and
// TooFewGroundPoints when fewer than 3 points remain.
Points3d select_ground_points(const std::vector<ObservedPoint>& points,
                              const std::map<std::string, Raster>& masks,
                              double min_ground_fraction = 0.5);

// 0.01 x bounding-box diagonal of the cloud.
double default_plane_threshold(const Points3d& points);

struct PlaneFit {
  PlaneModel plane;
  std::vector<std::uint8_t> inlier_mask;
  std::size_t inlier_count = 0;
};

// RANSAC over 3-point planes (|distance| < threshold), then a least-squares
// refit on the consensus set (smallest eigenvector of the scatter). The
// reported inliers are re-evaluated against the refit plane. The normal is
// signed so its largest-magnitude component is positive.
// Throws DegenerateInput for fewer than 3 or collinear points.
PlaneFit ransac_plane(const Points3d& points, double inlier_threshold, int iterations,
                      std::uint64_t seed);

struct RayGridConfig {
  int rays_per_axis = 5;
  double field_of_view_deg = 60.0;
};

struct UpVote {
  Vec3 up = Vec3::UnitZ();
  int votes_for = 0;      // rays with d . up < 0
  int votes_against = 0;  // rays with d . up > 0
};

// Chooses the side of `plane` that camera rays hit from above: casts a
// rays_per_axis^2 grid across each camera's field of view and returns the
// normal orientation that a strict majority of intersecting rays oppose.
// Throws NoIntersections / Ambiguous (tie).
UpVote disambiguate_up(const PlaneModel& plane, const std::vector<CameraPose>& cameras,
                       const RayGridConfig& cfg = {});

// Minimal-angle rotation taking `up` onto +z (scale 1, no translation).
// up = -z maps through a 180 degree turn about +x.
Sim3d z_up_rotation(const Vec3& up);

}  // namespace georeg
