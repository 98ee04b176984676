#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "georeg/geometry.hpp"
#include "georeg/gravity.hpp"
#include "georeg/lifting.hpp"
#include "georeg/match_filter.hpp"
#include "georeg/raster.hpp"

namespace georeg {

struct TileKey {
  int render_id = 0;
  int row_offset = 0;
  int col_offset = 0;

  auto operator<=>(const TileKey&) const = default;
};

struct TileGrid {
  int image_height = 0;
  int image_width = 0;
  int tile_size = 300;
  double overlap_fraction = 0.25;
  int tile_rows = 0;  // tile extent actually used (clamped to the image)
  int tile_cols = 0;
  std::vector<TileKey> tiles;  // render-major, then row-major
};

// Offsets per axis: 0, stride, 2*stride, ... with stride =
// round(tile * (1 - overlap)), plus one edge-aligned tile when the last
// regular tile stops short of the border. A tile larger than the image is
// clamped to the image. Throws InvalidArgument on bad sizes.
TileGrid make_tile_grid(int image_height, int image_width, int tile_size = 300,
                        double overlap_fraction = 0.25, int render_count = 1);

struct ObliqueConfig {
  double azimuth_step_deg = 45.0;
  double depression_deg = 45.0;
  int resolution_px = 2048;
  bool include_nadir = true;
};

struct RenderPose {
  int render_id = 0;
  CameraPose pose;
  std::string projection = "orthographic";
  double half_extent_m = 0.0;
  int resolution_px = 0;
};

struct ObliqueViewSet {
  ObliqueConfig config;
  std::vector<RenderPose> poses;  // obliques by azimuth, then nadir (if any)
};

// Cameras on a circle of horizontal radius `scene_radius` around
// `scene_center`, at height radius * tan(depression), each looking at the
// centre. Azimuth is measured clockwise from +y (north). A 90 degree
// depression (and the optional nadir pose) sits at height `scene_radius`
// straight above the centre with image right = +x.
ObliqueViewSet oblique_poses(const Vec3& scene_center, double scene_radius,
                             const ObliqueConfig& cfg = {});

struct AirToSatResult {
  Sim3d transform;  // air model -> DSM frame
  std::size_t survivor_count = 0;
  std::size_t match_count = 0;
  std::size_t lifted_count = 0;
  std::size_t dropped_count = 0;
  std::size_t inlier_count = 0;
  double inlier_fraction = 0.0;
  int iterations = 0;
};

// Default RANSAC threshold for the satellite stage: four DSM pixels at
// 0.5 m GSD. Lifted targets carry the flow error times the GSD plus the DSM
// height error, so the 50 cm ground-stage value is too tight here.
inline constexpr double kAirToSatInlierThreshold = 2.0;

// filter_matches -> lift_xyz_to_dsm -> ransac_sim3. Image A is the rendered
// airborne view (xyz_air), image B the DSM grid. Errors keep the stage of the
// step that raised them.
AirToSatResult register_air_to_sat(const FlowPair& flow, const Raster& xyz_air, const Raster& dsm,
                                   const GeoTransform& geo, const FilterConfig& filter_cfg,
                                   const RansacConfig& ransac_cfg);

// Flows between a ground image (A) and one airborne tile (B).
struct GroundTilePair {
  std::string ground_image;
  TileKey tile;
  FlowPair flows;
};

struct GroundToAirConfig {
  int top_k = 5;
  double inlier_threshold = 0.5;  // metres, used by RANSAC and by pooled scoring
  FilterConfig filter;
  RansacConfig ransac;
};

struct CandidateTransform {
  Sim3d transform;
  std::string ground_image;
  TileKey tile;
  std::size_t match_count = 0;   // cyclically consistent matches of the pair
  std::size_t lifted_count = 0;
  std::size_t inlier_count = 0;  // against the pooled correspondences
  double inlier_fraction = 0.0;
  double residual_sum = 0.0;
};

struct PairSummary {
  std::string ground_image;
  TileKey tile;
  std::size_t match_count = 0;
  std::size_t lifted_count = 0;
};

struct GroundToAirResult {
  Sim3d transform;  // ground model -> air model
  std::vector<CandidateTransform> candidates;
  std::size_t winner = 0;  // index into candidates
  std::vector<PairSummary> pairs;
  std::size_t pooled_count = 0;
  std::size_t final_inlier_count = 0;
  double final_inlier_fraction = 0.0;
  std::size_t camera_count = 0;  // ground images with at least one final inlier
};

// 1. Every (ground image, tile) pair is filtered and lifted (ground XYZ ->
//    tile XYZ); pairs with no surviving matches contribute nothing.
// 2. Per ground image, the top_k pairs with >= 3 lifted points, ranked by
//    (match_count desc, render_id, row_offset, col_offset), get a RANSAC fit.
// 3. Each candidate is scored with count_inliers against the pool of all
//    lifted correspondences.
// 4. Winner = most pooled inliers, then smaller residual sum, then earlier
//    candidate; a final Umeyama refit runs on its pooled inliers.
// The result does not depend on the order of `pairs`.
// Throws NoCandidates (no pair reaches 3 lifted points, or every fit is
// degenerate) and NoConsensus (no fit finds a consensus, or the winner has
// <= 3 pooled inliers).
GroundToAirResult register_ground_to_air(const std::vector<GroundTilePair>& pairs,
                                         const std::map<std::string, Raster>& xyz_ground,
                                         const std::map<TileKey, Raster>& xyz_air_tiles,
                                         const GroundToAirConfig& cfg);

struct SubgraphGateConfig {
  int min_cameras = 9;
  double min_inlier_fraction = 0.2;
};

struct GateDecision {
  bool accepted = false;
  std::string reason;  // "ok", "too few cameras", "low inliers"
};

GateDecision gate_subgraph(std::size_t camera_count, double inlier_fraction,
                           const SubgraphGateConfig& cfg = {});

nlohmann::json to_json(const TileGrid& grid);
nlohmann::json to_json(const ObliqueViewSet& views);
nlohmann::json to_json(const GroundToAirResult& result);
nlohmann::json to_json(const AirToSatResult& result);
nlohmann::json to_json(const GateDecision& gate);

}  // namespace georeg
