#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "georeg/geodesy.hpp"
#include "georeg/gravity.hpp"
#include "georeg/match_filter.hpp"
#include "georeg/raster.hpp"
#include "georeg/registration.hpp"

namespace georeg::synth {

inline constexpr float kNodata = -9999.0f;

// Axis-aligned box [x0, x1) x [y0, y1) standing on the base height.
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double height = 0;
};

struct Heightfield {
  double base_height = 0.0;
  std::vector<Box> boxes;

  double height_at(double x, double y) const;
};

// Boxes inside [-extent/2, extent/2]^2 with heights on a 0.25 m lattice.
Heightfield random_heightfield(double extent, int box_count, std::uint64_t seed);

// Integer pixel map from image A into a ch x cw window of image B at
// (row0, col0), turned by quarter_turns * 90 degrees. A is ch x cw for even
// turns and cw x ch for odd ones.
struct WindowMap {
  int row0 = 0, col0 = 0;
  int ch = 0, cw = 0;
  int quarter_turns = 0;

  int a_height() const { return quarter_turns % 2 == 0 ? ch : cw; }
  int a_width() const { return quarter_turns % 2 == 0 ? cw : ch; }
  // A pixel -> B pixel.
  std::pair<int, int> apply(int i, int j) const;
};

// Exact flow pair for a WindowMap: forward holds B coordinates of every A
// pixel, backward holds A coordinates inside the window and nodata outside.
// Confidences are 1.
FlowPair window_flow_pair(const WindowMap& map, int b_height, int b_width);

struct NoiseSpec {
  double flow_jitter_px = 0.0;     // Gaussian sigma on both flow channels
  double outlier_fraction = 0.0;   // per valid pixel, independently per flow
  double confidence_decay = 0.5;   // easy mode: corrupted conf = min(conf, 0.2) * decay
  bool hard = false;               // hard mode leaves confidences untouched

  void validate() const;
};

struct CorruptionMasks {
  std::vector<std::uint8_t> forward;   // A pixels replaced by uniform targets
  std::vector<std::uint8_t> backward;  // B pixels replaced by uniform targets
};

// Jitters every valid, non-outlier flow value and replaces outlier pixels by
// uniform targets over the other image. Zero noise returns the input as is.
FlowPair corrupt_flows(const FlowPair& fp, const NoiseSpec& noise, std::uint64_t seed,
                       CorruptionMasks* masks = nullptr);

// Airborne-to-satellite scene. The DSM lives in a local ENU frame about
// `anchor` centred on the scene; the airborne image A is a (possibly turned)
// window of the DSM grid whose XYZ image holds air-model coordinates
// inverse(air_to_geo)(DSM point).
struct AirSatSpec {
  double extent_m = 128.0;
  double gsd_m = 0.5;
  int box_count = 12;
  int air_height = 200;
  int air_width = 200;
  int air_quarter_turns = 0;
  Sim3d air_to_geo;
  NoiseSpec noise;
  GeodeticPoint anchor{38.8977, -77.0365, 18.0};
  int camera_count = 12;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AirSatScene {
  AirSatSpec spec;
  Heightfield heightfield;
  Raster dsm;
  GeoTransform geo;
  DsmCovariance covariance;
  Raster xyz_air;
  WindowMap window;
  FlowPair clean_flows;
  FlowPair flows;  // after corrupt_flows
  CorruptionMasks corruption;
  Raster model_confidence;
  std::vector<CameraPose> air_cameras;  // air-model frame
  std::vector<Vec3> camera_enu;         // truth, DSM frame
};

AirSatScene generate_air_sat_scene(const AirSatSpec& spec);

// Ground-to-airborne scene for exhaustive tile matching. Every ground image
// is an exact (turned) window of one correct tile; `decoys_per_image` tiles
// that do not overlap it get a full, cyclically consistent but wrong
// mapping; every remaining tile gets independent uniform random flows in
// both directions, with forward targets >= 2 m (horizontally) from the truth.
struct GroundAirSpec {
  int ground_images = 10;
  int ground_size = 32;
  int render_size = 420;
  int renders = 1;
  int tile_size = 64;
  double overlap = 0.25;
  double gsd_m = 0.25;
  int box_count = 10;
  double low_confidence_fraction = 0.1;  // correct-pair pixels given conf 0.1
  int decoys_per_image = 2;
  Sim3d ground_to_air;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundAirScene {
  GroundAirSpec spec;
  Heightfield heightfield;
  TileGrid grid;
  std::vector<Raster> render_xyz;  // air-model frame, one per render
  std::map<TileKey, Raster> tile_xyz;
  std::map<std::string, Raster> ground_xyz;  // ground-model frame
  std::vector<GroundTilePair> pairs;
  std::map<std::string, TileKey> correct_tile;
};

GroundAirScene generate_ground_air_scene(const GroundAirSpec& spec);

// Ground plane plus box roofs seen by a ring of cameras; everything is then
// moved into a model frame by a random similarity, so the true up vector is
// world_to_model.rotation() * z.
struct GravitySpec {
  double extent = 100.0;
  int ground_points = 2000;
  int roof_points = 400;
  int box_count = 6;
  double noise_fraction = 0.01;  // displacement uniform in a ball of radius noise_fraction * extent
  int camera_count = 12;
  int image_width = 320;
  int image_height = 240;
  double focal_px = 250.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GravityScene {
  std::vector<ObservedPoint> points;
  std::vector<std::uint8_t> is_ground;
  std::map<std::string, Raster> masks;
  std::vector<CameraPose> cameras;
  Sim3d world_to_model;
  Vec3 true_up = Vec3::UnitZ();
};

GravityScene generate_gravity_scene(const GravitySpec& spec);

// Scene description files for the synth subcommand. "kind" selects
// "air2sat" (default), "ground2air" or "gravity"; other keys mirror the
// *Spec structs, with the truth transform given as a Sim3 JSON object.
std::string scene_kind(const nlohmann::json& j);
AirSatSpec air_sat_spec_from_json(const nlohmann::json& j);
GroundAirSpec ground_air_spec_from_json(const nlohmann::json& j);
GravitySpec gravity_spec_from_json(const nlohmann::json& j);

// Write a scene as the file tree the pipeline subcommands read. Returns the
// list of files written, relative to `dir`.
std::vector<std::string> write_scene(const AirSatScene& scene, const std::filesystem::path& dir);
std::vector<std::string> write_scene(const GroundAirScene& scene, const std::filesystem::path& dir);
std::vector<std::string> write_scene(const GravityScene& scene, const std::filesystem::path& dir);

}  // namespace georeg::synth
