#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "georeg/gravity.hpp"
#include "georeg/registration.hpp"

namespace georeg {

// Throws IoError / FormatError.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

// Input bundle for ground-to-airborne registration. Manifest layout (paths
// relative to the manifest):
//   {"tile_size": 64,
//    "ground_xyz": {"<image id>": "ground/a.grr", ...},
//    "renders": [{"render_id": 0, "xyz": "air/render_0.grr"}, ...],
//    "pairs": [{"ground_image", "render_id", "row_offset", "col_offset",
//               "flow_fwd", "flow_bwd", "conf_fwd", "conf_bwd"}, ...]}
// Tile XYZ rasters are crops of the render XYZ at the tile offsets.
struct GroundAirInputs {
  int tile_size = 300;
  std::vector<GroundTilePair> pairs;
  std::map<std::string, Raster> ground_xyz;
  std::map<TileKey, Raster> tile_xyz;
  std::vector<std::filesystem::path> files;  // every file read
};

GroundAirInputs read_ground_air_manifest(const std::filesystem::path& manifest);

// Points file: [{"xyz": [x,y,z], "observations": [{"image_id", "row", "col"}]}].
nlohmann::json to_json(const std::vector<ObservedPoint>& points);
std::vector<ObservedPoint> observed_points_from_json(const nlohmann::json& j);

// Mask manifest: {"<image id>": "masks/a.grr", ...}, paths relative to it.
std::map<std::string, Raster> read_mask_manifest(const std::filesystem::path& manifest,
                                                 std::vector<std::filesystem::path>* files = nullptr);

}  // namespace georeg
