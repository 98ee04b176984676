#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "georeg/geometry.hpp"
#include "georeg/match_filter.hpp"
#include "georeg/raster.hpp"

namespace georeg {

// Source = image A side, target = image B side.
struct LiftedMatches {
  Correspondences3D corr;
  std::vector<std::pair<PixelCoord, PixelCoord>> provenance;  // (a, b) per kept pair
  std::size_t dropped_count = 0;

  std::size_t size() const { return corr.size(); }
};

// A side from an XYZ image, B side from a DSM + geotransform. Pairs that hit
// nodata on either side are dropped and counted; coordinates outside either
// raster throw OutOfBounds. Throws EmptyResult if nothing survives.
LiftedMatches lift_xyz_to_dsm(const MatchSet& matches, const Raster& xyz_a, const Raster& dsm,
                              const GeoTransform& geo);

// Both sides from XYZ images.
LiftedMatches lift_xyz_to_xyz(const MatchSet& matches, const Raster& xyz_a, const Raster& xyz_b);

// CSV xa,ya,za,xb,yb,zb.
void write_lifted_csv(const LiftedMatches& lifted, const std::filesystem::path& path);

}  // namespace georeg
