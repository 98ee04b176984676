#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "georeg/geometry.hpp"
#include "georeg/raster.hpp"

namespace georeg {

// Dense forward/backward flows between image A and image B. Flow rasters hold
// absolute target coordinates, channel 0 = row, channel 1 = col, in the
// pixel-centre convention of PixelCoord.
struct FlowPair {
  Raster forward;        // A-shaped, values in B coordinates
  Raster backward;       // B-shaped, values in A coordinates
  Raster conf_forward;   // A-shaped, [0, 1]
  Raster conf_backward;  // B-shaped, [0, 1]
  std::optional<Raster> model_confidence;  // A-shaped (rendered image)

  // Throws ShapeMismatch.
  void validate() const;
};

struct Match {
  PixelCoord a;
  PixelCoord b;
  double residual_px = 0.0;
  double confidence = 0.0;
};

struct MatchSet {
  std::vector<Match> pairs;
  // Pixels that passed every gate before subsampling.
  std::size_t survivor_count = 0;
};

struct FilterConfig {
  double cyclic_threshold_px = 2.0;  // keep residual <= threshold
  double min_confidence = 0.2;       // keep conf_forward >= value
  double min_model_confidence = 0.5;
  std::size_t max_matches = 5000;
  std::uint64_t seed = kDefaultSeed;

  void validate() const;
};

// Round-trip residual |backward(forward(x)) - x| per A pixel, bilinear on the
// backward flow. Nodata where forward is nodata, lands outside B, or the
// backward sample has no valid neighbour.
Raster cyclic_residuals(const FlowPair& fp);

// Keeps A pixels with residual <= cyclic_threshold_px, conf_forward >=
// min_confidence and (if present) model_confidence >= min_model_confidence;
// then, if more than max_matches survive, keeps a seeded uniform subset.
// Output is in row-major A order. Throws EmptyResult on zero survivors.
MatchSet filter_matches(const FlowPair& fp, const FilterConfig& cfg);

// CSV: header row_a,col_a,row_b,col_b,residual_px,confidence; 6 decimals.
void write_matches_csv(const MatchSet& matches, const std::filesystem::path& path);
MatchSet read_matches_csv(const std::filesystem::path& path);

}  // namespace georeg
