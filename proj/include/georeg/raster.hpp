#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "georeg/geodesy.hpp"
#include "georeg/sim3.hpp"

namespace georeg {

// Semantic codes are part of the GRR1 on-disk format; do not renumber.
enum class Semantic : std::uint32_t {
  kFlow2 = 0,
  kConfidence1 = 1,
  kXyz3 = 2,
  kDsm1 = 3,
  kMask1 = 4,
  kRgb3 = 5,
};

int channels_for(Semantic semantic);
std::string_view to_string(Semantic semantic);

// Continuous pixel coordinates. Integer values are pixel centres, so the
// valid sampling domain is [0, height-1] x [0, width-1].
struct PixelCoord {
  double row = 0.0;
  double col = 0.0;
};

// H x W x C float32 image, row-major and channel-interleaved.
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, Semantic semantic, std::optional<float> nodata = std::nullopt);
  Raster(int height, int width, Semantic semantic, std::vector<float> data,
         std::optional<float> nodata);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  Semantic semantic() const { return semantic_; }
  const std::optional<float>& nodata() const { return nodata_; }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  float at(int row, int col, int channel = 0) const {
    return data_[index(row, col, channel)];
  }
  float& at(int row, int col, int channel = 0) { return data_[index(row, col, channel)]; }

  bool is_nodata(float v) const;
  // True if no channel of the pixel holds the nodata value.
  bool pixel_valid(int row, int col) const;
  bool contains(const PixelCoord& px) const;
  bool same_shape(const Raster& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  // Throws ShapeError on length mismatch, FormatError on non-finite data.
  void validate() const;

  // Sub-window copy (tile extraction); clips nothing, throws OutOfBounds.
  Raster crop(int row0, int col0, int rows, int cols) const;

 private:
  std::size_t index(int row, int col, int channel) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(channel);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  Semantic semantic_ = Semantic::kConfidence1;
  std::optional<float> nodata_;
  std::vector<float> data_;
};

// Bilinear sample of every channel at a sub-pixel location. Neighbours that
// hold nodata (or carry zero weight) are skipped and the remaining weights
// renormalised. Returns false when no neighbour contributes.
// Throws OutOfBounds outside [0, H-1] x [0, W-1].
bool sample_bilinear(const Raster& raster, const PixelCoord& px, std::span<double> out);

// Nearest-pixel lookup, channel 0; nullopt if out of bounds or nodata.
std::optional<float> sample_nearest(const Raster& raster, const PixelCoord& px);

// Pixel (r, c) is centred at (origin_easting + (c + 0.5) * pixel_size_x,
// origin_northing + (r + 0.5) * pixel_size_y).
struct GeoTransform {
  double origin_easting = 0.0;
  double origin_northing = 0.0;
  double pixel_size_x = 1.0;
  double pixel_size_y = -1.0;
  std::string crs_label = "local-enu";
  GeodeticPoint geodetic_anchor;

  void validate() const;
  Eigen::Vector2d pixel_to_world(const PixelCoord& px) const;
  PixelCoord world_to_pixel(double easting, double northing) const;
};

struct DsmCovariance {
  Mat3 sigma = Mat3::Identity();

  // Throws SingularCovariance unless symmetric (1e-12) with eigenvalues > 0.
  void validate() const;
};

struct RasterMetadata {
  std::optional<GeoTransform> geotransform;
  std::optional<DsmCovariance> covariance;
  nlohmann::json provenance = nlohmann::json::object();
};

nlohmann::json to_json(const GeoTransform& g);
GeoTransform geotransform_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DsmCovariance& c);
// Accepts {"sigma": [[..],[..],[..]]} or a bare 3x3 array.
DsmCovariance covariance_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RasterMetadata& m);
RasterMetadata metadata_from_json(const nlohmann::json& j);

// GRR1 container: "GRR1", u32 version (=1), u32 height, u32 width,
// u32 channels, u32 semantic, u32 nodata flag, f32 nodata value, then
// H*W*C f32 samples. All little-endian.
inline constexpr std::size_t kGrrHeaderBytes = 32;

Raster read_raster(const std::filesystem::path& path);
void write_raster(const Raster& raster, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_raster(const Raster& raster);
Raster decode_raster(std::span<const std::uint8_t> bytes);

// "dir/dsm.grr" -> "dir/dsm.meta.json".
std::filesystem::path sidecar_path(const std::filesystem::path& raster_path);
RasterMetadata read_metadata(const std::filesystem::path& sidecar);
void write_metadata(const RasterMetadata& meta, const std::filesystem::path& sidecar);

// DSM pixel -> (easting, northing, bilinear height) in the DSM's local frame.
// Throws OutOfBounds / NoDataAtPixel.
Vec3 dsm_pixel_to_xyz(const Raster& dsm, const GeoTransform& geo, const PixelCoord& px);

// Bilinear lookup in an XYZ image. Throws OutOfBounds / NoDataAtPixel.
Vec3 xyz_image_lookup(const Raster& xyz, const PixelCoord& px);

}  // namespace georeg
