#include "georeg/raster.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "georeg/error.hpp"

namespace georeg {

namespace {

constexpr std::array<char, 4> kMagic = {'G', 'R', 'R', '1'};
constexpr std::uint32_t kVersion = 1;

Semantic semantic_from_code(std::uint32_t code) {
  if (code > static_cast<std::uint32_t>(Semantic::kRgb3)) {
    throw Error(ErrorCode::kFormatError, "raster_io",
                "unknown semantic code " + std::to_string(code));
  }
  return static_cast<Semantic>(code);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

float get_f32(std::span<const std::uint8_t> in, std::size_t offset) {
  return std::bit_cast<float>(get_u32(in, offset));
}

}  // namespace

int channels_for(Semantic semantic) {
  switch (semantic) {
    case Semantic::kFlow2: return 2;
    case Semantic::kConfidence1:
    case Semantic::kDsm1:
    case Semantic::kMask1: return 1;
    case Semantic::kXyz3:
    case Semantic::kRgb3: return 3;
  }
  return 0;
}

std::string_view to_string(Semantic semantic) {
  switch (semantic) {
    case Semantic::kFlow2: return "Flow2";
    case Semantic::kConfidence1: return "Confidence1";
    case Semantic::kXyz3: return "Xyz3";
    case Semantic::kDsm1: return "Dsm1";
    case Semantic::kMask1: return "Mask1";
    case Semantic::kRgb3: return "Rgb3";
  }
  return "Unknown";
}

Raster::Raster(int height, int width, Semantic semantic, std::optional<float> nodata)
    : height_(height), width_(width), channels_(channels_for(semantic)), semantic_(semantic),
      nodata_(nodata) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::kShapeError, "raster_io", "raster dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                   static_cast<std::size_t>(channels_),
               0.0f);
}

Raster::Raster(int height, int width, Semantic semantic, std::vector<float> data,
               std::optional<float> nodata)
    : height_(height), width_(width), channels_(channels_for(semantic)), semantic_(semantic),
      nodata_(nodata), data_(std::move(data)) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::kShapeError, "raster_io", "raster dimensions must be positive");
  }
  validate();
}

bool Raster::is_nodata(float v) const {
  if (!nodata_) return false;
  if (std::isnan(*nodata_)) return std::isnan(v);
  return v == *nodata_;
}

bool Raster::pixel_valid(int row, int col) const {
  for (int ch = 0; ch < channels_; ++ch) {
    if (is_nodata(at(row, col, ch))) return false;
  }
  return true;
}

bool Raster::contains(const PixelCoord& px) const {
  return px.row >= 0.0 && px.col >= 0.0 && px.row <= height_ - 1 && px.col <= width_ - 1;
}

void Raster::validate() const {
  const std::size_t expected = static_cast<std::size_t>(height_) *
                               static_cast<std::size_t>(width_) *
                               static_cast<std::size_t>(channels_);
  if (data_.size() != expected) {
    throw Error(ErrorCode::kShapeError, "raster_io",
                "raster holds " + std::to_string(data_.size()) + " values, expected " +
                    std::to_string(expected));
  }
  for (float v : data_) {
    if (!std::isfinite(v) && !is_nodata(v)) {
      throw Error(ErrorCode::kFormatError, "raster_io", "non-finite value outside nodata");
    }
  }
}

Raster Raster::crop(int row0, int col0, int rows, int cols) const {
  if (row0 < 0 || col0 < 0 || rows <= 0 || cols <= 0 || row0 + rows > height_ ||
      col0 + cols > width_) {
    throw Error(ErrorCode::kOutOfBounds, "raster_io", "crop window outside raster");
  }
  Raster out(rows, cols, semantic_, nodata_);
  for (int r = 0; r < rows; ++r) {
    const float* src = &data_[index(row0 + r, col0, 0)];
    std::copy(src, src + static_cast<std::ptrdiff_t>(cols) * channels_,
              &out.data_[out.index(r, 0, 0)]);
  }
  return out;
}

bool sample_bilinear(const Raster& raster, const PixelCoord& px, std::span<double> out) {
  if (!raster.contains(px)) {
    throw Error(ErrorCode::kOutOfBounds, "raster_io",
                "pixel (" + std::to_string(px.row) + ", " + std::to_string(px.col) +
                    ") outside " + std::to_string(raster.height()) + "x" +
                    std::to_string(raster.width()));
  }
  const int r0 = static_cast<int>(std::floor(px.row));
  const int c0 = static_cast<int>(std::floor(px.col));
  const double fr = px.row - r0;
  const double fc = px.col - c0;
  const int r1 = std::min(r0 + 1, raster.height() - 1);
  const int c1 = std::min(c0 + 1, raster.width() - 1);
  const std::array<int, 4> rows = {r0, r0, r1, r1};
  const std::array<int, 4> cols = {c0, c1, c0, c1};
  const std::array<double, 4> weights = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc),
                                         fr * fc};
  const int channels = raster.channels();
  std::fill(out.begin(), out.begin() + channels, 0.0);
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (weights[k] <= 0.0) continue;
    if (!raster.pixel_valid(rows[k], cols[k])) continue;
    for (int ch = 0; ch < channels; ++ch) {
      out[ch] += weights[k] * raster.at(rows[k], cols[k], ch);
    }
    total += weights[k];
  }
  if (total <= 0.0) return false;
  if (total != 1.0) {
    for (int ch = 0; ch < channels; ++ch) out[ch] /= total;
  }
  return true;
}

std::optional<float> sample_nearest(const Raster& raster, const PixelCoord& px) {
  const long r = std::lround(px.row);
  const long c = std::lround(px.col);
  if (r < 0 || c < 0 || r >= raster.height() || c >= raster.width()) return std::nullopt;
  const float v = raster.at(static_cast<int>(r), static_cast<int>(c));
  if (raster.is_nodata(v)) return std::nullopt;
  return v;
}

void GeoTransform::validate() const {
  if (!(pixel_size_x > 0.0) || pixel_size_y == 0.0 || !std::isfinite(pixel_size_y) ||
      !std::isfinite(origin_easting) || !std::isfinite(origin_northing)) {
    throw Error(ErrorCode::kInvalidArgument, "raster_io",
                "geotransform needs pixel_size_x > 0 and pixel_size_y != 0");
  }
  georeg::validate(geodetic_anchor);
}

Eigen::Vector2d GeoTransform::pixel_to_world(const PixelCoord& px) const {
  return {origin_easting + (px.col + 0.5) * pixel_size_x,
          origin_northing + (px.row + 0.5) * pixel_size_y};
}

PixelCoord GeoTransform::world_to_pixel(double easting, double northing) const {
  return {(northing - origin_northing) / pixel_size_y - 0.5,
          (easting - origin_easting) / pixel_size_x - 0.5};
}

void DsmCovariance::validate() const {
  if (!sigma.allFinite() || (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::kSingularCovariance, "geodesy_metrics",
                "covariance must be finite and symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sigma, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw Error(ErrorCode::kSingularCovariance, "geodesy_metrics",
                "covariance must be positive definite");
  }
}

nlohmann::json to_json(const GeoTransform& g) {
  return {{"origin_easting", g.origin_easting},
          {"origin_northing", g.origin_northing},
          {"pixel_size_x", g.pixel_size_x},
          {"pixel_size_y", g.pixel_size_y},
          {"crs_label", g.crs_label},
          {"geodetic_anchor",
           {{"lat", g.geodetic_anchor.latitude_deg},
            {"lon", g.geodetic_anchor.longitude_deg},
            {"alt", g.geodetic_anchor.altitude_m}}}};
}

GeoTransform geotransform_from_json(const nlohmann::json& j) {
  try {
    GeoTransform g;
    g.origin_easting = j.at("origin_easting").get<double>();
    g.origin_northing = j.at("origin_northing").get<double>();
    g.pixel_size_x = j.at("pixel_size_x").get<double>();
    g.pixel_size_y = j.at("pixel_size_y").get<double>();
    g.crs_label = j.value("crs_label", std::string("local-enu"));
    if (j.contains("geodetic_anchor")) {
      const auto& a = j.at("geodetic_anchor");
      g.geodetic_anchor = {a.at("lat").get<double>(), a.at("lon").get<double>(),
                           a.at("alt").get<double>()};
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, "raster_io", std::string("bad geotransform: ") + e.what());
  }
}

nlohmann::json to_json(const DsmCovariance& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({c.sigma(r, 0), c.sigma(r, 1), c.sigma(r, 2)});
  return {{"sigma", rows}};
}

DsmCovariance covariance_from_json(const nlohmann::json& j) {
  try {
    const nlohmann::json& rows = j.is_object() ? j.at("sigma") : j;
    if (!rows.is_array() || rows.size() != 3) throw std::runtime_error("need 3 rows");
    DsmCovariance c;
    for (int r = 0; r < 3; ++r) {
      const auto row = rows.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
      if (row.size() != 3) throw std::runtime_error("need 3 columns");
      for (int k = 0; k < 3; ++k) c.sigma(r, k) = row[static_cast<std::size_t>(k)];
    }
    c.validate();
    return c;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kFormatError, "raster_io", std::string("bad covariance: ") + e.what());
  }
}

nlohmann::json to_json(const RasterMetadata& m) {
  nlohmann::json j = nlohmann::json::object();
  if (m.geotransform) j["geotransform"] = to_json(*m.geotransform);
  if (m.covariance) j["covariance"] = to_json(*m.covariance);
  j["provenance"] = m.provenance;
  return j;
}

RasterMetadata metadata_from_json(const nlohmann::json& j) {
  RasterMetadata m;
  if (j.contains("geotransform")) m.geotransform = geotransform_from_json(j.at("geotransform"));
  if (j.contains("covariance")) m.covariance = covariance_from_json(j.at("covariance"));
  if (j.contains("provenance")) m.provenance = j.at("provenance");
  return m;
}

std::vector<std::uint8_t> encode_raster(const Raster& raster) {
  raster.validate();
  std::vector<std::uint8_t> out;
  out.reserve(kGrrHeaderBytes + raster.data().size() * 4);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(raster.height()));
  put_u32(out, static_cast<std::uint32_t>(raster.width()));
  put_u32(out, static_cast<std::uint32_t>(raster.channels()));
  put_u32(out, static_cast<std::uint32_t>(raster.semantic()));
  put_u32(out, raster.nodata() ? 1u : 0u);
  put_f32(out, raster.nodata().value_or(0.0f));
  if constexpr (std::endian::native == std::endian::little) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(raster.data().data());
    out.insert(out.end(), bytes, bytes + raster.data().size() * sizeof(float));
  } else {
    for (float v : raster.data()) put_f32(out, v);
  }
  return out;
}

Raster decode_raster(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kGrrHeaderBytes) {
    throw Error(ErrorCode::kFormatError, "raster_io", "file shorter than GRR1 header");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::kFormatError, "raster_io", "bad magic (expected GRR1)");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kVersion) {
    throw Error(ErrorCode::kFormatError, "raster_io",
                "unsupported GRR version " + std::to_string(version));
  }
  const std::uint32_t height = get_u32(bytes, 8);
  const std::uint32_t width = get_u32(bytes, 12);
  const std::uint32_t channels = get_u32(bytes, 16);
  const Semantic semantic = semantic_from_code(get_u32(bytes, 20));
  const std::uint32_t nodata_flag = get_u32(bytes, 24);
  if (nodata_flag > 1) {
    throw Error(ErrorCode::kFormatError, "raster_io", "nodata flag must be 0 or 1");
  }
  if (static_cast<int>(channels) != channels_for(semantic)) {
    throw Error(ErrorCode::kShapeError, "raster_io",
                "channel count " + std::to_string(channels) + " does not match semantic " +
                    std::string(to_string(semantic)));
  }
  if (height == 0 || width == 0 || height > (1u << 20) || width > (1u << 20)) {
    throw Error(ErrorCode::kShapeError, "raster_io", "implausible raster dimensions");
  }
  const std::size_t count = static_cast<std::size_t>(height) * width * channels;
  if (bytes.size() != kGrrHeaderBytes + count * 4) {
    throw Error(ErrorCode::kShapeError, "raster_io",
                "payload is " + std::to_string(bytes.size() - kGrrHeaderBytes) +
                    " bytes, header implies " + std::to_string(count * 4));
  }
  std::vector<float> data(count);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(data.data(), bytes.data() + kGrrHeaderBytes, count * 4);
  } else {
    for (std::size_t i = 0; i < count; ++i) data[i] = get_f32(bytes, kGrrHeaderBytes + 4 * i);
  }
  std::optional<float> nodata;
  if (nodata_flag == 1) nodata = get_f32(bytes, 28);
  return Raster(static_cast<int>(height), static_cast<int>(width), semantic, std::move(data),
                nodata);
}

Raster read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError, "raster_io", "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_raster(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), e.stage(), path.string() + ": " + e.what());
  }
}

void write_raster(const Raster& raster, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_raster(raster);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIoError, "raster_io", "cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kIoError, "raster_io", "short write to " + path.string());
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path) {
  std::filesystem::path p = raster_path;
  p.replace_extension(".meta.json");
  return p;
}

RasterMetadata read_metadata(const std::filesystem::path& sidecar) {
  std::ifstream in(sidecar);
  if (!in) {
    throw Error(ErrorCode::kIoError, "raster_io", "cannot open " + sidecar.string());
  }
  try {
    return metadata_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, "raster_io", sidecar.string() + ": " + e.what());
  }
}

void write_metadata(const RasterMetadata& meta, const std::filesystem::path& sidecar) {
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIoError, "raster_io", "cannot write " + sidecar.string());
  }
  out << to_json(meta).dump(2) << '\n';
}

Vec3 dsm_pixel_to_xyz(const Raster& dsm, const GeoTransform& geo, const PixelCoord& px) {
  if (dsm.channels() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "raster_io", "DSM must have one channel");
  }
  double height = 0.0;
  if (!sample_bilinear(dsm, px, std::span<double>(&height, 1))) {
    throw Error(ErrorCode::kNoDataAtPixel, "raster_io",
                "DSM has no data at (" + std::to_string(px.row) + ", " + std::to_string(px.col) +
                    ")");
  }
  const Eigen::Vector2d en = geo.pixel_to_world(px);
  return {en.x(), en.y(), height};
}

Vec3 xyz_image_lookup(const Raster& xyz, const PixelCoord& px) {
  if (xyz.channels() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "raster_io", "XYZ image must have three channels");
  }
  std::array<double, 3> v{};
  if (!sample_bilinear(xyz, px, v)) {
    throw Error(ErrorCode::kNoDataAtPixel, "raster_io",
                "XYZ image has no data around (" + std::to_string(px.row) + ", " +
                    std::to_string(px.col) + ")");
  }
  return {v[0], v[1], v[2]};
}

}  // namespace georeg
