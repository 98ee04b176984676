#include <cstring>
#include <fstream>
#include <functional>

#include <gtest/gtest.h>

#include "georeg/cli.hpp"
#include "georeg/raster.hpp"
#include "test_support.hpp"

namespace georeg {
namespace {

using testing::TempDir;

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& b, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(b, v);
}

TEST(Grr, TwoByTwoRoundTripIsByteExact) {
  TempDir dir("grr");
  const Raster r(2, 2, Semantic::kConfidence1, {0, 1, 2, 3}, std::nullopt);
  write_raster(r, dir / "a.grr");
  const Raster back = read_raster(dir / "a.grr");
  write_raster(back, dir / "b.grr");
  EXPECT_EQ(file_bytes(dir / "a.grr"), file_bytes(dir / "b.grr"));
  EXPECT_EQ(std::vector<float>(back.data().begin(), back.data().end()), (std::vector<float>{0, 1, 2, 3}));

  // Independent layout: header fields written out by hand.
  std::vector<std::uint8_t> expected{'G', 'R', 'R', '1'};
  for (std::uint32_t v : {1u, 2u, 2u, 1u, 1u, 0u}) put_u32(expected, v);
  put_f32(expected, 0.0f);
  for (float f : {0.0f, 1.0f, 2.0f, 3.0f}) put_f32(expected, f);
  EXPECT_EQ(file_bytes(dir / "a.grr"), expected);
  EXPECT_EQ(expected.size(), kGrrHeaderBytes + 16);
}

TEST(Grr, NodataHeader) {
  const Raster r(1, 1, Semantic::kDsm1, {-9999.0f}, -9999.0f);
  const auto bytes = encode_raster(r);
  std::vector<std::uint8_t> tail(bytes.begin() + 24, bytes.begin() + 32);
  std::vector<std::uint8_t> expected;
  put_u32(expected, 1);
  put_f32(expected, -9999.0f);
  EXPECT_EQ(tail, expected);
  EXPECT_FALSE(decode_raster(bytes).pixel_valid(0, 0));
}

TEST(Grr, BadMagicIsFormatError) {
  TempDir dir("grr");
  const Raster r(2, 2, Semantic::kConfidence1);
  auto bytes = encode_raster(r);
  bytes[3] = '2';
  expect_code(ErrorCode::kFormatError, [&] { decode_raster(bytes); });
  std::ofstream(dir / "bad.grr", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                          static_cast<std::streamsize>(bytes.size()));
  expect_code(ErrorCode::kFormatError, [&] { read_raster(dir / "bad.grr"); });
}

TEST(Grr, TruncatedAndMissing) {
  const Raster r(3, 3, Semantic::kXyz3);
  auto bytes = encode_raster(r);
  bytes.pop_back();
  EXPECT_THROW(decode_raster(bytes), Error);
  expect_code(ErrorCode::kFormatError, [&] { decode_raster(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10)); });
  expect_code(ErrorCode::kIoError, [] { read_raster("/nonexistent/x.grr"); });
}

TEST(Grr, ChannelCountMustMatchSemantic) {
  auto bytes = encode_raster(Raster(2, 2, Semantic::kFlow2));
  bytes[16] = 3;  // channels field
  EXPECT_THROW(decode_raster(bytes), Error);
}

TEST(Grr, LargeXyzRoundTripChecksum) {
  TempDir dir("grr");
  Raster r(2048, 2048, Semantic::kXyz3, -9999.0f);
  SplitMix64 rng(5);
  for (float& v : r.data()) v = static_cast<float>(rng.uniform(-1e4, 1e4));
  write_raster(r, dir / "big.grr");
  const std::string h1 = sha256_file(dir / "big.grr");
  write_raster(read_raster(dir / "big.grr"), dir / "big2.grr");
  EXPECT_EQ(h1, sha256_file(dir / "big2.grr"));
  EXPECT_EQ(std::filesystem::file_size(dir / "big.grr"), kGrrHeaderBytes + 2048ull * 2048 * 3 * 4);
}

TEST(Grr, EverySemanticAndEdgeShapes) {
  SplitMix64 rng(7);
  for (Semantic s : {Semantic::kFlow2, Semantic::kConfidence1, Semantic::kXyz3, Semantic::kDsm1,
                     Semantic::kMask1, Semantic::kRgb3}) {
    for (auto [h, w] : {std::pair{1, 1}, std::pair{1, 17}, std::pair{13, 1}, std::pair{5, 7}}) {
      Raster r(h, w, s, rng.uniform01() < 0.5 ? std::optional<float>(-1.0f) : std::nullopt);
      for (float& v : r.data()) v = static_cast<float>(rng.uniform(0, 1));
      const Raster back = decode_raster(encode_raster(r));
      EXPECT_EQ(back.semantic(), s);
      EXPECT_EQ(back.height(), h);
      EXPECT_EQ(back.width(), w);
      EXPECT_EQ(back.channels(), channels_for(s));
      EXPECT_EQ(back.nodata(), r.nodata());
      EXPECT_TRUE(std::equal(r.data().begin(), r.data().end(), back.data().begin()));
    }
  }
}

TEST(Metadata, SidecarRoundTrip) {
  TempDir dir("meta");
  EXPECT_EQ(sidecar_path("x/dsm.grr"), std::filesystem::path("x/dsm.meta.json"));
  RasterMetadata m;
  GeoTransform g;
  g.origin_easting = 100;
  g.origin_northing = 200;
  g.pixel_size_x = 0.5;
  g.pixel_size_y = -0.5;
  g.geodetic_anchor = {38.9, -77.0, 10.0};
  m.geotransform = g;
  DsmCovariance c;
  c.sigma = Eigen::Vector3d(0.25, 0.25, 1.0).asDiagonal();
  m.covariance = c;
  m.provenance = {{"source", "unit"}};
  write_metadata(m, dir / "d.meta.json");
  const RasterMetadata back = read_metadata(dir / "d.meta.json");
  ASSERT_TRUE(back.geotransform && back.covariance);
  EXPECT_EQ(back.geotransform->origin_easting, 100);
  EXPECT_EQ(back.geotransform->pixel_size_y, -0.5);
  EXPECT_EQ(back.geotransform->geodetic_anchor.latitude_deg, 38.9);
  EXPECT_EQ(back.covariance->sigma, c.sigma);
  EXPECT_EQ(back.provenance.at("source"), "unit");
}

TEST(Metadata, SingularCovarianceRejected) {
  DsmCovariance c;
  c.sigma = Eigen::Vector3d(1.0, 0.0, 1.0).asDiagonal();
  expect_code(ErrorCode::kSingularCovariance, [&] { c.validate(); });
  c.sigma = Mat3::Identity();
  c.sigma(0, 1) = 0.5;
  expect_code(ErrorCode::kSingularCovariance, [&] { c.validate(); });
}

GeoTransform example_geo() {
  GeoTransform g;
  g.origin_easting = 100;
  g.origin_northing = 200;
  g.pixel_size_x = 0.5;
  g.pixel_size_y = -0.5;
  return g;
}

TEST(DsmLookup, PixelCentreConvention) {
  Raster dsm(4, 4, Semantic::kDsm1, -9999.0f);
  for (float& v : dsm.data()) v = 10.0f;
  const Vec3 p = dsm_pixel_to_xyz(dsm, example_geo(), {0, 0});
  EXPECT_EQ(p, Vec3(100.25, 199.75, 10.0));
}

TEST(DsmLookup, OutOfBoundsAndNodata) {
  Raster dsm(4, 4, Semantic::kDsm1, -9999.0f);
  for (float& v : dsm.data()) v = 10.0f;
  expect_code(ErrorCode::kOutOfBounds, [&] { dsm_pixel_to_xyz(dsm, example_geo(), {-0.5, 0}); });
  expect_code(ErrorCode::kOutOfBounds, [&] { dsm_pixel_to_xyz(dsm, example_geo(), {0, 3.01}); });
  dsm.at(2, 2) = -9999.0f;
  expect_code(ErrorCode::kNoDataAtPixel, [&] { dsm_pixel_to_xyz(dsm, example_geo(), {2, 2}); });
}

TEST(DsmLookup, AffineInPixelWhenHeightConstant) {
  Raster dsm(30, 40, Semantic::kDsm1);
  for (float& v : dsm.data()) v = 7.0f;
  const GeoTransform g = example_geo();
  SplitMix64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const PixelCoord a{rng.uniform(0, 29), rng.uniform(0, 39)};
    const PixelCoord b{rng.uniform(0, 29), rng.uniform(0, 39)};
    const double t = rng.uniform01();
    const PixelCoord m{a.row + t * (b.row - a.row), a.col + t * (b.col - a.col)};
    const Vec3 expect = (1 - t) * dsm_pixel_to_xyz(dsm, g, a) + t * dsm_pixel_to_xyz(dsm, g, b);
    EXPECT_LT((dsm_pixel_to_xyz(dsm, g, m) - expect).norm(), 1e-9);
  }
}

TEST(GeoTransform, WorldToPixelInverts) {
  const GeoTransform g = example_geo();
  const Eigen::Vector2d w = g.pixel_to_world({3.25, 7.5});
  const PixelCoord p = g.world_to_pixel(w.x(), w.y());
  EXPECT_NEAR(p.row, 3.25, 1e-12);
  EXPECT_NEAR(p.col, 7.5, 1e-12);
}

TEST(XyzLookup, ConstantAndRamp) {
  Raster xyz(5, 5, Semantic::kXyz3);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) {
      xyz.at(r, c, 0) = 5;
      xyz.at(r, c, 1) = 6;
      xyz.at(r, c, 2) = 7;
    }
  }
  EXPECT_EQ(xyz_image_lookup(xyz, {2.3, 1.7}), Vec3(5, 6, 7));
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) xyz.at(r, c, 0) = static_cast<float>(c);
  }
  EXPECT_DOUBLE_EQ(xyz_image_lookup(xyz, {2, 1.5}).x(), 1.5);
}

TEST(XyzLookup, ThreeValidNeighboursRenormalised) {
  Raster xyz(2, 2, Semantic::kXyz3, -9999.0f);
  const float vals[4] = {1, 2, 3, 4};  // (0,0) (0,1) (1,0) (1,1)
  for (int i = 0; i < 4; ++i) {
    for (int ch = 0; ch < 3; ++ch) xyz.at(i / 2, i % 2, ch) = vals[i] * static_cast<float>(ch + 1);
  }
  for (int ch = 0; ch < 3; ++ch) xyz.at(1, 1, ch) = -9999.0f;
  // At (0.25, 0.5): weights (0,0) 0.375, (0,1) 0.375, (1,0) 0.125; (1,1) dropped.
  const double x = (0.375 * 1 + 0.375 * 2 + 0.125 * 3) / 0.875;
  const Vec3 got = xyz_image_lookup(xyz, {0.25, 0.5});
  EXPECT_NEAR(got.x(), x, 1e-12);
  EXPECT_NEAR(got.y(), 2 * x, 1e-12);
  EXPECT_NEAR(got.z(), 3 * x, 1e-12);
}

TEST(Bilinear, ExactAtPixelCentres) {
  Raster r(9, 11, Semantic::kFlow2);
  SplitMix64 rng(13);
  for (float& v : r.data()) v = static_cast<float>(rng.uniform(-100, 100));
  double out[2];
  for (int row = 0; row < 9; ++row) {
    for (int col = 0; col < 11; ++col) {
      ASSERT_TRUE(sample_bilinear(r, {static_cast<double>(row), static_cast<double>(col)}, out));
      EXPECT_EQ(out[0], r.at(row, col, 0));
      EXPECT_EQ(out[1], r.at(row, col, 1));
    }
  }
}

TEST(Bilinear, AllNodataNeighbours) {
  Raster r(2, 2, Semantic::kConfidence1, {-1, -1, -1, -1}, -1.0f);
  double out[1];
  EXPECT_FALSE(sample_bilinear(r, {0.5, 0.5}, out));
  EXPECT_FALSE(sample_nearest(r, {0.2, 0.2}).has_value());
}

TEST(Raster, CropCopiesWindow) {
  Raster r(4, 5, Semantic::kConfidence1);
  for (int i = 0; i < 20; ++i) r.data()[static_cast<std::size_t>(i)] = static_cast<float>(i);
  const Raster c = r.crop(1, 2, 2, 3);
  EXPECT_EQ(c.at(0, 0), 7.0f);
  EXPECT_EQ(c.at(1, 2), 14.0f);
  expect_code(ErrorCode::kOutOfBounds, [&] { r.crop(3, 3, 2, 3); });
}

}  // namespace
}  // namespace georeg
