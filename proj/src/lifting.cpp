#include "georeg/lifting.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

#include "georeg/parallel.hpp"

namespace georeg {

namespace {

template <typename LiftB>
LiftedMatches lift(const MatchSet& matches, const Raster& xyz_a, const LiftB& lift_b) {
  if (xyz_a.semantic() != Semantic::kXyz3) {
    throw Error(ErrorCode::kInvalidArgument, "lifting", "side A raster must be Xyz3");
  }
  const std::size_t n = matches.pairs.size();
  if (n == 0) throw Error(ErrorCode::kEmptyResult, "lifting", "match set is empty");

  std::vector<std::optional<std::pair<Vec3, Vec3>>> slots(n);
  parallel_for(n, [&](std::size_t i) {
    const Match& m = matches.pairs[i];
    try {
      const Vec3 a = xyz_image_lookup(xyz_a, m.a);
      const Vec3 b = lift_b(m.b);
      slots[i] = std::pair{a, b};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoDataAtPixel) throw;
    }
  });

  LiftedMatches out;
  std::size_t kept = 0;
  for (const auto& s : slots) kept += s.has_value();
  out.dropped_count = n - kept;
  if (kept == 0) {
    throw Error(ErrorCode::kEmptyResult, "lifting",
                "all " + std::to_string(n) + " matches hit nodata");
  }
  out.corr.source.resize(3, static_cast<Eigen::Index>(kept));
  out.corr.target.resize(3, static_cast<Eigen::Index>(kept));
  out.provenance.reserve(kept);
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!slots[i]) continue;
    out.corr.source.col(k) = slots[i]->first;
    out.corr.target.col(k) = slots[i]->second;
    out.provenance.emplace_back(matches.pairs[i].a, matches.pairs[i].b);
    ++k;
  }
  return out;
}

Error restage(const Error& e) { return e.with_stage("lifting"); }

}  // namespace

LiftedMatches lift_xyz_to_dsm(const MatchSet& matches, const Raster& xyz_a, const Raster& dsm,
                              const GeoTransform& geo) {
  if (dsm.channels() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "lifting", "DSM raster must have one channel");
  }
  geo.validate();
  try {
    return lift(matches, xyz_a, [&](const PixelCoord& px) { return dsm_pixel_to_xyz(dsm, geo, px); });
  } catch (const Error& e) {
    throw restage(e);
  }
}

LiftedMatches lift_xyz_to_xyz(const MatchSet& matches, const Raster& xyz_a, const Raster& xyz_b) {
  if (xyz_b.semantic() != Semantic::kXyz3) {
    throw Error(ErrorCode::kInvalidArgument, "lifting", "side B raster must be Xyz3");
  }
  try {
    return lift(matches, xyz_a, [&](const PixelCoord& px) { return xyz_image_lookup(xyz_b, px); });
  } catch (const Error& e) {
    throw restage(e);
  }
}

void write_lifted_csv(const LiftedMatches& lifted, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "lifting", "cannot write " + path.string());
  out << "xa,ya,za,xb,yb,zb\n";
  char line[256];
  for (Eigen::Index i = 0; i < lifted.corr.source.cols(); ++i) {
    const Vec3 a = lifted.corr.source.col(i);
    const Vec3 b = lifted.corr.target.col(i);
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", a.x(), a.y(), a.z(),
                  b.x(), b.y(), b.z());
    out << line;
  }
}

}  // namespace georeg
