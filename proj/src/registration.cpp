#include "georeg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>

#include <nlohmann/json.hpp>

#include "georeg/parallel.hpp"

namespace georeg {

namespace {

std::vector<int> axis_offsets(int extent, int tile, double overlap) {
  const int stride = std::max(1, static_cast<int>(std::lround(tile * (1.0 - overlap))));
  std::vector<int> offsets;
  for (int off = 0; off + tile <= extent; off += stride) offsets.push_back(off);
  if (offsets.back() + tile < extent) offsets.push_back(extent - tile);
  return offsets;
}

nlohmann::json tile_json(const TileKey& t) {
  return {{"render_id", t.render_id}, {"row_offset", t.row_offset}, {"col_offset", t.col_offset}};
}

nlohmann::json sim3_json(const Sim3d& t, const std::string& src, const std::string& dst) {
  return to_json(LabelledSim3{t, src, dst});
}

}  // namespace

TileGrid make_tile_grid(int image_height, int image_width, int tile_size, double overlap_fraction,
                        int render_count) {
  if (image_height < 1 || image_width < 1 || tile_size < 1 || render_count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "registration",
                "image dims, tile size and render count must be >= 1");
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "registration", "overlap_fraction must be in [0, 1)");
  }
  TileGrid grid;
  grid.image_height = image_height;
  grid.image_width = image_width;
  grid.tile_size = tile_size;
  grid.overlap_fraction = overlap_fraction;
  grid.tile_rows = std::min(tile_size, image_height);
  grid.tile_cols = std::min(tile_size, image_width);
  const auto rows = axis_offsets(image_height, grid.tile_rows, overlap_fraction);
  const auto cols = axis_offsets(image_width, grid.tile_cols, overlap_fraction);
  for (int r = 0; r < render_count; ++r) {
    for (int row : rows) {
      for (int col : cols) grid.tiles.push_back({r, row, col});
    }
  }
  return grid;
}

ObliqueViewSet oblique_poses(const Vec3& scene_center, double scene_radius,
                             const ObliqueConfig& cfg) {
  if (!(scene_radius > 0.0) || !scene_center.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "registration", "scene radius must be > 0");
  }
  if (!(cfg.azimuth_step_deg > 0.0 && cfg.azimuth_step_deg <= 360.0) ||
      !(cfg.depression_deg > 0.0 && cfg.depression_deg <= 90.0) || cfg.resolution_px < 1) {
    throw Error(ErrorCode::kInvalidArgument, "registration", "bad oblique view configuration");
  }
  constexpr double kDeg = std::numbers::pi / 180.0;
  ObliqueViewSet set;
  set.config = cfg;

  auto looking_at = [&](const Vec3& eye, const Vec3& right_hint) {
    const Vec3 f = (scene_center - eye).normalized();
    Vec3 right = f.cross(Vec3::UnitZ());
    if (right.norm() < 1e-12) right = right_hint;
    right.normalize();
    const Vec3 down = f.cross(right);
    Mat3 r;
    r.col(0) = right;
    r.col(1) = down;
    r.col(2) = f;
    return r;
  };
  auto add = [&](const Vec3& eye, const Vec3& right_hint) {
    RenderPose rp;
    rp.render_id = static_cast<int>(set.poses.size());
    rp.pose.id = "render_" + std::to_string(rp.render_id);
    rp.pose.center = eye;
    rp.pose.orientation = looking_at(eye, right_hint);
    rp.half_extent_m = scene_radius;
    rp.resolution_px = cfg.resolution_px;
    set.poses.push_back(rp);
  };

  const Vec3 above = scene_center + Vec3(0.0, 0.0, scene_radius);
  const int count = static_cast<int>(std::lround(360.0 / cfg.azimuth_step_deg));
  const bool straight_down = cfg.depression_deg >= 90.0 - 1e-12;
  for (int i = 0; i < count; ++i) {
    const double az = i * cfg.azimuth_step_deg * kDeg;
    if (straight_down) {
      add(above, Vec3(std::cos(az), -std::sin(az), 0.0));
      continue;
    }
    const double height = scene_radius * std::tan(cfg.depression_deg * kDeg);
    add(scene_center + Vec3(scene_radius * std::sin(az), scene_radius * std::cos(az), height),
        Vec3::UnitX());
  }
  if (cfg.include_nadir) add(above, Vec3::UnitX());
  return set;
}

AirToSatResult register_air_to_sat(const FlowPair& flow, const Raster& xyz_air, const Raster& dsm,
                                   const GeoTransform& geo, const FilterConfig& filter_cfg,
                                   const RansacConfig& ransac_cfg) {
  flow.validate();
  if (!xyz_air.same_shape(flow.forward)) {
    throw Error(ErrorCode::kShapeMismatch, "registration",
                "airborne XYZ raster must match the forward flow shape");
  }
  if (!dsm.same_shape(flow.backward)) {
    throw Error(ErrorCode::kShapeMismatch, "registration",
                "DSM must match the backward flow shape");
  }
  const MatchSet matches = filter_matches(flow, filter_cfg);
  const LiftedMatches lifted = lift_xyz_to_dsm(matches, xyz_air, dsm, geo);
  const RansacResult fit = ransac_sim3(lifted.corr, ransac_cfg);

  AirToSatResult out;
  out.transform = fit.transform;
  out.survivor_count = matches.survivor_count;
  out.match_count = matches.pairs.size();
  out.lifted_count = lifted.size();
  out.dropped_count = lifted.dropped_count;
  out.inlier_count = fit.inliers.count;
  out.inlier_fraction =
      static_cast<double>(fit.inliers.count) / static_cast<double>(lifted.size());
  out.iterations = fit.iterations;
  return out;
}

GroundToAirResult register_ground_to_air(const std::vector<GroundTilePair>& pairs,
                                         const std::map<std::string, Raster>& xyz_ground,
                                         const std::map<TileKey, Raster>& xyz_air_tiles,
                                         const GroundToAirConfig& cfg) {
  if (cfg.top_k < 1 || !(cfg.inlier_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "registration",
                "top_k must be >= 1 and inlier_threshold > 0");
  }
  cfg.filter.validate();
  RansacConfig ransac_cfg = cfg.ransac;
  ransac_cfg.inlier_threshold = cfg.inlier_threshold;
  ransac_cfg.validate();

  // Canonical pair order: (ground image, tile).
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = pairs[a];
    const auto& pb = pairs[b];
    if (pa.ground_image != pb.ground_image) return pa.ground_image < pb.ground_image;
    return pa.tile < pb.tile;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const auto& pa = pairs[order[i - 1]];
    const auto& pb = pairs[order[i]];
    if (pa.ground_image == pb.ground_image && pa.tile == pb.tile) {
      throw Error(ErrorCode::kInvalidArgument, "registration",
                  "duplicate pair for ground image '" + pa.ground_image + "'");
    }
  }

  // 1. filter + lift every pair.
  const std::size_t n = order.size();
  std::vector<PairSummary> summaries(n);
  std::vector<std::optional<LiftedMatches>> lifted(n);
  parallel_for(n, [&](std::size_t k) {
    const GroundTilePair& p = pairs[order[k]];
    summaries[k] = {p.ground_image, p.tile, 0, 0};
    const auto g = xyz_ground.find(p.ground_image);
    if (g == xyz_ground.end()) {
      throw Error(ErrorCode::kInvalidArgument, "registration",
                  "no XYZ raster for ground image '" + p.ground_image + "'");
    }
    const auto t = xyz_air_tiles.find(p.tile);
    if (t == xyz_air_tiles.end()) {
      throw Error(ErrorCode::kInvalidArgument, "registration",
                  "no XYZ raster for tile (" + std::to_string(p.tile.render_id) + ", " +
                      std::to_string(p.tile.row_offset) + ", " +
                      std::to_string(p.tile.col_offset) + ")");
    }
    MatchSet matches;
    try {
      matches = filter_matches(p.flows, cfg.filter);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kEmptyResult) return;
      throw;
    }
    summaries[k].match_count = matches.survivor_count;
    try {
      lifted[k] = lift_xyz_to_xyz(matches, g->second, t->second);
      summaries[k].lifted_count = lifted[k]->size();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyResult) throw;
    }
  });

  // Pool of every lifted correspondence, in canonical pair order.
  std::size_t pooled = 0;
  for (const auto& l : lifted) pooled += l ? l->size() : 0;
  Correspondences3D pool;
  pool.source.resize(3, static_cast<Eigen::Index>(pooled));
  pool.target.resize(3, static_cast<Eigen::Index>(pooled));
  std::vector<std::size_t> pool_owner(pooled);  // canonical pair index
  {
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!lifted[k]) continue;
      const Eigen::Index m = lifted[k]->corr.source.cols();
      pool.source.middleCols(at, m) = lifted[k]->corr.source;
      pool.target.middleCols(at, m) = lifted[k]->corr.target;
      std::fill_n(pool_owner.begin() + at, m, k);
      at += m;
    }
  }

  // 2. top-k pairs per ground image.
  std::vector<std::size_t> chosen;
  for (std::size_t begin = 0; begin < n;) {
    std::size_t end = begin;
    while (end < n && summaries[end].ground_image == summaries[begin].ground_image) ++end;
    std::vector<std::size_t> eligible;
    for (std::size_t k = begin; k < end; ++k) {
      if (summaries[k].lifted_count >= 3) eligible.push_back(k);
    }
    std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
      if (summaries[a].match_count != summaries[b].match_count) {
        return summaries[a].match_count > summaries[b].match_count;
      }
      return summaries[a].tile < summaries[b].tile;
    });
    if (eligible.size() > static_cast<std::size_t>(cfg.top_k)) {
      eligible.resize(static_cast<std::size_t>(cfg.top_k));
    }
    chosen.insert(chosen.end(), eligible.begin(), eligible.end());
    begin = end;
  }
  if (chosen.empty()) {
    throw Error(ErrorCode::kNoCandidates, "registration",
                "no (ground image, tile) pair has 3 lifted correspondences");
  }

  // 3. fit and score candidates.
  std::vector<std::optional<CandidateTransform>> fitted(chosen.size());
  std::vector<std::uint8_t> no_consensus(chosen.size(), 0);
  parallel_for(chosen.size(), [&](std::size_t c) {
    const std::size_t k = chosen[c];
    RansacResult fit;
    try {
      fit = ransac_sim3(lifted[k]->corr, ransac_cfg);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNoConsensus) {
        no_consensus[c] = 1;
        return;
      }
      if (e.code() == ErrorCode::kDegenerateInput) return;
      throw;
    }
    const InlierSet scored = count_inliers(fit.transform, pool, cfg.inlier_threshold);
    CandidateTransform cand;
    cand.transform = fit.transform;
    cand.ground_image = summaries[k].ground_image;
    cand.tile = summaries[k].tile;
    cand.match_count = summaries[k].match_count;
    cand.lifted_count = summaries[k].lifted_count;
    cand.inlier_count = scored.count;
    cand.inlier_fraction = static_cast<double>(scored.count) / static_cast<double>(pooled);
    cand.residual_sum = scored.residual_sum;
    fitted[c] = std::move(cand);
  });

  GroundToAirResult out;
  out.pairs = std::move(summaries);
  out.pooled_count = pooled;
  for (auto& f : fitted) {
    if (f) out.candidates.push_back(std::move(*f));
  }
  if (out.candidates.empty()) {
    if (std::find(no_consensus.begin(), no_consensus.end(), 1) != no_consensus.end()) {
      throw Error(ErrorCode::kNoConsensus, "registration",
                  "no candidate pair reached a RANSAC consensus");
    }
    throw Error(ErrorCode::kNoCandidates, "registration", "every candidate fit was degenerate");
  }

  // 4. consensus winner and final refit.
  std::size_t win = 0;
  for (std::size_t c = 1; c < out.candidates.size(); ++c) {
    const auto& a = out.candidates[c];
    const auto& b = out.candidates[win];
    if (a.inlier_count > b.inlier_count ||
        (a.inlier_count == b.inlier_count && a.residual_sum < b.residual_sum)) {
      win = c;
    }
  }
  out.winner = win;
  if (out.candidates[win].inlier_count <= 3) {
    throw Error(ErrorCode::kNoConsensus, "registration",
                "best candidate explains only " +
                    std::to_string(out.candidates[win].inlier_count) + " pooled correspondences");
  }
  const InlierSet win_set = count_inliers(out.candidates[win].transform, pool, cfg.inlier_threshold);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pooled; ++i) {
    if (win_set.mask[i]) idx.push_back(i);
  }
  const Correspondences3D consensus = pool.select(idx);
  out.transform = georeg::umeyama(consensus.source, consensus.target);

  const InlierSet final_set = count_inliers(out.transform, pool, cfg.inlier_threshold);
  out.final_inlier_count = final_set.count;
  out.final_inlier_fraction =
      static_cast<double>(final_set.count) / static_cast<double>(pooled);
  std::set<std::string> cameras;
  for (std::size_t i = 0; i < pooled; ++i) {
    if (final_set.mask[i]) cameras.insert(out.pairs[pool_owner[i]].ground_image);
  }
  out.camera_count = cameras.size();
  return out;
}

GateDecision gate_subgraph(std::size_t camera_count, double inlier_fraction,
                           const SubgraphGateConfig& cfg) {
  if (cfg.min_cameras < 1 || !(cfg.min_inlier_fraction > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "registration", "gate thresholds must be positive");
  }
  if (camera_count < static_cast<std::size_t>(cfg.min_cameras)) return {false, "too few cameras"};
  if (!(inlier_fraction >= cfg.min_inlier_fraction)) return {false, "low inliers"};
  return {true, "ok"};
}

nlohmann::json to_json(const TileGrid& grid) {
  nlohmann::json tiles = nlohmann::json::array();
  for (const TileKey& t : grid.tiles) tiles.push_back(tile_json(t));
  return {{"image_height", grid.image_height}, {"image_width", grid.image_width},
          {"tile_size", grid.tile_size},       {"overlap_fraction", grid.overlap_fraction},
          {"tile_height", grid.tile_rows},     {"tile_width", grid.tile_cols},
          {"tile_count", grid.tiles.size()},   {"tiles", tiles}};
}

nlohmann::json to_json(const ObliqueViewSet& views) {
  nlohmann::json poses = nlohmann::json::array();
  for (const RenderPose& rp : views.poses) {
    const Eigen::Vector4d q = rotation_to_wxyz(rp.pose.orientation);
    poses.push_back(
        {{"render_id", rp.render_id},
         {"center_xyz", {rp.pose.center.x(), rp.pose.center.y(), rp.pose.center.z()}},
         {"rotation_quaternion_wxyz", {q(0), q(1), q(2), q(3)}},
         {"projection", {{"type", rp.projection}, {"half_extent_m", rp.half_extent_m}}},
         {"resolution_px", rp.resolution_px}});
  }
  return poses;
}

nlohmann::json to_json(const AirToSatResult& r) {
  return {{"transform", sim3_json(r.transform, "air_model", "geo")},
          {"survivor_count", r.survivor_count},
          {"match_count", r.match_count},
          {"lifted_count", r.lifted_count},
          {"dropped_count", r.dropped_count},
          {"inlier_count", r.inlier_count},
          {"inlier_fraction", r.inlier_fraction},
          {"iterations", r.iterations}};
}

nlohmann::json to_json(const GroundToAirResult& r) {
  nlohmann::json cands = nlohmann::json::array();
  for (std::size_t c = 0; c < r.candidates.size(); ++c) {
    const auto& cand = r.candidates[c];
    cands.push_back({{"ground_image", cand.ground_image},
                     {"tile", tile_json(cand.tile)},
                     {"match_count", cand.match_count},
                     {"lifted_count", cand.lifted_count},
                     {"inlier_count", cand.inlier_count},
                     {"inlier_fraction", cand.inlier_fraction},
                     {"residual_sum", cand.residual_sum},
                     {"winner", c == r.winner},
                     {"transform", sim3_json(cand.transform, "ground_model", "air_model")}});
  }
  return {{"transform", sim3_json(r.transform, "ground_model", "air_model")},
          {"pooled_count", r.pooled_count},
          {"final_inlier_count", r.final_inlier_count},
          {"final_inlier_fraction", r.final_inlier_fraction},
          {"camera_count", r.camera_count},
          {"winner", r.winner},
          {"candidates", cands}};
}

nlohmann::json to_json(const GateDecision& gate) {
  return {{"accepted", gate.accepted}, {"reason", gate.reason}};
}

}  // namespace georeg
