#include "georeg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "georeg/icp.hpp"
#include "georeg/manifests.hpp"
#include "georeg/random.hpp"

namespace georeg::synth {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void bad(const std::string& what) { throw Error(ErrorCode::kInvalidArgument, "synth", what); }

Raster filled(int h, int w, Semantic s, float value, std::optional<float> nodata) {
  Raster r(h, w, s, nodata);
  std::fill(r.data().begin(), r.data().end(), value);
  return r;
}

Mat3 random_rotation(SplitMix64& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

// Camera-to-world orientation looking from `eye` at `target`, image x right,
// y down, z forward.
Mat3 look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 f = (target - eye).normalized();
  Vec3 right = f.cross(Vec3::UnitZ());
  if (right.norm() < 1e-12) right = Vec3::UnitX();
  right.normalize();
  Mat3 r;
  r.col(0) = right;
  r.col(1) = f.cross(right);
  r.col(2) = f;
  return r;
}

std::string cam_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "cam_%02d", i);
  return buf;
}

std::string ground_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "g%02d", i);
  return buf;
}

}  // namespace

double Heightfield::height_at(double x, double y) const {
  double h = base_height;
  for (const Box& b : boxes) {
    if (x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1) h = std::max(h, base_height + b.height);
  }
  return h;
}

Heightfield random_heightfield(double extent, int box_count, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Heightfield hf;
  const double half = extent / 2.0;
  for (int i = 0; i < box_count; ++i) {
    const double w = rng.uniform(0.05, 0.2) * extent;
    const double d = rng.uniform(0.05, 0.2) * extent;
    Box b;
    b.x0 = rng.uniform(-half, half - w);
    b.y0 = rng.uniform(-half, half - d);
    b.x1 = b.x0 + w;
    b.y1 = b.y0 + d;
    b.height = 0.25 * static_cast<double>(8 + rng.uniform_index(73));  // 2 .. 20 m
    hf.boxes.push_back(b);
  }
  return hf;
}

std::pair<int, int> WindowMap::apply(int i, int j) const {
  int u = i, v = j;
  switch (((quarter_turns % 4) + 4) % 4) {
    case 0: u = i; v = j; break;
    case 1: u = j; v = cw - 1 - i; break;
    case 2: u = ch - 1 - i; v = cw - 1 - j; break;
    case 3: u = ch - 1 - j; v = i; break;
  }
  return {row0 + u, col0 + v};
}

FlowPair window_flow_pair(const WindowMap& map, int b_height, int b_width) {
  if (map.row0 < 0 || map.col0 < 0 || map.row0 + map.ch > b_height ||
      map.col0 + map.cw > b_width || map.ch < 1 || map.cw < 1) {
    bad("window does not fit inside image B");
  }
  const int ha = map.a_height();
  const int wa = map.a_width();
  FlowPair fp;
  fp.forward = filled(ha, wa, Semantic::kFlow2, kNodata, kNodata);
  fp.backward = filled(b_height, b_width, Semantic::kFlow2, kNodata, kNodata);
  fp.conf_forward = filled(ha, wa, Semantic::kConfidence1, 1.0f, std::nullopt);
  fp.conf_backward = filled(b_height, b_width, Semantic::kConfidence1, 1.0f, std::nullopt);
  for (int i = 0; i < ha; ++i) {
    for (int j = 0; j < wa; ++j) {
      const auto [r, c] = map.apply(i, j);
      fp.forward.at(i, j, 0) = static_cast<float>(r);
      fp.forward.at(i, j, 1) = static_cast<float>(c);
      fp.backward.at(r, c, 0) = static_cast<float>(i);
      fp.backward.at(r, c, 1) = static_cast<float>(j);
    }
  }
  return fp;
}

void NoiseSpec::validate() const {
  if (!(flow_jitter_px >= 0.0) || !(outlier_fraction >= 0.0 && outlier_fraction < 1.0) ||
      !(confidence_decay >= 0.0 && confidence_decay < 1.0)) {
    bad("noise needs jitter >= 0, outlier_fraction in [0, 1), confidence_decay in [0, 1)");
  }
}

FlowPair corrupt_flows(const FlowPair& fp, const NoiseSpec& noise, std::uint64_t seed,
                       CorruptionMasks* masks) {
  noise.validate();
  fp.validate();
  FlowPair out = fp;
  CorruptionMasks local;
  CorruptionMasks& m = masks ? *masks : local;

  auto corrupt = [&](Raster& flow, Raster& conf, const Raster& other, std::vector<std::uint8_t>& mask,
                     std::uint64_t stream) {
    mask.assign(static_cast<std::size_t>(flow.height()) * static_cast<std::size_t>(flow.width()), 0);
    if (noise.outlier_fraction == 0.0 && noise.flow_jitter_px == 0.0) return;
    SplitMix64 rng = stream_for(seed, stream);
    for (int r = 0; r < flow.height(); ++r) {
      for (int c = 0; c < flow.width(); ++c) {
        if (!flow.pixel_valid(r, c)) continue;
        if (rng.uniform01() < noise.outlier_fraction) {
          flow.at(r, c, 0) = static_cast<float>(rng.uniform(0.0, other.height() - 1.0));
          flow.at(r, c, 1) = static_cast<float>(rng.uniform(0.0, other.width() - 1.0));
          mask[static_cast<std::size_t>(r) * static_cast<std::size_t>(flow.width()) +
               static_cast<std::size_t>(c)] = 1;
          if (!noise.hard) {
            const float v = conf.at(r, c);
            conf.at(r, c) =
                static_cast<float>(std::min(static_cast<double>(v), 0.2) * noise.confidence_decay);
          }
        } else if (noise.flow_jitter_px > 0.0) {
          flow.at(r, c, 0) += static_cast<float>(noise.flow_jitter_px * rng.normal());
          flow.at(r, c, 1) += static_cast<float>(noise.flow_jitter_px * rng.normal());
        }
      }
    }
  };
  corrupt(out.forward, out.conf_forward, fp.backward, m.forward, 0);
  corrupt(out.backward, out.conf_backward, fp.forward, m.backward, 1);
  return out;
}

void AirSatSpec::validate() const {
  if (!(extent_m > 0.0) || !(gsd_m > 0.0) || box_count < 0 || air_height < 3 || air_width < 3 ||
      camera_count < 1) {
    bad("air2sat scene needs positive extent, gsd, image size and camera count");
  }
  const long n = std::lround(extent_m / gsd_m);
  const bool odd = ((air_quarter_turns % 4) + 4) % 4 % 2 == 1;
  const int ch = odd ? air_width : air_height;
  const int cw = odd ? air_height : air_width;
  if (ch > n || cw > n) bad("airborne image larger than the DSM grid");
  noise.validate();
  georeg::validate(anchor);
}

AirSatScene generate_air_sat_scene(const AirSatSpec& spec) {
  spec.validate();
  AirSatScene s;
  s.spec = spec;
  SplitMix64 rng = stream_for(spec.seed, 100);
  s.heightfield = random_heightfield(spec.extent_m, spec.box_count, rng());

  const int n = static_cast<int>(std::lround(spec.extent_m / spec.gsd_m));
  s.geo.origin_easting = -0.5 * n * spec.gsd_m;
  s.geo.origin_northing = 0.5 * n * spec.gsd_m;
  s.geo.pixel_size_x = spec.gsd_m;
  s.geo.pixel_size_y = -spec.gsd_m;
  s.geo.crs_label = "local-enu";
  s.geo.geodetic_anchor = spec.anchor;
  s.covariance.sigma = Eigen::Vector3d(0.25, 0.25, 1.0).asDiagonal();

  s.dsm = Raster(n, n, Semantic::kDsm1, kNodata);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Eigen::Vector2d en = s.geo.pixel_to_world({static_cast<double>(r), static_cast<double>(c)});
      s.dsm.at(r, c) = static_cast<float>(s.heightfield.height_at(en.x(), en.y()));
    }
  }

  const int turns = ((spec.air_quarter_turns % 4) + 4) % 4;
  s.window.quarter_turns = turns;
  s.window.ch = turns % 2 == 0 ? spec.air_height : spec.air_width;
  s.window.cw = turns % 2 == 0 ? spec.air_width : spec.air_height;
  s.window.row0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - s.window.ch + 1)));
  s.window.col0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - s.window.cw + 1)));

  const Sim3d geo_to_air = spec.air_to_geo.inverse();
  s.xyz_air = Raster(spec.air_height, spec.air_width, Semantic::kXyz3, kNodata);
  for (int i = 0; i < spec.air_height; ++i) {
    for (int j = 0; j < spec.air_width; ++j) {
      const auto [r, c] = s.window.apply(i, j);
      const Vec3 g = dsm_pixel_to_xyz(s.dsm, s.geo, {static_cast<double>(r), static_cast<double>(c)});
      const Vec3 a = geo_to_air * g;
      for (int k = 0; k < 3; ++k) s.xyz_air.at(i, j, k) = static_cast<float>(a(k));
    }
  }

  s.clean_flows = window_flow_pair(s.window, n, n);
  s.flows = corrupt_flows(s.clean_flows, spec.noise, stream_for(spec.seed, 101)(), &s.corruption);
  s.model_confidence = filled(spec.air_height, spec.air_width, Semantic::kConfidence1, 0.9f, std::nullopt);
  s.flows.model_confidence = s.model_confidence;
  s.clean_flows.model_confidence = s.model_confidence;

  for (int i = 0; i < spec.camera_count; ++i) {
    const double az = 360.0 * i / spec.camera_count * kDeg;
    const Vec3 eye(0.75 * spec.extent_m * std::sin(az), 0.75 * spec.extent_m * std::cos(az),
                   0.5 * spec.extent_m);
    s.camera_enu.push_back(eye);
    CameraPose cam;
    cam.id = cam_id(i);
    cam.center = geo_to_air * eye;
    cam.orientation = geo_to_air.rotation() * look_at(eye, Vec3::Zero());
    s.air_cameras.push_back(cam);
  }
  return s;
}

void GroundAirSpec::validate() const {
  if (ground_images < 1 || ground_size < 3 || render_size < 3 || renders < 1 || tile_size < 1 ||
      !(overlap >= 0.0 && overlap < 1.0) || !(gsd_m > 0.0) || box_count < 0 ||
      !(low_confidence_fraction >= 0.0 && low_confidence_fraction < 1.0) || decoys_per_image < 0) {
    bad("invalid ground2air scene parameters");
  }
  if (ground_size > std::min(tile_size, render_size)) bad("ground image larger than a tile");
}

GroundAirScene generate_ground_air_scene(const GroundAirSpec& spec) {
  spec.validate();
  GroundAirScene s;
  s.spec = spec;
  SplitMix64 rng = stream_for(spec.seed, 200);
  const double extent = spec.render_size * spec.gsd_m;
  s.heightfield = random_heightfield(extent, spec.box_count, rng());
  s.grid = make_tile_grid(spec.render_size, spec.render_size, spec.tile_size, spec.overlap, spec.renders);

  const int S = spec.render_size;
  for (int rid = 0; rid < spec.renders; ++rid) {
    const double theta = 360.0 * rid / spec.renders * kDeg;
    const double ct = std::cos(theta), st = std::sin(theta);
    Raster xyz(S, S, Semantic::kXyz3, kNodata);
    for (int r = 0; r < S; ++r) {
      for (int c = 0; c < S; ++c) {
        const double u = (c + 0.5 - S / 2.0) * spec.gsd_m;
        const double v = (S / 2.0 - r - 0.5) * spec.gsd_m;
        const double x = ct * u - st * v;
        const double y = st * u + ct * v;
        xyz.at(r, c, 0) = static_cast<float>(x);
        xyz.at(r, c, 1) = static_cast<float>(y);
        xyz.at(r, c, 2) = static_cast<float>(s.heightfield.height_at(x, y));
      }
    }
    s.render_xyz.push_back(std::move(xyz));
  }
  for (const TileKey& t : s.grid.tiles) {
    s.tile_xyz.emplace(t, s.render_xyz[static_cast<std::size_t>(t.render_id)].crop(
                              t.row_offset, t.col_offset, s.grid.tile_rows, s.grid.tile_cols));
  }

  const Sim3d air_to_ground = spec.ground_to_air.inverse();
  const int G = spec.ground_size;
  const int TR = s.grid.tile_rows, TC = s.grid.tile_cols;
  auto air_point = [&](const TileKey& t, int r, int c) {
    const Raster& x = s.tile_xyz.at(t);
    return Vec3(x.at(r, c, 0), x.at(r, c, 1), x.at(r, c, 2));
  };
  auto random_window = [&](SplitMix64& g) {
    WindowMap w;
    w.ch = w.cw = G;
    w.row0 = static_cast<int>(g.uniform_index(static_cast<std::uint64_t>(TR - G + 1)));
    w.col0 = static_cast<int>(g.uniform_index(static_cast<std::uint64_t>(TC - G + 1)));
    w.quarter_turns = static_cast<int>(g.uniform_index(4));
    return w;
  };
  auto far_enough = [](const Vec3& a, const Vec3& b) { return (a - b).head<2>().norm() >= 2.0; };

  for (int gi = 0; gi < spec.ground_images; ++gi) {
    SplitMix64 g = stream_for(spec.seed, 1000 + static_cast<std::uint64_t>(gi));
    const std::string id = ground_id(gi);
    const TileKey correct = s.grid.tiles[g.uniform_index(s.grid.tiles.size())];
    const WindowMap win = random_window(g);
    s.correct_tile[id] = correct;

    // Ground XYZ and the true air point of every ground pixel.
    Raster gxyz(G, G, Semantic::kXyz3, kNodata);
    std::vector<Vec3> truth(static_cast<std::size_t>(G * G));
    for (int i = 0; i < G; ++i) {
      for (int j = 0; j < G; ++j) {
        const auto [r, c] = win.apply(i, j);
        const Vec3 a = air_point(correct, r, c);
        truth[static_cast<std::size_t>(i * G + j)] = a;
        const Vec3 p = air_to_ground * a;
        for (int k = 0; k < 3; ++k) gxyz.at(i, j, k) = static_cast<float>(p(k));
      }
    }
    s.ground_xyz.emplace(id, std::move(gxyz));

    // Correct pair with some low-confidence pixels.
    {
      FlowPair fp = window_flow_pair(win, TR, TC);
      for (float& v : fp.conf_forward.data()) {
        if (g.uniform01() < spec.low_confidence_fraction) v = 0.1f;
      }
      s.pairs.push_back({id, correct, std::move(fp)});
    }

    // Decoys: tiles of the same render that do not overlap the correct one.
    std::set<TileKey> decoys;
    std::vector<TileKey> disjoint;
    for (const TileKey& t : s.grid.tiles) {
      const bool overlaps = t.render_id == correct.render_id &&
                            std::abs(t.row_offset - correct.row_offset) < TR &&
                            std::abs(t.col_offset - correct.col_offset) < TC;
      if (!overlaps) disjoint.push_back(t);
    }
    for (int d = 0; d < spec.decoys_per_image && !disjoint.empty(); ++d) {
      const std::size_t pick = g.uniform_index(disjoint.size());
      const TileKey t = disjoint[pick];
      disjoint.erase(disjoint.begin() + static_cast<std::ptrdiff_t>(pick));
      for (int attempt = 0; attempt < 100; ++attempt) {
        const WindowMap dw = random_window(g);
        bool ok = true;
        for (int i = 0; i < G && ok; ++i) {
          for (int j = 0; j < G && ok; ++j) {
            const auto [r, c] = dw.apply(i, j);
            ok = far_enough(air_point(t, r, c), truth[static_cast<std::size_t>(i * G + j)]);
          }
        }
        if (!ok) continue;
        s.pairs.push_back({id, t, window_flow_pair(dw, TR, TC)});
        decoys.insert(t);
        break;
      }
    }

    // Every other tile: independent uniform flows both ways, left to the
    // cyclic filter. Forward targets stay >= 2 m from the true air point.
    for (const TileKey& t : s.grid.tiles) {
      if (t == correct || decoys.count(t)) continue;
      FlowPair fp;
      fp.forward = filled(G, G, Semantic::kFlow2, kNodata, kNodata);
      fp.backward = filled(TR, TC, Semantic::kFlow2, kNodata, kNodata);
      fp.conf_forward = filled(G, G, Semantic::kConfidence1, 1.0f, std::nullopt);
      fp.conf_backward = filled(TR, TC, Semantic::kConfidence1, 1.0f, std::nullopt);
      for (int i = 0; i < G; ++i) {
        for (int j = 0; j < G; ++j) {
          for (int attempt = 0; attempt < 64; ++attempt) {
            const int r = static_cast<int>(g.uniform_index(static_cast<std::uint64_t>(TR)));
            const int c = static_cast<int>(g.uniform_index(static_cast<std::uint64_t>(TC)));
            if (!far_enough(air_point(t, r, c), truth[static_cast<std::size_t>(i * G + j)])) continue;
            fp.forward.at(i, j, 0) = static_cast<float>(r);
            fp.forward.at(i, j, 1) = static_cast<float>(c);
            break;
          }
        }
      }
      for (int r = 0; r < TR; ++r) {
        for (int c = 0; c < TC; ++c) {
          fp.backward.at(r, c, 0) = static_cast<float>(g.uniform_index(static_cast<std::uint64_t>(G)));
          fp.backward.at(r, c, 1) = static_cast<float>(g.uniform_index(static_cast<std::uint64_t>(G)));
        }
      }
      s.pairs.push_back({id, t, std::move(fp)});
    }
  }
  return s;
}

void GravitySpec::validate() const {
  if (!(extent > 0.0) || ground_points < 3 || roof_points < 0 || box_count < 0 ||
      !(noise_fraction >= 0.0) || camera_count < 1 || image_width < 2 || image_height < 2 ||
      !(focal_px > 0.0)) {
    bad("invalid gravity scene parameters");
  }
}

GravityScene generate_gravity_scene(const GravitySpec& spec) {
  spec.validate();
  SplitMix64 rng = stream_for(spec.seed, 300);
  const Heightfield hf = random_heightfield(spec.extent, spec.box_count, rng());
  const double half = spec.extent / 2.0;
  const double noise_radius = spec.noise_fraction * spec.extent;

  std::vector<Vec3> world;
  GravityScene s;
  while (static_cast<int>(world.size()) < spec.ground_points) {
    const double x = rng.uniform(-half, half), y = rng.uniform(-half, half);
    if (hf.height_at(x, y) != hf.base_height) continue;
    world.emplace_back(x, y, hf.base_height);
    s.is_ground.push_back(1);
  }
  for (int i = 0; i < spec.roof_points && !hf.boxes.empty(); ++i) {
    const Box& b = hf.boxes[rng.uniform_index(hf.boxes.size())];
    const double x = rng.uniform(b.x0, b.x1), y = rng.uniform(b.y0, b.y1);
    world.emplace_back(x, y, hf.height_at(x, y));
    s.is_ground.push_back(0);
  }
  for (Vec3& p : world) {
    const Vec3 dir = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    p += noise_radius * std::cbrt(rng.uniform01()) * dir;
  }

  std::vector<CameraPose> world_cams;
  for (int i = 0; i < spec.camera_count; ++i) {
    const double az = (360.0 * i / spec.camera_count + rng.uniform(-5.0, 5.0)) * kDeg;
    const Vec3 eye(0.6 * spec.extent * std::sin(az), 0.6 * spec.extent * std::cos(az),
                   0.35 * spec.extent);
    world_cams.push_back({cam_id(i), eye, look_at(eye, Vec3::Zero())});
  }

  s.points.resize(world.size());
  for (const CameraPose& cam : world_cams) {
    Raster mask(spec.image_height, spec.image_width, Semantic::kMask1, std::nullopt);
    std::vector<std::pair<std::size_t, PixelCoord>> seen;
    for (std::size_t p = 0; p < world.size(); ++p) {
      const Vec3 q = cam.orientation.transpose() * (world[p] - cam.center);
      if (!(q.z() > 0.0)) continue;
      const PixelCoord px{spec.focal_px * q.y() / q.z() + (spec.image_height - 1) / 2.0,
                          spec.focal_px * q.x() / q.z() + (spec.image_width - 1) / 2.0};
      if (!mask.contains(px)) continue;
      seen.emplace_back(p, px);
      s.points[p].observations.push_back({cam.id, px});
    }
    // Ground first, roofs painted over it.
    for (int pass = 1; pass >= 0; --pass) {
      for (const auto& [p, px] : seen) {
        if (s.is_ground[p] != pass) continue;
        mask.at(static_cast<int>(std::lround(px.row)), static_cast<int>(std::lround(px.col))) =
            static_cast<float>(pass);
      }
    }
    s.masks.emplace(cam.id, std::move(mask));
  }

  const Mat3 rot = random_rotation(rng);
  const double scale = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
  const Vec3 shift(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50));
  s.world_to_model = Sim3d(scale, rot, shift);
  for (std::size_t p = 0; p < world.size(); ++p) s.points[p].position = s.world_to_model * world[p];
  for (const CameraPose& cam : world_cams) {
    s.cameras.push_back({cam.id, s.world_to_model * cam.center, rot * cam.orientation});
  }
  s.true_up = rot * Vec3::UnitZ();
  return s;
}

// --- scene files -----------------------------------------------------------

std::string scene_kind(const nlohmann::json& j) { return j.value("kind", std::string("air2sat")); }

namespace {

template <typename F>
auto spec_parse(F&& f) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kFormatError, "synth", std::string("bad scene spec: ") + e.what());
  }
}

Sim3d truth_from(const nlohmann::json& j, const char* key) {
  return j.contains(key) ? sim3_from_json(j.at(key)).transform : Sim3d();
}

}  // namespace

AirSatSpec air_sat_spec_from_json(const nlohmann::json& j) {
  return spec_parse([&] {
    AirSatSpec s;
    s.seed = j.value("seed", s.seed);
    s.extent_m = j.value("extent_m", s.extent_m);
    s.gsd_m = j.value("gsd_m", s.gsd_m);
    s.box_count = j.value("box_count", s.box_count);
    if (j.contains("air_size")) {
      s.air_height = j.at("air_size").at(0).get<int>();
      s.air_width = j.at("air_size").at(1).get<int>();
    }
    s.air_quarter_turns = j.value("air_quarter_turns", s.air_quarter_turns);
    s.camera_count = j.value("camera_count", s.camera_count);
    s.air_to_geo = truth_from(j, "truth_transform");
    if (j.contains("anchor")) {
      const auto& a = j.at("anchor");
      s.anchor = {a.at("lat").get<double>(), a.at("lon").get<double>(), a.at("alt").get<double>()};
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      s.noise.flow_jitter_px = n.value("flow_jitter_px", 0.0);
      s.noise.outlier_fraction = n.value("outlier_fraction", 0.0);
      s.noise.confidence_decay = n.value("confidence_decay", 0.5);
      s.noise.hard = n.value("mode", std::string("easy")) == "hard";
    }
    s.validate();
    return s;
  });
}

GroundAirSpec ground_air_spec_from_json(const nlohmann::json& j) {
  return spec_parse([&] {
    GroundAirSpec s;
    s.seed = j.value("seed", s.seed);
    s.ground_images = j.value("ground_images", s.ground_images);
    s.ground_size = j.value("ground_size", s.ground_size);
    s.render_size = j.value("render_size", s.render_size);
    s.renders = j.value("renders", s.renders);
    s.tile_size = j.value("tile_size", s.tile_size);
    s.overlap = j.value("overlap", s.overlap);
    s.gsd_m = j.value("gsd_m", s.gsd_m);
    s.box_count = j.value("box_count", s.box_count);
    s.low_confidence_fraction = j.value("low_confidence_fraction", s.low_confidence_fraction);
    s.decoys_per_image = j.value("decoys_per_image", s.decoys_per_image);
    s.ground_to_air = truth_from(j, "truth_transform");
    s.validate();
    return s;
  });
}

GravitySpec gravity_spec_from_json(const nlohmann::json& j) {
  return spec_parse([&] {
    GravitySpec s;
    s.seed = j.value("seed", s.seed);
    s.extent = j.value("extent_m", s.extent);
    s.ground_points = j.value("ground_points", s.ground_points);
    s.roof_points = j.value("roof_points", s.roof_points);
    s.box_count = j.value("box_count", s.box_count);
    s.noise_fraction = j.value("noise_fraction", s.noise_fraction);
    s.camera_count = j.value("camera_count", s.camera_count);
    s.validate();
    return s;
  });
}

namespace {

struct TreeWriter {
  std::filesystem::path dir;
  std::vector<std::string> files;

  void raster(const Raster& r, const std::string& rel) {
    std::filesystem::create_directories((dir / rel).parent_path());
    write_raster(r, dir / rel);
    files.push_back(rel);
  }
  void json(const nlohmann::json& j, const std::string& rel) {
    std::filesystem::create_directories((dir / rel).parent_path());
    write_json_file(j, dir / rel);
    files.push_back(rel);
  }
};

nlohmann::json camera_list(const std::vector<CameraPose>& cams) {
  nlohmann::json out = nlohmann::json::array();
  for (const CameraPose& c : cams) {
    out.push_back({{"id", c.id}, {"center_xyz", {c.center.x(), c.center.y(), c.center.z()}}});
  }
  return out;
}

std::string tile_tag(const TileKey& t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "r%d_%04d_%04d", t.render_id, t.row_offset, t.col_offset);
  return buf;
}

}  // namespace

std::vector<std::string> write_scene(const AirSatScene& s, const std::filesystem::path& dir) {
  TreeWriter w{dir, {}};
  std::filesystem::create_directories(dir);
  w.raster(s.flows.forward, "flow_fwd.grr");
  w.raster(s.flows.backward, "flow_bwd.grr");
  w.raster(s.flows.conf_forward, "conf_fwd.grr");
  w.raster(s.flows.conf_backward, "conf_bwd.grr");
  w.raster(s.model_confidence, "model_conf.grr");
  w.raster(s.xyz_air, "xyz_air.grr");
  w.raster(s.dsm, "dsm.grr");
  RasterMetadata meta;
  meta.geotransform = s.geo;
  meta.covariance = s.covariance;
  meta.provenance = {{"generator", "synth"}, {"kind", "air2sat"}, {"seed", s.spec.seed}};
  write_metadata(meta, sidecar_path(dir / "dsm.grr"));
  w.files.push_back("dsm.meta.json");
  w.json(to_json(LabelledSim3{s.spec.air_to_geo, "air_model", "geo"}), "truth_transform.json");
  w.json(camera_list(s.air_cameras), "cams_est.json");
  nlohmann::json truth = nlohmann::json::array();
  for (std::size_t i = 0; i < s.camera_enu.size(); ++i) {
    const GeodeticPoint g = enu_to_geodetic(s.camera_enu[i], s.spec.anchor);
    truth.push_back({{"id", s.air_cameras[i].id},
                     {"lat", g.latitude_deg},
                     {"lon", g.longitude_deg},
                     {"alt", g.altitude_m}});
  }
  w.json(truth, "cams_truth.json");
  nlohmann::json cov = to_json(s.covariance);
  cov["geodetic_anchor"] = {{"lat", s.geo.geodetic_anchor.latitude_deg},
                            {"lon", s.geo.geodetic_anchor.longitude_deg},
                            {"alt", s.geo.geodetic_anchor.altitude_m}};
  w.json(cov, "cov.json");
  return w.files;
}

std::vector<std::string> write_scene(const GroundAirScene& s, const std::filesystem::path& dir) {
  TreeWriter w{dir, {}};
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = {{"tile_size", s.spec.tile_size}, {"overlap", s.spec.overlap}};
  nlohmann::json ground = nlohmann::json::object();
  for (const auto& [id, xyz] : s.ground_xyz) {
    const std::string rel = "ground/" + id + "_xyz.grr";
    w.raster(xyz, rel);
    ground[id] = rel;
  }
  manifest["ground_xyz"] = ground;
  nlohmann::json renders = nlohmann::json::array();
  for (std::size_t r = 0; r < s.render_xyz.size(); ++r) {
    const std::string rel = "air/render_" + std::to_string(r) + "_xyz.grr";
    w.raster(s.render_xyz[r], rel);
    renders.push_back({{"render_id", r}, {"xyz", rel}});
  }
  manifest["renders"] = renders;
  nlohmann::json pairs = nlohmann::json::array();
  for (const GroundTilePair& p : s.pairs) {
    const std::string stem = "pairs/" + p.ground_image + "_" + tile_tag(p.tile);
    w.raster(p.flows.forward, stem + "_fwd.grr");
    w.raster(p.flows.backward, stem + "_bwd.grr");
    w.raster(p.flows.conf_forward, stem + "_cf.grr");
    w.raster(p.flows.conf_backward, stem + "_cb.grr");
    pairs.push_back({{"ground_image", p.ground_image},
                     {"render_id", p.tile.render_id},
                     {"row_offset", p.tile.row_offset},
                     {"col_offset", p.tile.col_offset},
                     {"flow_fwd", stem + "_fwd.grr"},
                     {"flow_bwd", stem + "_bwd.grr"},
                     {"conf_fwd", stem + "_cf.grr"},
                     {"conf_bwd", stem + "_cb.grr"}});
  }
  manifest["pairs"] = pairs;
  w.json(manifest, "pairs.json");
  w.json(to_json(LabelledSim3{s.spec.ground_to_air, "ground_model", "air_model"}),
         "truth_transform.json");

  // Clouds for ICP refinement.
  auto cloud = [](const auto& rasters) {
    std::vector<Vec3> pts;
    for (const auto& [key, x] : rasters) {
      for (int r = 0; r < x.height(); ++r) {
        for (int c = 0; c < x.width(); ++c) {
          if (x.pixel_valid(r, c)) pts.emplace_back(x.at(r, c, 0), x.at(r, c, 1), x.at(r, c, 2));
        }
      }
    }
    Points3d out(3, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts[i];
    return out;
  };
  write_point_cloud_csv(cloud(s.ground_xyz), dir / "ground_cloud.csv");
  w.files.push_back("ground_cloud.csv");
  std::map<int, Raster> renders_by_id;
  for (std::size_t r = 0; r < s.render_xyz.size(); ++r) {
    renders_by_id.emplace(static_cast<int>(r), s.render_xyz[r]);
  }
  write_point_cloud_csv(cloud(renders_by_id), dir / "air_cloud.csv");
  w.files.push_back("air_cloud.csv");
  return w.files;
}

std::vector<std::string> write_scene(const GravityScene& s, const std::filesystem::path& dir) {
  TreeWriter w{dir, {}};
  std::filesystem::create_directories(dir);
  w.json(to_json(s.points), "points.json");
  w.json(to_json(s.cameras), "cameras.json");
  nlohmann::json masks = nlohmann::json::object();
  for (const auto& [id, m] : s.masks) {
    const std::string rel = "masks/" + id + ".grr";
    w.raster(m, rel);
    masks[id] = rel;
  }
  w.json(masks, "masks.json");
  w.json({{"up", {s.true_up.x(), s.true_up.y(), s.true_up.z()}},
          {"world_to_model", to_json(LabelledSim3{s.world_to_model, "world", "model"})}},
         "truth_up.json");
  return w.files;
}

}  // namespace georeg::synth
