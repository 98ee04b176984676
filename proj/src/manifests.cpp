#include "georeg/manifests.hpp"

#include <fstream>

namespace georeg {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "io", "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, "io", path.string() + ": " + e.what());
  }
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "io", "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "io", "write failed for " + path.string());
}

namespace {

template <typename F>
auto parsing(const std::filesystem::path& where, F&& f) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kFormatError, "io", where.string() + ": " + e.what());
  }
}

}  // namespace

GroundAirInputs read_ground_air_manifest(const std::filesystem::path& manifest) {
  const nlohmann::json j = read_json_file(manifest);
  const std::filesystem::path base = manifest.parent_path();
  GroundAirInputs in;
  in.files.push_back(manifest);
  auto load = [&](const std::string& rel) {
    const auto p = base / rel;
    in.files.push_back(p);
    return read_raster(p);
  };
  parsing(manifest, [&] {
    in.tile_size = j.at("tile_size").get<int>();
    if (in.tile_size < 1) throw std::runtime_error("tile_size must be >= 1");
    for (const auto& [id, rel] : j.at("ground_xyz").items()) {
      in.ground_xyz.emplace(id, load(rel.get<std::string>()));
    }
    std::map<int, Raster> renders;
    for (const auto& r : j.at("renders")) {
      renders.emplace(r.at("render_id").get<int>(), load(r.at("xyz").get<std::string>()));
    }
    for (const auto& p : j.at("pairs")) {
      GroundTilePair pair;
      pair.ground_image = p.at("ground_image").get<std::string>();
      pair.tile = {p.at("render_id").get<int>(), p.at("row_offset").get<int>(),
                   p.at("col_offset").get<int>()};
      pair.flows.forward = load(p.at("flow_fwd").get<std::string>());
      pair.flows.backward = load(p.at("flow_bwd").get<std::string>());
      pair.flows.conf_forward = load(p.at("conf_fwd").get<std::string>());
      pair.flows.conf_backward = load(p.at("conf_bwd").get<std::string>());
      if (!in.tile_xyz.count(pair.tile)) {
        const auto r = renders.find(pair.tile.render_id);
        if (r == renders.end()) {
          throw std::runtime_error("pair references unknown render " +
                                   std::to_string(pair.tile.render_id));
        }
        const Raster& xyz = r->second;
        in.tile_xyz.emplace(pair.tile, xyz.crop(pair.tile.row_offset, pair.tile.col_offset,
                                                std::min(in.tile_size, xyz.height()),
                                                std::min(in.tile_size, xyz.width())));
      }
      in.pairs.push_back(std::move(pair));
    }
    return 0;
  });
  return in;
}

nlohmann::json to_json(const std::vector<ObservedPoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const ObservedPoint& p : points) {
    nlohmann::json obs = nlohmann::json::array();
    for (const Observation& o : p.observations) {
      obs.push_back({{"image_id", o.image_id}, {"row", o.pixel.row}, {"col", o.pixel.col}});
    }
    out.push_back({{"xyz", {p.position.x(), p.position.y(), p.position.z()}},
                   {"observations", obs}});
  }
  return out;
}

std::vector<ObservedPoint> observed_points_from_json(const nlohmann::json& j) {
  return parsing("points", [&] {
    std::vector<ObservedPoint> out;
    for (const auto& item : j) {
      ObservedPoint p;
      const auto xyz = item.at("xyz").get<std::vector<double>>();
      if (xyz.size() != 3) throw std::runtime_error("xyz needs 3 values");
      p.position = {xyz[0], xyz[1], xyz[2]};
      for (const auto& o : item.at("observations")) {
        p.observations.push_back(
            {o.at("image_id").get<std::string>(), {o.at("row").get<double>(), o.at("col").get<double>()}});
      }
      out.push_back(std::move(p));
    }
    return out;
  });
}

std::map<std::string, Raster> read_mask_manifest(const std::filesystem::path& manifest,
                                                 std::vector<std::filesystem::path>* files) {
  const nlohmann::json j = read_json_file(manifest);
  if (files) files->push_back(manifest);
  return parsing(manifest, [&] {
    std::map<std::string, Raster> masks;
    for (const auto& [id, rel] : j.items()) {
      const auto p = manifest.parent_path() / rel.get<std::string>();
      if (files) files->push_back(p);
      Raster m = read_raster(p);
      if (m.semantic() != Semantic::kMask1) {
        throw Error(ErrorCode::kFormatError, "gravity", p.string() + ": expected a Mask1 raster");
      }
      masks.emplace(id, std::move(m));
    }
    return masks;
  });
}

}  // namespace georeg
