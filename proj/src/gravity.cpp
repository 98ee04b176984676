#include "georeg/gravity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "georeg/random.hpp"

namespace georeg {

nlohmann::json to_json(const std::vector<CameraPose>& cameras) {
  nlohmann::json out = nlohmann::json::array();
  for (const CameraPose& cam : cameras) {
    const Eigen::Vector4d q = rotation_to_wxyz(cam.orientation);
    out.push_back({{"id", cam.id},
                   {"center_xyz", {cam.center.x(), cam.center.y(), cam.center.z()}},
                   {"rotation_quaternion_wxyz", {q(0), q(1), q(2), q(3)}}});
  }
  return out;
}

std::vector<CameraPose> cameras_from_json(const nlohmann::json& j) {
  try {
    std::vector<CameraPose> cams;
    for (const auto& item : j) {
      CameraPose cam;
      cam.id = item.at("id").get<std::string>();
      const auto c = item.at("center_xyz").get<std::vector<double>>();
      if (c.size() != 3) throw std::runtime_error("center_xyz needs 3 values");
      cam.center = {c[0], c[1], c[2]};
      if (item.contains("rotation_quaternion_wxyz")) {
        const auto q = item.at("rotation_quaternion_wxyz").get<std::vector<double>>();
        if (q.size() != 4) throw std::runtime_error("quaternion needs 4 values");
        cam.orientation = wxyz_to_rotation({q[0], q[1], q[2], q[3]});
      }
      cams.push_back(std::move(cam));
    }
    return cams;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kFormatError, "gravity", std::string("bad cameras JSON: ") + e.what());
  }
}

Points3d select_ground_points(const std::vector<ObservedPoint>& points,
                              const std::map<std::string, Raster>& masks,
                              double min_ground_fraction) {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const ObservedPoint& p = points[i];
    if (p.observations.empty()) continue;
    std::size_t on_ground = 0;
    for (const Observation& obs : p.observations) {
      const auto it = masks.find(obs.image_id);
      if (it == masks.end()) {
        throw Error(ErrorCode::kInvalidArgument, "gravity",
                    "no ground mask for image '" + obs.image_id + "'");
      }
      const auto v = sample_nearest(it->second, obs.pixel);
      if (v && *v == 1.0f) ++on_ground;
    }
    if (static_cast<double>(on_ground) >=
        min_ground_fraction * static_cast<double>(p.observations.size())) {
      keep.push_back(static_cast<Eigen::Index>(i));
    }
  }
  if (keep.size() < 3) {
    throw Error(ErrorCode::kTooFewGroundPoints, "gravity",
                std::to_string(keep.size()) + " ground points selected, need 3");
  }
  Points3d out(3, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = points[static_cast<std::size_t>(keep[k])].position;
  }
  return out;
}

double default_plane_threshold(const Points3d& points) {
  if (points.cols() == 0) return 0.0;
  return 0.01 * (points.rowwise().maxCoeff() - points.rowwise().minCoeff()).norm();
}

namespace {

PlaneModel canonical(PlaneModel p) {
  Eigen::Index k;
  p.normal.cwiseAbs().maxCoeff(&k);
  if (p.normal(k) < 0) p = p.flipped();
  return p;
}

// Least-squares plane through the columns of `pts`; nullopt when rank < 2.
std::optional<PlaneModel> fit_plane(const Points3d& pts) {
  const Vec3 mean = pts.rowwise().mean();
  const Points3d centered = pts.colwise() - mean;
  const Mat3 scatter = centered * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 lambda = eig.eigenvalues();
  if (!(lambda(2) > 0.0) || lambda(1) <= 1e-12 * lambda(2)) return std::nullopt;
  const Vec3 n = eig.eigenvectors().col(0).normalized();
  return canonical({n, n.dot(mean)});
}

}  // namespace

PlaneFit ransac_plane(const Points3d& points, double inlier_threshold, int iterations,
                      std::uint64_t seed) {
  const Eigen::Index n = points.cols();
  if (n < 3 || !fit_plane(points)) {
    throw Error(ErrorCode::kDegenerateInput, "gravity",
                "plane fitting needs at least 3 non-collinear points");
  }
  if (!(inlier_threshold > 0.0) || iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "gravity",
                "plane threshold must be > 0 and iterations >= 1");
  }

  auto score = [&](const PlaneModel& plane, std::vector<std::uint8_t>* mask) {
    std::size_t count = 0;
    double sum = 0.0;
    if (mask) mask->assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = std::abs(plane.signed_distance(points.col(i)));
      if (d < inlier_threshold) {
        ++count;
        sum += d;
        if (mask) (*mask)[static_cast<std::size_t>(i)] = 1;
      }
    }
    return std::pair{count, sum};
  };

  std::optional<PlaneModel> best;
  std::pair<std::size_t, double> best_score{0, 0.0};
  for (int it = 0; it < iterations; ++it) {
    SplitMix64 rng = stream_for(seed, static_cast<std::uint64_t>(it));
    std::array<Eigen::Index, 3> idx{};
    for (int k = 0; k < 3; ++k) {
      bool fresh;
      do {
        idx[k] = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
        fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
      } while (!fresh);
    }
    const Vec3 a = points.col(idx[0]);
    const Vec3 normal = (points.col(idx[1]) - a).cross(points.col(idx[2]) - a);
    const double len = normal.norm();
    if (!(len > 1e-12 * (points.col(idx[1]) - a).norm() * (points.col(idx[2]) - a).norm())) {
      continue;
    }
    const PlaneModel candidate{normal / len, (normal / len).dot(a)};
    const auto s = score(candidate, nullptr);
    if (!best || s.first > best_score.first ||
        (s.first == best_score.first && s.second < best_score.second)) {
      best = candidate;
      best_score = s;
    }
  }
  if (!best) {
    throw Error(ErrorCode::kDegenerateInput, "gravity", "every plane sample was degenerate");
  }

  std::vector<std::uint8_t> mask;
  score(*best, &mask);
  Points3d consensus(3, static_cast<Eigen::Index>(best_score.first));
  for (Eigen::Index i = 0, k = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)]) consensus.col(k++) = points.col(i);
  }
  PlaneFit fit;
  const auto refit = consensus.cols() >= 3 ? fit_plane(consensus) : std::nullopt;
  fit.plane = refit ? *refit : canonical(*best);
  fit.inlier_count = score(fit.plane, &fit.inlier_mask).first;
  return fit;
}

UpVote disambiguate_up(const PlaneModel& plane, const std::vector<CameraPose>& cameras,
                       const RayGridConfig& cfg) {
  if (cameras.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "gravity", "need at least one camera");
  }
  if (cfg.rays_per_axis < 1 || !(cfg.field_of_view_deg > 0.0 && cfg.field_of_view_deg < 180.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gravity", "bad ray grid configuration");
  }
  const double half = 0.5 * cfg.field_of_view_deg * std::numbers::pi / 180.0;
  const int m = cfg.rays_per_axis;
  int along = 0;    // d . normal > 0
  int against = 0;  // d . normal < 0
  for (const CameraPose& cam : cameras) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const double ax = m == 1 ? 0.0 : -half + 2.0 * half * i / (m - 1);
        const double ay = m == 1 ? 0.0 : -half + 2.0 * half * j / (m - 1);
        const Vec3 d = (cam.orientation * Vec3(std::tan(ax), std::tan(ay), 1.0)).normalized();
        const double denom = plane.normal.dot(d);
        if (denom == 0.0) continue;
        const double t = -plane.signed_distance(cam.center) / denom;
        if (!(t > 0.0)) continue;
        (denom < 0.0 ? against : along) += 1;
      }
    }
  }
  if (along + against == 0) {
    throw Error(ErrorCode::kNoIntersections, "gravity", "no camera ray intersects the plane");
  }
  if (along == against) {
    throw Error(ErrorCode::kAmbiguous, "gravity",
                "ray vote tied at " + std::to_string(along) + " each");
  }
  UpVote vote;
  vote.up = against > along ? plane.normal : Vec3(-plane.normal);
  vote.votes_for = std::max(along, against);
  vote.votes_against = std::min(along, against);
  return vote;
}

Sim3d z_up_rotation(const Vec3& up) {
  if (std::abs(up.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "gravity", "up vector must be unit length");
  }
  const Vec3 z = Vec3::UnitZ();
  const double c = up.dot(z);
  Mat3 r;
  if (1.0 + c < 1e-15) {
    r = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  } else {
    const Vec3 v = up.cross(z);
    Mat3 k;
    k << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    r = Mat3::Identity() + k + k * k / (1.0 + c);
  }
  return Sim3d(1.0, r, Vec3::Zero());
}

}  // namespace georeg
