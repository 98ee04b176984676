#include "georeg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

namespace georeg {

double percentile_linear(std::vector<double> values, double p) {
  if (values.empty() || !(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "geodesy_metrics", "percentile needs data and p in [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

RegistrationReport evaluate(const std::vector<Vec3>& estimated, const std::vector<Vec3>& truth,
                            const DsmCovariance& cov) {
  if (estimated.size() != truth.size() || truth.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "geodesy_metrics",
                "estimated and truth lists must be non-empty and equally long");
  }
  try {
    cov.validate();
  } catch (const Error& e) {
    throw e.with_stage("geodesy_metrics");
  }
  const Eigen::LLT<Mat3> llt(cov.sigma);

  RegistrationReport r;
  const std::size_t n = truth.size();
  r.camera_count = n;
  r.errors.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!estimated[i].allFinite() || !truth[i].allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "geodesy_metrics", "camera positions must be finite");
    }
    r.errors.push_back(estimated[i] - truth[i]);
    r.mean_error += r.errors.back();
  }
  r.mean_error /= static_cast<double>(n);

  auto mahalanobis = [&](const Vec3& e) { return std::sqrt(e.dot(llt.solve(e))); };
  std::vector<double> relative, horizontal, vertical;
  double abs_sum = 0.0;
  for (const Vec3& e : r.errors) {
    abs_sum += e.norm();
    relative.push_back((e - r.mean_error).norm());
    horizontal.push_back(e.head<2>().norm());
    vertical.push_back(std::abs(e.z()));
    r.per_camera_mahalanobis.push_back(mahalanobis(e));
  }
  r.mean_absolute_error = abs_sum / static_cast<double>(n);
  double rel_sum = 0.0;
  for (double v : relative) rel_sum += v;
  r.mean_relative_error = rel_sum / static_cast<double>(n);
  r.median_relative_error = percentile_linear(relative, 0.5);
  r.mahalanobis_distance = mahalanobis(r.mean_error);
  r.ce90 = percentile_linear(horizontal, 0.9);
  r.le90 = percentile_linear(vertical, 0.9);
  return r;
}

double normalize_by_standoff(double relative_error_m, double mean_standoff_m) {
  if (!(mean_standoff_m > 0.0) || !std::isfinite(mean_standoff_m)) {
    throw Error(ErrorCode::kInvalidArgument, "geodesy_metrics", "standoff distance must be > 0");
  }
  return relative_error_m / mean_standoff_m;
}

double normalize_by_standoff(const RegistrationReport& report, double mean_standoff_m) {
  return normalize_by_standoff(report.mean_relative_error, mean_standoff_m);
}

nlohmann::json to_json(const RegistrationReport& r) {
  nlohmann::json errors = nlohmann::json::array();
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    nlohmann::json e = {{"error_enu_m", {r.errors[i].x(), r.errors[i].y(), r.errors[i].z()}},
                        {"mahalanobis_distance", r.per_camera_mahalanobis[i]}};
    if (i < r.camera_ids.size()) e["id"] = r.camera_ids[i];
    errors.push_back(e);
  }
  nlohmann::json j = {
      {"camera_count", r.camera_count},
      {"mean_error_enu_m", {r.mean_error.x(), r.mean_error.y(), r.mean_error.z()}},
      {"mean_absolute_error", r.mean_absolute_error},
      {"mean_relative_error", r.mean_relative_error},
      {"median_relative_error", r.median_relative_error},
      {"mahalanobis_distance", r.mahalanobis_distance},
      {"ce90", r.ce90},
      {"le90", r.le90},
      {"per_camera", errors}};
  j["inlier_fraction"] = r.inlier_fraction ? nlohmann::json(*r.inlier_fraction) : nlohmann::json();
  return j;
}

namespace {

GeodeticPoint geodetic_entry(const nlohmann::json& item) {
  GeodeticPoint p{item.at("lat").get<double>(), item.at("lon").get<double>(),
                  item.at("alt").get<double>()};
  validate(p);
  return p;
}

template <typename F>
auto parse(const char* what, F&& f) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kFormatError, "geodesy_metrics", std::string("bad ") + what + ": " + e.what());
  }
}

}  // namespace

GeodeticPoint first_truth_camera(const nlohmann::json& j) {
  return parse("truth cameras", [&] {
    if (!j.is_array() || j.empty()) throw std::runtime_error("expected a non-empty list");
    return geodetic_entry(j.front());
  });
}

std::vector<NamedPosition> truth_cameras_from_json(const nlohmann::json& j,
                                                   const GeodeticPoint& anchor) {
  validate(anchor);
  return parse("truth cameras", [&] {
    std::vector<NamedPosition> out;
    for (const auto& item : j) {
      out.push_back({item.at("id").get<std::string>(), geodetic_to_enu(geodetic_entry(item), anchor)});
    }
    return out;
  });
}

std::vector<NamedPosition> estimated_cameras_from_json(const nlohmann::json& j,
                                                       const Sim3d& transform,
                                                       const GeodeticPoint& anchor) {
  return parse("estimated cameras", [&] {
    std::vector<NamedPosition> out;
    for (const auto& item : j) {
      NamedPosition p{item.at("id").get<std::string>(), Vec3::Zero()};
      if (item.contains("center_xyz")) {
        const auto c = item.at("center_xyz").get<std::vector<double>>();
        if (c.size() != 3) throw std::runtime_error("center_xyz needs 3 values");
        p.position = transform * Vec3(c[0], c[1], c[2]);
      } else {
        validate(anchor);
        p.position = geodetic_to_enu(geodetic_entry(item), anchor);
      }
      out.push_back(std::move(p));
    }
    return out;
  });
}

RegistrationReport evaluate_cameras(const std::vector<NamedPosition>& estimated,
                                    const std::vector<NamedPosition>& truth,
                                    const DsmCovariance& cov) {
  std::map<std::string, Vec3> by_id;
  for (const auto& e : estimated) {
    if (!by_id.emplace(e.id, e.position).second) {
      throw Error(ErrorCode::kShapeMismatch, "geodesy_metrics", "duplicate estimated camera '" + e.id + "'");
    }
  }
  if (by_id.size() != truth.size()) {
    throw Error(ErrorCode::kShapeMismatch, "geodesy_metrics",
                std::to_string(estimated.size()) + " estimated vs " +
                    std::to_string(truth.size()) + " truth cameras");
  }
  std::vector<Vec3> est, tru;
  std::vector<std::string> ids;
  for (const auto& t : truth) {
    const auto it = by_id.find(t.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kShapeMismatch, "geodesy_metrics", "no estimate for camera '" + t.id + "'");
    }
    est.push_back(it->second);
    tru.push_back(t.position);
    ids.push_back(t.id);
  }
  RegistrationReport r = evaluate(est, tru, cov);
  r.camera_ids = std::move(ids);
  return r;
}

}  // namespace georeg
