#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "georeg/geodesy.hpp"
#include "georeg/raster.hpp"
#include "georeg/sim3.hpp"

namespace georeg {

struct RegistrationReport {
  std::vector<std::string> camera_ids;  // may be empty
  std::vector<Vec3> errors;             // estimated - truth, local ENU metres
  Vec3 mean_error = Vec3::Zero();
  double mean_absolute_error = 0.0;
  double mean_relative_error = 0.0;    // |e_i - mean_error|, mean
  double median_relative_error = 0.0;  // |e_i - mean_error|, median
  double mahalanobis_distance = 0.0;   // of mean_error against the DSM covariance
  std::vector<double> per_camera_mahalanobis;
  double ce90 = 0.0;  // horizontal |(e_x, e_y)|
  double le90 = 0.0;  // |e_z|
  std::optional<double> inlier_fraction;
  std::size_t camera_count = 0;
};

// 100 * p-th percentile with linear interpolation between order statistics
// (position p * (n - 1)). p in [0, 1]. Throws InvalidArgument on empty input.
double percentile_linear(std::vector<double> values, double p);

// Throws ShapeMismatch (different lengths or none) and SingularCovariance.
RegistrationReport evaluate(const std::vector<Vec3>& estimated, const std::vector<Vec3>& truth,
                            const DsmCovariance& cov);

// mean_relative_error / mean_standoff_m. Throws InvalidArgument unless standoff > 0.
double normalize_by_standoff(const RegistrationReport& report, double mean_standoff_m);
double normalize_by_standoff(double relative_error_m, double mean_standoff_m);

nlohmann::json to_json(const RegistrationReport& report);

struct NamedPosition {
  std::string id;
  Vec3 position = Vec3::Zero();
};

// Truth cameras: [{"id", "lat", "lon", "alt"}] converted to ENU about `anchor`.
std::vector<NamedPosition> truth_cameras_from_json(const nlohmann::json& j,
                                                   const GeodeticPoint& anchor);
// First camera of a truth file, used as the default ENU anchor.
GeodeticPoint first_truth_camera(const nlohmann::json& j);

// Estimated cameras: [{"id", "center_xyz"}] (model/local frame, mapped by
// `transform`) or [{"id", "lat", "lon", "alt"}] (converted about `anchor`).
std::vector<NamedPosition> estimated_cameras_from_json(const nlohmann::json& j,
                                                       const Sim3d& transform,
                                                       const GeodeticPoint& anchor);

// Pairs the two lists by id (truth order). Throws ShapeMismatch if the id
// sets differ.
RegistrationReport evaluate_cameras(const std::vector<NamedPosition>& estimated,
                                    const std::vector<NamedPosition>& truth,
                                    const DsmCovariance& cov);

}  // namespace georeg
