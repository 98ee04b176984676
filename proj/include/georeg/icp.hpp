#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "georeg/geometry.hpp"

namespace georeg {

// Uniform hash grid over a fixed point set. Queries are exact: the returned
// neighbour is the closest point (lowest index on ties) within max_dist.
class SpatialHashGrid {
 public:
  SpatialHashGrid(const Points3d& points, double cell_size);

  // Index of the nearest point within max_dist (inclusive), or nullopt.
  std::optional<std::size_t> nearest(
      const Vec3& query, double max_dist = std::numeric_limits<double>::infinity()) const;

  double cell_size() const { return cell_; }

 private:
  using Cell = Eigen::Matrix<std::int64_t, 3, 1>;
  struct CellHash {
    std::size_t operator()(const Cell& c) const;
  };
  struct CellEq {
    bool operator()(const Cell& a, const Cell& b) const { return a == b; }
  };

  Cell cell_of(const Vec3& p) const;

  const Points3d& points_;
  double cell_;
  Cell lo_ = Cell::Zero();
  Cell hi_ = Cell::Zero();
  std::unordered_map<Cell, std::vector<std::uint32_t>, CellHash, CellEq> cells_;
};

// Tukey biweight.
inline double tukey_weight(double r, double k) {
  if (!(r < k)) return 0.0;
  const double u = r / k;
  const double t = 1.0 - u * u;
  return t * t;
}

inline double tukey_rho(double r, double k) {
  const double c = k * k / 6.0;
  if (!(r < k)) return c;
  const double u = r / k;
  const double t = 1.0 - u * u;
  return c * (1.0 - t * t * t);
}

struct IcpConfig {
  int max_iterations = 50;
  // Unset: tukey_k = max(3 * median initial nearest-neighbour residual,
  // 1e-6 * target bounding-box diagonal); radius = 5 * tukey_k.
  std::optional<double> tukey_k;
  std::optional<double> correspondence_radius;
  double translation_tol_m = 1e-9;
  double rotation_tol_deg = 1e-9;
  bool estimate_scale = false;

  void validate() const;
};

struct IcpResult {
  Sim3d transform;
  // Robust objective sum rho(r_i) at the start of every iteration, with
  // unmatched source points charged k^2 / 6; the last entry is the objective
  // of the returned transform.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  double tukey_k = 0.0;
  double correspondence_radius = 0.0;
  std::size_t matched_count = 0;  // pairs within the radius at the returned transform
};

// Point-to-point ICP with Tukey-weighted Kabsch updates (scale frozen at
// init's scale unless estimate_scale). Stops when the update moves the
// translation by less than translation_tol_m and the rotation by less than
// rotation_tol_deg. Throws NoCorrespondences when no pair is within the
// radius at init (or fewer than 3 carry weight), Diverged when the objective
// rises three iterations in a row.
IcpResult icp_refine(const Points3d& source, const Points3d& target, const Sim3d& init,
                     const IcpConfig& cfg = {});

// CSV with an x,y,z header, or a GRR1 Xyz3 raster (".grr"; nodata skipped).
Points3d read_point_cloud(const std::filesystem::path& path);
void write_point_cloud_csv(const Points3d& points, const std::filesystem::path& path);

}  // namespace georeg
