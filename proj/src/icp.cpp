#include "georeg/icp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "georeg/parallel.hpp"
#include "georeg/raster.hpp"

namespace georeg {

std::size_t SpatialHashGrid::CellHash::operator()(const Cell& c) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < 3; ++i) {
    h ^= static_cast<std::uint64_t>(c(i));
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

SpatialHashGrid::SpatialHashGrid(const Points3d& points, double cell_size)
    : points_(points), cell_(cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw Error(ErrorCode::kInvalidArgument, "icp", "grid cell size must be positive");
  }
  if (points.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "icp", "point cloud too large");
  }
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const Cell c = cell_of(points.col(i));
    if (i == 0) {
      lo_ = hi_ = c;
    } else {
      lo_ = lo_.cwiseMin(c);
      hi_ = hi_.cwiseMax(c);
    }
    cells_[c].push_back(static_cast<std::uint32_t>(i));
  }
}

SpatialHashGrid::Cell SpatialHashGrid::cell_of(const Vec3& p) const {
  return (p / cell_).array().floor().cast<std::int64_t>();
}

std::optional<std::size_t> SpatialHashGrid::nearest(const Vec3& query, double max_dist) const {
  if (points_.cols() == 0) return std::nullopt;
  std::optional<std::size_t> best;
  double best_d2 = std::numeric_limits<double>::infinity();
  const double max_d2 = max_dist * max_dist;

  auto consider = [&](std::uint32_t i) {
    const double d2 = (points_.col(i) - query).squaredNorm();
    if (d2 > max_d2) return;
    if (d2 < best_d2 || (d2 == best_d2 && i < *best)) {
      best_d2 = d2;
      best = i;
    }
  };

  // Query cell clamped into a generous range so huge coordinates cannot
  // overflow the ring arithmetic.
  const Vec3 scaled = (query / cell_).array().floor();
  const Eigen::Vector3d lo = lo_.cast<double>();
  const Eigen::Vector3d hi = hi_.cast<double>();
  const Eigen::Vector3d gap = (lo - scaled).cwiseMax(scaled - hi).cwiseMax(0.0);
  const double first_ring = gap.maxCoeff();
  const double last_ring = (scaled - lo).cwiseAbs().cwiseMax((scaled - hi).cwiseAbs()).maxCoeff();
  const double shell_limit = static_cast<double>(points_.cols());

  auto brute = [&] {
    for (Eigen::Index i = 0; i < points_.cols(); ++i) consider(static_cast<std::uint32_t>(i));
    return best;
  };
  if (!std::isfinite(last_ring) || last_ring > 1e6) return brute();
  const Cell q = scaled.cast<std::int64_t>();

  for (std::int64_t r = static_cast<std::int64_t>(first_ring);
       r <= static_cast<std::int64_t>(last_ring); ++r) {
    // Every point in ring r is at least (r - 1) * cell away.
    const double ring_floor = std::max<double>(0.0, static_cast<double>(r - 1)) * cell_;
    if (ring_floor > max_dist) break;
    if (best && ring_floor * ring_floor > best_d2) break;
    const double side = static_cast<double>(2 * r + 1);
    if (side * side * side > 8.0 * shell_limit + 27.0) return brute();
    for (std::int64_t dx = -r; dx <= r; ++dx) {
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        const bool face = std::abs(dx) == r || std::abs(dy) == r;
        for (std::int64_t dz = -r; dz <= r; dz += (face ? 1 : std::max<std::int64_t>(1, 2 * r))) {
          const auto it = cells_.find(Cell(q(0) + dx, q(1) + dy, q(2) + dz));
          if (it == cells_.end()) continue;
          for (std::uint32_t i : it->second) consider(i);
        }
      }
    }
  }
  return best;
}

void IcpConfig::validate() const {
  auto positive = [](const std::optional<double>& v) { return !v || (*v > 0.0 && std::isfinite(*v)); };
  if (max_iterations < 1 || !positive(tukey_k) || !positive(correspondence_radius) ||
      !(translation_tol_m > 0.0) || !(rotation_tol_deg > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "icp",
                "ICP iterations, kernel scale, radius and tolerances must be positive");
  }
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

struct Association {
  std::vector<std::optional<std::size_t>> partner;
  std::vector<double> residual;  // distance to partner, +inf if none
  std::size_t matched = 0;
};

Association associate(const SpatialHashGrid& grid, const Points3d& moved, const Points3d& target,
                      double radius) {
  const std::size_t n = static_cast<std::size_t>(moved.cols());
  Association a;
  a.partner.resize(n);
  a.residual.assign(n, std::numeric_limits<double>::infinity());
  parallel_for(n, [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    const auto j = grid.nearest(moved.col(c), radius);
    if (!j) return;
    a.partner[i] = j;
    a.residual[i] = (moved.col(c) - target.col(static_cast<Eigen::Index>(*j))).norm();
  });
  for (const auto& p : a.partner) a.matched += p.has_value();
  return a;
}

double objective(const Association& a, double k) {
  double sum = 0.0;
  for (double r : a.residual) sum += tukey_rho(r, k);
  return sum;
}

}  // namespace

IcpResult icp_refine(const Points3d& source, const Points3d& target, const Sim3d& init,
                     const IcpConfig& cfg) {
  cfg.validate();
  if (source.cols() < 3 || target.cols() < 3) {
    throw Error(ErrorCode::kDegenerateInput, "icp", "both clouds need at least 3 points");
  }
  if (!source.allFinite() || !target.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "icp", "point clouds must be finite");
  }

  const double diag = (target.rowwise().maxCoeff() - target.rowwise().minCoeff()).norm();
  const double spacing =
      diag > 0.0 ? diag / std::cbrt(static_cast<double>(target.cols())) : 1.0;
  const SpatialHashGrid grid(target, spacing);

  IcpResult out;
  Sim3d current = init;
  if (cfg.tukey_k) {
    out.tukey_k = *cfg.tukey_k;
  } else {
    const Association any = associate(grid, current.apply(source), target,
                                      std::numeric_limits<double>::infinity());
    out.tukey_k = std::max(3.0 * median(any.residual), 1e-6 * std::max(diag, 1e-300));
  }
  out.correspondence_radius = cfg.correspondence_radius.value_or(5.0 * out.tukey_k);
  const double k = out.tukey_k;

  int rising = 0;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Association a = associate(grid, current.apply(source), target, out.correspondence_radius);
    const double obj = objective(a, k);
    if (!out.objective_trace.empty() && obj > out.objective_trace.back()) {
      if (++rising >= 3) {
        throw Error(ErrorCode::kDiverged, "icp",
                    "robust objective rose for 3 consecutive iterations");
      }
    } else {
      rising = 0;
    }
    out.objective_trace.push_back(obj);
    out.matched_count = a.matched;
    if (a.matched == 0) {
      throw Error(ErrorCode::kNoCorrespondences, "icp",
                  "no target point within " + std::to_string(out.correspondence_radius) +
                      " of any transformed source point");
    }

    const auto n = static_cast<Eigen::Index>(a.partner.size());
    Points3d matched_target(3, n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = a.partner[static_cast<std::size_t>(i)];
      matched_target.col(i) = p ? target.col(static_cast<Eigen::Index>(*p)) : source.col(i);
      w(i) = p ? tukey_weight(a.residual[static_cast<std::size_t>(i)], k) : 0.0;
    }
    if ((w.array() > 0.0).count() < 3) {
      throw Error(ErrorCode::kNoCorrespondences, "icp",
                  "fewer than 3 pairs fall inside the Tukey scale");
    }
    Sim3d next;
    try {
      next = cfg.estimate_scale ? georeg::umeyama(source, matched_target, w)
                                : georeg::kabsch_fixed_scale(source, matched_target, w,
                                                             current.scale());
    } catch (const Error& e) {
      throw e.with_stage("icp");
    }
    const double dt = (next.translation() - current.translation()).norm();
    const double dr =
        rotation_angle_between(next.rotation(), current.rotation()) * 180.0 / std::numbers::pi;
    const double ds = std::abs(next.scale() - current.scale()) / current.scale();
    current = next;
    out.iterations = it;
    if (dt < cfg.translation_tol_m && dr < cfg.rotation_tol_deg && ds < 1e-12) {
      out.converged = true;
      break;
    }
  }

  const Association last = associate(grid, current.apply(source), target, out.correspondence_radius);
  out.objective_trace.push_back(objective(last, k));
  out.matched_count = last.matched;
  out.transform = current;
  return out;
}

Points3d read_point_cloud(const std::filesystem::path& path) {
  if (path.extension() == ".grr") {
    const Raster xyz = read_raster(path);
    if (xyz.semantic() != Semantic::kXyz3) {
      throw Error(ErrorCode::kFormatError, "icp", path.string() + ": expected an Xyz3 raster");
    }
    std::vector<Vec3> pts;
    for (int r = 0; r < xyz.height(); ++r) {
      for (int c = 0; c < xyz.width(); ++c) {
        if (xyz.pixel_valid(r, c)) pts.emplace_back(xyz.at(r, c, 0), xyz.at(r, c, 1), xyz.at(r, c, 2));
      }
    }
    Points3d out(3, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts[i];
    return out;
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "icp", "cannot open " + path.string());
  std::vector<Vec3> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Vec3 p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.x(), &p.y(), &p.z()) != 3) {
      if (lineno == 1) continue;  // header
      throw Error(ErrorCode::kFormatError, "icp",
                  path.string() + ":" + std::to_string(lineno) + ": expected x,y,z");
    }
    pts.push_back(p);
  }
  Points3d out(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts[i];
  return out;
}

void write_point_cloud_csv(const Points3d& points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "icp", "cannot write " + path.string());
  out << "x,y,z\n";
  char line[128];
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", points(0, i), points(1, i),
                  points(2, i));
    out << line;
  }
}

}  // namespace georeg
