#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "georeg/error.hpp"
#include "georeg/sim3.hpp"

namespace georeg {

inline constexpr std::uint64_t kDefaultSeed = 20250101;

// Paired 3D points, one per column. Weights are optional (empty = uniform).
struct Correspondences3D {
  Points3d source;
  Points3d target;
  Eigen::VectorXd weights;

  Correspondences3D() = default;
  Correspondences3D(Points3d src, Points3d dst, Eigen::VectorXd w = {})
      : source(std::move(src)), target(std::move(dst)), weights(std::move(w)) {}

  std::size_t size() const { return static_cast<std::size_t>(source.cols()); }
  bool weighted() const { return weights.size() > 0; }

  // Throws ShapeMismatch / InvalidArgument on inconsistent data.
  void validate() const;

  // Subset in the order given.
  Correspondences3D select(const std::vector<std::size_t>& indices) const;
};

namespace detail {

template <typename Scalar, typename DerivedSrc, typename DerivedDst>
Sim3<Scalar> fit_similarity(const Eigen::MatrixBase<DerivedSrc>& src,
                            const Eigen::MatrixBase<DerivedDst>& dst,
                            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>* weights,
                            std::optional<Scalar> fixed_scale) {
  using Vector = Vector3<Scalar>;
  using Matrix = Matrix3<Scalar>;
  const Eigen::Index n = src.cols();
  if (src.rows() != 3 || dst.rows() != 3 || dst.cols() != n) {
    throw Error(ErrorCode::kShapeMismatch, "umeyama",
                "source and target must both be 3xN with equal N");
  }
  if (n < 3) {
    throw Error(ErrorCode::kDegenerateInput, "umeyama",
                "at least 3 correspondences are required");
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w;
  if (weights != nullptr && weights->size() > 0) {
    if (weights->size() != n) {
      throw Error(ErrorCode::kShapeMismatch, "umeyama", "weights length differs from N");
    }
    if ((weights->array() < Scalar(0)).any() || !weights->allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "umeyama", "weights must be finite and >= 0");
    }
    if ((weights->array() > Scalar(0)).count() < 3) {
      throw Error(ErrorCode::kDegenerateInput, "umeyama",
                  "fewer than 3 correspondences carry positive weight");
    }
    w = *weights;
  } else {
    w.setOnes(n);
  }
  const Scalar total = w.sum();

  const Vector src_mean = (src * w) / total;
  const Vector dst_mean = (dst * w) / total;
  const Points3<Scalar> src_c = src.colwise() - src_mean;
  const Points3<Scalar> dst_c = dst.colwise() - dst_mean;

  const Matrix src_scatter = (src_c * w.asDiagonal() * src_c.transpose()) / total;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(src_scatter, Eigen::EigenvaluesOnly);
  const Vector lambda = eig.eigenvalues();  // ascending
  if (!(lambda(2) > Scalar(0)) || lambda(1) <= Scalar(1e-12) * lambda(2)) {
    throw Error(ErrorCode::kDegenerateInput, "umeyama",
                "source points are collinear or coincident (rank < 2)");
  }

  const Matrix cov = (dst_c * w.asDiagonal() * src_c.transpose()) / total;
  Eigen::JacobiSVD<Matrix> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector s = Vector::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < Scalar(0)) {
    s(2) = Scalar(-1);
  }
  const Matrix rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();

  Scalar scale;
  if (fixed_scale) {
    scale = *fixed_scale;
  } else {
    scale = svd.singularValues().dot(s) / src_scatter.trace();
    if (!(scale > Scalar(0))) {
      throw Error(ErrorCode::kDegenerateInput, "umeyama",
                  "target points collapse to a single point");
    }
  }
  const Vector translation = dst_mean - scale * (rotation * src_mean);
  return Sim3<Scalar>(scale, rotation, translation);
}

}  // namespace detail

// Least-squares similarity (Kabsch-Umeyama) mapping the columns of `src` onto
// the columns of `dst`. The rotation is always proper: a reflected target
// yields the best det = +1 rotation, never a reflection.
template <typename DerivedSrc, typename DerivedDst>
Sim3<typename DerivedSrc::Scalar> umeyama(const Eigen::MatrixBase<DerivedSrc>& src,
                                         const Eigen::MatrixBase<DerivedDst>& dst) {
  using Scalar = typename DerivedSrc::Scalar;
  return detail::fit_similarity<Scalar>(src, dst, nullptr, std::nullopt);
}

// Weighted variant; zero weights drop a pair.
template <typename DerivedSrc, typename DerivedDst>
Sim3<typename DerivedSrc::Scalar> umeyama(
    const Eigen::MatrixBase<DerivedSrc>& src, const Eigen::MatrixBase<DerivedDst>& dst,
    const Eigen::Matrix<typename DerivedSrc::Scalar, Eigen::Dynamic, 1>& weights) {
  using Scalar = typename DerivedSrc::Scalar;
  return detail::fit_similarity<Scalar>(src, dst, &weights, std::nullopt);
}

// Rotation + translation only; the scale is held at `scale`.
template <typename DerivedSrc, typename DerivedDst>
Sim3<typename DerivedSrc::Scalar> kabsch_fixed_scale(
    const Eigen::MatrixBase<DerivedSrc>& src, const Eigen::MatrixBase<DerivedDst>& dst,
    const Eigen::Matrix<typename DerivedSrc::Scalar, Eigen::Dynamic, 1>& weights,
    typename DerivedSrc::Scalar scale) {
  using Scalar = typename DerivedSrc::Scalar;
  return detail::fit_similarity<Scalar>(src, dst, &weights, scale);
}

Sim3d umeyama(const Correspondences3D& corr);

struct RansacConfig {
  double inlier_threshold = 0.5;  // metres, residual must be strictly below
  int max_iterations = 2000;
  int min_sample_size = 3;
  double confidence = 0.999;
  std::uint64_t seed = kDefaultSeed;

  void validate() const;
};

struct InlierSet {
  std::size_t count = 0;
  std::vector<std::uint8_t> mask;  // 1 = inlier, input order
  double residual_sum = 0.0;       // sum of inlier residuals
};

// Inliers are pairs with |T(s_i) - t_i| < threshold.
InlierSet count_inliers(const Sim3d& transform, const Correspondences3D& corr,
                        double threshold);

struct RansacResult {
  Sim3d transform;
  InlierSet inliers;  // consensus set the final model was refit on
  int iterations = 0;
};

// RANSAC over minimal 3-point Umeyama fits.
//
// Sampling contract:
//  1. Pairs are put in canonical order: lexicographic on
//     (sx, sy, sz, tx, ty, tz), ties by input index.
//  2. Iteration i draws min_sample_size distinct canonical positions from
//     stream_for(seed, i), each by uniform_index(n), redrawing repeats.
//  3. A degenerate sample is skipped but still counts as an iteration.
//  4. Best = most inliers; ties go to the smaller inlier residual sum, then
//     to the earlier iteration.
//  5. The iteration budget is min(max_iterations,
//     ceil(log(1 - confidence) / log(1 - w^m))) with w the best inlier
//     ratio so far; it is re-evaluated after every improvement.
//  6. The final model is one Umeyama refit on the best consensus set.
// Because of (1) the result is independent of input ordering, and because of
// (2) batches of iterations are evaluated in parallel without changing it.
// Weights in `corr` are ignored.
//
// Throws NoConsensus if the best hypothesis has fewer than 3 inliers.
RansacResult ransac_sim3(const Correspondences3D& corr, const RansacConfig& cfg);

}  // namespace georeg
