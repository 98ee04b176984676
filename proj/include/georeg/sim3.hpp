#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <nlohmann/json_fwd.hpp>

#include "georeg/error.hpp"

namespace georeg {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

using Vec3 = Vector3<double>;
using Mat3 = Matrix3<double>;
using Points3d = Points3<double>;

// Similarity transform p -> scale * rotation * p + translation.
template <typename Scalar>
class Sim3 {
 public:
  using Vector = Vector3<Scalar>;
  using Matrix = Matrix3<Scalar>;

  Sim3() : scale_(1), rotation_(Matrix::Identity()), translation_(Vector::Zero()) {}

  // Throws InvalidArgument unless scale > 0 and rotation is proper
  // orthonormal (1e-9 tolerance on R^T R = I and det R = 1).
  Sim3(Scalar scale, const Matrix& rotation, const Vector& translation)
      : scale_(scale), rotation_(rotation), translation_(translation) {
    if (!(scale > Scalar(0)) || !std::isfinite(static_cast<double>(scale))) {
      throw Error(ErrorCode::kInvalidArgument, "geometry",
                  "Sim3 scale must be positive and finite");
    }
    if (!is_rotation(rotation, Scalar(1e-9))) {
      throw Error(ErrorCode::kInvalidArgument, "geometry",
                  "Sim3 rotation must be orthonormal with det = +1");
    }
    if (!translation.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "geometry",
                  "Sim3 translation must be finite");
    }
  }

  static Sim3 Identity() { return Sim3(); }

  static bool is_rotation(const Matrix& r, Scalar tol) {
    return r.allFinite() &&
           (r.transpose() * r - Matrix::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(r.determinant() - Scalar(1)) <= tol;
  }

  Scalar scale() const { return scale_; }
  const Matrix& rotation() const { return rotation_; }
  const Vector& translation() const { return translation_; }

  Vector operator*(const Vector& p) const {
    return scale_ * (rotation_ * p) + translation_;
  }

  // Column-wise application to a 3xN block.
  template <typename Derived>
  Points3<Scalar> apply(const Eigen::MatrixBase<Derived>& points) const {
    Points3<Scalar> out = scale_ * (rotation_ * points);
    out.colwise() += translation_;
    return out;
  }

  // (a * b)(p) = a(b(p)).
  Sim3 operator*(const Sim3& other) const {
    Sim3 out;
    out.scale_ = scale_ * other.scale_;
    out.rotation_ = rotation_ * other.rotation_;
    out.translation_ = scale_ * (rotation_ * other.translation_) + translation_;
    return out;
  }

  Sim3 inverse() const {
    Sim3 out;
    out.scale_ = Scalar(1) / scale_;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(out.scale_ * (out.rotation_ * translation_));
    return out;
  }

  template <typename Other>
  Sim3<Other> cast() const {
    return Sim3<Other>::from_parts_unchecked(static_cast<Other>(scale_),
                                             rotation_.template cast<Other>(),
                                             translation_.template cast<Other>());
  }

  // Bypasses validation; for internal composition of already-valid parts.
  static Sim3 from_parts_unchecked(Scalar scale, const Matrix& rotation,
                                   const Vector& translation) {
    Sim3 out;
    out.scale_ = scale;
    out.rotation_ = rotation;
    out.translation_ = translation;
    return out;
  }

 private:
  Scalar scale_;
  Matrix rotation_;
  Vector translation_;
};

using Sim3d = Sim3<double>;

// Angle of the relative rotation a^T b, radians.
template <typename Scalar>
Scalar rotation_angle_between(const Matrix3<Scalar>& a, const Matrix3<Scalar>& b) {
  const Matrix3<Scalar> d = a.transpose() * b;
  const Vector3<Scalar> axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(axis.norm() / Scalar(2), (d.trace() - Scalar(1)) / Scalar(2));
}

// Rotation about a unit axis, radians.
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

// Frame-labelled JSON interchange:
// {"scale", "rotation_quaternion_wxyz", "translation_m", "source_frame",
//  "target_frame"}. The quaternion is normalised with w >= 0.
struct LabelledSim3 {
  Sim3d transform;
  std::string source_frame;
  std::string target_frame;
};

nlohmann::json to_json(const LabelledSim3& t);
LabelledSim3 sim3_from_json(const nlohmann::json& j);

// Quaternion helpers shared by the camera / pose files.
Eigen::Vector4d rotation_to_wxyz(const Mat3& r);
Mat3 wxyz_to_rotation(const Eigen::Vector4d& wxyz);

}  // namespace georeg
