#include "georeg/sim3.hpp"

#include <nlohmann/json.hpp>

namespace georeg {

Eigen::Vector4d rotation_to_wxyz(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return {q.w(), q.x(), q.y(), q.z()};
}

Mat3 wxyz_to_rotation(const Eigen::Vector4d& wxyz) {
  if (!(wxyz.norm() > 0.0) || !wxyz.allFinite()) {
    throw Error(ErrorCode::kFormatError, "geometry", "quaternion must be finite and non-zero");
  }
  Eigen::Quaterniond q(wxyz(0), wxyz(1), wxyz(2), wxyz(3));
  q.normalize();
  return q.toRotationMatrix();
}

nlohmann::json to_json(const LabelledSim3& t) {
  const Eigen::Vector4d q = rotation_to_wxyz(t.transform.rotation());
  const Vec3& tr = t.transform.translation();
  return {
      {"scale", t.transform.scale()},
      {"rotation_quaternion_wxyz", {q(0), q(1), q(2), q(3)}},
      {"translation_m", {tr.x(), tr.y(), tr.z()}},
      {"source_frame", t.source_frame},
      {"target_frame", t.target_frame},
  };
}

LabelledSim3 sim3_from_json(const nlohmann::json& j) {
  try {
    const auto q = j.at("rotation_quaternion_wxyz").get<std::vector<double>>();
    const auto tr = j.at("translation_m").get<std::vector<double>>();
    if (q.size() != 4 || tr.size() != 3) {
      throw Error(ErrorCode::kFormatError, "geometry",
                  "Sim3 JSON needs a 4-element quaternion and 3-element translation");
    }
    LabelledSim3 out{
        Sim3d(j.at("scale").get<double>(), wxyz_to_rotation({q[0], q[1], q[2], q[3]}),
              Vec3(tr[0], tr[1], tr[2])),
        j.value("source_frame", std::string{}), j.value("target_frame", std::string{})};
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, "geometry", std::string("bad Sim3 JSON: ") + e.what());
  }
}

}  // namespace georeg
