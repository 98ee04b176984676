#include "georeg/geodesy.hpp"

#include <string>

namespace georeg {

void validate(const GeodeticPoint& p) {
  if (!(std::abs(p.latitude_deg) <= 90.0) || !(std::abs(p.longitude_deg) <= 180.0) ||
      !std::isfinite(p.altitude_m)) {
    throw Error(ErrorCode::kInvalidArgument, "geodesy_metrics",
                "geodetic point out of range: lat " + std::to_string(p.latitude_deg) + ", lon " +
                    std::to_string(p.longitude_deg));
  }
}

}  // namespace georeg
