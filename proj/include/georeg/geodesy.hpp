#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <type_traits>

#include "georeg/sim3.hpp"

namespace georeg {

// WGS84 ellipsoidal coordinates: degrees, degrees, metres.
template <typename Scalar>
struct Geodetic {
  Scalar latitude_deg = 0;
  Scalar longitude_deg = 0;
  Scalar altitude_m = 0;
};

using GeodeticPoint = Geodetic<double>;

namespace wgs84 {
inline constexpr long double kSemiMajor = 6378137.0L;
inline constexpr long double kFlattening = 1.0L / 298.257223563L;
inline constexpr long double kEccentricitySq = kFlattening * (2.0L - kFlattening);
}  // namespace wgs84

namespace detail {

// double inputs are processed in long double so the conversions do not lose
// the sub-nanometre detail that ECEF magnitudes (~6.4e6 m) would otherwise eat.
template <typename Scalar>
using GeoWork = std::conditional_t<std::is_same_v<Scalar, double>, long double, Scalar>;

template <typename W>
W deg2rad(W d) {
  return d * std::numbers::pi_v<W> / W(180);
}
template <typename W>
W rad2deg(W r) {
  return r * W(180) / std::numbers::pi_v<W>;
}

template <typename W>
Vector3<W> ecef_work(W lat_deg, W lon_deg, W alt) {
  const W lat = deg2rad(lat_deg);
  const W lon = deg2rad(lon_deg);
  const W a = static_cast<W>(wgs84::kSemiMajor);
  const W e2 = static_cast<W>(wgs84::kEccentricitySq);
  const W s = std::sin(lat);
  const W n = a / std::sqrt(W(1) - e2 * s * s);
  return {(n + alt) * std::cos(lat) * std::cos(lon), (n + alt) * std::cos(lat) * std::sin(lon),
          (n * (W(1) - e2) + alt) * s};
}

// Rows are the east, north, up unit vectors at the anchor.
template <typename W>
Matrix3<W> enu_basis(W lat_deg, W lon_deg) {
  const W lat = deg2rad(lat_deg);
  const W lon = deg2rad(lon_deg);
  const W sl = std::sin(lat), cl = std::cos(lat), so = std::sin(lon), co = std::cos(lon);
  Matrix3<W> r;
  r << -so, co, W(0), -sl * co, -sl * so, cl, cl * co, cl * so, sl;
  return r;
}

}  // namespace detail

template <typename Scalar>
Vector3<Scalar> geodetic_to_ecef(const Geodetic<Scalar>& p) {
  using W = detail::GeoWork<Scalar>;
  return detail::ecef_work<W>(p.latitude_deg, p.longitude_deg, p.altitude_m)
      .template cast<Scalar>();
}

// Iterates latitude to convergence; valid at the poles.
template <typename Scalar>
Geodetic<Scalar> ecef_to_geodetic(const Vector3<Scalar>& ecef) {
  using W = detail::GeoWork<Scalar>;
  const Vector3<W> x = ecef.template cast<W>();
  const W a = static_cast<W>(wgs84::kSemiMajor);
  const W e2 = static_cast<W>(wgs84::kEccentricitySq);
  const W p = std::hypot(x(0), x(1));
  const W lon = std::atan2(x(1), x(0));
  W lat = std::atan2(x(2), p * (W(1) - e2));
  W h = 0;
  for (int it = 0; it < 30; ++it) {
    const W s = std::sin(lat);
    const W n = a / std::sqrt(W(1) - e2 * s * s);
    h = p * std::cos(lat) + x(2) * s - a * a / n;
    const W next = std::atan2(x(2), p * (W(1) - e2 * n / (n + h)));
    const bool done = std::abs(next - lat) <= std::numeric_limits<W>::epsilon();
    lat = next;
    if (done) break;
  }
  const W s = std::sin(lat);
  const W n = a / std::sqrt(W(1) - e2 * s * s);
  h = p * std::cos(lat) + x(2) * s - a * a / n;
  return {static_cast<Scalar>(detail::rad2deg(lat)), static_cast<Scalar>(detail::rad2deg(lon)),
          static_cast<Scalar>(h)};
}

// East-north-up coordinates of `p` in the tangent frame at `anchor`.
template <typename Scalar>
Vector3<Scalar> geodetic_to_enu(const Geodetic<Scalar>& p, const Geodetic<Scalar>& anchor) {
  using W = detail::GeoWork<Scalar>;
  const Vector3<W> d = detail::ecef_work<W>(p.latitude_deg, p.longitude_deg, p.altitude_m) -
                       detail::ecef_work<W>(anchor.latitude_deg, anchor.longitude_deg,
                                            anchor.altitude_m);
  return (detail::enu_basis<W>(anchor.latitude_deg, anchor.longitude_deg) * d)
      .template cast<Scalar>();
}

template <typename Scalar>
Geodetic<Scalar> enu_to_geodetic(const Vector3<Scalar>& enu, const Geodetic<Scalar>& anchor) {
  using W = detail::GeoWork<Scalar>;
  const Vector3<W> ecef =
      detail::ecef_work<W>(anchor.latitude_deg, anchor.longitude_deg, anchor.altitude_m) +
      detail::enu_basis<W>(anchor.latitude_deg, anchor.longitude_deg).transpose() *
          enu.template cast<W>();
  const Geodetic<W> g = ecef_to_geodetic<W>(ecef);
  return {static_cast<Scalar>(g.latitude_deg), static_cast<Scalar>(g.longitude_deg),
          static_cast<Scalar>(g.altitude_m)};
}

// Throws InvalidArgument outside |lat| <= 90, |lon| <= 180.
void validate(const GeodeticPoint& p);

}  // namespace georeg
