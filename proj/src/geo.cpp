#include "cqsim/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cqsim/errors.hpp"

namespace cqsim {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

bool is_valid(const GeoPoint& p) noexcept {
  return std::isfinite(p.lat) && std::isfinite(p.lng) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lng >= -180.0 && p.lng <= 180.0;
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double dlat = (b.lat - a.lat) * kDeg;
  const double dlng = (b.lng - a.lng) * kDeg;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlng / 2.0);
  double h = s1 * s1 + std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * s2 * s2;
  h = std::min(1.0, h);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

GeoPoint destination_point(const GeoPoint& origin, double distance_m, double bearing_rad) noexcept {
  const double delta = distance_m / kEarthRadiusM;
  const double lat1 = origin.lat * kDeg;
  const double lng1 = origin.lng * kDeg;
  const double sin_lat2 =
      std::sin(lat1) * std::cos(delta) + std::cos(lat1) * std::sin(delta) * std::cos(bearing_rad);
  const double lat2 = std::asin(std::clamp(sin_lat2, -1.0, 1.0));
  const double lng2 =
      lng1 + std::atan2(std::sin(bearing_rad) * std::sin(delta) * std::cos(lat1),
                        std::cos(delta) - std::sin(lat1) * sin_lat2);
  double lng_deg = lng2 / kDeg;
  if (lng_deg > 180.0) lng_deg -= 360.0;
  if (lng_deg < -180.0) lng_deg += 360.0;
  return {lat2 / kDeg, lng_deg};
}

GeoPoint sample_origin(const GeoPoint& center, double radius_m, Rng& rng) {
  if (!(radius_m >= 0.0)) throw Error(ErrorKind::DomainError, "origin radius must be >= 0");
  if (radius_m == 0.0) return center;
  for (;;) {
    const double r = radius_m * std::sqrt(rng.uniform());
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const GeoPoint p = destination_point(center, r, theta);
    // rounding can push a rim point a few nanometres out; redraw instead of clamping
    if (haversine_m(center, p) <= radius_m) return p;
  }
}

}  // namespace cqsim
