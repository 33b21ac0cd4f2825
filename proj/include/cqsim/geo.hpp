#pragma once

#include "cqsim/rng.hpp"

namespace cqsim {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GeoPoint {
  double lat = 0.0;  // decimal degrees, [-90, 90]
  double lng = 0.0;  // decimal degrees, [-180, 180]

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool is_valid(const GeoPoint& p) noexcept;

/// Great-circle distance in meters.
double haversine_m(const GeoPoint& a, const GeoPoint& b) noexcept;

/// Point reached from `origin` after travelling `distance_m` along the initial
/// bearing `bearing_rad` (clockwise from north).
GeoPoint destination_point(const GeoPoint& origin, double distance_m, double bearing_rad) noexcept;

/// Uniform point on the disk of radius `radius_m` around `center`:
/// r = radius * sqrt(u), theta = 2 pi u'. Result is always within radius_m
/// under haversine_m.
GeoPoint sample_origin(const GeoPoint& center, double radius_m, Rng& rng);

}  // namespace cqsim
