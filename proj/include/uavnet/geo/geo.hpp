#pragma once

#include <stdexcept>
#include <string>

namespace uavnet::geo {

/// Mean Earth radius of the spherical model.
inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Largest lat/lon separation accepted by the flat local frame, in degrees.
inline constexpr double kMaxLocalSeparationDeg = 1.0;

class GeoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geodetic position: degrees, degrees, meters above the reference datum.
struct GeoPos {
  double lat = 0.0;
  double lon = 0.0;
  double alt = 0.0;

  /// Validating constructor; throws GeoError on NaN or out-of-range values.
  static GeoPos make(double lat, double lon, double alt);
  bool valid() const;

  friend bool operator==(const GeoPos&, const GeoPos&) = default;
};

/// Local metric frame: x east, y north, z up, relative to a reference GeoPos.
struct LocalXY {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  double norm_xy() const;
  friend bool operator==(const LocalXY&, const LocalXY&) = default;
};

LocalXY operator-(const LocalXY& a, const LocalXY& b);
LocalXY operator+(const LocalXY& a, const LocalXY& b);
double distance(const LocalXY& a, const LocalXY& b);

/// Great-circle surface distance in meters (altitude ignored).
double haversine_m(const GeoPos& a, const GeoPos& b);

/// Projects `p` into the local frame anchored at `ref`. Each horizontal axis
/// is a haversine distance along one coordinate, signed by direction.
/// Throws GeoError when the separation leaves the small-area domain.
LocalXY to_local(const GeoPos& ref, const GeoPos& p);

/// Exact inverse of to_local.
GeoPos from_local(const GeoPos& ref, const LocalXY& xy);

std::string to_string(const GeoPos& p);

}  // namespace uavnet::geo
