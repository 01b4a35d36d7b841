#include "uavnet/geo/geo.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace uavnet::geo {
namespace {

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

}  // namespace

GeoPos GeoPos::make(double lat, double lon, double alt) {
  GeoPos p{lat, lon, alt};
  if (!p.valid()) {
    std::ostringstream os;
    os << "invalid GeoPos " << to_string(p);
    throw GeoError(os.str());
  }
  return p;
}

bool GeoPos::valid() const {
  if (std::isnan(lat) || std::isnan(lon) || std::isnan(alt) || !std::isfinite(alt)) return false;
  return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

double LocalXY::norm() const { return std::sqrt(x * x + y * y + z * z); }
double LocalXY::norm_xy() const { return std::hypot(x, y); }

LocalXY operator-(const LocalXY& a, const LocalXY& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
LocalXY operator+(const LocalXY& a, const LocalXY& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
double distance(const LocalXY& a, const LocalXY& b) { return (a - b).norm(); }

double haversine_m(const GeoPos& a, const GeoPos& b) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(b.lon - a.lon);
  const double s_phi = std::sin(dphi / 2.0);
  const double s_lambda = std::sin(dlambda / 2.0);
  double h = s_phi * s_phi + std::cos(phi1) * std::cos(phi2) * s_lambda * s_lambda;
  h = std::min(1.0, std::max(0.0, h));
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

LocalXY to_local(const GeoPos& ref, const GeoPos& p) {
  const double dlat = p.lat - ref.lat;
  const double dlon = p.lon - ref.lon;
  if (std::abs(dlat) >= kMaxLocalSeparationDeg || std::abs(dlon) >= kMaxLocalSeparationDeg) {
    throw GeoError("separation " + to_string(ref) + " -> " + to_string(p) +
                   " exceeds the flat local frame (1 degree)");
  }
  LocalXY out;
  out.x = sign_of(dlon) * haversine_m(ref, GeoPos{ref.lat, p.lon, ref.alt});
  out.y = sign_of(dlat) * haversine_m(ref, GeoPos{p.lat, ref.lon, ref.alt});
  out.z = p.alt - ref.alt;
  if (dlon == 0.0) out.x = 0.0;
  if (dlat == 0.0) out.y = 0.0;
  return out;
}

GeoPos from_local(const GeoPos& ref, const LocalXY& xy) {
  // y: meridian arc, d = R * dphi.
  const double dphi = xy.y / kEarthRadiusM;
  // x: d = 2R asin(cos(phi) |sin(dlambda/2)|) along the reference parallel.
  const double cos_phi = std::cos(deg2rad(ref.lat));
  double dlambda = 0.0;
  if (xy.x != 0.0) {
    const double s = std::sin(std::abs(xy.x) / (2.0 * kEarthRadiusM)) / cos_phi;
    if (s > 1.0) throw GeoError("local x offset unreachable at reference latitude");
    dlambda = sign_of(xy.x) * 2.0 * std::asin(s);
  }
  return GeoPos{ref.lat + rad2deg(dphi), ref.lon + rad2deg(dlambda), ref.alt + xy.z};
}

std::string to_string(const GeoPos& p) {
  std::ostringstream os;
  os.precision(9);
  os << "(" << p.lat << ", " << p.lon << ", " << p.alt << ")";
  return os.str();
}

}  // namespace uavnet::geo
