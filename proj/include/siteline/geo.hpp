#pragma once

// Web Mercator (EPSG:3857) tile math, georeferencing and metric measurement.
//
// "Global pixels" are pixel coordinates in the whole-world image at a zoom
// level: 256 * 2^zoom pixels on a side, origin at (lon -180, lat +85.0511).
// Zoom is kept real-valued in GeoRef so a raster can be georeferenced at an
// arbitrary ground resolution; tile addressing requires integer zoom.

#include <cmath>
#include <compare>
#include <map>
#include <numbers>
#include <string>

#include "siteline/errors.hpp"
#include "siteline/raster.hpp"

namespace siteline {

inline constexpr double kEarthRadiusM = 6378137.0;
inline constexpr int kTileSize = 256;
inline constexpr double kMaxMercatorLat = 85.05113;
inline constexpr int kMaxZoom = 22;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
};

inline double world_size_px(double zoom) { return kTileSize * std::exp2(zoom); }

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline void check_latitude(double lat) {
  if (!(std::abs(lat) <= kMaxMercatorLat)) {
    throw ValidationError("latitude " + std::to_string(lat) + " outside the Mercator range");
  }
}

inline PixelPoint latlon_to_global_pixel(double lat, double lon, double zoom) {
  check_latitude(lat);
  if (!(std::abs(lon) <= 180.0)) throw ValidationError("longitude " + std::to_string(lon) + " outside [-180,180]");
  const double world = world_size_px(zoom);
  const double phi = deg2rad(lat);
  const double px = (lon + 180.0) / 360.0 * world;
  const double py = (1.0 - std::log(std::tan(phi) + 1.0 / std::cos(phi)) / std::numbers::pi) / 2.0 * world;
  return {px, py};
}

inline LatLon global_pixel_to_latlon(double px, double py, double zoom) {
  const double world = world_size_px(zoom);
  if (!(px >= 0.0 && px <= world && py >= 0.0 && py <= world)) {
    throw ValidationError("global pixel outside the world extent at zoom " + std::to_string(zoom));
  }
  const double lon = px / world * 360.0 - 180.0;
  const double lat = rad2deg(std::atan(std::sinh(std::numbers::pi * (1.0 - 2.0 * py / world))));
  return {lat, lon};
}

/// Metres of ground per pixel at a latitude.
inline double ground_resolution(double lat, double zoom) {
  check_latitude(lat);
  return std::cos(deg2rad(lat)) * 2.0 * std::numbers::pi * kEarthRadiusM / world_size_px(zoom);
}

/// Zoom at which one pixel covers `metres_per_px` of ground at `lat`.
inline double zoom_for_resolution(double lat, double metres_per_px) {
  check_latitude(lat);
  if (!(metres_per_px > 0.0)) throw ValidationError("resolution must be positive");
  return std::log2(std::cos(deg2rad(lat)) * 2.0 * std::numbers::pi * kEarthRadiusM /
                   (kTileSize * metres_per_px));
}

struct TileCoord {
  int z = 0;
  int x = 0;
  int y = 0;

  void validate() const {
    if (z < 0 || z > kMaxZoom) throw ValidationError("zoom " + std::to_string(z) + " outside 0..22");
    const long n = 1L << z;
    if (x < 0 || y < 0 || x >= n || y >= n) {
      throw ValidationError("tile " + to_string() + " outside zoom bounds");
    }
  }

  std::string to_string() const {
    return std::to_string(z) + "/" + std::to_string(x) + "/" + std::to_string(y);
  }

  friend auto operator<=>(const TileCoord&, const TileCoord&) = default;
};

/// Inclusive rectangle of tile indices at one zoom.
struct TileRange {
  int z = 0;
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int cols() const noexcept { return x1 - x0 + 1; }
  int rows() const noexcept { return y1 - y0 + 1; }

  void validate() const {
    if (x1 < x0 || y1 < y0) throw ValidationError("empty tile range");
    TileCoord{z, x0, y0}.validate();
    TileCoord{z, x1, y1}.validate();
  }
};

/// Affine frame from raster coordinates to global Mercator pixels.
///
/// Raster coordinate (u, v) is the continuous position inside the raster, with
/// pixel (i, j) covering [i, i+1) x [j, j+1); its centre is (i + 0.5, j + 0.5).
struct GeoRef {
  double zoom = 0.0;
  double origin_x = 0.0;  ///< global pixel of raster coordinate (0,0)
  double origin_y = 0.0;
  int width = 0;  ///< raster extent the frame describes
  int height = 0;
  int tile_size = kTileSize;

  PixelPoint to_global(PixelPoint p) const { return {origin_x + p.x, origin_y + p.y}; }

  LatLon to_latlon(PixelPoint p) const {
    const PixelPoint g = to_global(p);
    return global_pixel_to_latlon(g.x, g.y, zoom);
  }

  PixelPoint from_latlon(LatLon ll) const {
    const PixelPoint g = latlon_to_global_pixel(ll.lat, ll.lon, zoom);
    return {g.x - origin_x, g.y - origin_y};
  }

  /// Ground metres per pixel at raster row coordinate v.
  double resolution_at(double v) const {
    return ground_resolution(to_latlon({0.0, v}).lat, zoom);
  }

  bool contains(PixelPoint p) const noexcept {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height;
  }

  /// Frame of a sub-window starting at raster coordinate (x0, y0).
  GeoRef cropped(int x0, int y0, int w, int h) const {
    return {zoom, origin_x + x0, origin_y + y0, w, h, tile_size};
  }

  /// Frame of a width x height raster whose centre sits at `centre`.
  static GeoRef centred_at(LatLon centre, double zoom, int width, int height) {
    const PixelPoint g = latlon_to_global_pixel(centre.lat, centre.lon, zoom);
    return {zoom, g.x - width / 2.0, g.y - height / 2.0, width, height, kTileSize};
  }
};

struct StitchResult {
  Raster raster;
  GeoRef georef;
};

/// Copies every tile of `range` into one (cols*256) x (rows*256) raster.
inline StitchResult stitch(const std::map<TileCoord, Raster>& tiles, const TileRange& range) {
  range.validate();
  Raster out(range.cols() * kTileSize, range.rows() * kTileSize);
  for (int ty = range.y0; ty <= range.y1; ++ty) {
    for (int tx = range.x0; tx <= range.x1; ++tx) {
      const TileCoord t{range.z, tx, ty};
      auto it = tiles.find(t);
      if (it == tiles.end()) throw ValidationError("stitch: missing tile " + t.to_string());
      const Raster& tile = it->second;
      if (tile.width() != kTileSize || tile.height() != kTileSize) {
        throw ValidationError("stitch: tile " + t.to_string() + " is " + std::to_string(tile.width()) +
                              "x" + std::to_string(tile.height()) + ", expected 256x256");
      }
      const int ox = (tx - range.x0) * kTileSize;
      const int oy = (ty - range.y0) * kTileSize;
      for (int y = 0; y < kTileSize; ++y) {
        auto src = tile.row(y);
        std::copy(src.begin(), src.end(), out.row(oy + y).begin() + ox);
      }
    }
  }
  GeoRef g{static_cast<double>(range.z),
           static_cast<double>(range.x0) * kTileSize,
           static_cast<double>(range.y0) * kTileSize,
           out.width(),
           out.height(),
           kTileSize};
  return {std::move(out), g};
}

/// Euclidean pixel distance scaled by the ground resolution at the
/// midpoint latitude.
inline double measure_distance(PixelPoint a, PixelPoint b, const GeoRef& g) {
  if (!g.contains(a) || !g.contains(b)) throw ValidationError("measure: point outside the raster");
  const double pixels = std::hypot(a.x - b.x, a.y - b.y);
  if (pixels == 0.0) return 0.0;
  const double mid_lat = (g.to_latlon(a).lat + g.to_latlon(b).lat) / 2.0;
  return pixels * ground_resolution(mid_lat, g.zoom);
}

/// Planar angle of `to` seen from `from`, degrees counterclockwise from east
/// with north up, in [0, 360).
inline double planar_bearing_deg(PixelPoint from, PixelPoint to) {
  double deg = rad2deg(std::atan2(-(to.y - from.y), to.x - from.x));
  if (deg < 0.0) deg += 360.0;
  return deg;
}

}  // namespace siteline
