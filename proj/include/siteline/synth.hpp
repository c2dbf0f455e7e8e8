#pragma once

// Parametric moated-fortress scenes with exact ground truth.
//
// Geometry is laid out in metres on a local plane centred on the hill, x east
// and y north. Pixel (i, j) samples the plane at its centre. The default scene
// follows the site description: a 600 x 500 m moated hill, five satellite
// sites on a 1 km circle at 72 degree spacing (four triangles, one quad), and
// undulating trenches linking each satellite to the moat.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "siteline/errors.hpp"
#include "siteline/geo.hpp"
#include "siteline/outline.hpp"
#include "siteline/raster.hpp"

namespace siteline {

enum class SatelliteShape { triangle, quad };

struct SceneSpec {
  double resolution_m = 2.0;
  double extent_m = 2600.0;
  LatLon site{41.766927, 100.73733};

  double background = 0.70;
  double texture_amplitude = 0.02;  ///< value noise on the sand
  double texture_scale_m = 160.0;   ///< value-noise lattice spacing
  double noise_sigma = 0.01;        ///< additive Gaussian noise, every pixel

  // The hill ellipse is the outer boundary of the moated hill; the moat is
  // the outermost moat_width_m of it.
  double hill_length_m = 600.0;
  double hill_width_m = 500.0;
  double hill_angle_deg = 0.0;  ///< long axis, counterclockwise from east
  double hill_intensity = 0.60;
  double moat_width_m = 40.0;
  double moat_intensity = 0.25;

  int satellite_count = 5;
  double satellite_radius_m = 1000.0;
  double satellite_phase_deg = 90.0;
  double satellite_size_m = 140.0;  ///< side length of the triangle or quad
  std::vector<SatelliteShape> satellite_shapes{SatelliteShape::triangle, SatelliteShape::triangle,
                                               SatelliteShape::triangle, SatelliteShape::triangle,
                                               SatelliteShape::quad};
  double satellite_intensity = 0.55;

  bool trenches = true;
  double trench_amplitude_m = 30.0;
  double trench_wavelength_m = 120.0;
  double trench_width_m = 8.0;
  double trench_intensity = 0.35;

  bool flag = true;  ///< small flag-like block straddling the first trench
  double flag_length_m = 30.0;  ///< across the trench
  double flag_width_m = 16.0;   ///< along the trench
  double flag_intensity = 0.45;

  int pixels() const { return static_cast<int>(std::lround(extent_m / resolution_m)); }

  double satellite_angle_deg(int i) const {
    return satellite_phase_deg + 360.0 * i / std::max(1, satellite_count);
  }

  void validate() const;
};

inline SceneSpec default_spec() { return SceneSpec{}; }

struct GroundTruthFeature {
  std::string name;
  PixelPoint centroid_px;
  double length_m = 0.0;  ///< nominal max caliper
  double width_m = 0.0;   ///< nominal min caliper
};

struct GroundTruth {
  BitMask mound;
  BitMask moat;
  std::vector<BitMask> satellites;
  std::vector<BitMask> trenches;
  BitMask flag;
  /// "hill" (mound plus moat) followed by "satellite_1".."satellite_N".
  std::vector<GroundTruthFeature> features;

  BitMask hill() const {
    BitMask m = mound;
    auto dst = m.pixels();
    auto src = moat.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = dst[i] | src[i];
    return m;
  }
};

struct SyntheticScene {
  Raster image;
  GroundTruth truth;
  GeoRef georef;
};

namespace detail {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline Vec2 unit(double deg) { return {std::cos(deg2rad(deg)), std::sin(deg2rad(deg))}; }

/// Polygon vertices of satellite i, one vertex pointing at the hill centre.
inline std::vector<Vec2> satellite_vertices(const SceneSpec& s, int i) {
  const double theta = s.satellite_angle_deg(i);
  const Vec2 centre = s.satellite_radius_m * unit(theta);
  const bool tri = s.satellite_shapes[static_cast<std::size_t>(i)] == SatelliteShape::triangle;
  const int n = tri ? 3 : 4;
  const double circum = tri ? s.satellite_size_m / std::sqrt(3.0) : s.satellite_size_m / std::sqrt(2.0);
  std::vector<Vec2> v;
  for (int k = 0; k < n; ++k) v.push_back(centre + circum * unit(theta + 180.0 + 360.0 * k / n));
  return v;
}

inline double satellite_circumradius(const SceneSpec& s, int i) {
  return s.satellite_shapes[static_cast<std::size_t>(i)] == SatelliteShape::triangle
             ? s.satellite_size_m / std::sqrt(3.0)
             : s.satellite_size_m / std::sqrt(2.0);
}

inline bool inside_convex(const std::vector<Vec2>& poly, Vec2 p) {
  // Vertices are counterclockwise (y north), so interior is left of each edge.
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Vec2 a = poly[k];
    const Vec2 b = poly[(k + 1) % poly.size()];
    if (cross(b - a, p - a) < 0.0) return false;
  }
  return true;
}

/// Is p inside the ellipse with semi-axes (a, b) rotated by angle_deg.
inline bool inside_ellipse(Vec2 p, double a, double b, double angle_deg) {
  const Vec2 ax = unit(angle_deg);
  const Vec2 ay{-ax.y, ax.x};
  const double u = dot(p, ax) / a;
  const double v = dot(p, ay) / b;
  return u * u + v * v <= 1.0;
}

/// Distance from the centre to the ellipse boundary along direction deg.
inline double ellipse_radius(double a, double b, double angle_deg, double deg) {
  const double t = deg2rad(deg - angle_deg);
  return a * b / std::sqrt(std::pow(b * std::cos(t), 2) + std::pow(a * std::sin(t), 2));
}

struct TrenchPath {
  Vec2 start;
  Vec2 axis;    ///< unit, outward
  Vec2 normal;  ///< unit, left of axis
  double length = 0.0;
  double wavelength = 0.0;  ///< adjusted so the sinusoid vanishes at both ends

  Vec2 at(double s, double amplitude) const {
    const double lateral = amplitude * std::sin(2.0 * std::numbers::pi * s / wavelength);
    return start + s * axis + lateral * normal;
  }
};

inline TrenchPath trench_path(const SceneSpec& s, int i) {
  const double theta = s.satellite_angle_deg(i);
  const Vec2 u = unit(theta);
  const double r0 = ellipse_radius(s.hill_length_m / 2.0, s.hill_width_m / 2.0, s.hill_angle_deg, theta);
  const double r1 = s.satellite_radius_m - satellite_circumradius(s, i);
  TrenchPath p;
  p.start = r0 * u;
  p.axis = u;
  p.normal = {-u.y, u.x};
  p.length = std::max(0.0, r1 - r0);
  const double periods = std::max(1.0, std::round(p.length / s.trench_wavelength_m));
  p.wavelength = p.length / periods;
  return p;
}

class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : gen_(seed) {}
  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace detail

inline void SceneSpec::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("scene spec: " + what); };
  if (!(resolution_m > 0.0)) fail("resolution must be positive");
  if (!(extent_m > 0.0) || pixels() < 16) fail("extent must cover at least 16 pixels");
  if (!(hill_length_m > 0.0 && hill_width_m > 0.0)) fail("hill axes must be positive");
  if (!(moat_width_m >= 0.0 && moat_width_m < std::min(hill_length_m, hill_width_m) / 2.0)) {
    fail("moat width must be smaller than the hill half-width");
  }
  if (satellite_count < 0) fail("satellite count must be >= 0");
  if (static_cast<int>(satellite_shapes.size()) != satellite_count) {
    fail("satellite_shapes has " + std::to_string(satellite_shapes.size()) + " entries for " +
         std::to_string(satellite_count) + " satellites");
  }
  if (satellite_count > 0 && !(satellite_size_m > 0.0)) fail("satellite size must be positive");
  if (trenches && !(trench_width_m > 0.0 && trench_wavelength_m > 0.0 && trench_amplitude_m >= 0.0)) {
    fail("trench width and wavelength must be positive");
  }
  if (!(noise_sigma >= 0.0 && texture_amplitude >= 0.0)) fail("noise amplitudes must be >= 0");
  if (!(texture_scale_m > 0.0)) fail("texture scale must be positive");
  for (double v : {background, hill_intensity, moat_intensity, satellite_intensity, trench_intensity, flag_intensity}) {
    if (!(v >= 0.0 && v <= 1.0)) fail("intensities must lie in [0,1]");
  }
  const double half = extent_m / 2.0;
  if (std::max(hill_length_m, hill_width_m) / 2.0 > half) fail("geometry overflow: hill exceeds the scene");
  for (int i = 0; i < satellite_count; ++i) {
    const double reach = satellite_radius_m + detail::satellite_circumradius(*this, i);
    for (const auto& v : detail::satellite_vertices(*this, i)) {
      if (std::abs(v.x) > half || std::abs(v.y) > half) {
        fail("geometry overflow: satellite " + std::to_string(i + 1) + " reaches " + std::to_string(reach) +
             " m from the centre, scene half-extent is " + std::to_string(half) + " m");
      }
    }
    if (satellite_radius_m - detail::satellite_circumradius(*this, i) <=
        std::max(hill_length_m, hill_width_m) / 2.0) {
      fail("satellite " + std::to_string(i + 1) + " overlaps the hill");
    }
  }
}

/// Deterministic in (spec, seed). Paint order, later wins: sand, trenches,
/// moat, mound, satellites, flag. Ground-truth masks are therefore disjoint.
inline SyntheticScene render(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  using detail::Vec2;
  const int n = spec.pixels();
  const double res = spec.resolution_m;
  auto plane = [&](int i, int j) -> Vec2 {
    return {(i + 0.5 - n / 2.0) * res, (n / 2.0 - (j + 0.5)) * res};
  };
  auto to_px = [&](Vec2 p) -> PixelPoint { return {n / 2.0 + p.x / res, n / 2.0 - p.y / res}; };

  enum : std::uint8_t { kSand, kTrench, kMoat, kMound, kSatellite, kFlag };
  Image<std::uint8_t> cls(n, n, kSand);
  Image<std::int16_t> owner(n, n, -1);  // satellite or trench index

  const double a = spec.hill_length_m / 2.0;
  const double b = spec.hill_width_m / 2.0;
  const double w = spec.moat_width_m;

  std::vector<detail::TrenchPath> paths;
  if (spec.trenches) {
    const double half_w = spec.trench_width_m / 2.0;
    const double step = std::min(res, spec.trench_width_m) / 4.0;
    for (int t = 0; t < spec.satellite_count; ++t) {
      const auto path = detail::trench_path(spec, t);
      paths.push_back(path);
      // Overrun both ends by a trench width so the channel meets moat and satellite.
      for (double s = -spec.trench_width_m; s <= path.length + spec.trench_width_m; s += step) {
        const double sc = std::clamp(s, 0.0, path.length);
        const Vec2 c = path.at(sc, spec.trench_amplitude_m) + (s - sc) * path.axis;
        const PixelPoint cp = to_px(c);
        const int r = static_cast<int>(std::ceil(half_w / res)) + 1;
        for (int j = static_cast<int>(cp.y) - r; j <= static_cast<int>(cp.y) + r; ++j) {
          for (int i = static_cast<int>(cp.x) - r; i <= static_cast<int>(cp.x) + r; ++i) {
            if (!cls.contains(i, j)) continue;
            const Vec2 d = plane(i, j) - c;
            if (d.x * d.x + d.y * d.y <= half_w * half_w) {
              cls(i, j) = kTrench;
              owner(i, j) = static_cast<std::int16_t>(t);
            }
          }
        }
      }
    }
  }

  std::vector<std::vector<Vec2>> sats;
  for (int s = 0; s < spec.satellite_count; ++s) sats.push_back(detail::satellite_vertices(spec, s));

  // Flag: rectangle centred on the first trench's midpoint, long side across it.
  std::optional<std::vector<Vec2>> flag;
  if (spec.flag && !paths.empty()) {
    const auto& p = paths.front();
    const Vec2 c = p.at(p.length / 2.0, spec.trench_amplitude_m);
    const Vec2 along = (spec.flag_width_m / 2.0) * p.axis;
    const Vec2 across = (spec.flag_length_m / 2.0) * p.normal;
    flag = std::vector<Vec2>{c - along - across, c + along - across, c + along + across, c - along + across};
  }

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Vec2 p = plane(i, j);
      if (detail::inside_ellipse(p, a, b, spec.hill_angle_deg)) {
        cls(i, j) = detail::inside_ellipse(p, a - w, b - w, spec.hill_angle_deg) ? kMound : kMoat;
      }
      for (int s = 0; s < spec.satellite_count; ++s) {
        if (detail::inside_convex(sats[static_cast<std::size_t>(s)], p)) {
          cls(i, j) = kSatellite;
          owner(i, j) = static_cast<std::int16_t>(s);
        }
      }
      if (flag && detail::inside_convex(*flag, p)) cls(i, j) = kFlag;
    }
  }

  SyntheticScene scene;
  GroundTruth& gt = scene.truth;
  gt.mound = BitMask(n, n, 0);
  gt.moat = BitMask(n, n, 0);
  gt.flag = BitMask(n, n, 0);
  gt.satellites.assign(static_cast<std::size_t>(spec.satellite_count), BitMask(n, n, 0));
  gt.trenches.assign(paths.size(), BitMask(n, n, 0));

  // Value-noise lattice for the sand texture.
  detail::SceneRng rng(seed);
  const double cell = spec.texture_scale_m / res;
  const int lattice = static_cast<int>(std::ceil(n / cell)) + 2;
  std::vector<double> lat(static_cast<std::size_t>(lattice) * lattice);
  for (double& v : lat) v = 2.0 * rng.uniform() - 1.0;
  auto texture = [&](int i, int j) {
    const double gx = (i + 0.5) / cell;
    const double gy = (j + 0.5) / cell;
    const int x0 = static_cast<int>(gx);
    const int y0 = static_cast<int>(gy);
    const double tx = detail::smoothstep(gx - x0);
    const double ty = detail::smoothstep(gy - y0);
    auto L = [&](int x, int y) { return lat[static_cast<std::size_t>(y) * lattice + x]; };
    const double top = L(x0, y0) + tx * (L(x0 + 1, y0) - L(x0, y0));
    const double bot = L(x0, y0 + 1) + tx * (L(x0 + 1, y0 + 1) - L(x0, y0 + 1));
    return top + ty * (bot - top);
  };

  Raster img(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      double v = 0.0;
      switch (cls(i, j)) {
        case kSand:
          v = spec.background + spec.texture_amplitude * texture(i, j);
          break;
        case kTrench:
          v = spec.trench_intensity;
          gt.trenches[static_cast<std::size_t>(owner(i, j))](i, j) = 1;
          break;
        case kMoat:
          v = spec.moat_intensity;
          gt.moat(i, j) = 1;
          break;
        case kMound:
          v = spec.hill_intensity;
          gt.mound(i, j) = 1;
          break;
        case kSatellite:
          v = spec.satellite_intensity;
          gt.satellites[static_cast<std::size_t>(owner(i, j))](i, j) = 1;
          break;
        case kFlag:
          v = spec.flag_intensity;
          gt.flag(i, j) = 1;
          break;
      }
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
      img(i, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  scene.image = std::move(img);

  auto mask_centroid = [](const BitMask& m) {
    double sx = 0.0, sy = 0.0;
    long count = 0;
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x)
        if (m(x, y)) {
          sx += x + 0.5;
          sy += y + 0.5;
          ++count;
        }
    return count ? PixelPoint{sx / count, sy / count} : PixelPoint{};
  };
  gt.features.push_back({"hill", mask_centroid(gt.hill()), spec.hill_length_m, spec.hill_width_m});
  for (int s = 0; s < spec.satellite_count; ++s) {
    const bool tri = spec.satellite_shapes[static_cast<std::size_t>(s)] == SatelliteShape::triangle;
    const double side = spec.satellite_size_m;
    gt.features.push_back({"satellite_" + std::to_string(s + 1),
                           mask_centroid(gt.satellites[static_cast<std::size_t>(s)]),
                           tri ? side : side * std::sqrt(2.0), tri ? side * std::sqrt(3.0) / 2.0 : side});
  }

  scene.georef = GeoRef::centred_at(spec.site, zoom_for_resolution(spec.site.lat, res), n, n);
  return scene;
}

}  // namespace siteline
