#pragma once

// Raster-to-vector outlining: threshold, clean, label, trace, measure, export.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "siteline/errors.hpp"
#include "siteline/geo.hpp"
#include "siteline/image_io.hpp"
#include "siteline/raster.hpp"

namespace siteline {

/// One byte per pixel, 0 background, 1 foreground.
using BitMask = Image<std::uint8_t>;

// ---------------------------------------------------------------------------
// Thresholding

struct ThresholdMethod {
  enum class Kind { fixed, otsu };
  Kind kind = Kind::otsu;
  double level = 0.5;  ///< used by fixed

  static ThresholdMethod fixed(double level) { return {Kind::fixed, level}; }
  static ThresholdMethod otsu() { return {Kind::otsu, 0.0}; }
};

inline constexpr int kHistogramBins = 256;

/// Histogram bin of an intensity, matching 8-bit quantization.
inline int intensity_bin(double v) { return quantize8(v); }

/// Otsu's threshold on a 256-bin histogram. Returns the first bin t (1..255)
/// maximizing the between-class variance of {bin < t} vs {bin >= t}, or
/// nullopt when every sample falls in one bin.
inline std::optional<int> otsu_bin(const Raster& r) {
  std::array<double, kHistogramBins> hist{};
  for (double v : r.pixels()) hist[static_cast<std::size_t>(intensity_bin(v))] += 1.0;
  const double total = static_cast<double>(r.size());
  double sum_all = 0.0;
  for (int i = 0; i < kHistogramBins; ++i) sum_all += i * hist[static_cast<std::size_t>(i)];

  double w0 = 0.0;
  double sum0 = 0.0;
  double best = -1.0;
  std::optional<int> best_t;
  for (int t = 1; t < kHistogramBins; ++t) {
    w0 += hist[static_cast<std::size_t>(t - 1)];
    sum0 += (t - 1) * hist[static_cast<std::size_t>(t - 1)];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

/// fixed: bit = v >= level. otsu: level = (t - 0.5)/255 for the Otsu bin t,
/// which selects exactly the samples whose 8-bit bin is >= t. A single-bin
/// histogram yields an all-background mask.
inline BitMask binarize(const Raster& r, const ThresholdMethod& method) {
  double level = method.level;
  if (method.kind == ThresholdMethod::Kind::otsu) {
    const auto t = otsu_bin(r);
    if (!t) return BitMask(r.width(), r.height(), 0);
    level = (*t - 0.5) / 255.0;
  }
  BitMask out(r.width(), r.height());
  auto src = r.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= level ? 1 : 0;
  return out;
}

inline double otsu_level(const Raster& r) {
  const auto t = otsu_bin(r);
  return t ? (*t - 0.5) / 255.0 : 1.0;
}

// ---------------------------------------------------------------------------
// Morphology (disc structuring element; pixels outside the image neither
// constrain an erosion nor feed a dilation)

enum class MorphOp { open, close };

namespace detail {

/// Per-row horizontal half-widths of the disc: row dy spans [-hw[dy], hw[dy]].
inline std::vector<int> disc_half_widths(int radius) {
  std::vector<int> hw(static_cast<std::size_t>(2 * radius + 1));
  for (int dy = -radius; dy <= radius; ++dy) {
    hw[static_cast<std::size_t>(dy + radius)] =
        static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy))));
  }
  return hw;
}

/// Dilation of `m` by the disc; erosion is the dual on the complement with
/// out-of-image pixels ignored, evaluated with run-length row sums.
inline BitMask dilate_or_erode(const BitMask& m, int radius, bool dilate) {
  const int w = m.width();
  const int h = m.height();
  const auto hw = disc_half_widths(radius);
  // prefix[y][x] counts "active" pixels in row y before x; active means 1 for
  // dilation and 0 for erosion.
  std::vector<int> prefix(static_cast<std::size_t>(h) * (w + 1), 0);
  for (int y = 0; y < h; ++y) {
    int* p = prefix.data() + static_cast<std::size_t>(y) * (w + 1);
    const auto row = m.row(y);
    for (int x = 0; x < w; ++x) p[x + 1] = p[x] + ((row[static_cast<std::size_t>(x)] != 0) == dilate ? 1 : 0);
  }
  BitMask out(w, h);
  for (int y = 0; y < h; ++y) {
    auto dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      bool hit = false;
      for (int dy = -radius; dy <= radius && !hit; ++dy) {
        const int sy = y + dy;
        if (sy < 0 || sy >= h) continue;
        const int r = hw[static_cast<std::size_t>(dy + radius)];
        const int lo = std::max(0, x - r);
        const int hi = std::min(w - 1, x + r);
        const int* p = prefix.data() + static_cast<std::size_t>(sy) * (w + 1);
        hit = p[hi + 1] - p[lo] > 0;
      }
      // dilation: any foreground in reach; erosion: no background in reach.
      dst[static_cast<std::size_t>(x)] = dilate ? (hit ? 1 : 0) : (hit ? 0 : 1);
    }
  }
  return out;
}

}  // namespace detail

inline BitMask dilate(const BitMask& m, int radius) {
  if (radius < 1) throw ValidationError("morphology radius must be >= 1");
  return detail::dilate_or_erode(m, radius, true);
}

inline BitMask erode(const BitMask& m, int radius) {
  if (radius < 1) throw ValidationError("morphology radius must be >= 1");
  return detail::dilate_or_erode(m, radius, false);
}

/// open = erode then dilate; close = dilate then erode.
inline BitMask morph(const BitMask& m, MorphOp op, int radius) {
  if (radius < 1) throw ValidationError("morphology radius must be >= 1");
  return op == MorphOp::open ? dilate(erode(m, radius), radius) : erode(dilate(m, radius), radius);
}

/// Sets every background pixel not 4-connected to the image border.
inline BitMask fill_holes(const BitMask& m) {
  const int w = m.width();
  const int h = m.height();
  BitMask outside(w, h, 0);
  std::vector<std::pair<int, int>> stack;
  auto seed = [&](int x, int y) {
    if (m(x, y) == 0 && outside(x, y) == 0) {
      outside(x, y) = 1;
      stack.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    stack.pop_back();
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  BitMask out(w, h);
  auto o = outside.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = o[i] ? 0 : 1;
  return out;
}

// ---------------------------------------------------------------------------
// Connected components

struct ComponentStats {
  int label = 0;
  long pixel_count = 0;
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  double centroid_x = 0.0;  ///< mean pixel-centre coordinate
  double centroid_y = 0.0;

  friend bool operator==(const ComponentStats&, const ComponentStats&) = default;
};

struct LabelMap {
  Image<std::int32_t> labels;  ///< 0 background, components 1..N
  std::vector<ComponentStats> stats;  ///< stats[i] describes label i + 1

  int count() const noexcept { return static_cast<int>(stats.size()); }
};

inline std::vector<ComponentStats> component_stats(const Image<std::int32_t>& labels, int count) {
  std::vector<ComponentStats> st(static_cast<std::size_t>(count));
  std::vector<double> sx(st.size(), 0.0), sy(st.size(), 0.0);
  for (int i = 0; i < count; ++i) {
    st[static_cast<std::size_t>(i)].label = i + 1;
    st[static_cast<std::size_t>(i)].min_x = labels.width();
    st[static_cast<std::size_t>(i)].min_y = labels.height();
    st[static_cast<std::size_t>(i)].max_x = -1;
    st[static_cast<std::size_t>(i)].max_y = -1;
  }
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const int l = labels(x, y);
      if (l == 0) continue;
      auto& s = st[static_cast<std::size_t>(l - 1)];
      ++s.pixel_count;
      s.min_x = std::min(s.min_x, x);
      s.min_y = std::min(s.min_y, y);
      s.max_x = std::max(s.max_x, x);
      s.max_y = std::max(s.max_y, y);
      sx[static_cast<std::size_t>(l - 1)] += x + 0.5;
      sy[static_cast<std::size_t>(l - 1)] += y + 0.5;
    }
  }
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (st[i].pixel_count > 0) {
      st[i].centroid_x = sx[i] / static_cast<double>(st[i].pixel_count);
      st[i].centroid_y = sy[i] / static_cast<double>(st[i].pixel_count);
    }
  }
  return st;
}

/// Two-pass union-find labeling with 8-connectivity. Labels are numbered by
/// the raster-scan order of each component's first pixel.
inline LabelMap connected_components(const BitMask& m) {
  const int w = m.width();
  const int h = m.height();
  Image<std::int32_t> provisional(w, h, 0);
  std::vector<std::int32_t> parent{0};
  auto find = [&parent](std::int32_t a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  };
  auto unite = [&](std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m(x, y)) continue;
      std::int32_t label = 0;
      const std::array<std::pair<int, int>, 4> prior{{{x - 1, y}, {x - 1, y - 1}, {x, y - 1}, {x + 1, y - 1}}};
      for (auto [px, py] : prior) {
        if (px < 0 || py < 0 || px >= w) continue;
        const std::int32_t n = provisional(px, py);
        if (n == 0) continue;
        if (label == 0) {
          label = n;
        } else {
          unite(label, n);
        }
      }
      if (label == 0) {
        label = static_cast<std::int32_t>(parent.size());
        parent.push_back(label);
      }
      provisional(x, y) = label;
    }
  }
  // Renumber roots by first encounter in scan order.
  std::vector<std::int32_t> final_label(parent.size(), 0);
  std::int32_t next = 0;
  LabelMap out{Image<std::int32_t>(w, h, 0), {}};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t p = provisional(x, y);
      if (p == 0) continue;
      const std::int32_t root = find(p);
      if (final_label[static_cast<std::size_t>(root)] == 0) final_label[static_cast<std::size_t>(root)] = ++next;
      out.labels(x, y) = final_label[static_cast<std::size_t>(root)];
    }
  }
  out.stats = component_stats(out.labels, next);
  return out;
}

// ---------------------------------------------------------------------------
// Polygon geometry

using Ring = std::vector<PixelPoint>;

/// Signed shoelace area of a ring (closing edge implied if first != last).
/// Positive means clockwise as displayed (y grows downward).
inline double signed_area(const Ring& ring) {
  if (ring.size() < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const PixelPoint& p = ring[i];
    const PixelPoint& q = ring[(i + 1) % ring.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return a / 2.0;
}

inline double ring_length(const Ring& ring) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) len += std::hypot(ring[i + 1].x - ring[i].x, ring[i + 1].y - ring[i].y);
  if (ring.size() > 1 && (ring.front().x != ring.back().x || ring.front().y != ring.back().y)) {
    len += std::hypot(ring.front().x - ring.back().x, ring.front().y - ring.back().y);
  }
  return len;
}

/// Area centroid; falls back to the vertex mean for zero-area rings.
inline PixelPoint ring_centroid(const Ring& ring) {
  const double a = signed_area(ring);
  if (ring.empty()) return {};
  if (std::abs(a) < 1e-12) {
    PixelPoint m{};
    for (const auto& p : ring) {
      m.x += p.x;
      m.y += p.y;
    }
    return {m.x / static_cast<double>(ring.size()), m.y / static_cast<double>(ring.size())};
  }
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const PixelPoint& p = ring[i];
    const PixelPoint& q = ring[(i + 1) % ring.size()];
    const double cross = p.x * q.y - q.x * p.y;
    cx += (p.x + q.x) * cross;
    cy += (p.y + q.y) * cross;
  }
  return {cx / (6.0 * a), cy / (6.0 * a)};
}

/// Andrew's monotone chain; collinear points dropped.
inline std::vector<PixelPoint> convex_hull(std::vector<PixelPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const PixelPoint& a, const PixelPoint& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const PixelPoint& a, const PixelPoint& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const PixelPoint& o, const PixelPoint& a, const PixelPoint& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<PixelPoint> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Longest vertex-to-vertex distance (max caliper) and narrowest strip width
/// (min caliper), both in pixels.
struct Calipers {
  double extent = 0.0;
  double width = 0.0;
};

inline Calipers calipers(const std::vector<PixelPoint>& points) {
  const auto hull = convex_hull(points);
  Calipers c;
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j)
      c.extent = std::max(c.extent, std::hypot(hull[i].x - hull[j].x, hull[i].y - hull[j].y));
  if (hull.size() < 3) return c;
  c.width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const PixelPoint& a = hull[i];
    const PixelPoint& b = hull[(i + 1) % hull.size()];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0.0) continue;
    double far = 0.0;
    for (const auto& p : hull) far = std::max(far, std::abs((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / len);
    c.width = std::min(c.width, far);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Contour tracing

struct SitePolygon {
  int label = 0;
  Ring ring;                  ///< closed (first == last), pixel-centre coordinates
  std::vector<LatLon> geo_ring;
  PixelPoint centroid_px;
  LatLon centroid;
  double area_m2 = 0.0;
  double perimeter_m = 0.0;
  double extent_m = 0.0;  ///< max caliper
  double width_m = 0.0;   ///< min caliper
};

namespace detail {

// Clockwise as displayed, starting west.
inline constexpr std::array<std::pair<int, int>, 8> kMoore{
    {{-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

inline int moore_index(int dx, int dy) {
  for (int i = 0; i < 8; ++i)
    if (kMoore[static_cast<std::size_t>(i)].first == dx && kMoore[static_cast<std::size_t>(i)].second == dy) return i;
  return -1;
}

/// Moore-neighbour boundary of the component containing `start` (its first
/// pixel in scan order), stopped by Jacob's criterion: the walk ends when a
/// pixel is re-entered with the same backtrack neighbour as the first move.
inline std::vector<std::pair<int, int>> moore_trace(const Image<std::int32_t>& labels, int label,
                                                    int sx, int sy, long pixel_count) {
  auto inside = [&](int x, int y) { return labels.contains(x, y) && labels(x, y) == label; };
  std::vector<std::pair<int, int>> path{{sx, sy}};
  int cx = sx, cy = sy;
  int back = 0;  // west of the first pixel is background by scan order
  // The initial backtrack is synthetic and may never recur, so the stop test
  // uses the state reached by the first real move instead.
  int first_x = -1, first_y = -1, first_back = -1;
  const long limit = 8 * pixel_count + 16;
  for (long step = 0; step < limit; ++step) {
    int found = -1;
    for (int i = 1; i <= 8; ++i) {
      const int d = (back + i) % 8;
      if (inside(cx + kMoore[static_cast<std::size_t>(d)].first, cy + kMoore[static_cast<std::size_t>(d)].second)) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    const int prev = (found + 7) % 8;
    const int bx = cx + kMoore[static_cast<std::size_t>(prev)].first;
    const int by = cy + kMoore[static_cast<std::size_t>(prev)].second;
    cx += kMoore[static_cast<std::size_t>(found)].first;
    cy += kMoore[static_cast<std::size_t>(found)].second;
    back = moore_index(bx - cx, by - cy);
    if (step == 0) {
      first_x = cx;
      first_y = cy;
      first_back = back;
    } else if (cx == first_x && cy == first_y && back == first_back) {
      // One full period: drop the synthetic lead-in and close on the first move.
      path.erase(path.begin());
      break;
    }
    path.emplace_back(cx, cy);
  }
  path.push_back(path.front());
  return path;
}

}  // namespace detail

/// One closed outer ring per component of at least `min_area` pixels, in label
/// order. Vertices are boundary pixel centres, counterclockwise as displayed
/// (negative signed_area), which becomes counterclockwise in lon/lat.
inline std::vector<SitePolygon> trace_contours(const LabelMap& lm, long min_area = 50) {
  std::vector<SitePolygon> out;
  std::vector<bool> wanted(static_cast<std::size_t>(lm.count()) + 1, false);
  std::vector<std::pair<int, int>> first(static_cast<std::size_t>(lm.count()) + 1, {-1, -1});
  for (const auto& s : lm.stats) wanted[static_cast<std::size_t>(s.label)] = s.pixel_count >= min_area;
  for (int y = 0; y < lm.labels.height(); ++y) {
    for (int x = 0; x < lm.labels.width(); ++x) {
      const int l = lm.labels(x, y);
      if (l != 0 && first[static_cast<std::size_t>(l)].first < 0) first[static_cast<std::size_t>(l)] = {x, y};
    }
  }
  for (const auto& s : lm.stats) {
    if (!wanted[static_cast<std::size_t>(s.label)]) continue;
    const auto [sx, sy] = first[static_cast<std::size_t>(s.label)];
    auto path = detail::moore_trace(lm.labels, s.label, sx, sy, s.pixel_count);
    std::reverse(path.begin(), path.end());
    SitePolygon poly;
    poly.label = s.label;
    poly.ring.reserve(path.size());
    for (auto [x, y] : path) poly.ring.push_back({x + 0.5, y + 0.5});
    poly.centroid_px = ring_centroid(poly.ring);
    out.push_back(std::move(poly));
  }
  return out;
}

/// Fills the metric and geographic fields. Resolution is taken at each
/// polygon's centroid latitude.
inline std::vector<SitePolygon> measure_polygons(std::vector<SitePolygon> polys, const GeoRef& g) {
  for (auto& p : polys) {
    p.centroid_px = ring_centroid(p.ring);
    p.centroid = g.to_latlon(p.centroid_px);
    const double res = ground_resolution(p.centroid.lat, g.zoom);
    p.area_m2 = std::abs(signed_area(p.ring)) * res * res;
    p.perimeter_m = ring_length(p.ring) * res;
    const Calipers c = calipers(p.ring);
    p.extent_m = c.extent * res;
    p.width_m = c.width * res;
    p.geo_ring.clear();
    for (const auto& v : p.ring) p.geo_ring.push_back(g.to_latlon(v));
  }
  return polys;
}

// ---------------------------------------------------------------------------
// GeoJSON

inline double round7(double v) { return std::round(v * 1e7) / 1e7; }

/// RFC 7946 FeatureCollection of Polygon features, [lon, lat] rounded to 7
/// decimals. Keys are emitted in a fixed order, so equal input gives equal bytes.
inline std::string to_geojson(const std::vector<SitePolygon>& polys) {
  using ojson = nlohmann::ordered_json;
  ojson features = ojson::array();
  for (const auto& p : polys) {
    ojson ring = ojson::array();
    for (const auto& ll : p.geo_ring) ring.push_back(ojson::array({round7(ll.lon), round7(ll.lat)}));
    ojson f;
    f["type"] = "Feature";
    f["properties"] = ojson{{"label", p.label},
                            {"area_m2", p.area_m2},
                            {"perimeter_m", p.perimeter_m},
                            {"extent_m", p.extent_m}};
    f["geometry"] = ojson{{"type", "Polygon"}, {"coordinates", ojson::array({ring})}};
    features.push_back(std::move(f));
  }
  ojson fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = std::move(features);
  return fc.dump(1) + "\n";
}

inline void export_geojson(const std::vector<SitePolygon>& polys, const std::filesystem::path& path) {
  const std::string text = to_geojson(polys);
  detail::write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// Reads back what to_geojson writes: label, metric properties, geo ring.
inline std::vector<SitePolygon> parse_geojson(const std::string& text) {
  std::vector<SitePolygon> polys;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("type") != "FeatureCollection") throw ValidationError("GeoJSON: not a FeatureCollection");
    for (const auto& f : doc.at("features")) {
      SitePolygon p;
      const auto& props = f.at("properties");
      p.label = props.at("label").get<int>();
      p.area_m2 = props.at("area_m2").get<double>();
      p.perimeter_m = props.at("perimeter_m").get<double>();
      p.extent_m = props.at("extent_m").get<double>();
      const auto& geom = f.at("geometry");
      if (geom.at("type") != "Polygon") throw ValidationError("GeoJSON: expected Polygon geometry");
      for (const auto& c : geom.at("coordinates").at(0)) {
        p.geo_ring.push_back({c.at(1).get<double>(), c.at(0).get<double>()});
      }
      polys.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("GeoJSON parse error: ") + e.what());
  }
  return polys;
}

}  // namespace siteline
