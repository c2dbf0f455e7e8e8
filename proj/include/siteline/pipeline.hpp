#pragma once

// End-to-end outlining pipeline and its flat key=value configuration.
//
//   acquire -> gray -> { enhance (fractional), edges (Sobel) } -> merge
//           -> binarize -> morph -> components -> trace -> measure -> export
//
// The two operator branches read the same gray raster and run concurrently;
// everything after merge is sequential.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "siteline/convolve.hpp"
#include "siteline/errors.hpp"
#include "siteline/geo.hpp"
#include "siteline/image_io.hpp"
#include "siteline/operators.hpp"
#include "siteline/outline.hpp"
#include "siteline/raster.hpp"
#include "siteline/synth.hpp"
#include "siteline/tiles.hpp"

namespace siteline {

enum class InputKind { none, file, endpoint, synth };

struct PipelineConfig {
  // Exactly one of input.file / input.endpoint / input.synth.
  InputKind input = InputKind::none;
  std::filesystem::path input_file;
  std::optional<LatLon> input_center;  ///< file input: position of the raster centre
  std::optional<double> input_zoom;     ///< file input: real zoom; endpoint: integer zoom
  std::string endpoint;
  std::optional<LatLonBox> bbox;
  std::filesystem::path cache_dir;  ///< empty: default_cache_root()
  int max_concurrent = 4;
  SceneSpec scene = default_spec();
  std::uint64_t seed = 1;

  FracParams frac;
  double stretch_lo = 1.0;
  double stretch_hi = 99.0;
  Boundary sobel_boundary = Boundary::reflect;
  BlendMode blend;
  ThresholdMethod threshold = ThresholdMethod::fixed(0.95);
  int close_radius = 2;
  bool fill_holes = true;
  int open_radius = 10;
  long min_area = 50;
  unsigned workers = 1;

  std::filesystem::path out_source, out_enhanced, out_edges, out_merged, out_mask, out_geojson;

  /// Raw key=value pairs as given, in order (after overrides).
  std::vector<std::pair<std::string, std::string>> entries;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Value parsing

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ValidationError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

inline long parse_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ValidationError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v, std::size_t n) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.size() != n) {
    throw ValidationError(key + ": expected " + std::to_string(n) + " comma-separated numbers");
  }
  return out;
}

inline Boundary parse_boundary(const std::string& key, const std::string& v) {
  if (v == "reflect") return Boundary::reflect;
  if (v == "replicate") return Boundary::replicate;
  if (v == "zero") return Boundary::zero;
  throw ValidationError(key + ": expected reflect|replicate|zero, got '" + v + "'");
}

inline BlendKind parse_blend(const std::string& key, const std::string& v) {
  if (v == "max") return BlendKind::max;
  if (v == "mean") return BlendKind::mean;
  if (v == "screen") return BlendKind::screen;
  if (v == "multiply") return BlendKind::multiply;
  throw ValidationError(key + ": expected max|mean|screen|multiply, got '" + v + "'");
}

inline DirectionSet parse_directions(const std::string& key, const std::string& v) {
  if (v == "two") return DirectionSet::two;
  if (v == "four") return DirectionSet::four;
  throw ValidationError(key + ": expected two|four, got '" + v + "'");
}

inline std::vector<SatelliteShape> parse_shapes(const std::string& key, const std::string& v) {
  std::vector<SatelliteShape> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "triangle") {
      out.push_back(SatelliteShape::triangle);
    } else if (item == "quad") {
      out.push_back(SatelliteShape::quad);
    } else {
      throw ValidationError(key + ": expected triangle|quad entries, got '" + item + "'");
    }
  }
  return out;
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value)>;

struct KeySpec {
  std::string help;
  Setter set;
};

template <typename T>
Setter number_field(T PipelineConfig::*field) {
  return [field](PipelineConfig& c, const std::string& k, const std::string& v) {
    if constexpr (std::is_floating_point_v<T>) {
      c.*field = parse_double(k, v);
    } else {
      c.*field = static_cast<T>(parse_long(k, v));
    }
  };
}

template <typename T>
Setter scene_field(T SceneSpec::*field) {
  return [field](PipelineConfig& c, const std::string& k, const std::string& v) {
    if constexpr (std::is_same_v<T, bool>) {
      c.scene.*field = parse_bool(k, v);
    } else if constexpr (std::is_floating_point_v<T>) {
      c.scene.*field = parse_double(k, v);
    } else {
      c.scene.*field = static_cast<T>(parse_long(k, v));
    }
  };
}

inline Setter path_field(std::filesystem::path PipelineConfig::*field) {
  return [field](PipelineConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}

}  // namespace detail

/// Every recognised configuration key, sorted.
inline const std::map<std::string, detail::KeySpec>& config_keys() {
  using namespace detail;
  static const std::map<std::string, KeySpec> keys = {
      {"input.file", {"input raster (PNG or PGM)", [](PipelineConfig& c, const std::string&, const std::string& v) {
                        c.input_file = v;
                      }}},
      {"input.lat", {"file input: latitude of the raster centre", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                       c.input_center = LatLon{parse_double(k, v), c.input_center ? c.input_center->lon : 0.0};
                     }}},
      {"input.lon", {"file input: longitude of the raster centre", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                       c.input_center = LatLon{c.input_center ? c.input_center->lat : 0.0, parse_double(k, v)};
                     }}},
      {"input.zoom", {"zoom level (real for file input, integer for endpoint input)",
                      [](PipelineConfig& c, const std::string& k, const std::string& v) { c.input_zoom = parse_double(k, v); }}},
      {"input.endpoint", {"XYZ tile URL template with {z}/{x}/{y}",
                          [](PipelineConfig& c, const std::string&, const std::string& v) { c.endpoint = v; }}},
      {"input.bbox", {"endpoint input: south,west,north,east in degrees",
                      [](PipelineConfig& c, const std::string& k, const std::string& v) {
                        const auto b = parse_list(k, v, 4);
                        c.bbox = LatLonBox{b[0], b[1], b[2], b[3]};
                      }}},
      {"input.cache_dir", {"tile cache root (default $SITELINE_CACHE_DIR)", path_field(&PipelineConfig::cache_dir)}},
      {"input.max_concurrent", {"tile fetches in flight", number_field(&PipelineConfig::max_concurrent)}},
      {"input.synth", {"synthetic scene (value: default)", [](PipelineConfig&, const std::string& k, const std::string& v) {
                         if (v != "default") throw ValidationError(k + ": only 'default' is defined");
                       }}},
      {"synth.seed", {"scene noise seed", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                        const long s = parse_long(k, v);
                        if (s < 0) throw ValidationError(k + ": seed must be >= 0");
                        c.seed = static_cast<std::uint64_t>(s);
                      }}},
      {"synth.resolution_m", {"metres per pixel", scene_field(&SceneSpec::resolution_m)}},
      {"synth.extent_m", {"scene side length in metres", scene_field(&SceneSpec::extent_m)}},
      {"synth.noise_sigma", {"Gaussian noise sigma", scene_field(&SceneSpec::noise_sigma)}},
      {"synth.texture_amplitude", {"sand value-noise amplitude", scene_field(&SceneSpec::texture_amplitude)}},
      {"synth.hill_length_m", {"moated hill long axis", scene_field(&SceneSpec::hill_length_m)}},
      {"synth.hill_width_m", {"moated hill short axis", scene_field(&SceneSpec::hill_width_m)}},
      {"synth.hill_angle_deg", {"hill long-axis angle", scene_field(&SceneSpec::hill_angle_deg)}},
      {"synth.moat_width_m", {"moat width", scene_field(&SceneSpec::moat_width_m)}},
      {"synth.satellite_count", {"number of satellites", scene_field(&SceneSpec::satellite_count)}},
      {"synth.satellite_shapes", {"comma list of triangle|quad",
                                  [](PipelineConfig& c, const std::string& k, const std::string& v) {
                                    c.scene.satellite_shapes = parse_shapes(k, v);
                                  }}},
      {"synth.satellite_radius_m", {"satellite circle radius", scene_field(&SceneSpec::satellite_radius_m)}},
      {"synth.satellite_phase_deg", {"bearing of the first satellite", scene_field(&SceneSpec::satellite_phase_deg)}},
      {"synth.satellite_size_m", {"satellite side length", scene_field(&SceneSpec::satellite_size_m)}},
      {"synth.trenches", {"draw trenches", scene_field(&SceneSpec::trenches)}},
      {"synth.trench_width_m", {"trench width", scene_field(&SceneSpec::trench_width_m)}},
      {"synth.trench_amplitude_m", {"trench undulation amplitude", scene_field(&SceneSpec::trench_amplitude_m)}},
      {"synth.trench_wavelength_m", {"trench undulation wavelength", scene_field(&SceneSpec::trench_wavelength_m)}},
      {"synth.flag", {"draw the flag motif", scene_field(&SceneSpec::flag)}},
      {"frac.nu", {"fractional order, 0 < nu <= 2", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                     c.frac.nu = parse_double(k, v);
                   }}},
      {"frac.window", {"GL truncation length K", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                         c.frac.window = static_cast<int>(parse_long(k, v));
                       }}},
      {"frac.directions", {"two|four", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                             c.frac.directions = parse_directions(k, v);
                           }}},
      {"frac.boundary", {"reflect|replicate|zero", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                           c.frac.boundary = parse_boundary(k, v);
                         }}},
      {"frac.dc_compensate", {"append the zero-sum tap", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                                c.frac.dc_compensate = parse_bool(k, v);
                              }}},
      {"stretch.lo", {"lower stretch percentile", number_field(&PipelineConfig::stretch_lo)}},
      {"stretch.hi", {"upper stretch percentile", number_field(&PipelineConfig::stretch_hi)}},
      {"sobel.boundary", {"reflect|replicate|zero", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                            c.sobel_boundary = parse_boundary(k, v);
                          }}},
      {"blend.mode", {"max|mean|screen|multiply", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                        c.blend.kind = parse_blend(k, v);
                      }}},
      {"blend.opacity", {"opacity of the edge layer", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                           c.blend.opacity = parse_double(k, v);
                         }}},
      {"threshold.method", {"otsu|fixed", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                              if (v == "otsu") {
                                c.threshold.kind = ThresholdMethod::Kind::otsu;
                              } else if (v == "fixed") {
                                c.threshold.kind = ThresholdMethod::Kind::fixed;
                              } else {
                                throw ValidationError(k + ": expected otsu|fixed, got '" + v + "'");
                              }
                            }}},
      {"threshold.level", {"fixed threshold level in [0,1]", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                             c.threshold.level = parse_double(k, v);
                           }}},
      {"morph.close_radius", {"closing radius in px (0 skips)", number_field(&PipelineConfig::close_radius)}},
      {"morph.fill_holes", {"fill enclosed background", [](PipelineConfig& c, const std::string& k, const std::string& v) {
                              c.fill_holes = parse_bool(k, v);
                            }}},
      {"morph.open_radius", {"opening radius in px (0 skips)", number_field(&PipelineConfig::open_radius)}},
      {"outline.min_area", {"smallest traced component in px", number_field(&PipelineConfig::min_area)}},
      {"exec.workers", {"convolution worker threads (0 = all cores)", number_field(&PipelineConfig::workers)}},
      {"output.source", {"gray source raster", path_field(&PipelineConfig::out_source)}},
      {"output.enhanced", {"fractional-gradient layer", path_field(&PipelineConfig::out_enhanced)}},
      {"output.edges", {"Sobel layer", path_field(&PipelineConfig::out_edges)}},
      {"output.merged", {"merged layers", path_field(&PipelineConfig::out_merged)}},
      {"output.mask", {"cleaned binary mask", path_field(&PipelineConfig::out_mask)}},
      {"output.geojson", {"site outlines", path_field(&PipelineConfig::out_geojson)}},
  };
  return keys;
}

inline constexpr const char* kInputKeys[] = {"input.file", "input.endpoint", "input.synth"};

/// Builds a config from ordered key=value pairs. Later pairs override earlier
/// ones only through `overrides`; duplicates within `pairs` are rejected.
inline PipelineConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                                        const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  std::map<std::string, std::string> merged;
  std::vector<std::string> order;
  for (const auto& [k, v] : pairs) {
    if (merged.count(k)) throw ValidationError("duplicate config key '" + k + "'");
    merged[k] = v;
    order.push_back(k);
  }
  for (const auto& [k, v] : overrides) {
    if (!merged.count(k)) order.push_back(k);
    merged[k] = v;
  }
  const auto& keys = config_keys();
  PipelineConfig cfg;
  std::vector<std::string> sources;
  for (const auto& k : order) {
    auto it = keys.find(k);
    if (it == keys.end()) throw ValidationError("unknown config key '" + k + "'");
    it->second.set(cfg, k, merged[k]);
    cfg.entries.emplace_back(k, merged[k]);
    for (const char* src : kInputKeys)
      if (k == src) sources.push_back(k);
  }
  if (sources.size() > 1) {
    std::string list;
    for (const auto& s : sources) list += (list.empty() ? "" : ", ") + s;
    throw ValidationError("exactly one input source allowed, got " + list);
  }
  if (sources.empty()) throw ValidationError("no input source: set one of input.file, input.endpoint, input.synth");
  cfg.input = sources[0] == "input.file" ? InputKind::file
              : sources[0] == "input.endpoint" ? InputKind::endpoint
                                               : InputKind::synth;
  cfg.validate();
  return cfg;
}

/// Parses flat `section.key = value` lines; '#' starts a comment line.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(key, detail::trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return parse_config_text(std::string(bytes.begin(), bytes.end()));
}

inline void PipelineConfig::validate() const {
  frac.validate();
  blend.validate();
  if (!(stretch_lo >= 0.0 && stretch_lo < stretch_hi && stretch_hi <= 100.0)) {
    throw ValidationError("stretch.lo/stretch.hi must satisfy 0 <= lo < hi <= 100");
  }
  if (threshold.kind == ThresholdMethod::Kind::fixed && !(threshold.level >= 0.0 && threshold.level <= 1.0)) {
    throw ValidationError("threshold.level must lie in [0,1]");
  }
  if (close_radius < 0 || open_radius < 0) throw ValidationError("morphology radii must be >= 0");
  if (min_area < 0) throw ValidationError("outline.min_area must be >= 0");
  if (max_concurrent < 1) throw ValidationError("input.max_concurrent must be >= 1");
  switch (input) {
    case InputKind::file:
      if (!input_center) throw ValidationError("input.file needs input.lat and input.lon");
      if (!input_zoom) throw ValidationError("input.file needs input.zoom");
      check_latitude(input_center->lat);
      break;
    case InputKind::endpoint:
      if (!bbox) throw ValidationError("input.endpoint needs input.bbox");
      if (!input_zoom || *input_zoom != std::floor(*input_zoom) || *input_zoom < 0 || *input_zoom > kMaxZoom) {
        throw ValidationError("input.endpoint needs an integer input.zoom in 0..22");
      }
      break;
    case InputKind::synth:
      scene.validate();
      break;
    case InputKind::none:
      throw ValidationError("no input source configured");
  }
}

// ---------------------------------------------------------------------------
// Running

enum class ErrorCategory { validation, io, network, other };

inline ErrorCategory categorize(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return ErrorCategory::validation;
  if (dynamic_cast<const NetworkError*>(&e)) return ErrorCategory::network;
  if (dynamic_cast<const IoError*>(&e)) return ErrorCategory::io;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return ErrorCategory::io;
  return ErrorCategory::other;
}

/// A stage failed; carries the stage name and the category of the cause.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, ErrorCategory category, const std::string& cause)
      : Error("stage " + stage + ": " + cause), stage_(std::move(stage)), category_(category) {}
  const std::string& stage() const noexcept { return stage_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string stage_;
  ErrorCategory category_;
};

struct Manifest {
  std::vector<std::string> stages;
  std::vector<std::pair<std::string, std::filesystem::path>> artifacts;
  int width = 0;
  int height = 0;
  double threshold = 0.0;
  int components = 0;  ///< labelled components after cleanup
  std::vector<SitePolygon> sites;  ///< traced components >= min_area, measured

  std::string to_string() const {
    std::ostringstream os;
    char buf[128];
    for (const auto& s : stages) os << "stage=" << s << "\n";
    os << "width=" << width << "\n";
    os << "height=" << height << "\n";
    std::snprintf(buf, sizeof buf, "%.6f", threshold);
    os << "threshold=" << buf << "\n";
    for (const auto& [name, path] : artifacts) os << "artifact." << name << "=" << path.string() << "\n";
    os << "components=" << components << "\n";
    os << "sites=" << sites.size() << "\n";
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const auto& s = sites[i];
      const std::string p = "site." + std::to_string(i + 1) + ".";
      os << p << "label=" << s.label << "\n";
      std::snprintf(buf, sizeof buf, "%.7f", s.centroid.lat);
      os << p << "centroid_lat=" << buf << "\n";
      std::snprintf(buf, sizeof buf, "%.7f", s.centroid.lon);
      os << p << "centroid_lon=" << buf << "\n";
      std::snprintf(buf, sizeof buf, "%.2f", s.centroid_px.x);
      os << p << "centroid_x=" << buf << "\n";
      std::snprintf(buf, sizeof buf, "%.2f", s.centroid_px.y);
      os << p << "centroid_y=" << buf << "\n";
      std::snprintf(buf, sizeof buf, "%.1f", s.area_m2);
      os << p << "area_m2=" << buf << "\n";
      std::snprintf(buf, sizeof buf, "%.1f", s.perimeter_m);
      os << p << "perimeter_m=" << buf << "\n";
      std::snprintf(buf, sizeof buf, "%.1f", s.extent_m);
      os << p << "extent_m=" << buf << "\n";
      std::snprintf(buf, sizeof buf, "%.1f", s.width_m);
      os << p << "width_m=" << buf << "\n";
    }
    return os.str();
  }
};

/// Intermediate rasters of one run, for callers that want them in memory.
struct PipelineProducts {
  Raster gray;
  GeoRef georef;
  Raster enhanced;
  Raster edges;
  Raster merged;
  BitMask mask;
  LabelMap labels;
};

namespace detail {


inline Raster mask_as_raster(const BitMask& m) {
  Raster r(m.width(), m.height());
  auto src = m.pixels();
  auto dst = r.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 1.0 : 0.0;
  return r;
}

}  // namespace detail

/// Runs every stage; on failure removes the artifacts written so far and
/// throws PipelineError naming the stage.
inline Manifest run_pipeline(const PipelineConfig& cfg, PipelineProducts* products = nullptr) {
  cfg.validate();
  Manifest m;
  std::vector<std::filesystem::path> written;
  std::string stage;
  const Exec exec{cfg.workers};

  auto emit = [&](const char* name, const std::filesystem::path& path, const Raster& r) {
    if (path.empty()) return;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    written.push_back(path);
    write_image(r, path);
    m.artifacts.emplace_back(name, path);
  };

  try {
    stage = "acquire";
    Raster gray;
    GeoRef georef;
    std::optional<DecodedImage> decoded;
    switch (cfg.input) {
      case InputKind::synth: {
        SyntheticScene scene = render(cfg.scene, cfg.seed);
        gray = std::move(scene.image);
        georef = scene.georef;
        break;
      }
      case InputKind::file:
        decoded = decode_image(detail::read_file_bytes(cfg.input_file));
        break;
      case InputKind::endpoint: {
        TileSource src{cfg.endpoint, cfg.cache_dir.empty() ? default_cache_root() : cfg.cache_dir,
                       cfg.max_concurrent, {}, {}};
        auto region = fetch_region(src, *cfg.bbox, static_cast<int>(*cfg.input_zoom));
        gray = std::move(region.raster);
        georef = region.georef;
        break;
      }
      case InputKind::none:
        break;
    }
    m.stages.push_back(stage);

    stage = "gray";
    if (decoded) {
      gray = to_raster(*decoded);
      georef = GeoRef::centred_at(*cfg.input_center, *cfg.input_zoom, gray.width(), gray.height());
    }
    m.width = gray.width();
    m.height = gray.height();
    emit("source", cfg.out_source, gray);
    m.stages.push_back(stage);

    stage = "enhance";
    auto enhanced_future = std::async(std::launch::async, [&] {
      return enhance(gray, cfg.frac, cfg.stretch_lo, cfg.stretch_hi, exec);
    });
    Raster edges;
    std::exception_ptr edges_error;
    try {
      edges = stretch(sobel_magnitude(gray, cfg.sobel_boundary, exec), cfg.stretch_lo, cfg.stretch_hi);
    } catch (...) {
      edges_error = std::current_exception();
    }
    Raster enhanced = enhanced_future.get();
    m.stages.push_back(stage);
    stage = "edges";
    if (edges_error) std::rethrow_exception(edges_error);
    m.stages.push_back(stage);
    emit("enhanced", cfg.out_enhanced, enhanced);
    emit("edges", cfg.out_edges, edges);

    stage = "merge";
    Raster merged = merge_layers(enhanced, edges, cfg.blend);
    emit("merged", cfg.out_merged, merged);
    m.stages.push_back(stage);

    stage = "binarize";
    m.threshold = cfg.threshold.kind == ThresholdMethod::Kind::otsu ? otsu_level(merged) : cfg.threshold.level;
    BitMask mask = binarize(merged, cfg.threshold);
    m.stages.push_back(stage);

    stage = "morph";
    if (cfg.close_radius > 0) mask = morph(mask, MorphOp::close, cfg.close_radius);
    if (cfg.fill_holes) mask = siteline::fill_holes(mask);
    if (cfg.open_radius > 0) mask = morph(mask, MorphOp::open, cfg.open_radius);
    emit("mask", cfg.out_mask, detail::mask_as_raster(mask));
    m.stages.push_back(stage);

    stage = "components";
    LabelMap labels = connected_components(mask);
    m.components = labels.count();
    m.stages.push_back(stage);

    stage = "trace";
    auto polys = trace_contours(labels, cfg.min_area);
    m.stages.push_back(stage);

    stage = "measure";
    m.sites = measure_polygons(std::move(polys), georef);
    m.stages.push_back(stage);

    stage = "export";
    if (!cfg.out_geojson.empty()) {
      if (cfg.out_geojson.has_parent_path()) std::filesystem::create_directories(cfg.out_geojson.parent_path());
      written.push_back(cfg.out_geojson);
      export_geojson(m.sites, cfg.out_geojson);
      m.artifacts.emplace_back("geojson", cfg.out_geojson);
    }
    m.stages.push_back(stage);

    if (products) {
      *products = PipelineProducts{std::move(gray), georef, std::move(enhanced), std::move(edges),
                                   std::move(merged), std::move(mask), std::move(labels)};
    }
  } catch (const std::exception& e) {
    for (const auto& p : written) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    throw PipelineError(stage, categorize(e), e.what());
  }
  return m;
}

}  // namespace siteline
