// siteline command-line front end.
//
// Exit codes: 0 success, 1 validation, 2 I/O, 3 network.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "siteline/siteline.hpp"

namespace {

using namespace siteline;

enum Exit { kOk = 0, kValidation = 1, kIo = 2, kNetwork = 3 };

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::validation: return kValidation;
    case ErrorCategory::network: return kNetwork;
    case ErrorCategory::io:
    case ErrorCategory::other: return kIo;
  }
  return kIo;
}

PixelPoint parse_point(const std::string& flag, const std::string& text) {
  const auto v = detail::parse_list(flag, text, 2);
  return {v[0], v[1]};
}

/// Config key to flag name: frac.nu -> frac-nu, input.max_concurrent -> input-max-concurrent.
std::string flag_for_key(std::string key) {
  for (char& c : key)
    if (c == '.' || c == '_') c = '-';
  return key;
}

struct FracOpts {
  double nu = FracParams{}.nu;
  int window = FracParams{}.window;
  std::string directions = "two";
  std::string boundary = "reflect";
  bool no_dc = false;

  FracParams get() const {
    FracParams p;
    p.nu = nu;
    p.window = window;
    p.directions = detail::parse_directions("--directions", directions);
    p.boundary = detail::parse_boundary("--boundary", boundary);
    p.dc_compensate = !no_dc;
    p.validate();
    return p;
  }
};

void print_georef(const GeoRef& g) {
  const LatLon centre = g.to_latlon({g.width / 2.0, g.height / 2.0});
  std::printf("width=%d\nheight=%d\nzoom=%.9f\ncentre_lat=%.7f\ncentre_lon=%.7f\nresolution_m=%.6f\n", g.width,
              g.height, g.zoom, centre.lat, centre.lon, g.resolution_at(g.height / 2.0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outline earthwork sites in aerial imagery with fractional-gradient and Sobel edge layers."};
  app.require_subcommand(1);
  unsigned workers = 1;
  app.add_option("--workers", workers, "convolution worker threads (0 = all cores)");

  // enhance
  auto* enhance_cmd = app.add_subcommand("enhance", "fractional-gradient enhancement of a raster");
  std::string enh_in, enh_out;
  FracOpts frac;
  double lo = 1.0, hi = 99.0;
  enhance_cmd->add_option("--in", enh_in, "input PNG/PGM")->required();
  enhance_cmd->add_option("--out", enh_out, "output PNG/PGM")->required();
  enhance_cmd->add_option("--nu", frac.nu, "fractional order, 0 < nu <= 2");
  enhance_cmd->add_option("--window", frac.window, "GL truncation length");
  enhance_cmd->add_option("--directions", frac.directions, "two|four");
  enhance_cmd->add_option("--boundary", frac.boundary, "reflect|replicate|zero");
  enhance_cmd->add_flag("--no-dc-compensate", frac.no_dc, "keep the truncated kernel as is");
  enhance_cmd->add_option("--lo", lo, "lower stretch percentile");
  enhance_cmd->add_option("--hi", hi, "upper stretch percentile");

  // edges
  auto* edges_cmd = app.add_subcommand("edges", "stretched Sobel gradient magnitude");
  std::string edges_in, edges_out, edges_boundary = "reflect";
  edges_cmd->add_option("--in", edges_in, "input PNG/PGM")->required();
  edges_cmd->add_option("--out", edges_out, "output PNG/PGM")->required();
  edges_cmd->add_option("--boundary", edges_boundary, "reflect|replicate|zero");
  edges_cmd->add_option("--lo", lo, "lower stretch percentile");
  edges_cmd->add_option("--hi", hi, "upper stretch percentile");

  // merge
  auto* merge_cmd = app.add_subcommand("merge", "blend two layers");
  std::string merge_a, merge_b, merge_out, merge_mode = "max";
  double opacity = 1.0;
  merge_cmd->add_option("--a", merge_a, "base layer")->required();
  merge_cmd->add_option("--b", merge_b, "second layer")->required();
  merge_cmd->add_option("--out", merge_out, "output PNG/PGM")->required();
  merge_cmd->add_option("--mode", merge_mode, "max|mean|screen|multiply");
  merge_cmd->add_option("--opacity", opacity, "opacity of the second layer");

  // stitch
  auto* stitch_cmd = app.add_subcommand("stitch", "assemble a mosaic from XYZ tiles");
  std::string st_endpoint, st_tile_dir, st_bbox, st_out, st_cache;
  int st_zoom = 0, st_x0 = 0, st_y0 = 0, st_x1 = 0, st_y1 = 0, st_conc = 4;
  auto* ep_opt = stitch_cmd->add_option("--endpoint", st_endpoint, "URL template with {z}/{x}/{y}");
  auto* dir_opt = stitch_cmd->add_option("--tile-dir", st_tile_dir, "directory laid out as <z>/<x>/<y>.png");
  ep_opt->excludes(dir_opt);
  stitch_cmd->add_option("--bbox", st_bbox, "endpoint mode: south,west,north,east");
  stitch_cmd->add_option("--zoom", st_zoom, "integer zoom")->required();
  stitch_cmd->add_option("--x0", st_x0, "tile-dir mode: first tile column");
  stitch_cmd->add_option("--y0", st_y0, "tile-dir mode: first tile row");
  stitch_cmd->add_option("--x1", st_x1, "tile-dir mode: last tile column (inclusive)");
  stitch_cmd->add_option("--y1", st_y1, "tile-dir mode: last tile row (inclusive)");
  stitch_cmd->add_option("--cache-dir", st_cache, "tile cache root");
  stitch_cmd->add_option("--max-concurrent", st_conc, "tile fetches in flight");
  stitch_cmd->add_option("--out", st_out, "output PNG/PGM")->required();

  // measure
  auto* measure_cmd = app.add_subcommand("measure", "ground distance between two pixels");
  std::string m_a, m_b;
  double m_zoom = 0.0, m_lat = 0.0;
  measure_cmd->add_option("--a", m_a, "first point x,y")->required();
  measure_cmd->add_option("--b", m_b, "second point x,y")->required();
  measure_cmd->add_option("--zoom", m_zoom, "zoom level")->required();
  measure_cmd->add_option("--lat", m_lat, "latitude of the measured segment")->required();

  // vectorize
  auto* vec_cmd = app.add_subcommand("vectorize", "outline sites in an edge raster and export GeoJSON");
  std::string v_in, v_out, v_mask;
  double v_lat = 0.0, v_lon = 0.0, v_zoom = 0.0;
  std::string v_threshold = "0.95";
  int v_close = 2, v_open = 10;
  long v_min_area = 50;
  bool v_no_fill = false;
  vec_cmd->add_option("--in", v_in, "merged edge raster")->required();
  vec_cmd->add_option("--out", v_out, "GeoJSON output")->required();
  vec_cmd->add_option("--mask", v_mask, "also write the cleaned mask");
  vec_cmd->add_option("--lat", v_lat, "latitude of the raster centre")->required();
  vec_cmd->add_option("--lon", v_lon, "longitude of the raster centre")->required();
  vec_cmd->add_option("--zoom", v_zoom, "zoom level (may be fractional)")->required();
  vec_cmd->add_option("--threshold", v_threshold, "level in [0,1] or 'otsu'");
  vec_cmd->add_option("--close-radius", v_close, "closing radius in px (0 skips)");
  vec_cmd->add_option("--open-radius", v_open, "opening radius in px (0 skips)");
  vec_cmd->add_flag("--no-fill-holes", v_no_fill, "keep enclosed background");
  vec_cmd->add_option("--min-area", v_min_area, "smallest traced component in px");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "render the default synthetic fortress scene");
  std::uint64_t seed = 1;
  std::string synth_out;
  synth_cmd->add_option("--seed", seed, "noise seed");
  synth_cmd->add_option("--out", synth_out, "output PNG/PGM")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "execute the full pipeline from a config file");
  std::string config_path;
  run_cmd->add_option("--config", config_path, "key=value config file");
  std::map<std::string, std::string> overrides;
  for (const auto& [key, spec] : config_keys()) {
    run_cmd->add_option("--" + flag_for_key(key), overrides[key], spec.help + " (overrides " + key + ")");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  const Exec exec{workers};
  try {
    if (*enhance_cmd) {
      write_image(enhance(read_raster(enh_in), frac.get(), lo, hi, exec), enh_out);
    } else if (*edges_cmd) {
      const Boundary b = detail::parse_boundary("--boundary", edges_boundary);
      write_image(stretch(sobel_magnitude(read_raster(edges_in), b, exec), lo, hi), edges_out);
    } else if (*merge_cmd) {
      BlendMode mode{detail::parse_blend("--mode", merge_mode), opacity};
      mode.validate();
      write_image(merge_layers(read_raster(merge_a), read_raster(merge_b), mode), merge_out);
    } else if (*stitch_cmd) {
      StitchResult result;
      if (!st_endpoint.empty()) {
        if (st_bbox.empty()) throw ValidationError("--endpoint needs --bbox");
        const auto b = detail::parse_list("--bbox", st_bbox, 4);
        TileSource src{st_endpoint, st_cache.empty() ? default_cache_root() : std::filesystem::path(st_cache),
                       st_conc, {}, {}};
        result = fetch_region(src, {b[0], b[1], b[2], b[3]}, st_zoom);
      } else if (!st_tile_dir.empty()) {
        const TileRange range{st_zoom, st_x0, st_y0, st_x1, st_y1};
        range.validate();
        std::map<TileCoord, Raster> tiles;
        for (int y = range.y0; y <= range.y1; ++y) {
          for (int x = range.x0; x <= range.x1; ++x) {
            const auto p = std::filesystem::path(st_tile_dir) / std::to_string(st_zoom) / std::to_string(x) /
                           (std::to_string(y) + ".png");
            tiles.emplace(TileCoord{st_zoom, x, y}, read_raster(p));
          }
        }
        result = stitch(tiles, range);
      } else {
        throw ValidationError("stitch needs --endpoint or --tile-dir");
      }
      write_image(result.raster, st_out);
      print_georef(result.georef);
    } else if (*measure_cmd) {
      const PixelPoint a = parse_point("--a", m_a);
      const PixelPoint b = parse_point("--b", m_b);
      const double px = std::hypot(a.x - b.x, a.y - b.y);
      const double res = ground_resolution(m_lat, m_zoom);
      std::printf("pixels=%.3f\nresolution_m=%.6f\ndistance_m=%.3f\n", px, res, px * res);
    } else if (*vec_cmd) {
      const Raster r = read_raster(v_in);
      const ThresholdMethod method = v_threshold == "otsu"
                                         ? ThresholdMethod::otsu()
                                         : ThresholdMethod::fixed(detail::parse_double("--threshold", v_threshold));
      if (method.kind == ThresholdMethod::Kind::fixed && !(method.level >= 0.0 && method.level <= 1.0)) {
        throw ValidationError("--threshold must lie in [0,1]");
      }
      if (v_close < 0 || v_open < 0 || v_min_area < 0) throw ValidationError("radii and --min-area must be >= 0");
      BitMask mask = binarize(r, method);
      if (v_close > 0) mask = morph(mask, MorphOp::close, v_close);
      if (!v_no_fill) mask = fill_holes(mask);
      if (v_open > 0) mask = morph(mask, MorphOp::open, v_open);
      if (!v_mask.empty()) write_image(detail::mask_as_raster(mask), v_mask);
      const GeoRef g = GeoRef::centred_at({v_lat, v_lon}, v_zoom, r.width(), r.height());
      const auto sites = measure_polygons(trace_contours(connected_components(mask), v_min_area), g);
      export_geojson(sites, v_out);
      std::printf("sites=%zu\n", sites.size());
    } else if (*synth_cmd) {
      const SyntheticScene scene = render(default_spec(), seed);
      write_image(scene.image, synth_out);
      print_georef(scene.georef);
    } else if (*run_cmd) {
      std::vector<std::pair<std::string, std::string>> pairs;
      if (!config_path.empty()) pairs = read_config_file(config_path);
      std::vector<std::pair<std::string, std::string>> flags;
      for (const auto& [key, value] : overrides) {
        if (run_cmd->count("--" + flag_for_key(key)) > 0) flags.emplace_back(key, value);
      }
      const PipelineConfig cfg = config_from_pairs(pairs, flags);
      std::cout << run_pipeline(cfg).to_string();
    }
  } catch (const PipelineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(categorize(e));
  }
  return kOk;
}
