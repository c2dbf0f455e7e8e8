#pragma once

// XYZ tile client with an on-disk cache.
//
// The cache stores the raw response bytes of successful fetches under
//   <cache_dir>/<endpoint-hash>/<z>/<x>/<y>.bin
// Writes go to a temporary file that is renamed into place, and only bytes that
// decoded as an image are ever stored.

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "siteline/errors.hpp"
#include "siteline/geo.hpp"
#include "siteline/image_io.hpp"
#include "siteline/raster.hpp"

namespace siteline {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Performs one GET. Connection-level failures are reported by throwing
/// NetworkError; any HTTP answer, including errors, is returned.
using Transport = std::function<HttpResponse(const std::string& url)>;

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds backoff{200};  ///< doubled after every failed attempt
};

struct TileSource {
  std::string endpoint;  ///< URL template with {z}, {x}, {y}
  std::filesystem::path cache_dir;
  int max_concurrent = 4;
  RetryPolicy retry;
  Transport transport;  ///< empty means http_transport()
};

/// South-west / north-east corners in degrees.
struct LatLonBox {
  double south = 0.0;
  double west = 0.0;
  double north = 0.0;
  double east = 0.0;
};

/// Aggregated failure of a region fetch.
class RegionFetchError : public NetworkError {
 public:
  RegionFetchError(std::vector<TileCoord> failed, const std::string& what)
      : NetworkError(what), failed_(std::move(failed)) {}
  const std::vector<TileCoord>& failed() const noexcept { return failed_; }

 private:
  std::vector<TileCoord> failed_;
};

inline constexpr const char* kCacheEnvVar = "SITELINE_CACHE_DIR";

/// $SITELINE_CACHE_DIR, else $HOME/.cache/siteline, else ./.siteline-cache.
inline std::filesystem::path default_cache_root() {
  if (const char* env = std::getenv(kCacheEnvVar); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) {
    return std::filesystem::path(home) / ".cache" / "siteline";
  }
  return ".siteline-cache";
}

/// FNV-1a 64-bit of the endpoint template, as 16 hex digits.
inline std::string endpoint_hash(const std::string& endpoint) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : endpoint) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string fill_template(const std::string& endpoint, const TileCoord& t) {
  std::string url = endpoint;
  auto replace = [&url](const std::string& key, const std::string& value) {
    for (std::size_t pos = url.find(key); pos != std::string::npos; pos = url.find(key, pos + value.size())) {
      url.replace(pos, key.size(), value);
    }
  };
  replace("{z}", std::to_string(t.z));
  replace("{x}", std::to_string(t.x));
  replace("{y}", std::to_string(t.y));
  return url;
}

inline std::filesystem::path cache_path(const TileSource& src, const TileCoord& t) {
  return src.cache_dir / endpoint_hash(src.endpoint) / std::to_string(t.z) / std::to_string(t.x) /
         (std::to_string(t.y) + ".bin");
}

/// Transport backed by cpp-httplib. Accepts http:// and https:// URLs.
inline Transport http_transport(std::chrono::seconds timeout = std::chrono::seconds(20)) {
  return [timeout](const std::string& url) -> HttpResponse {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw NetworkError("malformed tile URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_follow_location(true);
    client.set_default_headers({{"User-Agent", "siteline/1.0"}});
    auto res = client.Get(path);
    if (!res) {
      throw NetworkError("GET " + url + " failed: " + httplib::to_string(res.error()));
    }
    return {res->status, res->body};
  };
}

namespace detail {

inline std::optional<std::vector<std::uint8_t>> read_cached(const std::filesystem::path& p) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec)) return std::nullopt;
  return read_file_bytes(p);
}

inline void store_atomically(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
  std::filesystem::create_directories(p.parent_path());
  static std::atomic<unsigned> counter{0};
  std::filesystem::path tmp = p;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
         std::to_string(counter.fetch_add(1));
  write_file_bytes(tmp, bytes);
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move tile into cache: " + p.string());
  }
}

}  // namespace detail

/// Cache hit: decode the stored bytes without touching the transport.
/// Miss: GET the filled template (retrying connection failures and 5xx),
/// decode, and only then store the raw bytes.
inline Raster fetch_tile(const TileSource& src, const TileCoord& t) {
  t.validate();
  const auto path = cache_path(src, t);
  if (auto cached = detail::read_cached(path)) {
    try {
      return decode_raster(*cached);
    } catch (const IoError&) {
      std::error_code ec;
      std::filesystem::remove(path, ec);  // unreadable entry, refetch
    }
  }
  const Transport transport = src.transport ? src.transport : http_transport();
  const std::string url = fill_template(src.endpoint, t);
  auto delay = src.retry.backoff;
  const int attempts = std::max(1, src.retry.attempts);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    HttpResponse res;
    try {
      res = transport(url);
    } catch (const NetworkError& e) {
      last_error = e.what();
      if (attempt < attempts) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
      continue;
    }
    if (res.status == 404) throw TileMissingError("tile " + t.to_string() + " not found (404) at " + url);
    if (res.status >= 500 && res.status < 600) {
      last_error = "HTTP " + std::to_string(res.status);
      if (attempt < attempts) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
      continue;
    }
    if (res.status != 200) {
      throw HttpStatusError(res.status, "tile " + t.to_string() + ": HTTP " + std::to_string(res.status));
    }
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(res.body.data()),
                                              res.body.size());
    Raster tile;
    try {
      tile = decode_raster(bytes);
    } catch (const IoError& e) {
      throw BadPayloadError("tile " + t.to_string() + ": response is not an image (" + e.what() + ")");
    }
    detail::store_atomically(path, bytes);
    return tile;
  }
  throw NetworkError("tile " + t.to_string() + ": giving up after " + std::to_string(attempts) +
                     " attempts: " + last_error);
}

/// Tile indices covering a global-pixel window [x0,x1) x [y0,y1).
inline TileRange covering_tiles(int zoom, long x0, long y0, long x1, long y1) {
  return {zoom, static_cast<int>(x0 / kTileSize), static_cast<int>(y0 / kTileSize),
          static_cast<int>((x1 - 1) / kTileSize), static_cast<int>((y1 - 1) / kTileSize)};
}

/// Fetches the tiles covering `box` (at most max_concurrent in flight),
/// stitches them and crops to the box's pixel window.
inline StitchResult fetch_region(const TileSource& src, const LatLonBox& box, int zoom) {
  if (zoom < 0 || zoom > kMaxZoom) throw ValidationError("zoom outside 0..22");
  if (!(box.north > box.south) || !(box.east > box.west)) {
    throw ValidationError("region bbox is empty (need south < north and west < east)");
  }
  const PixelPoint nw = latlon_to_global_pixel(box.north, box.west, zoom);
  const PixelPoint se = latlon_to_global_pixel(box.south, box.east, zoom);
  // Snap values within 1e-6 px of an integer so tile-aligned boxes stay aligned.
  auto snap = [](double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-6 ? r : v;
  };
  const long x0 = static_cast<long>(std::floor(snap(nw.x)));
  const long y0 = static_cast<long>(std::floor(snap(nw.y)));
  const long x1 = static_cast<long>(std::ceil(snap(se.x)));
  const long y1 = static_cast<long>(std::ceil(snap(se.y)));
  if (x1 <= x0 || y1 <= y0) throw ValidationError("region bbox covers no pixels at zoom " + std::to_string(zoom));

  const TileRange range = covering_tiles(zoom, x0, y0, x1, y1);
  std::vector<TileCoord> coords;
  for (int ty = range.y0; ty <= range.y1; ++ty)
    for (int tx = range.x0; tx <= range.x1; ++tx) coords.push_back({zoom, tx, ty});

  std::map<TileCoord, Raster> tiles;
  std::vector<TileCoord> failed;
  std::string first_error;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < coords.size(); i = next.fetch_add(1)) {
      try {
        Raster r = fetch_tile(src, coords[i]);
        std::lock_guard lock(mu);
        tiles.emplace(coords[i], std::move(r));
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        failed.push_back(coords[i]);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  const int n_workers = std::clamp<int>(src.max_concurrent, 1, static_cast<int>(coords.size()));
  {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }
  if (!failed.empty()) {
    std::sort(failed.begin(), failed.end());
    std::string list;
    for (const auto& t : failed) list += (list.empty() ? "" : ", ") + t.to_string();
    throw RegionFetchError(failed, "failed to fetch " + std::to_string(failed.size()) + " tile(s): " +
                                       list + " (first error: " + first_error + ")");
  }

  StitchResult mosaic = stitch(tiles, range);
  const int cx = static_cast<int>(x0 - static_cast<long>(range.x0) * kTileSize);
  const int cy = static_cast<int>(y0 - static_cast<long>(range.y0) * kTileSize);
  const int w = static_cast<int>(x1 - x0);
  const int h = static_cast<int>(y1 - y0);
  return {crop(mosaic.raster, cx, cy, w, h), mosaic.georef.cropped(cx, cy, w, h)};
}

}  // namespace siteline
