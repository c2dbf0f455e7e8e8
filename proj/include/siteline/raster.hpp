#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "siteline/errors.hpp"

namespace siteline {

/// Dense row-major 2-D grid. Shared carrier for intensities, masks and labels.
///
/// A default-constructed image is empty (0x0); every other constructor requires
/// both extents to be at least one pixel. Floating-point images reject
/// non-finite samples on construction.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;

  Image(int width, int height, T fill = T{}) : width_(width), height_(height) {
    check_extents(width, height);
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    check_finite();
  }

  Image(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_extents(width, height);
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw ValidationError("image data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    check_finite();
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

  T& at(int x, int y) {
    check_bounds(x, y);
    return data_[index(x, y)];
  }
  const T& at(int x, int y) const {
    check_bounds(x, y);
    return data_[index(x, y)];
  }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<T> row(int y) noexcept {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }
  std::span<const T> row(int y) const noexcept {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }

  // A span over a temporary would dangle, so rvalues get no span.
  std::span<T> pixels() & noexcept { return data_; }
  std::span<const T> pixels() const& noexcept { return data_; }
  std::span<const T> pixels() && = delete;
  const std::vector<T>& data() const& noexcept { return data_; }
  std::vector<T> data() && noexcept { return std::move(data_); }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  static void check_extents(int width, int height) {
    if (width < 1 || height < 1) {
      throw ValidationError("image extents must be >= 1, got " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
  }

  void check_bounds(int x, int y) const {
    if (!contains(x, y)) {
      throw ValidationError("pixel (" + std::to_string(x) + "," + std::to_string(y) +
                            ") outside " + std::to_string(width_) + "x" +
                            std::to_string(height_) + " image");
    }
  }

  void check_finite() const {
    if constexpr (std::is_floating_point_v<T>) {
      for (T v : data_) {
        if (!std::isfinite(v)) throw ValidationError("image contains a non-finite sample");
      }
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Real-valued intensity raster, nominally in [0,1] after load.
using Raster = Image<double>;

/// 8-bit sRGB-ish source imagery, three interleaved channels per pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h, std::vector<std::uint8_t> bytes)
      : width(w), height(h), data(std::move(bytes)) {
    if (w < 1 || h < 1) throw ValidationError("RGB image extents must be >= 1");
    if (data.size() != 3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
      throw ValidationError("RGB data length does not match 3*width*height");
    }
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Rec.709 luma weights.
inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;

inline Raster to_gray(const RgbImage& img) {
  Raster out(img.width, img.height);
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double r = img.data[3 * i] / 255.0;
    const double g = img.data[3 * i + 1] / 255.0;
    const double b = img.data[3 * i + 2] / 255.0;
    px[i] = kLumaR * r + kLumaG * g + kLumaB * b;
  }
  return out;
}

/// Percentile with linear interpolation between order statistics
/// (rank = pct/100 * (n-1)).
inline double percentile(std::span<const double> values, double pct) {
  if (values.empty()) throw ValidationError("percentile of an empty sample");
  if (!(pct >= 0.0 && pct <= 100.0)) throw ValidationError("percentile must lie in [0,100]");
  std::vector<double> v(values.begin(), values.end());
  const double rank = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double lo_v = v[lo];
  if (frac == 0.0 || lo + 1 >= v.size()) return lo_v;
  const double hi_v = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return lo_v + frac * (hi_v - lo_v);
}

/// Linear contrast stretch: the lo_pct percentile maps to 0, hi_pct to 1,
/// then clamp. A degenerate span (constant input) maps to all zero.
inline Raster stretch(const Raster& r, double lo_pct, double hi_pct) {
  if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 100.0)) {
    throw ValidationError("stretch needs 0 <= lo < hi <= 100");
  }
  const double lo = percentile(r.pixels(), lo_pct);
  const double hi = percentile(r.pixels(), hi_pct);
  Raster out(r.width(), r.height(), 0.0);
  if (!(hi > lo)) return out;
  const double scale = 1.0 / (hi - lo);
  auto src = r.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = std::clamp((src[i] - lo) * scale, 0.0, 1.0);
  }
  return out;
}

template <typename T>
Image<T> crop(const Image<T>& img, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || width < 1 || height < 1 || x0 + width > img.width() ||
      y0 + height > img.height()) {
    throw ValidationError("crop window outside image");
  }
  Image<T> out(width, height);
  for (int y = 0; y < height; ++y) {
    auto src = img.row(y0 + y).subspan(static_cast<std::size_t>(x0), static_cast<std::size_t>(width));
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

/// Quarter turn counterclockwise as displayed: out(y, W-1-x) = in(x, y).
template <typename T>
Image<T> rot90(const Image<T>& img) {
  Image<T> out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out(y, img.width() - 1 - x) = img(x, y);
  return out;
}

/// Left-right mirror.
template <typename T>
Image<T> mirror_x(const Image<T>& img) {
  Image<T> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out(img.width() - 1 - x, y) = img(x, y);
  return out;
}

/// 8-bit quantization, rounding half away from zero.
inline std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

inline Raster quantized(const Raster& r) {
  Raster out(r.width(), r.height());
  auto src = r.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = quantize8(src[i]) / 255.0;
  return out;
}

}  // namespace siteline
