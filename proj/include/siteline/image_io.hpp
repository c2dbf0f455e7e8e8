#pragma once

// PGM (binary P5) and PNG reading/writing.
//
// Decoding is format-sniffed from the leading bytes, never from the file
// extension. 8-bit samples map to [0,1] by v/255 and 16-bit samples by v/65535.
// Writing always quantizes to 8 bits (see quantize8).

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "siteline/errors.hpp"
#include "siteline/raster.hpp"

namespace siteline {

enum class ImageFormat { png, pgm };

/// Decoded samples before conversion: channel count 1 or 3, depth 8 or 16.
struct DecodedImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

namespace detail {

inline bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

inline bool is_pgm(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5';
}

inline DecodedImage decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* field) -> long {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw MalformedImageError(std::string("PGM header: missing ") + field);
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) throw MalformedImageError(std::string("PGM header: ") + field + " too large");
      ++pos;
    }
    return v;
  };
  if (bytes.size() < 3 || !std::isspace(bytes[2])) throw MalformedImageError("PGM header: bad magic");
  const long w = read_uint("width");
  const long h = read_uint("height");
  const long maxval = read_uint("maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw MalformedImageError("PGM header: expected whitespace after maxval");
  }
  ++pos;
  if (w < 1 || h < 1) throw MalformedImageError("PGM header: zero extent");
  if (maxval != 255 && maxval != 65535) {
    throw UnsupportedFormatError("PGM maxval " + std::to_string(maxval) +
                                 " unsupported (need 255 or 65535)");
  }
  DecodedImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.bit_depth = maxval == 255 ? 8 : 16;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t bps = img.bit_depth / 8;
  if (bytes.size() - pos < n * bps) throw MalformedImageError("PGM data truncated");
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.samples[i] = bps == 1 ? bytes[pos + i]
                              : static_cast<std::uint16_t>((bytes[pos + 2 * i] << 8) |
                                                           bytes[pos + 2 * i + 1]);
  }
  return img;
}

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
  char message[256] = {};
};

extern "C" inline void png_read_callback(png_structp png, png_bytep out, png_size_t len) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->bytes.size() - st->offset < len) png_error(png, "PNG data truncated");
  std::memcpy(out, st->bytes.data() + st->offset, len);
  st->offset += len;
}

extern "C" inline void png_error_callback(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngReadState*>(png_get_error_ptr(png));
  std::strncpy(st->message, msg, sizeof(st->message) - 1);
  png_longjmp(png, 1);
}

extern "C" inline void png_warning_callback(png_structp, png_const_charp) {}

// libpng reports errors by longjmp; every object with a destructor is created
// before setjmp so nothing is skipped on the error path.
inline DecodedImage decode_png(std::span<const std::uint8_t> bytes) {
  PngReadState state{bytes};
  DecodedImage img;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_error_callback,
                                           png_warning_callback);
  if (!png) throw IoError("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: cannot allocate info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw MalformedImageError(std::string("PNG: ") + state.message);
  }
  bool unsupported = false;
  png_set_read_fn(png, &state, png_read_callback);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // host little-endian samples
  png_read_update_info(png, info);

  const int out_channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  if ((out_channels != 1 && out_channels != 3) || (out_depth != 8 && out_depth != 16)) {
    unsupported = true;
  } else {
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (unsupported) {
    throw UnsupportedFormatError("PNG layout unsupported (channels " + std::to_string(out_channels) +
                                 ", depth " + std::to_string(out_depth) + ")");
  }

  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.channels = out_channels;
  img.bit_depth = out_depth;
  const std::size_t n = static_cast<std::size_t>(w) * h * static_cast<std::size_t>(out_channels);
  img.samples.resize(n);
  if (out_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) img.samples[i] = buffer[i];
  } else {
    std::memcpy(img.samples.data(), buffer.data(), n * 2);
  }
  return img;
}

struct PngWriteState {
  std::vector<std::uint8_t>* out = nullptr;
  char message[256] = {};
};

extern "C" inline void png_write_callback(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), data, data + len);
}

extern "C" inline void png_flush_callback(png_structp) {}

extern "C" inline void png_write_error_callback(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngWriteState*>(png_get_error_ptr(png));
  std::strncpy(st->message, msg, sizeof(st->message) - 1);
  png_longjmp(png, 1);
}

/// Encodes interleaved 8-bit samples (1 or 3 channels). No time or text
/// chunks are written, so equal pixels always give equal bytes.
inline std::vector<std::uint8_t> encode_png(int width, int height, int channels,
                                            std::span<const std::uint8_t> samples) {
  std::vector<std::uint8_t> out;
  PngWriteState state{&out};
  std::vector<png_const_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        samples.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width) * channels;
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &state,
                                            png_write_error_callback, png_warning_callback);
  if (!png) throw IoError("libpng: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: cannot allocate info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(std::string("PNG encode: ") + state.message);
  }
  png_set_write_fn(png, &state, png_write_callback, png_flush_callback);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw FileNotFoundError("no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

inline DecodedImage decode_image(std::span<const std::uint8_t> bytes) {
  if (detail::is_png(bytes)) return detail::decode_png(bytes);
  if (detail::is_pgm(bytes)) return detail::decode_pgm(bytes);
  throw MalformedImageError("unrecognized image signature (expected PNG or binary PGM)");
}

/// Samples normalized to [0,1]; colour input is reduced to luma.
inline Raster to_raster(const DecodedImage& img) {
  const double full = img.bit_depth == 16 ? 65535.0 : 255.0;
  Raster out(img.width, img.height);
  auto px = out.pixels();
  if (img.channels == 1) {
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = img.samples[i] / full;
  } else {
    for (std::size_t i = 0; i < px.size(); ++i) {
      px[i] = kLumaR * (img.samples[3 * i] / full) + kLumaG * (img.samples[3 * i + 1] / full) +
              kLumaB * (img.samples[3 * i + 2] / full);
    }
  }
  return out;
}

/// 8-bit RGB view; gray input is replicated, 16-bit input reduced to 8 bits.
inline RgbImage to_rgb(const DecodedImage& img) {
  std::vector<std::uint8_t> data(3 * static_cast<std::size_t>(img.width) * img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  auto to8 = [&](std::uint16_t v) {
    return img.bit_depth == 16 ? quantize8(v / 65535.0) : static_cast<std::uint8_t>(v);
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      data[3 * i + c] = to8(img.channels == 1 ? img.samples[i] : img.samples[3 * i + c]);
    }
  }
  return RgbImage(img.width, img.height, std::move(data));
}

inline Raster decode_raster(std::span<const std::uint8_t> bytes) { return to_raster(decode_image(bytes)); }

inline Raster read_raster(const std::filesystem::path& path) {
  return decode_raster(detail::read_file_bytes(path));
}

inline RgbImage read_rgb(const std::filesystem::path& path) {
  return to_rgb(decode_image(detail::read_file_bytes(path)));
}

inline std::vector<std::uint8_t> encode_image(const Raster& r, ImageFormat format) {
  std::vector<std::uint8_t> samples(r.size());
  auto px = r.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) samples[i] = quantize8(px[i]);
  if (format == ImageFormat::png) return detail::encode_png(r.width(), r.height(), 1, samples);
  const std::string header =
      "P5\n" + std::to_string(r.width()) + " " + std::to_string(r.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), samples.begin(), samples.end());
  return out;
}

inline std::vector<std::uint8_t> encode_image(const RgbImage& img) {
  return detail::encode_png(img.width, img.height, 3, img.data);
}

inline void write_image(const Raster& r, const std::filesystem::path& path, ImageFormat format) {
  detail::write_file_bytes(path, encode_image(r, format));
}

inline void write_image(const RgbImage& img, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_image(img));
}

/// Picks the format from the extension: ".pgm" writes PGM, anything else PNG.
inline void write_image(const Raster& r, const std::filesystem::path& path) {
  write_image(r, path, path.extension() == ".pgm" ? ImageFormat::pgm : ImageFormat::png);
}

}  // namespace siteline
