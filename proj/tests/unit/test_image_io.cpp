#include <gtest/gtest.h>

#include <png.h>

#include <filesystem>
#include <random>
#include <string>

#include "siteline/image_io.hpp"
#include "siteline/synth.hpp"

using namespace siteline;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

fs::path temp_dir() {
  auto p = fs::temp_directory_path() / ("siteline_io_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

// Minimal independent 16-bit grayscale PNG writer for the decoder test.
std::vector<std::uint8_t> png16(int w, int h, const std::vector<std::uint16_t>& v) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep d, png_size_t n) {
        auto* o = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        o->insert(o->end(), d, d + n);
      },
      nullptr);
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(2 * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[2 * x] = v[y * w + x] >> 8;
      row[2 * x + 1] = v[y * w + x] & 0xff;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

TEST(Pgm, TwoByTwo) {
  auto bytes = bytes_of("P5\n2 2\n255\n");
  for (int v : {0, 255, 128, 64}) bytes.push_back(static_cast<std::uint8_t>(v));
  Raster r = decode_raster(bytes);
  ASSERT_EQ(r.width(), 2);
  ASSERT_EQ(r.height(), 2);
  EXPECT_EQ(r(0, 0), 0.0);
  EXPECT_EQ(r(1, 0), 1.0);
  EXPECT_EQ(r(0, 1), 128 / 255.0);
  EXPECT_EQ(r(1, 1), 64 / 255.0);
}

TEST(Pgm, CommentsAndSixteenBit) {
  auto bytes = bytes_of("P5 # a comment\n2 # w\n1\n65535\n");
  for (int v : {0x12, 0x34, 0xff, 0xff}) bytes.push_back(static_cast<std::uint8_t>(v));
  Raster r = decode_raster(bytes);
  EXPECT_EQ(r(0, 0), 0x1234 / 65535.0);
  EXPECT_EQ(r(1, 0), 1.0);
}

TEST(Pgm, DistinctErrors) {
  auto truncated = bytes_of("P5\n4 4\n255\n");
  truncated.push_back(1);
  EXPECT_THROW(decode_raster(truncated), MalformedImageError);
  EXPECT_THROW(decode_raster(bytes_of("P5\n4")), MalformedImageError);
  auto deep = bytes_of("P5\n1 1\n1023\n");
  deep.push_back(0);
  deep.push_back(0);
  EXPECT_THROW(decode_raster(deep), UnsupportedFormatError);
  EXPECT_THROW(decode_raster(bytes_of("GIF89a....")), MalformedImageError);
  EXPECT_THROW(read_raster("/nonexistent/siteline.png"), FileNotFoundError);
}

TEST(Png, TruncatedIsMalformed) {
  Raster r(8, 8, 0.5);
  auto bytes = encode_image(r, ImageFormat::png);
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(decode_raster(bytes), MalformedImageError);
}

TEST(Png, SixteenBitScaling) {
  auto bytes = png16(3, 1, {0, 32768, 65535});
  Raster r = decode_raster(bytes);
  EXPECT_EQ(r(0, 0), 0.0);
  EXPECT_EQ(r(1, 0), 32768 / 65535.0);
  EXPECT_EQ(r(2, 0), 1.0);
}

TEST(Write, HalfQuantizesTo128) {
  Raster r(1, 1, 0.5);
  auto bytes = encode_image(r, ImageFormat::pgm);
  EXPECT_EQ(bytes.back(), 128);
  Raster z(3, 2, 0.0);
  auto zb = encode_image(z, ImageFormat::pgm);
  for (std::size_t i = zb.size() - 6; i < zb.size(); ++i) EXPECT_EQ(zb[i], 0);
}

TEST(Write, RoundTripEqualsQuantizationBothFormats) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  const auto dir = temp_dir();
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 40);
    const int h = 1 + static_cast<int>(rng() % 40);
    std::vector<double> d(static_cast<std::size_t>(w) * h);
    for (auto& v : d) v = u(rng);
    Raster r(w, h, d);
    for (const char* ext : {".png", ".pgm"}) {
      const auto path = dir / (std::string("rt") + ext);
      write_image(r, path);
      ASSERT_EQ(read_raster(path), quantized(r)) << ext;
    }
  }
}

TEST(Write, RampErrorBound) {
  std::vector<double> d(1000);
  for (int i = 0; i < 1000; ++i) d[i] = i / 999.0;
  Raster r(1000, 1, d);
  Raster back = decode_raster(encode_image(r, ImageFormat::png));
  for (int i = 0; i < 1000; ++i) EXPECT_LE(std::abs(back(i, 0) - r(i, 0)), 1.0 / 255.0);
}

TEST(Write, SyntheticSceneRoundTrip) {
  const auto scene = render(default_spec(), 3);
  const auto path = temp_dir() / "scene.png";
  write_image(scene.image, path);
  Raster back = read_raster(path);
  EXPECT_EQ(back.width(), default_spec().pixels());
  EXPECT_EQ(back.height(), default_spec().pixels());
  EXPECT_EQ(back, quantized(scene.image));
}

TEST(Write, PngIsDeterministic) {
  Raster r(17, 9, 0.3);
  EXPECT_EQ(encode_image(r, ImageFormat::png), encode_image(r, ImageFormat::png));
}

TEST(Rgb, PngRoundTripAndLuma) {
  RgbImage img(2, 1, {255, 0, 0, 10, 20, 30});
  const auto path = temp_dir() / "rgb.png";
  write_image(img, path);
  EXPECT_EQ(read_rgb(path), img);
  Raster g = read_raster(path);
  EXPECT_DOUBLE_EQ(g(0, 0), 0.2126);
}

TEST(Write, UnwritablePathIsIoError) {
  Raster r(2, 2, 0.1);
  EXPECT_THROW(write_image(r, "/nonexistent-dir/x/y.png"), IoError);
}
