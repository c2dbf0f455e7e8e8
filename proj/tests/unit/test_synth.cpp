#include <gtest/gtest.h>

#include "siteline/outline.hpp"
#include "siteline/synth.hpp"

using namespace siteline;

namespace {

// Corners of every set pixel: the hull of the pixel squares.
std::vector<PixelPoint> mask_corners(const BitMask& m) {
  std::vector<PixelPoint> pts;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y))
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) pts.push_back({static_cast<double>(x + dx), static_cast<double>(y + dy)});
  return pts;
}

SceneSpec quiet_spec() {
  SceneSpec s = default_spec();
  s.noise_sigma = 0.0;
  s.texture_amplitude = 0.0;
  return s;
}

}  // namespace

TEST(SceneSpec, Defaults) {
  const SceneSpec s = default_spec();
  EXPECT_EQ(s.pixels(), 1300);
  EXPECT_EQ(s.hill_length_m, 600.0);
  EXPECT_EQ(s.hill_width_m, 500.0);
  EXPECT_EQ(s.satellite_count, 5);
  EXPECT_EQ(s.satellite_radius_m, 1000.0);
  EXPECT_EQ(std::count(s.satellite_shapes.begin(), s.satellite_shapes.end(), SatelliteShape::triangle), 4);
  const std::vector<double> want{90, 162, 234, 306, 378};
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(s.satellite_angle_deg(i), want[i]);
  EXPECT_DOUBLE_EQ(std::fmod(s.satellite_angle_deg(4), 360.0), 18.0);
  EXPECT_NO_THROW(s.validate());
}

TEST(SceneSpec, GeometryOverflow) {
  SceneSpec s = default_spec();
  s.satellite_radius_m = 1290;
  EXPECT_THROW(s.validate(), ValidationError);
  EXPECT_THROW(render(s, 1), ValidationError);
  s = default_spec();
  s.hill_length_m = 2700;
  EXPECT_THROW(s.validate(), ValidationError);
  s = default_spec();
  s.satellite_radius_m = 350;
  EXPECT_THROW(s.validate(), ValidationError);
  s = default_spec();
  s.satellite_shapes.pop_back();
  EXPECT_THROW(s.validate(), ValidationError);
  s = default_spec();
  s.moat_width_m = 260;
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Render, DeterministicPerSeed) {
  const auto a = render(default_spec(), 42);
  const auto b = render(default_spec(), 42);
  const auto c = render(default_spec(), 43);
  EXPECT_EQ(a.image, b.image);
  EXPECT_NE(a.image, c.image);
  EXPECT_EQ(a.truth.hill(), c.truth.hill());
}

TEST(Render, GeoRefMatchesResolution) {
  const auto scene = render(default_spec(), 1);
  EXPECT_EQ(scene.georef.width, 1300);
  EXPECT_NEAR(ground_resolution(41.766927, scene.georef.zoom), 2.0, 1e-12);
  const LatLon c = scene.georef.to_latlon({650, 650});
  EXPECT_NEAR(c.lat, 41.766927, 1e-9);
  EXPECT_NEAR(c.lon, 100.73733, 1e-9);
}

TEST(Render, NoiselessImageIsPiecewiseConstant) {
  const SceneSpec s = quiet_spec();
  const auto scene = render(s, 5);
  const auto& t = scene.truth;
  long sand = 0;
  for (int y = 0; y < scene.image.height(); ++y)
    for (int x = 0; x < scene.image.width(); ++x) {
      double want = s.background;
      int hits = 0;
      if (t.mound(x, y)) want = s.hill_intensity, ++hits;
      if (t.moat(x, y)) want = s.moat_intensity, ++hits;
      if (t.flag(x, y)) want = s.flag_intensity, ++hits;
      for (const auto& m : t.satellites)
        if (m(x, y)) want = s.satellite_intensity, ++hits;
      for (const auto& m : t.trenches)
        if (m(x, y)) want = s.trench_intensity, ++hits;
      ASSERT_LE(hits, 1) << x << "," << y;  // masks are disjoint
      sand += hits == 0;
      ASSERT_EQ(scene.image(x, y), want) << x << "," << y;
    }
  EXPECT_GT(sand, 1300L * 1300L / 2);
}

TEST(GroundTruth, CentroidsInsideMasks) {
  const auto scene = render(default_spec(), 1);
  const auto& t = scene.truth;
  ASSERT_EQ(t.features.size(), 6u);
  EXPECT_EQ(t.features[0].name, "hill");
  auto inside = [](const BitMask& m, PixelPoint p) { return m(static_cast<int>(p.x), static_cast<int>(p.y)) != 0; };
  EXPECT_TRUE(inside(t.hill(), t.features[0].centroid_px));
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(inside(t.satellites[i], t.features[i + 1].centroid_px)) << i;
  EXPECT_NEAR(t.features[0].centroid_px.x, 650.0, 0.01);
  EXPECT_NEAR(t.features[0].centroid_px.y, 650.0, 0.01);
}

TEST(GroundTruth, HillCaliperIsSixHundred) {
  const auto scene = render(default_spec(), 1);
  EXPECT_EQ(scene.truth.features[0].length_m, 600.0);
  EXPECT_EQ(scene.truth.features[0].width_m, 500.0);
  const double res = ground_resolution(41.766927, scene.georef.zoom);
  const Calipers c = calipers(mask_corners(scene.truth.hill()));
  EXPECT_NEAR(c.extent * res, 600.0, res);
  EXPECT_NEAR(c.width * res, 500.0, res);
}

TEST(GroundTruth, MeasuredDimensionsMatchSpec) {
  const auto scene = render(default_spec(), 1);
  const double res = ground_resolution(41.766927, scene.georef.zoom);
  for (int i = 0; i < 5; ++i) {
    const auto& f = scene.truth.features[i + 1];
    const Calipers c = calipers(mask_corners(scene.truth.satellites[i]));
    // A sharp vertex can sit up to half a pixel diagonal from the nearest
    // sampled corner, so the polygons get sqrt(2) px rather than 1 px.
    EXPECT_NEAR(c.extent * res, f.length_m, std::sqrt(2.0) * res) << f.name;
    EXPECT_NEAR(c.width * res, f.width_m, std::sqrt(2.0) * res) << f.name;
    EXPECT_GT(c.extent * res, 100.0);
    const double dx = f.centroid_px.x - 650.0, dy = f.centroid_px.y - 650.0;
    EXPECT_NEAR(std::hypot(dx, dy) * res, 1000.0, res) << f.name;
  }
}

TEST(GroundTruth, PentagonSymmetry) {
  SceneSpec s = quiet_spec();
  s.satellite_shapes.assign(5, SatelliteShape::triangle);
  SceneSpec r = s;
  r.satellite_phase_deg += 72.0;
  const auto a = render(s, 1);
  const auto b = render(r, 1);
  for (int i = 0; i < 5; ++i) {
    const auto& pa = a.truth.features[static_cast<std::size_t>((i + 1) % 5) + 1].centroid_px;
    const auto& pb = b.truth.features[static_cast<std::size_t>(i) + 1].centroid_px;
    EXPECT_NEAR(std::hypot(pa.x - pb.x, pa.y - pb.y), 0.0, 1.5) << i;
  }
}
