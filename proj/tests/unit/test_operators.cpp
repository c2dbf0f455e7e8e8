#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "siteline/operators.hpp"
#include "siteline/synth.hpp"

using namespace siteline;

namespace {

Raster random_raster(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> d(static_cast<std::size_t>(w) * h);
  for (auto& v : d) v = u(rng);
  return Raster(w, h, d);
}

Raster step_x(int w, int h, int at) {
  Raster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = at; x < w; ++x) r(x, y) = 1.0;
  return r;
}

}  // namespace

TEST(FracGradient, ConstantIsZero) {
  for (double nu : {0.1, 0.5, 0.9, 1.0, 1.5, 2.0})
    for (DirectionSet d : {DirectionSet::two, DirectionSet::four}) {
      FracParams p;
      p.nu = nu;
      p.directions = d;
      for (double v : frac_gradient_magnitude(Raster(24, 24, 0.62), p).data()) ASSERT_EQ(v, 0.0);
    }
}

TEST(FracGradient, FirstOrderRamp) {
  std::vector<double> d(12 * 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 12; ++x) d[y * 12 + x] = x;
  FracParams p;
  p.nu = 1.0;
  p.window = 1;
  p.boundary = Boundary::replicate;
  Raster m = frac_gradient_magnitude(Raster(12, 6, d), p);
  for (int y = 0; y < 6; ++y)
    for (int x = 1; x < 12; ++x) EXPECT_EQ(m(x, y), 1.0);
}

TEST(FracGradient, StepResponseIsPartialSums) {
  FracParams p;
  p.nu = 0.5;
  p.window = 4;
  const int at = 10;
  Raster m = frac_gradient_magnitude(step_x(24, 8, at), p);
  // Independent 1-D evaluation of the compensated GL sum over the step row.
  const auto c = gl_coefficients(0.5, 4);
  std::vector<double> row(24, 0.0);
  for (int x = at; x < 24; ++x) row[x] = 1.0;
  for (int x = 6; x < 24; ++x) {
    double acc = 0.0;
    for (int k = 0; k <= 4; ++k) acc += c.coeffs[k] * (row[x - k] - row[x - 5]);
    EXPECT_NEAR(m(x, 4), acc, 1e-15) << x;
  }
  double partial = 0.0;
  for (int j = 0; j <= 4; ++j) {
    partial += c.coeffs[j];
    EXPECT_NEAR(m(at + j, 4), partial, 1e-15);
  }
  int argmax = 0;
  for (int x = 0; x < 24; ++x)
    if (m(x, 4) > m(argmax, 4)) argmax = x;
  EXPECT_EQ(argmax, at);
}

TEST(FracGradient, FourDirectionFormula) {
  std::mt19937_64 rng(3);
  Raster r = random_raster(rng, 20, 18);
  FracParams p;
  p.directions = DirectionSet::four;
  const auto c = p.coefficients();
  Raster m = frac_gradient_magnitude(r, p);
  Raster a = directional_conv1d(r, c, Direction::pos_x), b = directional_conv1d(r, c, Direction::neg_x);
  Raster e = directional_conv1d(r, c, Direction::pos_y), f = directional_conv1d(r, c, Direction::neg_y);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double want = std::sqrt((a.pixels()[i] * a.pixels()[i] + b.pixels()[i] * b.pixels()[i] +
                                   e.pixels()[i] * e.pixels()[i] + f.pixels()[i] * f.pixels()[i]) /
                                  2.0);
    ASSERT_NEAR(m.pixels()[i], want, 1e-15);
  }
}

TEST(FracParams, Validation) {
  FracParams p;
  p.nu = 0.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p.nu = 2.0;
  EXPECT_NO_THROW(p.validate());
  p.window = 0;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Enhance, ConstantIsZeroAcrossSweep) {
  for (double nu : {0.1, 0.5, 0.9, 1.0, 1.5, 2.0}) {
    FracParams p;
    p.nu = nu;
    for (double v : enhance(Raster(32, 32, 0.41), p).data()) ASSERT_EQ(v, 0.0);
  }
}

TEST(Enhance, RangeOnRandomInput) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    Raster out = enhance(random_raster(rng, 30, 30), FracParams{});
    for (double v : out.pixels()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Enhance, MoatBrighterThanBackground) {
  const auto scene = render(default_spec(), 1);
  Raster e = enhance(scene.image, FracParams{});
  std::vector<double> moat, bg;
  const auto hill = scene.truth.hill();
  for (int y = 0; y < e.height(); ++y)
    for (int x = 0; x < e.width(); ++x) {
      if (scene.truth.moat(x, y)) moat.push_back(e(x, y));
      bool covered = hill(x, y) != 0 || scene.truth.flag(x, y) != 0;
      for (const auto& s : scene.truth.satellites) covered = covered || s(x, y);
      for (const auto& t : scene.truth.trenches) covered = covered || t(x, y);
      if (!covered) bg.push_back(e(x, y));
    }
  ASSERT_FALSE(moat.empty());
  const double bg_median = percentile(bg, 50);
  std::size_t brighter = 0;
  for (double v : moat) brighter += v > bg_median;
  // The band is wider than the GL window, so only its rims respond strongly.
  EXPECT_GT(static_cast<double>(brighter) / moat.size(), 0.5);
  EXPECT_GT(percentile(moat, 50), bg_median);
}

TEST(Sobel, ConstantIsZero) {
  for (Boundary b : {Boundary::reflect, Boundary::replicate})
    for (double v : sobel_magnitude(Raster(9, 7, 0.3), b).data()) EXPECT_EQ(v, 0.0);
}

TEST(Sobel, UnitStepGivesFour) {
  Raster m = sobel_magnitude(step_x(16, 10, 8));
  for (int y = 1; y < 9; ++y) {
    EXPECT_EQ(m(7, y), 4.0);
    EXPECT_EQ(m(8, y), 4.0);
    EXPECT_EQ(m(3, y), 0.0);
    EXPECT_EQ(m(12, y), 0.0);
  }
}

TEST(Sobel, MatchesConvolveMagnitude) {
  std::mt19937_64 rng(5);
  const auto [gx, gy] = sobel_kernels();
  for (Boundary b : {Boundary::reflect, Boundary::replicate, Boundary::zero}) {
    Raster r = random_raster(rng, 25, 19);
    Raster a = convolve2d(r, gx, b), c = convolve2d(r, gy, b);
    Raster m = sobel_magnitude(r, b);
    for (std::size_t i = 0; i < r.size(); ++i) {
      ASSERT_NEAR(m.pixels()[i], std::hypot(a.pixels()[i], c.pixels()[i]), 1e-12);
    }
  }
}

TEST(Sobel, RotationEquivariantExactly) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    Raster r = random_raster(rng, 13 + t, 9 + 2 * t);
    for (Boundary b : {Boundary::reflect, Boundary::replicate, Boundary::zero}) {
      ASSERT_EQ(sobel_magnitude(rot90(r), b), rot90(sobel_magnitude(r, b)));
    }
  }
}

TEST(Sobel, TooSmall) { EXPECT_THROW(sobel_magnitude(Raster(2, 5, 0.0)), ValidationError); }

TEST(Operators, ScalingKeepsArgmax) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    Raster r = random_raster(rng, 21, 21);
    const double a = 0.25 + t;
    std::vector<double> d(r.data());
    for (auto& v : d) v *= a;
    Raster s(21, 21, d);
    for (int which = 0; which < 2; ++which) {
      Raster m1 = which ? sobel_magnitude(r) : frac_gradient_magnitude(r, FracParams{});
      Raster m2 = which ? sobel_magnitude(s) : frac_gradient_magnitude(s, FracParams{});
      const auto i1 = std::max_element(m1.pixels().begin(), m1.pixels().end()) - m1.pixels().begin();
      const auto i2 = std::max_element(m2.pixels().begin(), m2.pixels().end()) - m2.pixels().begin();
      EXPECT_EQ(i1, i2);
      for (std::size_t i = 0; i < r.size(); ++i) ASSERT_NEAR(m2.pixels()[i], a * m1.pixels()[i], 1e-12 * a);
    }
  }
}

TEST(Merge, ByHand) {
  Raster h(1, 1, 0.5);
  EXPECT_DOUBLE_EQ(merge_layers(h, h, {BlendKind::screen, 1.0})(0, 0), 0.75);
  Raster a(2, 1, std::vector<double>{0.2, 0.9});
  Raster b(2, 1, std::vector<double>{0.6, 0.4});
  Raster mx = merge_layers(a, b);
  EXPECT_EQ(mx(0, 0), 0.6);
  EXPECT_EQ(mx(1, 0), 0.9);
  Raster mean = merge_layers(a, b, {BlendKind::mean, 1.0});
  EXPECT_DOUBLE_EQ(mean(0, 0), 0.4);
  Raster mul = merge_layers(a, b, {BlendKind::multiply, 1.0});
  EXPECT_DOUBLE_EQ(mul(1, 0), 0.36);
  Raster half = merge_layers(a, b, {BlendKind::max, 0.5});
  EXPECT_DOUBLE_EQ(half(0, 0), 0.3);
  EXPECT_EQ(merge_layers(a, Raster(2, 1, 0.0)), a);
}

TEST(Merge, CommutativeAtFullOpacity) {
  std::mt19937_64 rng(8);
  for (BlendKind k : {BlendKind::max, BlendKind::mean, BlendKind::screen, BlendKind::multiply}) {
    Raster a = random_raster(rng, 12, 12), b = random_raster(rng, 12, 12);
    EXPECT_EQ(merge_layers(a, b, {k, 1.0}), merge_layers(b, a, {k, 1.0}));
  }
}

TEST(Merge, ZeroOpacityFixesFirstLayer) {
  std::mt19937_64 rng(9);
  for (BlendKind k : {BlendKind::max, BlendKind::mean, BlendKind::screen, BlendKind::multiply}) {
    Raster a = random_raster(rng, 12, 12), b = random_raster(rng, 12, 12);
    EXPECT_EQ(merge_layers(a, b, {k, 0.0}), a);
  }
}

TEST(Merge, OutputInUnitRange) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (BlendKind k : {BlendKind::max, BlendKind::mean, BlendKind::screen, BlendKind::multiply}) {
    for (int t = 0; t < 5; ++t) {
      Raster out = merge_layers(random_raster(rng, 9, 9), random_raster(rng, 9, 9), {k, u(rng)});
      for (double v : out.pixels()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
    }
  }
}

TEST(Merge, Validation) {
  Raster a(2, 2, 0.5);
  EXPECT_THROW(merge_layers(a, Raster(3, 2, 0.5)), ValidationError);
  EXPECT_THROW(merge_layers(a, Raster(2, 2, 1.5)), ValidationError);
  EXPECT_THROW(merge_layers(a, a, {BlendKind::max, 1.2}), ValidationError);
}
