#include <gtest/gtest.h>

#include <random>

#include "siteline/convolve.hpp"

using namespace siteline;

namespace {

Raster random_raster(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> d(static_cast<std::size_t>(w) * h);
  for (auto& v : d) v = u(rng);
  return Raster(w, h, d);
}

Kernel2D random_kernel(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> d(static_cast<std::size_t>(w) * h);
  for (auto& v : d) v = u(rng);
  return Kernel2D(w, h, d);
}

// Single-fold padding, enough for kernels smaller than the image.
double padded(const Raster& r, int x, int y, Boundary b) {
  auto fold = [b](int i, int n) {
    if (i >= 0 && i < n) return i;
    if (b == Boundary::zero) return -1;
    if (b == Boundary::replicate) return i < 0 ? 0 : n - 1;
    return i < 0 ? -i : 2 * (n - 1) - i;
  };
  const int fx = fold(x, r.width());
  const int fy = fold(y, r.height());
  if (fx < 0 || fy < 0) return 0.0;
  return r(fx, fy);
}

Raster brute_force(const Raster& r, const Kernel2D& k, Boundary b) {
  Raster out(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) {
      double acc = 0.0;
      for (int j = 0; j < k.height; ++j)
        for (int i = 0; i < k.width; ++i)
          acc += k(i, j) * padded(r, x - (i - k.anchor_x()), y - (j - k.anchor_y()), b);
      out(x, y) = acc;
    }
  return out;
}

double max_abs_diff(const Raster& a, const Raster& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
  return m;
}

constexpr Boundary kPolicies[] = {Boundary::reflect, Boundary::replicate, Boundary::zero};

}  // namespace

TEST(ExtendIndex, Policies) {
  using detail::extend_index;
  EXPECT_EQ(extend_index(-1, 5, Boundary::reflect), 1);
  EXPECT_EQ(extend_index(-2, 5, Boundary::reflect), 2);
  EXPECT_EQ(extend_index(5, 5, Boundary::reflect), 3);
  EXPECT_EQ(extend_index(-1, 5, Boundary::replicate), 0);
  EXPECT_EQ(extend_index(7, 5, Boundary::replicate), 4);
  EXPECT_EQ(extend_index(-1, 5, Boundary::zero), -1);
  EXPECT_EQ(extend_index(0, 1, Boundary::reflect), 0);
  EXPECT_EQ(extend_index(-3, 1, Boundary::reflect), 0);
  // Periodic folding for far-out indices stays inside.
  for (int i = -40; i < 40; ++i) {
    const int e = extend_index(i, 4, Boundary::reflect);
    EXPECT_GE(e, 0);
    EXPECT_LT(e, 4);
  }
}

TEST(Convolve2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  Raster r = random_raster(rng, 9, 7);
  EXPECT_EQ(convolve2d(r, Kernel2D(1, 1, {1.0})), r);
}

TEST(Convolve2d, ConstantZeroSumReplicate) {
  Raster c(8, 8, 0.37);
  for (double v : convolve2d(c, sobel_kernels().first, Boundary::replicate).data()) EXPECT_EQ(v, 0.0);
}

// True convolution flips the kernel: with Gx the centre of [1..9] is the
// negated correlation sum, -8.
TEST(Convolve2d, HandExampleCentre) {
  Raster r(3, 3, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  Raster out = convolve2d(r, sobel_kernels().first, Boundary::zero);
  EXPECT_EQ(out(1, 1), -8.0);
  EXPECT_EQ(std::abs(out(1, 1)), -1 * 1 + 1 * 3 - 2 * 4 + 2 * 6 - 1 * 7 + 1 * 9);
}

TEST(Convolve2d, MatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (Boundary b : kPolicies) {
    for (int trial = 0; trial < 50; ++trial) {
      const int kw = 1 + 2 * static_cast<int>(rng() % 3);
      const int kh = 1 + 2 * static_cast<int>(rng() % 3);
      Raster r = random_raster(rng, 32, 32);
      Kernel2D k = random_kernel(rng, kw, kh);
      ASSERT_LE(max_abs_diff(convolve2d(r, k, b), brute_force(r, k, b)), 1e-12);
    }
  }
}

TEST(Convolve2d, KernelLargerThanImage) {
  Raster r(2, 5, 0.0);
  EXPECT_THROW(convolve2d(r, Kernel2D(3, 1, {1, 1, 1})), ValidationError);
}

TEST(ConvolveSeparable, MatchesOuterProduct) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Boundary b : kPolicies) {
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + 2 * static_cast<int>(rng() % 4);
      const int m = 1 + 2 * static_cast<int>(rng() % 4);
      std::vector<double> col(n), row(m);
      for (auto& v : col) v = u(rng);
      for (auto& v : row) v = u(rng);
      Raster r = random_raster(rng, 64, 64);
      const double diff =
          max_abs_diff(convolve_separable(r, col, row, b), convolve2d(r, outer_product(col, row), b));
      ASSERT_LE(diff, 1e-12);
    }
  }
}

TEST(ConvolveSeparable, SobelAndIdentities) {
  std::mt19937_64 rng(4);
  Raster r = random_raster(rng, 64, 64);
  const std::vector<double> smooth{1, 2, 1}, diff{-1, 0, 1}, id{1};
  EXPECT_LE(max_abs_diff(convolve_separable(r, smooth, diff), convolve2d(r, sobel_kernels().first)), 1e-12);
  EXPECT_EQ(convolve_separable(r, id, id), r);
  Raster c(10, 10, 0.6);
  for (double v : convolve_separable(c, id, diff, Boundary::replicate).data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(convolve_separable(r, std::vector<double>{1, 1}, id), ValidationError);
}

TEST(Convolve, Linearity) {
  std::mt19937_64 rng(5);
  for (Boundary b : kPolicies) {
    Raster f = random_raster(rng, 32, 32);
    Raster g = random_raster(rng, 32, 32);
    Kernel2D k = random_kernel(rng, 5, 3);
    const double a = 1.7, c = -0.4;
    std::vector<double> mix(f.size());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * f.pixels()[i] + c * g.pixels()[i];
    Raster lhs = convolve2d(Raster(32, 32, mix), k, b);
    Raster cf = convolve2d(f, k, b), cg = convolve2d(g, k, b);
    for (std::size_t i = 0; i < mix.size(); ++i) {
      ASSERT_NEAR(lhs.pixels()[i], a * cf.pixels()[i] + c * cg.pixels()[i], 1e-10);
    }
  }
}

TEST(Convolve, RotationEquivarianceReflect) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Raster r = random_raster(rng, 23, 17);
    Kernel2D k = random_kernel(rng, 3, 5);
    // rot90 of a kernel, expressed through a raster of its weights.
    Raster kr = rot90(Raster(k.width, k.height, k.weights));
    Kernel2D k90(kr.width(), kr.height(), kr.data());
    EXPECT_LE(max_abs_diff(convolve2d(rot90(r), k90, Boundary::reflect), rot90(convolve2d(r, k, Boundary::reflect))),
              1e-12);
  }
}

TEST(Convolve, DeterministicAcrossWorkerCounts) {
  std::mt19937_64 rng(7);
  Raster r = random_raster(rng, 50, 41);
  Kernel2D k = random_kernel(rng, 5, 5);
  const auto c = zero_dc(gl_coefficients(0.5, 8));
  const Raster base2d = convolve2d(r, k, Boundary::reflect, {1});
  const Raster base_sep = convolve_separable(r, std::vector<double>{1, 2, 1}, std::vector<double>{-1, 0, 1},
                                             Boundary::reflect, {1});
  const Raster base_dir = directional_conv1d(r, c, Direction::pos_y, Boundary::reflect, {1});
  for (unsigned w : {2u, 3u, 7u, 0u}) {
    EXPECT_EQ(convolve2d(r, k, Boundary::reflect, {w}), base2d);
    EXPECT_EQ(convolve_separable(r, std::vector<double>{1, 2, 1}, std::vector<double>{-1, 0, 1}, Boundary::reflect,
                                 {w}),
              base_sep);
    EXPECT_EQ(directional_conv1d(r, c, Direction::pos_y, Boundary::reflect, {w}), base_dir);
  }
}

TEST(Directional, BackwardDifferenceOnRamp) {
  std::vector<double> d(6 * 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) d[y * 6 + x] = x;
  Raster ramp(6, 4, d);
  Raster out = directional_conv1d(ramp, gl_coefficients(1.0, 1), Direction::pos_x, Boundary::replicate);
  for (int y = 0; y < 4; ++y) {
    EXPECT_EQ(out(0, y), 0.0);
    for (int x = 1; x < 6; ++x) EXPECT_EQ(out(x, y), 1.0);
  }
}

TEST(Directional, MatchesBruteForceAllDirections) {
  std::mt19937_64 rng(8);
  const auto c = gl_coefficients(0.7, 5);
  for (Boundary b : kPolicies) {
    Raster r = random_raster(rng, 20, 16);
    const std::pair<Direction, std::pair<int, int>> dirs[] = {
        {Direction::pos_x, {1, 0}}, {Direction::neg_x, {-1, 0}}, {Direction::pos_y, {0, 1}}, {Direction::neg_y, {0, -1}}};
    for (const auto& [dir, v] : dirs) {
      Raster out = directional_conv1d(r, c, dir, b);
      for (int y = 0; y < r.height(); ++y)
        for (int x = 0; x < r.width(); ++x) {
          double acc = 0.0;
          for (int k = 0; k <= 5; ++k) acc += c.coeffs[k] * padded(r, x - k * v.first, y - k * v.second, b);
          ASSERT_NEAR(out(x, y), acc, 1e-12);
        }
    }
  }
}

TEST(Directional, ConstantGivesExactZeroWhenCompensated) {
  for (double nu : {0.1, 0.5, 0.9, 1.0, 1.5, 2.0}) {
    const auto c = zero_dc(gl_coefficients(nu, 8));
    for (Boundary b : {Boundary::reflect, Boundary::replicate}) {
      for (double level : {0.0, 0.3, 0.7, 1.0}) {
        Raster k(16, 16, level);
        for (Direction d : {Direction::pos_x, Direction::neg_x, Direction::pos_y, Direction::neg_y})
          for (double v : directional_conv1d(k, c, d, b).data()) ASSERT_EQ(v, 0.0);
      }
    }
  }
}

TEST(Directional, MirrorSymmetry) {
  std::mt19937_64 rng(9);
  Raster r = random_raster(rng, 19, 11);
  const auto c = zero_dc(gl_coefficients(0.5, 4));
  EXPECT_EQ(directional_conv1d(mirror_x(r), c, Direction::neg_x), mirror_x(directional_conv1d(r, c, Direction::pos_x)));
}

TEST(Directional, WindowTooLarge) {
  Raster r(5, 20, 0.0);
  EXPECT_THROW(directional_conv1d(r, gl_coefficients(0.5, 5), Direction::pos_x), ValidationError);
  EXPECT_NO_THROW(directional_conv1d(r, gl_coefficients(0.5, 5), Direction::pos_y));
}
