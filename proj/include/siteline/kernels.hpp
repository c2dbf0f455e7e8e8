#pragma once

#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "siteline/errors.hpp"

namespace siteline {

/// Truncated Grünwald–Letnikov weights c_0..c_K for a derivative of order nu,
/// optionally followed by one compensating tap that makes the sum zero.
struct CoeffVector {
  double nu = 0.0;
  int window = 0;
  std::vector<double> coeffs;
  bool dc_compensated = false;

  /// Largest sample offset the vector reaches (taps - 1).
  int reach() const noexcept { return static_cast<int>(coeffs.size()) - 1; }
  std::span<const double> span() const noexcept { return coeffs; }
};

inline constexpr double kMaxFractionalOrder = 2.0;

/// c_0 = 1, c_k = c_{k-1} (k-1-nu) / k, i.e. c_k = (-1)^k binom(nu, k).
inline CoeffVector gl_coefficients(double nu, int window) {
  if (!(nu > 0.0 && nu <= kMaxFractionalOrder)) {
    throw ValidationError("fractional order must satisfy 0 < nu <= 2, got " + std::to_string(nu));
  }
  if (window < 1) throw ValidationError("GL window must be >= 1, got " + std::to_string(window));
  CoeffVector c{nu, window, {}, false};
  c.coeffs.resize(static_cast<std::size_t>(window) + 1);
  c.coeffs[0] = 1.0;
  for (int k = 1; k <= window; ++k) {
    c.coeffs[static_cast<std::size_t>(k)] = c.coeffs[static_cast<std::size_t>(k - 1)] * ((k - 1) - nu) / k;
  }
  return c;
}

/// Appends c_{K+1} = -sum(c_0..c_K) so a constant signal gives zero response.
inline CoeffVector zero_dc(CoeffVector c) {
  if (c.dc_compensated) throw ValidationError("coefficient vector is already DC-compensated");
  const double sum = std::accumulate(c.coeffs.begin(), c.coeffs.end(), 0.0);
  c.coeffs.push_back(0.0 - sum);  // 0.0 - x keeps an exact zero positive
  c.dc_compensated = true;
  return c;
}

/// Odd-sized 2-D kernel anchored at its centre. weights are row-major,
/// weight(i, j) is column i, row j.
struct Kernel2D {
  int width = 0;
  int height = 0;
  std::vector<double> weights;

  Kernel2D() = default;
  Kernel2D(int w, int h, std::vector<double> wts) : width(w), height(h), weights(std::move(wts)) {
    if (w < 1 || h < 1 || w % 2 == 0 || h % 2 == 0) {
      throw ValidationError("kernel extents must be odd and positive");
    }
    if (weights.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
      throw ValidationError("kernel weight count does not match extents");
    }
  }

  int anchor_x() const noexcept { return (width - 1) / 2; }
  int anchor_y() const noexcept { return (height - 1) / 2; }
  double operator()(int i, int j) const noexcept {
    return weights[static_cast<std::size_t>(j) * static_cast<std::size_t>(width) + static_cast<std::size_t>(i)];
  }

  friend bool operator==(const Kernel2D&, const Kernel2D&) = default;
};

/// col (vertical, length = height) times row (horizontal, length = width).
inline Kernel2D outer_product(std::span<const double> col, std::span<const double> row) {
  std::vector<double> w;
  w.reserve(col.size() * row.size());
  for (double c : col)
    for (double r : row) w.push_back(c * r);
  return Kernel2D(static_cast<int>(row.size()), static_cast<int>(col.size()), std::move(w));
}

inline Kernel2D transpose(const Kernel2D& k) {
  std::vector<double> w(k.weights.size());
  for (int j = 0; j < k.height; ++j)
    for (int i = 0; i < k.width; ++i) w[static_cast<std::size_t>(i) * k.height + j] = k(i, j);
  return Kernel2D(k.height, k.width, std::move(w));
}

inline constexpr double kSobelSmooth[3] = {1.0, 2.0, 1.0};
inline constexpr double kSobelDiff[3] = {-1.0, 0.0, 1.0};

/// Gx = [1,2,1]^T (x) [-1,0,1]; Gy = transpose(Gx).
inline std::pair<Kernel2D, Kernel2D> sobel_kernels() {
  Kernel2D gx = outer_product(kSobelSmooth, kSobelDiff);
  Kernel2D gy = transpose(gx);
  return {std::move(gx), std::move(gy)};
}

}  // namespace siteline
