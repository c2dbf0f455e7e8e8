#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "siteline/convolve.hpp"
#include "siteline/errors.hpp"
#include "siteline/kernels.hpp"
#include "siteline/raster.hpp"

namespace siteline {

enum class DirectionSet {
  two,   ///< +x, +y
  four,  ///< +x, -x, +y, -y
};

struct FracParams {
  double nu = 0.5;
  int window = 8;
  DirectionSet directions = DirectionSet::two;
  Boundary boundary = Boundary::reflect;
  bool dc_compensate = true;

  void validate() const {
    if (!(nu > 0.0 && nu <= kMaxFractionalOrder)) {
      throw ValidationError("frac.nu must satisfy 0 < nu <= 2, got " + std::to_string(nu));
    }
    if (window < 1) throw ValidationError("frac.window must be >= 1");
  }

  CoeffVector coefficients() const {
    validate();
    CoeffVector c = gl_coefficients(nu, window);
    return dc_compensate ? zero_dc(std::move(c)) : c;
  }
};

enum class BlendKind { max, mean, screen, multiply };

struct BlendMode {
  BlendKind kind = BlendKind::max;
  double opacity = 1.0;  ///< applied to the second layer

  void validate() const {
    if (!(opacity >= 0.0 && opacity <= 1.0)) throw ValidationError("blend opacity must lie in [0,1]");
  }
};

/// Magnitude of the fractional gradient built from GL directional derivatives.
///   two:  sqrt(Dx^2 + Dy^2)
///   four: sqrt((D+x^2 + D-x^2 + D+y^2 + D-y^2) / 2)
inline Raster frac_gradient_magnitude(const Raster& r, const FracParams& p, Exec exec = {}) {
  const CoeffVector c = p.coefficients();
  const Raster dx = directional_conv1d(r, c, Direction::pos_x, p.boundary, exec);
  const Raster dy = directional_conv1d(r, c, Direction::pos_y, p.boundary, exec);
  Raster out(r.width(), r.height());
  auto m = out.pixels();
  auto px = dx.pixels();
  auto py = dy.pixels();
  if (p.directions == DirectionSet::two) {
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::sqrt(px[i] * px[i] + py[i] * py[i]);
    return out;
  }
  const Raster dxn = directional_conv1d(r, c, Direction::neg_x, p.boundary, exec);
  const Raster dyn = directional_conv1d(r, c, Direction::neg_y, p.boundary, exec);
  auto nx = dxn.pixels();
  auto ny = dyn.pixels();
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = std::sqrt((px[i] * px[i] + nx[i] * nx[i] + py[i] * py[i] + ny[i] * ny[i]) / 2.0);
  }
  return out;
}

/// Fractional-gradient enhancement, stretched for display into [0,1].
inline Raster enhance(const Raster& r, const FracParams& p, double lo_pct = 1.0,
                      double hi_pct = 99.0, Exec exec = {}) {
  return stretch(frac_gradient_magnitude(r, p, exec), lo_pct, hi_pct);
}

/// Raw Sobel magnitude sqrt(Gx^2 + Gy^2).
///
/// Evaluated directly rather than through convolve2d: each response is
/// (corner difference + corner difference) + 2 * centre difference, an order
/// that a quarter turn of the input maps onto itself up to sign. The output is
/// therefore exactly rotation-equivariant.
inline Raster sobel_magnitude(const Raster& r, Boundary b = Boundary::reflect, Exec exec = {}) {
  if (r.width() < 3 || r.height() < 3) throw ValidationError("Sobel needs a raster of at least 3x3");
  const int w = r.width();
  const int h = r.height();
  Raster out(w, h);
  detail::for_row_bands(h, exec, [&](int y0, int y1) {
    std::vector<double> up, mid, down;
    std::vector<double> zeros(static_cast<std::size_t>(w + 2), 0.0);
    auto fetch = [&](int y, std::vector<double>& buf) -> const std::vector<double>& {
      const int sy = detail::extend_index(y, h, b);
      if (sy < 0) return zeros;
      detail::extended_row(r, sy, 1, 1, b, buf);
      return buf;
    };
    for (int y = y0; y < y1; ++y) {
      const auto& a = fetch(y - 1, up);
      const auto& m = fetch(y, mid);
      const auto& c = fetch(y + 1, down);
      auto dst = out.row(y);
      for (int x = 0; x < w; ++x) {
        const std::size_t l = static_cast<std::size_t>(x);  // padded x-1
        const std::size_t o = l + 1;                       // padded x
        const std::size_t rr = l + 2;                      // padded x+1
        const double gx = ((a[rr] - a[l]) + (c[rr] - c[l])) + 2.0 * (m[rr] - m[l]);
        const double gy = ((c[l] - a[l]) + (c[rr] - a[rr])) + 2.0 * (c[o] - a[o]);
        dst[static_cast<std::size_t>(x)] = std::sqrt(gx * gx + gy * gy);
      }
    }
  });
  return out;
}

/// Per-pixel blend of two [0,1] layers; opacity scales the second layer.
inline Raster merge_layers(const Raster& a, const Raster& b, const BlendMode& mode = {}) {
  mode.validate();
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ValidationError("merge needs equal dimensions, got " + std::to_string(a.width()) + "x" +
                          std::to_string(a.height()) + " and " + std::to_string(b.width()) + "x" +
                          std::to_string(b.height()));
  }
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  auto pa = a.pixels();
  auto pb = b.pixels();
  if (!std::all_of(pa.begin(), pa.end(), in_unit) || !std::all_of(pb.begin(), pb.end(), in_unit)) {
    throw ValidationError("merge layers must lie in [0,1]");
  }
  const double op = mode.opacity;
  Raster out(a.width(), a.height());
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double x = pa[i];
    const double y = op * pb[i];
    double v = 0.0;
    switch (mode.kind) {
      case BlendKind::max:
        v = std::max(x, y);
        break;
      case BlendKind::mean:
        v = (x + y) / (1.0 + op);
        break;
      case BlendKind::screen:
        v = x + y - x * y;  // 1 - (1-x)(1-y), exact at y = 0
        break;
      case BlendKind::multiply:
        v = x * (1.0 - op + y);
        break;
    }
    dst[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

}  // namespace siteline
