#pragma once

// Convolution engine: direct 2-D, separable, and 1-D directional passes.
//
// Every routine computes each output pixel from the input alone with a fixed
// summation order, so splitting rows across workers cannot change a single bit
// of the result.

#include <algorithm>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "siteline/errors.hpp"
#include "siteline/kernels.hpp"
#include "siteline/raster.hpp"

namespace siteline {

enum class Boundary {
  reflect,    ///< mirror about the edge sample, edge not duplicated: -1 -> 1
  replicate,  ///< clamp to the edge sample
  zero,       ///< pad with zeros
};

/// Row-band parallelism. workers == 0 picks the hardware concurrency.
struct Exec {
  unsigned workers = 1;
};

enum class Direction { pos_x, neg_x, pos_y, neg_y };

namespace detail {

/// Maps an out-of-range index onto [0, n) per policy; -1 marks a zero pad.
inline int extend_index(int i, int n, Boundary b) noexcept {
  if (i >= 0 && i < n) return i;
  switch (b) {
    case Boundary::zero:
      return -1;
    case Boundary::replicate:
      return i < 0 ? 0 : n - 1;
    case Boundary::reflect: {
      if (n == 1) return 0;
      const int period = 2 * (n - 1);
      int m = i % period;
      if (m < 0) m += period;
      return m < n ? m : period - m;
    }
  }
  return -1;
}

template <typename Fn>
void for_row_bands(int height, Exec exec, Fn&& fn) {
  unsigned workers = exec.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : exec.workers;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max(1, height)));
  if (workers <= 1) {
    fn(0, height);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const int band = (height + static_cast<int>(workers) - 1) / static_cast<int>(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const int y0 = static_cast<int>(w) * band;
    const int y1 = std::min(height, y0 + band);
    if (y0 >= y1) break;
    pool.emplace_back([&fn, y0, y1] { fn(y0, y1); });
  }
}

/// Source row y extended by `pad_left` samples before x=0 and `pad_right`
/// after x=w-1, following the boundary policy.
template <typename T>
void extended_row(const Image<T>& r, int y, int pad_left, int pad_right, Boundary b,
                  std::vector<double>& out) {
  const int w = r.width();
  out.resize(static_cast<std::size_t>(w + pad_left + pad_right));
  const auto src = r.row(y);
  for (int x = -pad_left; x < w + pad_right; ++x) {
    const int sx = extend_index(x, w, b);
    out[static_cast<std::size_t>(x + pad_left)] = sx < 0 ? 0.0 : static_cast<double>(src[static_cast<std::size_t>(sx)]);
  }
}

}  // namespace detail

/// out(x,y) = sum_{i,j} k(i,j) * r(x - (i - ax), y - (j - ay)), boundary-extended.
template <typename T>
Image<T> convolve2d(const Image<T>& r, const Kernel2D& k, Boundary b = Boundary::reflect,
                    Exec exec = {}) {
  if (k.width > r.width() || k.height > r.height()) {
    throw ValidationError("kernel " + std::to_string(k.width) + "x" + std::to_string(k.height) +
                          " larger than image " + std::to_string(r.width()) + "x" +
                          std::to_string(r.height()));
  }
  const int ax = k.anchor_x();
  const int ay = k.anchor_y();
  Image<T> out(r.width(), r.height());
  detail::for_row_bands(r.height(), exec, [&](int y0, int y1) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(k.height));
    for (int y = y0; y < y1; ++y) {
      // rows[j] holds source row y - (j - ay), left-padded by width-1-ax samples.
      std::vector<bool> zero_rows(static_cast<std::size_t>(k.height), false);
      for (int j = 0; j < k.height; ++j) {
        const int sy = detail::extend_index(y - (j - ay), r.height(), b);
        if (sy < 0) {
          zero_rows[static_cast<std::size_t>(j)] = true;
          continue;
        }
        detail::extended_row(r, sy, k.width - 1 - ax, ax, b, rows[static_cast<std::size_t>(j)]);
      }
      auto dst = out.row(y);
      for (int x = 0; x < r.width(); ++x) {
        double acc = 0.0;
        for (int j = 0; j < k.height; ++j) {
          if (zero_rows[static_cast<std::size_t>(j)]) continue;
          const auto& src = rows[static_cast<std::size_t>(j)];
          // source column x - (i - ax) sits at padded index x - i + (k.width - 1).
          for (int i = 0; i < k.width; ++i) {
            acc += k(i, j) * src[static_cast<std::size_t>(x - i + k.width - 1)];
          }
        }
        dst[static_cast<std::size_t>(x)] = static_cast<T>(acc);
      }
    }
  });
  return out;
}

/// Convolution with the kernel col (x) row, evaluated as a horizontal pass
/// followed by a vertical pass. Both vectors must have odd length.
template <typename T>
Image<T> convolve_separable(const Image<T>& r, std::span<const double> col,
                            std::span<const double> row, Boundary b = Boundary::reflect,
                            Exec exec = {}) {
  if (col.empty() || row.empty() || col.size() % 2 == 0 || row.size() % 2 == 0) {
    throw ValidationError("separable factors must have odd, non-zero length");
  }
  const int kw = static_cast<int>(row.size());
  const int kh = static_cast<int>(col.size());
  if (kw > r.width() || kh > r.height()) throw ValidationError("kernel larger than image");
  const int ax = (kw - 1) / 2;
  const int ay = (kh - 1) / 2;

  Image<double> horiz(r.width(), r.height());
  detail::for_row_bands(r.height(), exec, [&](int y0, int y1) {
    std::vector<double> src;
    for (int y = y0; y < y1; ++y) {
      detail::extended_row(r, y, kw - 1 - ax, ax, b, src);
      auto dst = horiz.row(y);
      for (int x = 0; x < r.width(); ++x) {
        double acc = 0.0;
        for (int i = 0; i < kw; ++i) acc += row[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(x - i + kw - 1)];
        dst[static_cast<std::size_t>(x)] = acc;
      }
    }
  });

  Image<T> out(r.width(), r.height());
  detail::for_row_bands(r.height(), exec, [&](int y0, int y1) {
    std::vector<double> acc(static_cast<std::size_t>(r.width()));
    for (int y = y0; y < y1; ++y) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int j = 0; j < kh; ++j) {
        const int sy = detail::extend_index(y - (j - ay), r.height(), b);
        if (sy < 0) continue;
        const double w = col[static_cast<std::size_t>(j)];
        const auto src = horiz.row(sy);
        for (int x = 0; x < r.width(); ++x) acc[static_cast<std::size_t>(x)] += w * src[static_cast<std::size_t>(x)];
      }
      auto dst = out.row(y);
      for (int x = 0; x < r.width(); ++x) dst[static_cast<std::size_t>(x)] = static_cast<T>(acc[static_cast<std::size_t>(x)]);
    }
  });
  return out;
}

/// out(p) = sum_k c_k * r(p - k * dir). pos_x samples toward decreasing x,
/// i.e. a backward difference along +x.
///
/// A DC-compensated vector is evaluated as sum_{k<=K} c_k (r(p - k dir) - r(p - (K+1) dir)),
/// the same quantity written so that a constant input gives exactly zero.
template <typename T>
Image<T> directional_conv1d(const Image<T>& r, const CoeffVector& c, Direction dir,
                            Boundary b = Boundary::reflect, Exec exec = {}) {
  if (c.coeffs.empty()) throw ValidationError("empty coefficient vector");
  const int reach = c.reach();
  const bool horizontal = dir == Direction::pos_x || dir == Direction::neg_x;
  const int extent = horizontal ? r.width() : r.height();
  if (reach >= extent) {
    throw ValidationError("GL window reach " + std::to_string(reach) + " too large for extent " +
                          std::to_string(extent));
  }
  const int taps = c.dc_compensated ? reach : reach + 1;  // taps summed explicitly
  const std::span<const double> w = c.span();
  Image<T> out(r.width(), r.height());
  const int width = r.width();

  if (horizontal) {
    const int step = dir == Direction::pos_x ? -1 : 1;
    detail::for_row_bands(r.height(), exec, [&](int y0, int y1) {
      std::vector<double> src;
      for (int y = y0; y < y1; ++y) {
        const int pad_l = step < 0 ? reach : 0;
        const int pad_r = step < 0 ? 0 : reach;
        detail::extended_row(r, y, pad_l, pad_r, b, src);
        auto dst = out.row(y);
        for (int x = 0; x < width; ++x) {
          const double* base = src.data() + x + pad_l;
          double acc = 0.0;
          if (c.dc_compensated) {
            const double tail = base[step * reach];
            for (int k = 0; k < taps; ++k) acc += w[static_cast<std::size_t>(k)] * (base[step * k] - tail);
          } else {
            for (int k = 0; k < taps; ++k) acc += w[static_cast<std::size_t>(k)] * base[step * k];
          }
          dst[static_cast<std::size_t>(x)] = static_cast<T>(acc);
        }
      }
    });
    return out;
  }

  const int step = dir == Direction::pos_y ? -1 : 1;
  detail::for_row_bands(r.height(), exec, [&](int y0, int y1) {
    std::vector<double> acc(static_cast<std::size_t>(width));
    std::vector<double> zeros(static_cast<std::size_t>(width), 0.0);
    std::vector<double> tail_buf(static_cast<std::size_t>(width));
    auto source_row = [&](int sy, std::vector<double>& scratch) -> const double* {
      const int ey = detail::extend_index(sy, r.height(), b);
      if (ey < 0) return zeros.data();
      if constexpr (std::is_same_v<T, double>) {
        return r.row(ey).data();
      } else {
        const auto s = r.row(ey);
        std::copy(s.begin(), s.end(), scratch.begin());
        return scratch.data();
      }
    };
    std::vector<double> scratch(static_cast<std::size_t>(width));
    for (int y = y0; y < y1; ++y) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const double* tail = nullptr;
      if (c.dc_compensated) {
        const double* t = source_row(y + step * reach, tail_buf);
        if (t != tail_buf.data()) std::copy(t, t + width, tail_buf.begin());
        tail = tail_buf.data();
      }
      for (int k = 0; k < taps; ++k) {
        const double wk = w[static_cast<std::size_t>(k)];
        const double* s = source_row(y + step * k, scratch);
        if (tail) {
          for (int x = 0; x < width; ++x) acc[static_cast<std::size_t>(x)] += wk * (s[x] - tail[x]);
        } else {
          for (int x = 0; x < width; ++x) acc[static_cast<std::size_t>(x)] += wk * s[x];
        }
      }
      auto dst = out.row(y);
      for (int x = 0; x < width; ++x) dst[static_cast<std::size_t>(x)] = static_cast<T>(acc[static_cast<std::size_t>(x)]);
    }
  });
  return out;
}

}  // namespace siteline
