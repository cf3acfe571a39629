#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <vector>

#include "her2/error.hpp"
#include "her2/parallel.hpp"
#include "her2/raster.hpp"

namespace her2 {

namespace detail {

// exp(-t) for 0 <= t < 2^31, branch-free so row loops vectorize. Relative
// error below 1e-7; results under 2^-125 flush to zero.
#if defined(__GNUC__)
__attribute__((always_inline))
#endif
inline float exp_neg(float t) {
  const float x = -t;
  // x <= 0, so truncating x * log2(e) - 0.5 rounds to nearest.
  const std::int32_t raw = static_cast<std::int32_t>(x * 1.44269504f - 0.5f);
  const std::int32_t keep = -static_cast<std::int32_t>(raw >= -125);
  const std::int32_t ni = raw & keep;
  const float n = static_cast<float>(ni);
  const float r = (x - n * 0.693359375f) + n * 2.12194440e-4f;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  p = p * r * r + r + 1.0f;
  const float v = p * __builtin_bit_cast(float, (ni + 127) << 23);
  return __builtin_bit_cast(float, __builtin_bit_cast(std::int32_t, v) & keep);
}

// Accumulates one kernel offset across a row.
#define HER2_BILATERAL_ROW_BODY                       \
  for (int x = x0; x < x1; ++x) {                     \
    const float v = shifted[x];                       \
    const float d = v - center[x];                    \
    const float wgt = sw * exp_neg(d * d * range_k);  \
    num[x] += wgt * v;                                \
    den[x] += wgt;                                    \
  }

inline void bilateral_row_generic(const float* shifted, const float* center, float* num, float* den, int x0,
                                  int x1, float sw, float range_k) {
  HER2_BILATERAL_ROW_BODY
}

#if defined(__GNUC__) && defined(__x86_64__)
#define HER2_HAVE_AVX2_ROW 1
__attribute__((target("avx2,fma"))) inline void bilateral_row_avx2(const float* shifted, const float* center,
                                                                    float* num, float* den, int x0, int x1,
                                                                    float sw, float range_k) {
  HER2_BILATERAL_ROW_BODY
}
#endif

#undef HER2_BILATERAL_ROW_BODY

inline void bilateral_row(const float* shifted, const float* center, float* num, float* den, int x0, int x1,
                          float sw, float range_k) {
#ifdef HER2_HAVE_AVX2_ROW
  static const bool avx2 = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  if (avx2) return bilateral_row_avx2(shifted, center, num, den, x0, x1, sw, range_k);
#endif
  bilateral_row_generic(shifted, center, num, den, x0, x1, sw, range_k);
}

}  // namespace detail

// Keeps the squared range argument far below 2^31 for any OD an 8-bit image can produce.
inline constexpr double kMinRangeSigma = 1e-3;

inline int bilateral_radius(double spatial_sigma) { return static_cast<int>(std::ceil(3.0 * spatial_sigma)); }

/// Edge-preserving smoothing: normalized spatial-Gaussian x range-Gaussian average
/// over a (2r+1)^2 window, r = ceil(3 * spatial_sigma). Out-of-frame taps are skipped.
inline ScalarChannel bilateral_filter(const ScalarChannel& channel, double spatial_sigma, double range_sigma,
                                      ThreadPool* pool = nullptr) {
  if (!(spatial_sigma > 0.0) || !(range_sigma >= kMinRangeSigma)) {
    throw ValidationError("bilateral sigmas must be positive (range sigma at least 0.001)");
  }
  const int w = channel.width();
  const int h = channel.height();
  const int r = bilateral_radius(spatial_sigma);
  const int side = 2 * r + 1;

  std::vector<float> spatial(static_cast<std::size_t>(side * side));
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      spatial[(dy + r) * side + (dx + r)] =
          static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2.0 * spatial_sigma * spatial_sigma)));
    }
  }

  const float range_k = static_cast<float>(1.0 / (2.0 * range_sigma * range_sigma));

  ScalarChannel out(w, h, channel.pixel_size());
  parallel_for(pool, 0, h, [&](int y0, int y1) {
    std::vector<float> num(static_cast<std::size_t>(w));
    std::vector<float> den(static_cast<std::size_t>(w));
    for (int y = y0; y < y1; ++y) {
      std::fill(num.begin(), num.end(), 0.0f);
      std::fill(den.begin(), den.end(), 0.0f);
      const float* center = &channel(0, y);
      // One kernel offset at a time across the whole row.
      for (int dy = std::max(-r, -y); dy <= std::min(r, h - 1 - y); ++dy) {
        const float* src = &channel(0, y + dy);
        for (int dx = -r; dx <= r; ++dx) {
          const float sw = spatial[(dy + r) * side + (dx + r)];
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(w, w - dx);
          detail::bilateral_row(src + dx, center, num.data(), den.data(), x0, x1, sw, range_k);
        }
      }
      auto dst = out.row(y);
      for (int x = 0; x < w; ++x) dst[x] = num[x] / den[x];
    }
  });
  return out;
}

/// 2x2 box average. Odd trailing rows/columns average the pixels that exist.
inline ScalarChannel downsample2(const ScalarChannel& channel) {
  const int sw = channel.width();
  const int sh = channel.height();
  const int w = (sw + 1) / 2;
  const int h = (sh + 1) / 2;
  ScalarChannel out(w, h, channel.pixel_size() * 2.0);
  for (int y = 0; y < h; ++y) {
    const float* r0 = &channel(0, 2 * y);
    const float* r1 = &channel(0, std::min(2 * y + 1, sh - 1));
    const float rows = (2 * y + 1 < sh) ? 2.0f : 1.0f;
    float* dst = &out(0, y);
    const int full = sw / 2;
    if (rows == 2.0f) {
      for (int x = 0; x < full; ++x) dst[x] = (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]) * 0.25f;
      if (full < w) dst[full] = (r0[2 * full] + r1[2 * full]) * 0.5f;
    } else {
      for (int x = 0; x < full; ++x) dst[x] = (r0[2 * x] + r0[2 * x + 1]) * 0.5f;
      if (full < w) dst[full] = r0[2 * full];
    }
  }
  return out;
}

}  // namespace her2
