#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "her2/error.hpp"
#include "her2/parallel.hpp"
#include "her2/raster.hpp"

namespace her2 {

/// Rows are the optical-density vectors of haematoxylin, eosin and DAB over (R, G, B).
using StainMatrix = std::array<std::array<double, 3>, 3>;

enum StainIndex { kHaematoxylin = 0, kEosin = 1, kDab = 2 };

inline StainMatrix normalized_rows(StainMatrix m) {
  for (auto& row : m) {
    const double n = std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2]);
    if (n <= 0.0) throw ConfigError("stain vector has zero length");
    for (double& v : row) v /= n;
  }
  return m;
}

/// Ruifrok & Johnston H-E-DAB vectors, each row normalized to unit length.
inline StainMatrix default_stain_matrix() {
  return normalized_rows({{{0.65, 0.70, 0.29}, {0.07, 0.99, 0.11}, {0.27, 0.57, 0.78}}});
}

inline StainMatrix invert(const StainMatrix& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (!std::isfinite(det) || std::abs(det) < 1e-9) throw ConfigError("stain matrix is singular");
  StainMatrix inv{};
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

// Transmittance floor: an 8-bit value of 0 reads as 1/255.
inline constexpr double kOdFloor = 1.0 / 255.0;

inline double optical_density(std::uint8_t v) {
  return -std::log10(std::max(static_cast<double>(v) / 255.0, kOdFloor));
}

/// Colour deconvolution: per-pixel OD times the inverse stain matrix, clamped at 0.
inline StainChannels rgb_to_hed(const RasterImage& image, const StainMatrix& stains = default_stain_matrix(),
                                ThreadPool* pool = nullptr) {
  if (image.empty()) throw ValidationError("image is empty");
  const StainMatrix inv = invert(stains);
  // OD of every 8-bit level pre-multiplied into each output stain.
  std::array<std::array<std::array<float, 256>, 3>, 3> lut{};
  for (int v = 0; v < 256; ++v) {
    const double od = optical_density(static_cast<std::uint8_t>(v));
    for (int c = 0; c < 3; ++c) {
      for (int s = 0; s < 3; ++s) lut[c][s][v] = static_cast<float>(od * inv[c][s]);
    }
  }
  const int w = image.width();
  const int h = image.height();
  StainChannels out{ScalarChannel(w, h, image.pixel_size()), ScalarChannel(w, h, image.pixel_size()),
                    ScalarChannel(w, h, image.pixel_size())};
  parallel_for(pool, 0, h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      auto src = image.row(y);
      auto hr = out.h.row(y);
      auto er = out.e.row(y);
      auto dr = out.dab.row(y);
      for (int x = 0; x < w; ++x) {
        const Rgb p = src[x];
        const float hv = lut[0][0][p.r] + lut[1][0][p.g] + lut[2][0][p.b];
        const float ev = lut[0][1][p.r] + lut[1][1][p.g] + lut[2][1][p.b];
        const float dv = lut[0][2][p.r] + lut[1][2][p.g] + lut[2][2][p.b];
        hr[x] = std::max(hv, 0.0f);
        er[x] = std::max(ev, 0.0f);
        dr[x] = std::max(dv, 0.0f);
      }
    }
  });
  return out;
}

/// Forward Beer-Lambert model for a single pixel's stain concentrations.
inline Rgb stains_to_rgb(double h, double e, double dab, const StainMatrix& stains = default_stain_matrix()) {
  Rgb out;
  std::array<std::uint8_t*, 3> dst{&out.r, &out.g, &out.b};
  for (int c = 0; c < 3; ++c) {
    const double od = h * stains[0][c] + e * stains[1][c] + dab * stains[2][c];
    const double v = 255.0 * std::pow(10.0, -od);
    *dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

inline RasterImage hed_to_rgb(const StainChannels& hed, const StainMatrix& stains = default_stain_matrix()) {
  if (!hed.h.same_shape(hed.e) || !hed.h.same_shape(hed.dab)) throw ValidationError("stain channel shape mismatch");
  RasterImage img(hed.h.width(), hed.h.height(), hed.h.pixel_size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = stains_to_rgb(hed.h[i], hed.e[i], hed.dab[i], stains);
  }
  return img;
}

}  // namespace her2
