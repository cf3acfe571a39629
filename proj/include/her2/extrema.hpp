#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "her2/error.hpp"
#include "her2/raster.hpp"

namespace her2 {

enum class ExtremaMode { Maxima, Minima };

struct Extremum {
  Point at;
  float value = 0.0f;
};

namespace detail {

// Sliding-window maximum of radius r (van Herk / Gil-Werman), out-of-range taps ignored.
inline void running_max(const float* in, float* out, int n, int r, std::vector<float>& pre, std::vector<float>& suf) {
  const int block = 2 * r + 1;
  pre.resize(n);
  suf.resize(n);
  for (int b0 = 0; b0 < n; b0 += block) {
    const int b1 = std::min(n, b0 + block);
    pre[b0] = in[b0];
    for (int i = b0 + 1; i < b1; ++i) pre[i] = std::max(pre[i - 1], in[i]);
    suf[b1 - 1] = in[b1 - 1];
    for (int i = b1 - 2; i >= b0; --i) suf[i] = std::max(suf[i + 1], in[i]);
  }
  // Window [lo, hi]: suffix max from lo plus prefix max up to hi, except where an
  // edge leaves the window inside a single block.
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - r);
    const int hi = std::min(n - 1, i + r);
    if (lo == 0) {
      out[i] = pre[hi];
    } else if (hi == n - 1 && lo / block == hi / block) {
      out[i] = suf[lo];
    } else {
      out[i] = std::max(suf[lo], pre[hi]);
    }
  }
}

inline ScalarChannel window_max(const ScalarChannel& c, int r) {
  const int w = c.width();
  const int h = c.height();
  const int block = 2 * r + 1;
  ScalarChannel down(w, h, c.pixel_size());
  std::vector<float> pre, suf;
  for (int y = 0; y < h; ++y) running_max(&c(0, y), &down(0, y), w, r, pre, suf);
  // Same decomposition vertically, on whole rows. The row maxima are turned
  // into block suffix maxima in place; prefix maxima go to a second buffer
  // that then receives the result.
  ScalarChannel up(w, h, c.pixel_size());
  for (int b0 = 0; b0 < h; b0 += block) {
    const int b1 = std::min(h, b0 + block);
    std::copy(&down(0, b0), &down(0, b0) + w, &up(0, b0));
    for (int y = b0 + 1; y < b1; ++y) {
      const float* prev = &up(0, y - 1);
      const float* src = &down(0, y);
      float* dst = &up(0, y);
      for (int x = 0; x < w; ++x) dst[x] = std::max(prev[x], src[x]);
    }
    for (int y = b1 - 2; y >= b0; --y) {
      const float* next = &down(0, y + 1);
      float* dst = &down(0, y);
      for (int x = 0; x < w; ++x) dst[x] = std::max(next[x], dst[x]);
    }
  }
  for (int y = 0; y < h; ++y) {
    const int lo = std::max(0, y - r);
    const int hi = std::min(h - 1, y + r);
    float* dst = &up(0, y);
    if (lo == 0) {
      if (hi != y) std::copy(&up(0, hi), &up(0, hi) + w, dst);
    } else if (hi == h - 1 && lo / block == hi / block) {
      std::copy(&down(0, lo), &down(0, lo) + w, dst);
    } else {
      const float* a = &down(0, lo);
      const float* b = &up(0, hi);
      for (int x = 0; x < w; ++x) dst[x] = std::max(a[x], b[x]);
    }
  }
  return up;
}

// Greedy suppression: accept candidates in order unless an accepted point lies
// closer than min_distance (Euclidean).
inline std::vector<Extremum> suppress(std::vector<Extremum> cands, int min_distance, int width, int height) {
  const int cell = std::max(1, min_distance);
  const int gw = (width + cell - 1) / cell;
  const int gh = (height + cell - 1) / cell;
  std::vector<std::vector<Point>> buckets(static_cast<std::size_t>(gw) * gh);
  const std::int64_t d2 = static_cast<std::int64_t>(min_distance) * min_distance;
  std::vector<Extremum> kept;
  for (const Extremum& c : cands) {
    const int bx = c.at.x / cell;
    const int by = c.at.y / cell;
    bool ok = true;
    for (int yy = std::max(0, by - 1); ok && yy <= std::min(gh - 1, by + 1); ++yy) {
      for (int xx = std::max(0, bx - 1); ok && xx <= std::min(gw - 1, bx + 1); ++xx) {
        for (Point q : buckets[static_cast<std::size_t>(yy) * gw + xx]) {
          if (squared_distance(q, c.at) < d2) {
            ok = false;
            break;
          }
        }
      }
    }
    if (!ok) continue;
    buckets[static_cast<std::size_t>(by) * gw + bx].push_back(c.at);
    kept.push_back(c);
  }
  return kept;
}

}  // namespace detail

/// Extrema of a (2r+1)^2 window, r = min_distance, that are not part of a flat
/// window, pass abs_threshold (>= for maxima, <= for minima) and survive greedy
/// suppression. Stronger extrema win; equal values resolve to the lowest (y, x).
/// Returned strongest first.
inline std::vector<Extremum> find_extrema(const ScalarChannel& channel, ExtremaMode mode, int min_distance,
                                          double abs_threshold) {
  if (min_distance < 1) throw ValidationError("min_distance must be >= 1");
  const int w = channel.width();
  const int h = channel.height();
  const float sign = mode == ExtremaMode::Maxima ? 1.0f : -1.0f;
  ScalarChannel signed_values(w, h, channel.pixel_size());
  for (std::size_t i = 0; i < channel.size(); ++i) signed_values[i] = sign * channel[i];
  const ScalarChannel peak = detail::window_max(signed_values, min_distance);
  const double signed_threshold = sign * abs_threshold;

  std::vector<Extremum> cands;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = signed_values(x, y);
      if (v != peak(x, y) || static_cast<double>(v) < signed_threshold) continue;
      // Reject flat windows (no strictly weaker value anywhere in reach).
      bool flat = true;
      const int y0 = std::max(0, y - min_distance), y1 = std::min(h - 1, y + min_distance);
      const int x0 = std::max(0, x - min_distance), x1 = std::min(w - 1, x + min_distance);
      for (int yy = y0; flat && yy <= y1; ++yy) {
        const float* row = &signed_values(0, yy);
        for (int xx = x0; xx <= x1; ++xx) {
          if (row[xx] != v) {
            flat = false;
            break;
          }
        }
      }
      if (!flat) cands.push_back({{x, y}, channel(x, y)});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [sign](const Extremum& a, const Extremum& b) {
    return sign * a.value > sign * b.value;  // raster order preserved among ties
  });
  return detail::suppress(std::move(cands), min_distance, w, h);
}

inline PointSet local_extrema(const ScalarChannel& channel, ExtremaMode mode, int min_distance, double abs_threshold) {
  const auto found = find_extrema(channel, mode, min_distance, abs_threshold);
  std::vector<Point> pts;
  pts.reserve(found.size());
  for (const auto& e : found) pts.push_back(e.at);
  return PointSet::from_points(channel.width(), channel.height(), pts);
}

}  // namespace her2
