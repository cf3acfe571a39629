#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "her2/error.hpp"
#include "her2/raster.hpp"

namespace her2 {

inline BinaryMask threshold_mask(const ScalarChannel& channel, double t) {
  BinaryMask out(channel.width(), channel.height());
  const float tf = static_cast<float>(t);
  const bool exact = static_cast<double>(tf) == t;
  for (std::size_t i = 0; i < channel.size(); ++i) {
    out[i] = exact ? (channel[i] >= tf) : (static_cast<double>(channel[i]) >= t);
  }
  return out;
}

namespace detail {

// One-dimensional squared Euclidean distance transform (Felzenszwalb & Huttenlocher)
// over f, written to d. v and z are scratch buffers of length n and n + 1.
inline void edt_1d(const std::int64_t* f, std::int64_t* d, int n, int* v, double* z) {
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    double s = 0.0;
    for (;;) {
      const int p = v[k];
      s = (static_cast<double>(f[q] + static_cast<std::int64_t>(q) * q) -
           static_cast<double>(f[p] + static_cast<std::int64_t>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[k]) {
        --k;  // z[0] is -inf, so this stops at k = 0
        continue;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = std::numeric_limits<double>::infinity();
      break;
    }
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const std::int64_t dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace detail

/// Exact squared Euclidean distance from every pixel to the nearest foreground pixel.
/// Pixels of an empty mask get a very large value.
inline Grid<std::int64_t> squared_distance_transform(const BinaryMask& mask) {
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  const int w = mask.width();
  const int h = mask.height();
  Grid<std::int64_t> dist(w, h, kInf);
  const int n = std::max(w, h);
  std::vector<std::int64_t> f(n), d(n);
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = mask(x, y) ? 0 : kInf;
    detail::edt_1d(f.data(), d.data(), h, v.data(), z.data());
    for (int y = 0; y < h; ++y) dist(x, y) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    auto row = dist.row(y);
    std::copy(row.begin(), row.end(), f.begin());
    detail::edt_1d(f.data(), d.data(), w, v.data(), z.data());
    std::copy(d.begin(), d.begin() + w, row.begin());
  }
  return dist;
}

/// Dilation by the discrete disk {(dx, dy) : dx^2 + dy^2 <= d^2}.
inline BinaryMask dilate(const BinaryMask& mask, int d) {
  if (d < 0) throw ValidationError("dilation radius must be non-negative");
  if (d == 0) return mask;
  const auto dist = squared_distance_transform(mask);
  const std::int64_t limit = static_cast<std::int64_t>(d) * d;
  BinaryMask out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = dist[i] <= limit;
  return out;
}

/// Union of the input with every background pixel not 4-connected to the frame border.
inline BinaryMask fill_enclosed(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  // Scanline flood of the border-connected background; 1 marks reached pixels.
  BinaryMask outside(w, h);
  std::vector<Point> stack;
  auto push = [&](int x, int y) {
    if (!mask.test(x, y) && !outside.test(x, y)) stack.push_back({x, y});
  };
  for (int x = 0; x < w; ++x) {
    push(x, 0);
    push(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    push(0, y);
    push(w - 1, y);
  }
  while (!stack.empty()) {
    const Point p = stack.back();
    stack.pop_back();
    if (outside.test(p)) continue;
    const std::uint8_t* m = &mask(0, p.y);
    std::uint8_t* o = &outside(0, p.y);
    int x0 = p.x;
    while (x0 > 0 && !m[x0 - 1] && !o[x0 - 1]) --x0;
    int x1 = p.x;
    while (x1 + 1 < w && !m[x1 + 1] && !o[x1 + 1]) ++x1;
    for (int x = x0; x <= x1; ++x) o[x] = 1;
    for (int ny : {p.y - 1, p.y + 1}) {
      if (ny < 0 || ny >= h) continue;
      const std::uint8_t* nm = &mask(0, ny);
      const std::uint8_t* no = &outside(0, ny);
      bool in_run = false;
      for (int x = x0; x <= x1; ++x) {
        const bool open = !nm[x] && !no[x];
        if (open && !in_run) stack.push_back({x, ny});
        in_run = open;
      }
    }
  }
  BinaryMask out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] | (outside[i] ^ 1);
  return out;
}

enum class Connectivity { Four = 4, Eight = 8 };

struct Components {
  Grid<int> labels;             // 0 = background, 1..count
  std::vector<std::int64_t> areas;  // areas[k - 1] is the pixel count of label k
  int count() const { return static_cast<int>(areas.size()); }
};

/// Flood-fill labelling. Labels are assigned in raster order of each component's first pixel.
inline Components connected_components(const BinaryMask& mask, Connectivity conn) {
  const int w = mask.width();
  const int h = mask.height();
  Components out{Grid<int>(w, h, 0), {}};
  std::vector<int> stack;
  const bool eight = conn == Connectivity::Eight;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!mask.test(x0, y0) || out.labels(x0, y0) != 0) continue;
      const int label = out.count() + 1;
      std::int64_t area = 0;
      out.labels(x0, y0) = label;
      stack.push_back(y0 * w + x0);
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        ++area;
        const int x = i % w;
        const int y = i / w;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (!eight && dx != 0 && dy != 0) continue;
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (!mask.test(nx, ny) || out.labels(nx, ny) != 0) continue;
            out.labels(nx, ny) = label;
            stack.push_back(ny * w + nx);
          }
        }
      }
      out.areas.push_back(area);
    }
  }
  return out;
}

namespace detail {

// Neighbour offsets P2..P9, clockwise from north.
inline constexpr std::array<int, 8> kNbrDx{0, 1, 1, 1, 0, -1, -1, -1};
inline constexpr std::array<int, 8> kNbrDy{-1, -1, 0, 1, 1, 1, 0, -1};

inline std::array<std::uint8_t, 8> neighbours(const BinaryMask& m, int x, int y) {
  std::array<std::uint8_t, 8> n{};
  for (int k = 0; k < 8; ++k) {
    const int nx = x + kNbrDx[k];
    const int ny = y + kNbrDy[k];
    n[k] = m.in_bounds(nx, ny) ? m(nx, ny) : 0;
  }
  return n;
}

// 8-connected simple point: deleting it changes neither the foreground (8) nor
// the background (4) topology. Yokoi connectivity number must equal 1.
inline bool is_simple(const std::array<std::uint8_t, 8>& n) {
  // Yokoi indices with P2 = north: 4-neighbours at k = 0, 2, 4, 6.
  int yokoi = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - n[k];
    const int b = 1 - n[(k + 1) % 8];
    const int c = 1 - n[(k + 2) % 8];
    yokoi += a - a * b * c;
  }
  return yokoi == 1;
}

inline int count_on(const std::array<std::uint8_t, 8>& n) {
  int c = 0;
  for (auto v : n) c += v;
  return c;
}

// Whether the foreground 8-neighbours of p stay 8-connected to each other once p
// is removed, searching the whole image. Used only for rare residual blocks.
inline bool removal_keeps_connected(const BinaryMask& img, Point p) {
  std::vector<Point> targets;
  for (int k = 0; k < 8; ++k) {
    const Point q{p.x + kNbrDx[k], p.y + kNbrDy[k]};
    if (img.in_bounds(q) && img.test(q)) targets.push_back(q);
  }
  if (targets.size() < 2) return true;
  std::vector<std::uint8_t> seen(img.size(), 0);
  seen[img.index(p.x, p.y)] = 1;
  std::vector<Point> stack{targets[0]};
  seen[img.index(targets[0].x, targets[0].y)] = 1;
  std::size_t found = 1;
  while (!stack.empty() && found < targets.size()) {
    const Point c = stack.back();
    stack.pop_back();
    for (int k = 0; k < 8; ++k) {
      const Point q{c.x + kNbrDx[k], c.y + kNbrDy[k]};
      if (!img.in_bounds(q) || !img.test(q) || seen[img.index(q.x, q.y)]) continue;
      seen[img.index(q.x, q.y)] = 1;
      if (std::find(targets.begin(), targets.end(), q) != targets.end()) ++found;
      stack.push_back(q);
    }
  }
  return found == targets.size();
}

}  // namespace detail

/// Zhang-Suen thinning to an 8-connected, one-pixel-wide skeleton.
///
/// Each sub-iteration marks pixels with the classic Zhang-Suen tests, then removes
/// them one at a time while they are still simple points, so that 2x2 squares and
/// two-pixel-thick diagonals cannot vanish. A final pass removes pixels of any
/// remaining 2x2 foreground block.
inline BinaryMask skeletonize(const BinaryMask& mask) {
  BinaryMask img = mask;
  const int w = img.width();
  std::vector<int> live;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      if (img.test(x, y)) live.push_back(y * w + x);
    }
  }
  std::vector<int> marked;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      marked.clear();
      for (int i : live) {
        const int x = i % w;
        const int y = i / w;
        const auto n = detail::neighbours(img, x, y);
        const int b = detail::count_on(n);
        if (b < 2 || b > 6) continue;
        int a = 0;
        for (int k = 0; k < 8; ++k) a += (n[k] == 0 && n[(k + 1) % 8] == 1);
        if (a != 1) continue;
        // n[0]=P2 (N), n[2]=P4 (E), n[4]=P6 (S), n[6]=P8 (W)
        if (pass == 0) {
          if (n[0] && n[2] && n[4]) continue;
          if (n[2] && n[4] && n[6]) continue;
        } else {
          if (n[0] && n[2] && n[6]) continue;
          if (n[0] && n[4] && n[6]) continue;
        }
        marked.push_back(i);
      }
      for (int i : marked) {
        const int x = i % w;
        const int y = i / w;
        const auto n = detail::neighbours(img, x, y);
        if (detail::count_on(n) < 2 || !detail::is_simple(n)) continue;
        img.set(x, y, false);
        changed = true;
      }
      if (!marked.empty()) {
        std::erase_if(live, [&](int i) { return !img.test(i % w, i / w); });
      }
    }
  }

  // Residual 2x2 blocks. Prefer removing a simple pixel, then one whose removal
  // keeps the component connected through some other path. A block with neither
  // (four branches meeting diagonally) loses its least-connected pixel.
  bool again = true;
  while (again) {
    again = false;
    for (int i : live) {
      const int x = i % w;
      const int y = i / w;
      if (!img.test(x, y) || !img.in_bounds(x + 1, y + 1)) continue;
      if (!(img.test(x + 1, y) && img.test(x, y + 1) && img.test(x + 1, y + 1))) continue;
      const std::array<Point, 4> block{{{x, y}, {x + 1, y}, {x, y + 1}, {x + 1, y + 1}}};
      int pick = -1;
      int fallback = 0;
      int fallback_deg = 9;
      for (int k = 0; k < 4; ++k) {
        const auto n = detail::neighbours(img, block[k].x, block[k].y);
        if (detail::is_simple(n)) {
          pick = k;
          break;
        }
        const int deg = detail::count_on(n);
        if (deg < fallback_deg) {
          fallback_deg = deg;
          fallback = k;
        }
      }
      for (int k = 0; k < 4 && pick < 0; ++k) {
        if (detail::removal_keeps_connected(img, block[k])) pick = k;
      }
      if (pick < 0) pick = fallback;
      img.set(block[pick], false);
      again = true;
    }
    if (again) std::erase_if(live, [&](int i) { return !img.test(i % w, i / w); });
  }
  return img;
}

}  // namespace her2
