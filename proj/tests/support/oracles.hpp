#pragma once

// Slow, direct reimplementations used as test oracles. None of these call the
// library routine they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <vector>

#include "her2/her2.hpp"

namespace oracle {

using namespace her2;

// 3x3 solve by Gaussian elimination with partial pivoting: finds c with c * M = od.
inline std::array<double, 3> solve_row(const StainMatrix& m, std::array<double, 3> od) {
  // c * M = od  <=>  M^T c^T = od^T
  double a[3][4];
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) a[r][k] = m[k][r];
    a[r][3] = od[r];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    for (int k = 0; k < 4; ++k) std::swap(a[col][k], a[piv][k]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int k = col; k < 4; ++k) a[r][k] -= f * a[col][k];
    }
  }
  return {a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]};
}

inline std::array<double, 3> deconvolve(Rgb p, const StainMatrix& m) {
  auto od = [](std::uint8_t v) { return -std::log10(std::max(v, std::uint8_t{1}) / 255.0); };
  auto c = solve_row(m, {od(p.r), od(p.g), od(p.b)});
  for (double& v : c) v = std::max(v, 0.0);
  return c;
}

inline std::vector<double> bilateral(const ScalarChannel& c, double ss, double rs) {
  const int r = static_cast<int>(std::ceil(3.0 * ss));
  std::vector<double> out(c.size());
  for (int y = 0; y < c.height(); ++y) {
    for (int x = 0; x < c.width(); ++x) {
      double num = 0, den = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (!c.in_bounds(x + dx, y + dy)) continue;
          const double v = c(x + dx, y + dy);
          const double d = v - c(x, y);
          const double wgt = std::exp(-(dx * dx + dy * dy) / (2 * ss * ss)) * std::exp(-d * d / (2 * rs * rs));
          num += wgt * v;
          den += wgt;
        }
      }
      out[c.index(x, y)] = num / den;
    }
  }
  return out;
}

inline std::vector<double> gaussian_blur(const ScalarChannel& c, double ss) {
  const int r = static_cast<int>(std::ceil(3.0 * ss));
  std::vector<double> out(c.size());
  for (int y = 0; y < c.height(); ++y) {
    for (int x = 0; x < c.width(); ++x) {
      double num = 0, den = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (!c.in_bounds(x + dx, y + dy)) continue;
          const double wgt = std::exp(-(dx * dx + dy * dy) / (2 * ss * ss));
          num += wgt * c(x + dx, y + dy);
          den += wgt;
        }
      }
      out[c.index(x, y)] = num / den;
    }
  }
  return out;
}

inline BinaryMask dilate(const BinaryMask& m, int d) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool hit = false;
      for (int dy = -d; dy <= d && !hit; ++dy) {
        for (int dx = -d; dx <= d && !hit; ++dx) {
          hit = dx * dx + dy * dy <= d * d && m.in_bounds(x + dx, y + dy) && m.test(x + dx, y + dy);
        }
      }
      out.set(x, y, hit);
    }
  }
  return out;
}

// Background reachable from the border by 4-steps, by breadth-first search.
inline BinaryMask fill_enclosed(const BinaryMask& m) {
  const int w = m.width(), h = m.height();
  std::vector<char> seen(m.size(), 0);
  std::queue<Point> q;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if ((x == 0 || y == 0 || x == w - 1 || y == h - 1) && !m.test(x, y)) {
        seen[m.index(x, y)] = 1;
        q.push({x, y});
      }
    }
  }
  while (!q.empty()) {
    const Point p = q.front();
    q.pop();
    for (Point d : {Point{1, 0}, Point{-1, 0}, Point{0, 1}, Point{0, -1}}) {
      const Point n{p.x + d.x, p.y + d.y};
      if (!m.in_bounds(n) || m.test(n) || seen[m.index(n.x, n.y)]) continue;
      seen[m.index(n.x, n.y)] = 1;
      q.push(n);
    }
  }
  BinaryMask out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] || !seen[i];
  return out;
}

// Union-find component ids; equal ids mean the same component, -1 is background.
inline std::vector<int> components(const BinaryMask& m, bool eight) {
  std::vector<int> parent(m.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.test(x, y)) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0)) continue;
          if (!m.in_bounds(x + dx, y + dy) || !m.test(x + dx, y + dy)) continue;
          parent[find(static_cast<int>(m.index(x, y)))] = find(static_cast<int>(m.index(x + dx, y + dy)));
        }
      }
    }
  }
  std::vector<int> out(m.size(), -1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) out[i] = find(static_cast<int>(i));
  }
  return out;
}

inline int component_count(const BinaryMask& m, bool eight) {
  std::set<int> ids;
  for (int id : components(m, eight)) {
    if (id >= 0) ids.insert(id);
  }
  return static_cast<int>(ids.size());
}

// Number of enclosed background regions (4-connected, not touching the border).
inline int hole_count(const BinaryMask& m) {
  BinaryMask bg(m.width(), m.height());
  for (std::size_t i = 0; i < m.size(); ++i) bg[i] = !m[i];
  const auto ids = components(bg, false);
  std::set<int> all, border;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const int id = ids[m.index(x, y)];
      if (id < 0) continue;
      all.insert(id);
      if (x == 0 || y == 0 || x == m.width() - 1 || y == m.height() - 1) border.insert(id);
    }
  }
  return static_cast<int>(all.size() - border.size());
}

// Completeness per 8-connected component, in the library's label order (raster
// order of first pixel): complete iff some hole of the component alone contains
// no other component that itself has a hole.
inline std::vector<bool> completeness(const BinaryMask& skel) {
  const auto ids = components(skel, true);
  std::vector<int> order;
  std::map<int, BinaryMask> alone;
  for (std::size_t i = 0; i < skel.size(); ++i) {
    if (ids[i] < 0) continue;
    if (!alone.count(ids[i])) {
      order.push_back(ids[i]);
      alone.emplace(ids[i], BinaryMask(skel.width(), skel.height()));
    }
    alone.at(ids[i])[i] = 1;
  }
  std::map<int, bool> has_hole;
  for (auto& [id, m] : alone) has_hole[id] = hole_count(m) > 0;
  std::vector<bool> out;
  for (int c : order) {
    const BinaryMask& m = alone.at(c);
    bool complete = false;
    if (has_hole[c]) {
      // Each hole of c alone as a region; check occupancy by other holed components.
      BinaryMask holes(m.width(), m.height());
      const BinaryMask filled = oracle::fill_enclosed(m);
      for (std::size_t i = 0; i < m.size(); ++i) holes[i] = filled[i] && !m[i];
      const auto hid = components(holes, false);
      std::set<int> regions, occupied;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (hid[i] < 0) continue;
        regions.insert(hid[i]);
        if (ids[i] >= 0 && ids[i] != c && has_hole[ids[i]]) occupied.insert(hid[i]);
      }
      complete = regions.size() > occupied.size();
    }
    out.push_back(complete);
  }
  return out;
}

struct Candidate {
  Point at;
  float value;
};

// find_extrema by exhaustive search and quadratic suppression.
inline std::vector<Point> extrema(const ScalarChannel& c, bool maxima, int r, double thr) {
  const float s = maxima ? 1.0f : -1.0f;
  std::vector<Candidate> cands;
  for (int y = 0; y < c.height(); ++y) {
    for (int x = 0; x < c.width(); ++x) {
      const float v = s * c(x, y);
      if (static_cast<double>(v) < s * thr) continue;
      bool is_max = true, flat = true;
      for (int yy = std::max(0, y - r); yy <= std::min(c.height() - 1, y + r); ++yy) {
        for (int xx = std::max(0, x - r); xx <= std::min(c.width() - 1, x + r); ++xx) {
          const float u = s * c(xx, yy);
          if (u > v) is_max = false;
          if (u != v) flat = false;
        }
      }
      if (is_max && !flat) cands.push_back({{x, y}, v});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
  std::vector<Point> kept;
  for (const auto& cd : cands) {
    bool ok = true;
    for (Point k : kept) ok = ok && squared_distance(k, cd.at) >= static_cast<std::int64_t>(r) * r;
    if (ok) kept.push_back(cd.at);
  }
  return kept;
}

// Set-algebra form of the five classes: each class is the point set minus the
// unions of all higher-priority sets (the complement formulas), evaluated as
// independent membership tests rather than a first-match chain.
inline CellClass classify(bool ie, bool i, bool we, bool wk) {
  const bool ic = ie;
  const bool ii = i && !ie;
  const bool wc = we && !ie && !i;
  const bool wi = wk && !we && !ie && !i;
  const bool ns = !ie && !i && !we && !wk;
  const int n = ic + ii + wc + wi + ns;
  if (n != 1) return static_cast<CellClass>(-1);
  if (ic) return CellClass::IntenseComplete;
  if (ii) return CellClass::IntenseIncomplete;
  if (wc) return CellClass::WeakComplete;
  if (wi) return CellClass::WeakIncomplete;
  return CellClass::NoStaining;
}

// Greedy one-to-one matching with all pairs sorted by distance, by full scan.
inline std::size_t matches(const std::vector<Point>& a, const std::vector<Point>& b, double r_px) {
  struct P {
    std::int64_t d2;
    Point lo, hi;
    std::size_t i, j;
  };
  std::vector<P> ps;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto d2 = squared_distance(a[i], b[j]);
      if (static_cast<double>(d2) < r_px * r_px) ps.push_back({d2, std::min(a[i], b[j]), std::max(a[i], b[j]), i, j});
    }
  }
  std::sort(ps.begin(), ps.end(),
            [](const P& x, const P& y) { return std::tie(x.d2, x.lo, x.hi) < std::tie(y.d2, y.lo, y.hi); });
  std::vector<bool> ua(a.size()), ub(b.size());
  std::size_t n = 0;
  for (const P& p : ps) {
    if (ua[p.i] || ub[p.j]) continue;
    ua[p.i] = ub[p.j] = true;
    ++n;
  }
  return n;
}

}  // namespace oracle
