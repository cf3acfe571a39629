#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "her2/error.hpp"
#include "her2/morphology.hpp"
#include "her2/raster.hpp"

namespace her2 {

/// Contrast stretch of the DAB channel: the lo/hi percentiles map to 0/1.
/// The span is never taken below min_span (OD), so a field without membrane
/// stain is not stretched into noise.
struct EnhanceParams {
  double lo_percentile = 1.0;
  double hi_percentile = 99.5;
  double min_span = 1.0;
  friend bool operator==(const EnhanceParams&, const EnhanceParams&) = default;
};

struct MembraneParams {
  double t_weak = 0.18;
  double t_intense = 0.5;
  double d_um = 5.0;
  EnhanceParams enhance;

  void validate() const {
    if (!(t_weak > 0.0 && t_weak < t_intense) || !std::isfinite(t_intense)) {
      throw ValidationError("membrane thresholds must satisfy 0 < t_weak < t_intense");
    }
    if (!(d_um >= 0.0) || !std::isfinite(d_um)) throw ValidationError("dilation radius d must be >= 0");
    if (!(enhance.lo_percentile >= 0.0 && enhance.lo_percentile < enhance.hi_percentile &&
          enhance.hi_percentile <= 100.0)) {
      throw ValidationError("enhancement percentiles must satisfy 0 <= lo < hi <= 100");
    }
    if (!(enhance.min_span >= 0.0)) throw ValidationError("enhancement min_span must be >= 0");
  }

  int d_px(double working_pixel_size) const { return static_cast<int>(std::lround(d_um / working_pixel_size)); }

  friend bool operator==(const MembraneParams&, const MembraneParams&) = default;
};

struct EnhancedChannel {
  ScalarChannel channel;
  bool degenerate = false;  // constant input, returned unchanged
  double lo_value = 0.0;
  double hi_value = 0.0;
};

inline double percentile(std::vector<float> values, double pct) {
  if (values.empty()) throw ValidationError("percentile of empty channel");
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo_idx = static_cast<std::size_t>(std::floor(pos));
  const auto hi_idx = std::min(lo_idx + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo_idx), values.end());
  const double lo = values[lo_idx];
  if (hi_idx == lo_idx) return lo;
  const double hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo_idx) + 1, values.end());
  return lo + (pos - static_cast<double>(lo_idx)) * (hi - lo);
}

inline EnhancedChannel enhance_dab(const ScalarChannel& dab, const EnhanceParams& p) {
  if (!(p.lo_percentile < p.hi_percentile)) throw ValidationError("enhancement requires lo < hi");
  const auto [mn, mx] = std::minmax_element(dab.values().begin(), dab.values().end());
  if (*mn == *mx) return {dab, true, *mn, *mx};
  std::vector<float> vals(dab.values().begin(), dab.values().end());
  const double lo = percentile(vals, p.lo_percentile);
  const double hi = percentile(std::move(vals), p.hi_percentile);
  const double span = std::max(hi - lo, p.min_span);
  if (!(span > 0.0)) return {dab, true, lo, hi};
  ScalarChannel out(dab.width(), dab.height(), dab.pixel_size());
  for (std::size_t i = 0; i < dab.size(); ++i) {
    out[i] = static_cast<float>(std::clamp((dab[i] - lo) / span, 0.0, 1.0));
  }
  return {std::move(out), false, lo, hi};
}

struct MembraneMasks {
  BinaryMask m_weak;
  BinaryMask m_intense;
};

inline MembraneMasks segment_membranes(const ScalarChannel& dab_enhanced, const MembraneParams& params) {
  params.validate();
  return {threshold_mask(dab_enhanced, params.t_weak), threshold_mask(dab_enhanced, params.t_intense)};
}

/// Completeness of one 8-connected skeleton component, with an ordered pixel
/// chain (depth-first walk from an end point) for overlay drawing.
struct ContourLabel {
  int id = 0;  // 1-based component label in c_weak
  bool complete = false;
  std::vector<Point> polyline;
};

struct Contours {
  BinaryMask c_weak;
  BinaryMask c_intense;
  std::vector<ContourLabel> labels;
};

namespace detail {

// Depth-first walk over one component, started from an end point when it has
// one, so open arcs come out as a single chain. stamp is a shared scratch grid;
// each call uses two fresh stamp values.
inline std::vector<Point> walk_component(const Components& comps, int label, Point start, Grid<int>& stamp,
                                         int& next_stamp) {
  const Grid<int>& lab = comps.labels;
  auto walk = [&](Point from) {
    const int mark = ++next_stamp;
    std::vector<Point> out;
    std::vector<Point> stack{from};
    stamp(from.x, from.y) = mark;
    while (!stack.empty()) {
      const Point p = stack.back();
      stack.pop_back();
      out.push_back(p);
      for (int k = 7; k >= 0; --k) {
        const Point q{p.x + kNbrDx[k], p.y + kNbrDy[k]};
        if (!lab.in_bounds(q) || lab(q.x, q.y) != label || stamp(q.x, q.y) == mark) continue;
        stamp(q.x, q.y) = mark;
        stack.push_back(q);
      }
    }
    return out;
  };
  std::vector<Point> pixels = walk(start);
  for (Point p : pixels) {
    int deg = 0;
    for (int k = 0; k < 8; ++k) {
      const Point q{p.x + kNbrDx[k], p.y + kNbrDy[k]};
      deg += lab.in_bounds(q) && lab(q.x, q.y) == label;
    }
    if (deg == 1) return p == start ? pixels : walk(p);
  }
  return pixels;
}

}  // namespace detail

/// Labels each c_weak component complete when one of its own holes (background
/// it encloses, 4-connected) holds no other closed component, i.e. it forms an
/// innermost closed contour. Open fragments inside a ring do not break it.
inline std::vector<ContourLabel> label_contours(const BinaryMask& skeleton) {
  const Components comps = connected_components(skeleton, Connectivity::Eight);
  const int w = skeleton.width();
  const int h = skeleton.height();
  const int n = comps.count();

  struct Box {
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max(), x1 = -1, y1 = -1;
  };
  std::vector<Box> box(static_cast<std::size_t>(n) + 1);
  std::vector<Point> first(static_cast<std::size_t>(n) + 1, Point{-1, -1});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int c = comps.labels(x, y);
      if (c == 0) continue;
      Box& b = box[c];
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
      if (first[c].x < 0) first[c] = {x, y};
    }
  }

  // Holes of each component on its own, labelled in a padded local frame.
  struct Local {
    int ox = 0, oy = 0;
    Components holes;
  };
  std::vector<Local> local(static_cast<std::size_t>(n) + 1);
  std::vector<bool> closed(static_cast<std::size_t>(n) + 1, false);
  for (int c = 1; c <= n; ++c) {
    const Box& b = box[c];
    const int lw = b.x1 - b.x0 + 3;
    const int lh = b.y1 - b.y0 + 3;
    if (lw < 5 || lh < 5) continue;  // too small to enclose anything
    BinaryMask m(lw, lh);
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        if (comps.labels(x, y) == c) m.set(x - b.x0 + 1, y - b.y0 + 1);
      }
    }
    const BinaryMask filled = fill_enclosed(m);
    BinaryMask holes(lw, lh);
    bool any = false;
    for (std::size_t i = 0; i < holes.size(); ++i) {
      holes[i] = filled[i] & (m[i] ^ 1);
      any = any || holes[i];
    }
    if (!any) continue;
    closed[c] = true;
    local[c] = {b.x0 - 1, b.y0 - 1, connected_components(holes, Connectivity::Four)};
  }

  std::vector<int> closed_ids;
  for (int c = 1; c <= n; ++c) {
    if (closed[c]) closed_ids.push_back(c);
  }
  std::vector<bool> complete(static_cast<std::size_t>(n) + 1, false);
  for (int c : closed_ids) {
    const Local& L = local[c];
    std::vector<bool> occupied(static_cast<std::size_t>(L.holes.count()) + 1, false);
    for (int d : closed_ids) {
      if (d == c) continue;
      const Point p{first[d].x - L.ox, first[d].y - L.oy};
      if (!L.holes.labels.in_bounds(p)) continue;
      occupied[L.holes.labels(p.x, p.y)] = true;
    }
    for (int hl = 1; hl <= L.holes.count(); ++hl) {
      if (!occupied[hl]) complete[c] = true;
    }
  }

  std::vector<ContourLabel> labels;
  labels.reserve(static_cast<std::size_t>(n));
  Grid<int> stamp(w, h, 0);
  int next_stamp = 0;
  for (int c = 1; c <= n; ++c) {
    labels.push_back({c, complete[c], detail::walk_component(comps, c, first[c], stamp, next_stamp)});
  }
  return labels;
}

inline Contours extract_contours(const BinaryMask& m_weak, const BinaryMask& m_intense) {
  if (!m_intense.subset_of(m_weak)) throw ValidationError("intense mask must be contained in the weak mask");
  Contours out;
  out.c_weak = skeletonize(m_weak);
  out.c_intense = mask_and(out.c_weak, m_intense);
  out.labels = label_contours(out.c_weak);
  return out;
}

/// Everything the cell classifier needs, at working resolution.
struct MembraneMaskBundle {
  BinaryMask m_weak;
  BinaryMask m_intense;
  BinaryMask c_weak;
  BinaryMask c_intense;
  PointSet p_weak_enclosed;
  PointSet p_intense_enclosed;
  PointSet p_weak;
  PointSet p_intense;
  std::vector<ContourLabel> contour_labels;
  double working_pixel_size = 1.0;
  int scale = 2;  // full-resolution pixels per working pixel
  bool enhance_degenerate = false;
  int d_px = 0;
};

inline MembraneMaskBundle build_masks(Contours contours, MembraneMasks masks, const MembraneParams& params,
                                      double working_pixel_size, int scale = 2) {
  MembraneMaskBundle b;
  b.working_pixel_size = working_pixel_size;
  b.scale = scale;
  b.d_px = params.d_px(working_pixel_size);
  b.p_weak_enclosed = PointSet(fill_enclosed(contours.c_weak));
  b.p_intense_enclosed = PointSet(fill_enclosed(contours.c_intense));
  b.p_weak = PointSet(dilate(masks.m_weak, b.d_px));
  b.p_intense = PointSet(dilate(masks.m_intense, b.d_px));
  b.m_weak = std::move(masks.m_weak);
  b.m_intense = std::move(masks.m_intense);
  b.c_weak = std::move(contours.c_weak);
  b.c_intense = std::move(contours.c_intense);
  b.contour_labels = std::move(contours.labels);
  return b;
}

/// Enhance, segment, skeletonize and build the point sets from a working-resolution DAB channel.
inline MembraneMaskBundle describe_membranes(const ScalarChannel& dab_working, const MembraneParams& params,
                                             int scale = 2) {
  params.validate();
  EnhancedChannel enh = enhance_dab(dab_working, params.enhance);
  MembraneMasks masks = segment_membranes(enh.channel, params);
  Contours contours = extract_contours(masks.m_weak, masks.m_intense);
  MembraneMaskBundle b = build_masks(std::move(contours), std::move(masks), params, dab_working.pixel_size(), scale);
  b.enhance_degenerate = enh.degenerate;
  return b;
}

}  // namespace her2
