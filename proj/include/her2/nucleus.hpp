#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "her2/color.hpp"
#include "her2/error.hpp"
#include "her2/extrema.hpp"
#include "her2/filter.hpp"
#include "her2/morphology.hpp"
#include "her2/parallel.hpp"
#include "her2/raster.hpp"

namespace her2 {

/// Which path produced a detection.
enum class NucleusSource { Haematoxylin, Dab, Heatmap };

inline const char* to_string(NucleusSource s) {
  switch (s) {
    case NucleusSource::Haematoxylin: return "h";
    case NucleusSource::Dab: return "dab";
    case NucleusSource::Heatmap: return "heatmap";
  }
  return "?";
}

struct Nucleus {
  Point at;
  NucleusSource source = NucleusSource::Haematoxylin;
  friend bool operator==(const Nucleus&, const Nucleus&) = default;
};

/// Detected tumour-nucleus centres in full-resolution pixel coordinates, raster order.
struct NucleusSet {
  int width = 0;
  int height = 0;
  double pixel_size = 1.0;
  std::vector<Nucleus> nuclei;

  std::size_t size() const { return nuclei.size(); }
  bool empty() const { return nuclei.empty(); }
  std::vector<Point> points() const {
    std::vector<Point> out;
    out.reserve(nuclei.size());
    for (const auto& n : nuclei) out.push_back(n.at);
    return out;
  }
  friend bool operator==(const NucleusSet&, const NucleusSet&) = default;
};

/// Classical detector parameters. Lengths are micrometres and are converted to
/// pixels per image, so 20x and 40x fields share one parameter set.
struct DetectorParams {
  double h_spatial_sigma_um = 0.15;
  double h_range_sigma = 0.15;
  double dab_spatial_sigma_um = 0.15;
  double dab_range_sigma = 0.15;
  double min_distance_um = 6.0;
  double h_max_threshold = 0.25;
  double dab_min_threshold = 0.3;
  double min_nucleus_area_um2 = 12.0;
  double dab_region_threshold = 0.5;
  // Local segmentation level around an H candidate, as a fraction of its peak.
  double area_level = 0.5;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be positive");
    };
    positive(h_spatial_sigma_um, "h_spatial_sigma_um");
    positive(h_range_sigma, "h_range_sigma");
    positive(dab_spatial_sigma_um, "dab_spatial_sigma_um");
    positive(dab_range_sigma, "dab_range_sigma");
    positive(min_distance_um, "min_distance_um");
    positive(h_max_threshold, "h_max_threshold");
    positive(dab_min_threshold, "dab_min_threshold");
    positive(min_nucleus_area_um2, "min_nucleus_area_um2");
    positive(dab_region_threshold, "dab_region_threshold");
    if (!(area_level > 0.0 && area_level < 1.0)) throw ValidationError("area_level must be in (0, 1)");
  }

  int min_distance_px(double pixel_size) const {
    return std::max(1, static_cast<int>(std::lround(min_distance_um / pixel_size)));
  }

  friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

/// Intermediate products of the classical path, kept for provenance tests and overlays.
struct ClassicalDetection {
  NucleusSet nuclei;
  BinaryMask dab_region;
  std::vector<Point> h_candidates;        // after suppression, before the area filter
  std::vector<Point> h_small_rejected;    // removed by the area filter
  std::vector<Point> dab_candidates;
};

namespace detail {

// True if the blob {v >= level} 4-connected to seed has at least min_area pixels.
inline bool blob_reaches_area(const ScalarChannel& c, Point seed, float level, std::int64_t min_area) {
  const int w = c.width();
  std::unordered_set<int> seen;
  std::vector<int> stack{seed.y * w + seed.x};
  seen.insert(stack.back());
  std::int64_t area = 0;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (++area >= min_area) return true;
    const int x = i % w;
    const int y = i / w;
    const std::array<Point, 4> nb{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
    for (Point q : nb) {
      if (!c.in_bounds(q) || c(q.x, q.y) < level) continue;
      const int j = q.y * w + q.x;
      if (seen.insert(j).second) stack.push_back(j);
    }
  }
  return false;
}

}  // namespace detail

/// Classical two-channel nucleus detection on precomputed stain channels.
///
/// H and DAB are bilateral-filtered. The DAB region is the thresholded DAB with
/// enclosed holes filled. Inside it, nuclei are DAB minima; outside it they are
/// H maxima whose local blob reaches the minimum nucleus area. The merged set is
/// suppressed at the minimum spacing with DAB detections taking precedence.
inline ClassicalDetection detect_classical(const StainChannels& hed, const DetectorParams& params,
                                           ThreadPool* pool = nullptr) {
  params.validate();
  const double ps = hed.h.pixel_size();
  const int w = hed.h.width();
  const int h = hed.h.height();
  const int min_dist = params.min_distance_px(ps);

  const ScalarChannel h_f = bilateral_filter(hed.h, params.h_spatial_sigma_um / ps, params.h_range_sigma, pool);
  const ScalarChannel dab_f =
      bilateral_filter(hed.dab, params.dab_spatial_sigma_um / ps, params.dab_range_sigma, pool);

  ClassicalDetection out;
  out.dab_region = fill_enclosed(threshold_mask(dab_f, params.dab_region_threshold));

  ScalarChannel h_outside = h_f;
  ScalarChannel dab_inside = dab_f;
  float dab_ceiling = 0.0f;
  for (float v : dab_f.values()) dab_ceiling = std::max(dab_ceiling, v);
  dab_ceiling += 1.0f;
  for (std::size_t i = 0; i < h_f.size(); ++i) {
    if (out.dab_region[i]) {
      h_outside[i] = 0.0f;
    } else {
      dab_inside[i] = dab_ceiling;
    }
  }

  const auto h_peaks = find_extrema(h_outside, ExtremaMode::Maxima, min_dist, params.h_max_threshold);
  const auto dab_pits = find_extrema(dab_inside, ExtremaMode::Minima, min_dist, params.dab_min_threshold);

  const auto min_area_px =
      static_cast<std::int64_t>(std::ceil(params.min_nucleus_area_um2 / (ps * ps)));
  std::vector<Extremum> merged;
  for (const auto& e : dab_pits) {
    out.dab_candidates.push_back(e.at);
    merged.push_back(e);
  }
  const std::size_t dab_count = merged.size();
  for (const auto& e : h_peaks) {
    out.h_candidates.push_back(e.at);
    const float level = static_cast<float>(params.area_level) * h_f(e.at.x, e.at.y);
    if (!detail::blob_reaches_area(h_f, e.at, level, min_area_px)) {
      out.h_small_rejected.push_back(e.at);
      continue;
    }
    merged.push_back(e);
  }

  // DAB detections first, then H detections, each already in strength order.
  const auto kept = detail::suppress(merged, min_dist, w, h);
  out.nuclei = NucleusSet{w, h, ps, {}};
  std::vector<Point> dab_set(out.dab_candidates.begin(), out.dab_candidates.end());
  std::sort(dab_set.begin(), dab_set.end());
  for (const auto& e : kept) {
    const bool from_dab = dab_count > 0 && std::binary_search(dab_set.begin(), dab_set.end(), e.at);
    out.nuclei.nuclei.push_back({e.at, from_dab ? NucleusSource::Dab : NucleusSource::Haematoxylin});
  }
  std::sort(out.nuclei.nuclei.begin(), out.nuclei.nuclei.end(),
            [](const Nucleus& a, const Nucleus& b) { return a.at < b.at; });
  return out;
}

inline NucleusSet detect_classical(const RasterImage& image, const DetectorParams& params,
                                   ThreadPool* pool = nullptr) {
  return detect_classical(rgb_to_hed(image, default_stain_matrix(), pool), params, pool).nuclei;
}

/// Local maxima of a predicted heatmap at or above peak_threshold, suppressed at min_distance.
inline NucleusSet peaks_from_heatmap(const ScalarChannel& heatmap, double peak_threshold, int min_distance) {
  if (!heatmap.all_finite()) throw ValidationError("heatmap contains non-finite values");
  const auto peaks = find_extrema(heatmap, ExtremaMode::Maxima, min_distance, peak_threshold);
  NucleusSet out{heatmap.width(), heatmap.height(), heatmap.pixel_size(), {}};
  for (const auto& p : peaks) out.nuclei.push_back({p.at, NucleusSource::Heatmap});
  std::sort(out.nuclei.begin(), out.nuclei.end(), [](const Nucleus& a, const Nucleus& b) { return a.at < b.at; });
  return out;
}

/// Detection interface shared by the classical path and sidecar heatmaps.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual NucleusSet detect(const RasterImage& image, const StainChannels& hed, ThreadPool* pool) const = 0;
  NucleusSet detect(const RasterImage& image) const {
    return detect(image, rgb_to_hed(image), nullptr);
  }
  virtual std::string name() const = 0;
};

class ClassicalDetector final : public Detector {
 public:
  explicit ClassicalDetector(DetectorParams params) : params_(params) { params_.validate(); }
  using Detector::detect;
  NucleusSet detect(const RasterImage&, const StainChannels& hed, ThreadPool* pool) const override {
    return detect_classical(hed, params_, pool).nuclei;
  }
  std::string name() const override { return "classical"; }

 private:
  DetectorParams params_;
};

/// Peaks of an externally predicted heatmap. scale = image pixels per heatmap pixel.
class HeatmapDetector final : public Detector {
 public:
  HeatmapDetector(ScalarChannel heatmap, double scale, double peak_threshold, double min_distance_um)
      : heatmap_(std::move(heatmap)), scale_(scale), peak_threshold_(peak_threshold),
        min_distance_um_(min_distance_um) {
    if (!(scale_ > 0.0)) throw ValidationError("heatmap scale must be positive");
  }
  using Detector::detect;
  NucleusSet detect(const RasterImage& image, const StainChannels&, ThreadPool*) const override {
    const double heat_ps = image.pixel_size() * scale_;
    const int md = std::max(1, static_cast<int>(std::lround(min_distance_um_ / heat_ps)));
    const NucleusSet peaks = peaks_from_heatmap(heatmap_, peak_threshold_, md);
    NucleusSet out{image.width(), image.height(), image.pixel_size(), {}};
    for (const auto& n : peaks.nuclei) {
      const int x = static_cast<int>(std::lround((n.at.x + 0.5) * scale_ - 0.5));
      const int y = static_cast<int>(std::lround((n.at.y + 0.5) * scale_ - 0.5));
      out.nuclei.push_back({{std::clamp(x, 0, image.width() - 1), std::clamp(y, 0, image.height() - 1)},
                            NucleusSource::Heatmap});
    }
    std::sort(out.nuclei.begin(), out.nuclei.end(), [](const Nucleus& a, const Nucleus& b) { return a.at < b.at; });
    return out;
  }
  std::string name() const override { return "heatmap"; }

 private:
  ScalarChannel heatmap_;
  double scale_;
  double peak_threshold_;
  double min_distance_um_;
};

struct DetectionMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double match_radius_um = 5.0;
  std::size_t true_positives = 0;
  std::size_t detected = 0;
  std::size_t truth = 0;
  bool recall_undefined = false;     // truth empty; recall reported as 1
  bool precision_undefined = false;  // detections empty; precision reported as 1
};

/// Greedy one-to-one matching in ascending distance; pairs closer than the radius count.
inline DetectionMetrics match_detections(const NucleusSet& detected, const NucleusSet& truth, double radius_um = 5.0) {
  if (std::abs(detected.pixel_size - truth.pixel_size) > 1e-9 * std::max(1.0, truth.pixel_size)) {
    throw ValidationError("detected and truth sets use different pixel sizes");
  }
  DetectionMetrics m;
  m.match_radius_um = radius_um;
  m.detected = detected.size();
  m.truth = truth.size();
  const double r_px = radius_um / truth.pixel_size;
  const double r2 = r_px * r_px;

  struct Pair {
    std::int64_t d2;
    Point lo, hi;
    std::size_t ti, di;
  };
  std::vector<Pair> pairs;
  for (std::size_t ti = 0; ti < truth.size(); ++ti) {
    for (std::size_t di = 0; di < detected.size(); ++di) {
      const Point a = truth.nuclei[ti].at;
      const Point b = detected.nuclei[di].at;
      const auto d2 = squared_distance(a, b);
      if (static_cast<double>(d2) < r2) pairs.push_back({d2, std::min(a, b), std::max(a, b), ti, di});
    }
  }
  // Tie-break on the unordered point pair so swapping the roles matches the same pairs.
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.d2, a.lo, a.hi) < std::tie(b.d2, b.lo, b.hi);
  });
  std::vector<bool> t_used(truth.size()), d_used(detected.size());
  for (const Pair& p : pairs) {
    if (t_used[p.ti] || d_used[p.di]) continue;
    t_used[p.ti] = d_used[p.di] = true;
    ++m.true_positives;
  }
  const double tp = static_cast<double>(m.true_positives);
  m.recall_undefined = truth.empty();
  m.precision_undefined = detected.empty();
  m.recall = truth.empty() ? 1.0 : tp / static_cast<double>(truth.size());
  m.precision = detected.empty() ? 1.0 : tp / static_cast<double>(detected.size());
  m.f1 = (m.recall > 0.0 && m.precision > 0.0) ? 2.0 * m.recall * m.precision / (m.recall + m.precision) : 0.0;
  return m;
}

}  // namespace her2
