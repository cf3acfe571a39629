#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "her2/classifier.hpp"
#include "her2/color.hpp"
#include "her2/filter.hpp"
#include "her2/geometry.hpp"
#include "her2/membrane.hpp"
#include "her2/nucleus.hpp"
#include "her2/parallel.hpp"
#include "her2/raster.hpp"

namespace her2 {

inline constexpr double kPixelSize20x = 0.424;
inline constexpr double kPixelSize40x = 0.212;
inline constexpr int kNominalFovSide = 3008;

enum class Objective { X20, X40 };

inline std::string_view to_string(Objective o) { return o == Objective::X20 ? "20x" : "40x"; }

inline Objective objective_from_string(std::string_view s) {
  if (s == "20x" || s == "20") return Objective::X20;
  if (s == "40x" || s == "40") return Objective::X40;
  throw ValidationError("objective must be 20x or 40x, got '" + std::string(s) + "'");
}

inline double pixel_size_of(Objective o) { return o == Objective::X20 ? kPixelSize20x : kPixelSize40x; }

/// Non-empty when a frame does not have the nominal FOV size for its objective.
inline std::string fov_size_warning(int width, int height, Objective o) {
  if (width == kNominalFovSide && height == kNominalFovSide) return {};
  return "image is " + std::to_string(width) + "x" + std::to_string(height) + ", expected " +
         std::to_string(kNominalFovSide) + "x" + std::to_string(kNominalFovSide) + " for " + std::string(to_string(o));
}

struct PipelineParams {
  DetectorParams detector;
  MembraneParams membrane;
  ClassifierOptions classifier;
  StainMatrix stains = default_stain_matrix();

  void validate() const {
    detector.validate();
    membrane.validate();
    (void)invert(stains);
  }
};

struct StageTimings {
  double detection_s = 0.0;  // includes colour deconvolution
  double membrane_s = 0.0;   // downsampling through point-set construction
  double classification_s = 0.0;
  double total_s = 0.0;
};

/// Everything computed for one FOV.
struct FovAnalysis {
  NucleusSet detected;   // before exclusions
  NucleusSet nuclei;     // after exclusions; what gets classified
  std::vector<std::size_t> detected_index;  // nuclei[i] == detected.nuclei[detected_index[i]]
  ClassifiedCells cells;
  CellClassCounts counts;
  MembraneMaskBundle membranes;
  StageTimings timings;
};

/// Per-nucleus manual classes, keyed by index into the detected (pre-exclusion) list.
using ClassOverrides = std::map<std::size_t, CellClass>;

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Working-resolution DAB: the deconvolved DAB channel averaged over 2x2 blocks.
inline ScalarChannel working_dab(const StainChannels& hed) { return downsample2(hed.dab); }

inline void check_exclusions(const std::vector<Polygon>& polys, int width, int height) {
  for (const auto& p : polys) p.validate(width, height);
}

/// Drops nuclei whose pixel centre lies inside any exclusion polygon.
inline std::pair<NucleusSet, std::vector<std::size_t>> apply_exclusions(const NucleusSet& detected,
                                                                        const std::vector<Polygon>& exclusions) {
  NucleusSet kept{detected.width, detected.height, detected.pixel_size, {}};
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < detected.nuclei.size(); ++i) {
    const Point p = detected.nuclei[i].at;
    const bool excluded =
        std::any_of(exclusions.begin(), exclusions.end(), [&](const Polygon& poly) { return poly.contains(p); });
    if (excluded) continue;
    kept.nuclei.push_back(detected.nuclei[i]);
    index.push_back(i);
  }
  return {std::move(kept), std::move(index)};
}

/// Classification plus counting for an already-described FOV; overrides win over computed classes.
inline void classify_fov(FovAnalysis& a, const std::vector<Polygon>& exclusions, const ClassOverrides& overrides,
                         const ClassifierOptions& options) {
  auto [kept, index] = apply_exclusions(a.detected, exclusions);
  a.nuclei = std::move(kept);
  a.detected_index = std::move(index);
  a.cells = classify_cells(a.nuclei, a.membranes, options);
  for (std::size_t i = 0; i < a.cells.cells.size(); ++i) {
    auto it = overrides.find(a.detected_index[i]);
    if (it != overrides.end()) a.cells.cells[i].cls = it->second;
  }
  a.counts = counts(a.cells);
}

/// Full per-FOV pipeline. Detection runs at full resolution, everything else at half.
inline FovAnalysis analyze_fov(const RasterImage& image, const Detector& detector, const PipelineParams& params,
                               const std::vector<Polygon>& exclusions = {}, const ClassOverrides& overrides = {},
                               ThreadPool* pool = nullptr) {
  params.validate();
  check_exclusions(exclusions, image.width(), image.height());
  if (image.width() < 2 || image.height() < 2) throw ValidationError("image must be at least 2x2 pixels");
  FovAnalysis a;
  detail::Stopwatch total;
  detail::Stopwatch sw;
  const StainChannels hed = rgb_to_hed(image, params.stains, pool);
  a.detected = detector.detect(image, hed, pool);
  a.timings.detection_s = sw.lap();
  a.membranes = describe_membranes(working_dab(hed), params.membrane);
  a.timings.membrane_s = sw.lap();
  classify_fov(a, exclusions, overrides, params.classifier);
  a.timings.classification_s = sw.lap();
  a.timings.total_s = total.lap();
  return a;
}

/// Re-runs the membrane and classification stages on a cached working DAB channel, keeping detections.
inline void redescribe_fov(FovAnalysis& a, const ScalarChannel& dab_working, const PipelineParams& params,
                           const std::vector<Polygon>& exclusions, const ClassOverrides& overrides) {
  params.validate();
  detail::Stopwatch sw;
  a.membranes = describe_membranes(dab_working, params.membrane);
  a.timings.membrane_s = sw.lap();
  classify_fov(a, exclusions, overrides, params.classifier);
  a.timings.classification_s = sw.lap();
}

/// Overlay colours, one per class in priority order.
inline constexpr std::array<Rgb, kCellClassCount> kClassColours{{
    {220, 20, 60},   // intense complete: crimson
    {255, 140, 0},   // intense incomplete: orange
    {30, 144, 255},  // weak complete: blue
    {0, 206, 209},   // weak incomplete: turquoise
    {50, 205, 50},   // no staining: green
}};
inline constexpr Rgb kCompleteContourColour{255, 0, 255};
inline constexpr Rgb kIncompleteContourColour{255, 215, 0};

/// Draws membrane contours (complete vs incomplete) and class-coloured nucleus dots on the image.
inline RasterImage render_overlay(const RasterImage& image, const FovAnalysis& a, int dot_radius = 4) {
  RasterImage out = image;
  const int s = a.membranes.scale;
  for (const auto& c : a.membranes.contour_labels) {
    const Rgb colour = c.complete ? kCompleteContourColour : kIncompleteContourColour;
    for (Point p : c.polyline) {
      for (int dy = 0; dy < s; ++dy) {
        for (int dx = 0; dx < s; ++dx) {
          const int x = p.x * s + dx;
          const int y = p.y * s + dy;
          if (out.in_bounds(x, y)) out(x, y) = colour;
        }
      }
    }
  }
  const int r2 = dot_radius * dot_radius;
  for (const auto& cell : a.cells.cells) {
    const Rgb colour = kClassColours[static_cast<int>(cell.cls)];
    for (int dy = -dot_radius; dy <= dot_radius; ++dy) {
      for (int dx = -dot_radius; dx <= dot_radius; ++dx) {
        if (dx * dx + dy * dy > r2) continue;
        const int x = cell.at.x + dx;
        const int y = cell.at.y + dy;
        if (out.in_bounds(x, y)) out(x, y) = colour;
      }
    }
  }
  return out;
}

}  // namespace her2
