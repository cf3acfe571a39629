#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "her2/classifier.hpp"
#include "her2/color.hpp"
#include "her2/error.hpp"
#include "her2/geometry.hpp"
#include "her2/nucleus.hpp"
#include "her2/pipeline.hpp"
#include "her2/raster.hpp"
#include "her2/scorer.hpp"

/// Deterministic synthetic FOVs with exact per-cell ground truth.
namespace her2::synth {

/// mt19937_64 with hand-written conversions, so the same seed yields the same
/// stream under every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range, rejection-sampled to avoid modulo bias.
  int integer(int lo, int hi) {
    if (hi < lo) throw ValidationError("empty integer range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t v = 0;
    do {
      v = engine_();
    } while (v >= limit);
    return lo + static_cast<int>(v % span);
  }

  // Box-Muller.
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(integer(0, static_cast<int>(i - 1)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline bool is_intense(CellClass c) {
  return c == CellClass::IntenseComplete || c == CellClass::IntenseIncomplete;
}
inline bool is_incomplete(CellClass c) {
  return c == CellClass::IntenseIncomplete || c == CellClass::WeakIncomplete;
}

struct CellSpec {
  Point center;  // full-resolution pixel
  CellClass cls = CellClass::NoStaining;
  double gap_start = 0.0;  // radians; start of the unstained arc for incomplete cells
  friend bool operator==(const CellSpec&, const CellSpec&) = default;
};

struct FixtureSpec {
  std::uint64_t seed = 1;
  int width = 512;
  int height = 512;
  double pixel_size = kPixelSize40x;

  // Explicit cells, rendered as given.
  std::vector<CellSpec> cells;
  // Additional cells per class, placed on a jittered grid.
  std::array<int, kCellClassCount> random_counts{};

  double od_weak = 0.3;
  double od_intense = 0.7;
  double nucleus_radius_um = 3.0;
  double nucleus_od = 0.6;
  double ring_radius_um = 4.8;
  double ring_thickness_um = 1.4;
  double ring_edge_um = 0.3;
  double arc_gap_fraction = 0.35;
  // Peak deviation of the smooth texture component; per-pixel grain adds half as much again.
  double texture_amplitude = 0.0;
  double texture_scale_um = 2.0;
  double background_h = 0.03;
  double background_e = 0.08;

  double grid_spacing_um = 17.0;
  double grid_jitter_um = 1.5;

  // Small dense nuclei below the minimum nucleus area, placed between grid cells.
  int distractors = 0;
  double distractor_radius_um = 1.2;
  double distractor_od = 0.8;

  // Optional closed polygon; cells centred inside are flagged and rendered as dcis_class.
  std::vector<Vertex> dcis_region;
  CellClass dcis_class = CellClass::IntenseComplete;

  int heatmap_scale = 2;  // image pixels per heatmap pixel

  double outer_radius_um() const { return ring_radius_um + ring_thickness_um / 2.0 + ring_edge_um; }

  void validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("fixture dimensions must be positive");
    check_pixel_size(pixel_size);
    if (!(od_weak > 0.0 && od_weak < od_intense)) throw ValidationError("fixture needs 0 < od_weak < od_intense");
    if (!(arc_gap_fraction > 0.0 && arc_gap_fraction < 1.0)) {
      throw ValidationError("arc_gap_fraction must lie in (0, 1)");
    }
    if (!(nucleus_radius_um > 0.0 && nucleus_radius_um < ring_radius_um - ring_thickness_um / 2.0)) {
      throw ValidationError("nucleus must fit inside the membrane ring");
    }
    if (!(ring_thickness_um > 0.0) || !(ring_edge_um >= 0.0)) throw ValidationError("bad ring thickness");
    if (!(texture_amplitude >= 0.0) || !(texture_scale_um > 0.0)) throw ValidationError("bad texture parameters");
    if (!(grid_jitter_um >= 0.0)) throw ValidationError("grid_jitter_um must be >= 0");
    if (grid_spacing_um < 2.0 * (outer_radius_um() + grid_jitter_um)) {
      throw ValidationError("grid spacing too small: jittered rings could overlap");
    }
    if (heatmap_scale < 1) throw ValidationError("heatmap_scale must be >= 1");
    for (int n : random_counts) {
      if (n < 0) throw ValidationError("random cell counts must be >= 0");
    }
    if (distractors < 0) throw ValidationError("distractor count must be >= 0");
    if (!dcis_region.empty()) Polygon(dcis_region).validate(width, height);
  }
};

struct TruthCell {
  Point at;
  CellClass cls = CellClass::NoStaining;
  bool in_dcis = false;
  double gap_start = 0.0;
  friend bool operator==(const TruthCell&, const TruthCell&) = default;
};

struct Fixture {
  FixtureSpec spec;
  RasterImage image;
  std::vector<TruthCell> truth;  // raster order
  std::vector<Point> distractors;
  ScalarChannel heatmap;
  int heatmap_scale = 2;

  NucleusSet truth_nuclei(bool include_dcis = true) const {
    NucleusSet s{image.width(), image.height(), image.pixel_size(), {}};
    for (const auto& t : truth) {
      if (include_dcis || !t.in_dcis) s.nuclei.push_back({t.at, NucleusSource::Haematoxylin});
    }
    return s;
  }

  CellClassCounts truth_counts(bool include_dcis = true) const {
    CellClassCounts c;
    for (const auto& t : truth) {
      if (include_dcis || !t.in_dcis) c.add(t.cls);
    }
    return c;
  }
};

namespace detail {

inline int um_to_px(double um, double ps) { return static_cast<int>(std::lround(um / ps)); }

struct Placement {
  std::vector<CellSpec> cells;
  std::vector<Point> distractors;
};

inline Placement place(const FixtureSpec& spec, Rng& rng) {
  Placement out;
  out.cells = spec.cells;
  int random_total = 0;
  for (int n : spec.random_counts) random_total += n;
  if (random_total == 0 && spec.distractors == 0) return out;

  const double ps = spec.pixel_size;
  const int spacing = std::max(1, um_to_px(spec.grid_spacing_um, ps));
  const int jitter = static_cast<int>(std::floor(spec.grid_jitter_um / ps));
  const int margin = static_cast<int>(std::ceil((spec.outer_radius_um() + 1.0) / ps)) + jitter;
  std::vector<Point> slots;
  for (int y = margin; y <= spec.height - 1 - margin; y += spacing) {
    for (int x = margin; x <= spec.width - 1 - margin; x += spacing) slots.push_back({x, y});
  }
  // Explicit cells occupy their nearest slots.
  const std::int64_t clear2 = static_cast<std::int64_t>(spacing) * spacing;
  std::erase_if(slots, [&](Point s) {
    return std::any_of(spec.cells.begin(), spec.cells.end(),
                       [&](const CellSpec& c) { return squared_distance(s, c.center) < clear2; });
  });
  if (static_cast<std::size_t>(random_total) > slots.size()) {
    throw ValidationError("fixture " + std::to_string(spec.width) + "x" + std::to_string(spec.height) + " at " +
                          std::to_string(spec.pixel_size) + " um/px holds " + std::to_string(slots.size()) +
                          " cells, " + std::to_string(random_total) + " requested");
  }
  std::vector<Point> order = slots;
  rng.shuffle(order);
  std::size_t k = 0;
  for (CellClass c : kAllCellClasses) {
    for (int i = 0; i < spec.random_counts[static_cast<int>(c)]; ++i) {
      const Point s = order[k++];
      const Point at{s.x + rng.integer(-jitter, jitter), s.y + rng.integer(-jitter, jitter)};
      out.cells.push_back({at, c, rng.uniform(0.0, 2.0 * std::numbers::pi)});
    }
  }

  if (spec.distractors > 0) {
    // Centres of grid squares, as far from every slot as the lattice allows.
    std::vector<Point> mids;
    for (int y = margin + spacing / 2; y <= spec.height - 1 - margin; y += spacing) {
      for (int x = margin + spacing / 2; x <= spec.width - 1 - margin; x += spacing) mids.push_back({x, y});
    }
    const double min_gap_px = (spec.outer_radius_um() + spec.distractor_radius_um + 0.5) / ps;
    std::erase_if(mids, [&](Point m) {
      return std::any_of(out.cells.begin(), out.cells.end(), [&](const CellSpec& c) {
        return static_cast<double>(squared_distance(m, c.center)) < min_gap_px * min_gap_px;
      });
    });
    if (static_cast<std::size_t>(spec.distractors) > mids.size()) {
      throw ValidationError("fixture has room for " + std::to_string(mids.size()) + " distractors, " +
                            std::to_string(spec.distractors) + " requested");
    }
    rng.shuffle(mids);
    out.distractors.assign(mids.begin(), mids.begin() + spec.distractors);
    std::sort(out.distractors.begin(), out.distractors.end());
  }
  return out;
}

inline void check_overlaps(const FixtureSpec& spec, const std::vector<CellSpec>& cells) {
  const double min_px = 2.0 * spec.outer_radius_um() / spec.pixel_size;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!(cells[i].center.x >= 0 && cells[i].center.y >= 0 && cells[i].center.x < spec.width &&
          cells[i].center.y < spec.height)) {
      throw ValidationError("cell centre (" + std::to_string(cells[i].center.x) + ", " +
                            std::to_string(cells[i].center.y) + ") is outside the fixture");
    }
    for (std::size_t j = i + 1; j < cells.size(); ++j) {
      if (static_cast<double>(squared_distance(cells[i].center, cells[j].center)) < min_px * min_px) {
        throw ValidationError("cells at (" + std::to_string(cells[i].center.x) + ", " +
                              std::to_string(cells[i].center.y) + ") and (" + std::to_string(cells[j].center.x) +
                              ", " + std::to_string(cells[j].center.y) + ") overlap");
      }
    }
  }
}

// Smooth lattice noise (bilinear) in [-amp, amp] plus per-pixel grain in [-amp/2, amp/2].
inline void add_texture(Grid<float>& g, double amp, double scale_px, Rng& rng) {
  if (amp <= 0.0) return;
  const int step = std::max(1, static_cast<int>(std::lround(scale_px)));
  const int lw = g.width() / step + 2;
  const int lh = g.height() / step + 2;
  std::vector<float> lattice(static_cast<std::size_t>(lw) * lh);
  for (float& v : lattice) v = static_cast<float>(rng.uniform(-amp, amp));
  for (int y = 0; y < g.height(); ++y) {
    const int ly = y / step;
    const float fy = static_cast<float>(y % step) / static_cast<float>(step);
    for (int x = 0; x < g.width(); ++x) {
      const int lx = x / step;
      const float fx = static_cast<float>(x % step) / static_cast<float>(step);
      const float a = lattice[ly * lw + lx];
      const float b = lattice[ly * lw + lx + 1];
      const float c = lattice[(ly + 1) * lw + lx];
      const float d = lattice[(ly + 1) * lw + lx + 1];
      const float smooth = (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
      const float grain = static_cast<float>(rng.uniform(-amp / 2.0, amp / 2.0));
      g(x, y) += smooth + grain;
    }
  }
}

inline void render_dome(Grid<float>& g, Point c, double radius_um, double peak, double ps) {
  const int r = static_cast<int>(std::ceil(radius_um / ps)) + 1;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const int x = c.x + dx;
      const int y = c.y + dy;
      if (!g.in_bounds(x, y)) continue;
      const double t = std::hypot(dx, dy) * ps / radius_um;
      if (t >= 1.0) continue;
      const double t2 = t * t;
      g(x, y) = std::max(g(x, y), static_cast<float>(peak * (1.0 - t2 * t2)));
    }
  }
}

inline void render_membrane(Grid<float>& dab, const CellSpec& cell, const FixtureSpec& spec) {
  const double level = is_intense(cell.cls) ? spec.od_intense : spec.od_weak;
  const double ps = spec.pixel_size;
  const double big_r = spec.ring_radius_um;
  const double half_t = spec.ring_thickness_um / 2.0;
  const double gap = 2.0 * std::numbers::pi * spec.arc_gap_fraction;
  const int r = static_cast<int>(std::ceil(spec.outer_radius_um() / ps)) + 1;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const int x = cell.center.x + dx;
      const int y = cell.center.y + dy;
      if (!dab.in_bounds(x, y)) continue;
      const double rr = std::hypot(dx, dy) * ps;
      const double off = std::abs(rr - big_r);
      double v = 0.0;
      if (off <= half_t) {
        v = 1.0;
      } else if (off < half_t + spec.ring_edge_um) {
        v = 1.0 - (off - half_t) / spec.ring_edge_um;
      }
      if (v > 0.0 && is_incomplete(cell.cls)) {
        const double ang = std::atan2(static_cast<double>(dy), static_cast<double>(dx));
        const double rel = std::fmod(ang - cell.gap_start + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
        if (rel < gap) v = 0.0;
      }
      double value = level * v;
      // Faint cytoplasmic stain rising toward the membrane, lowest at the nucleus.
      if (rr < big_r - half_t) value = std::max(value, level * 0.1 * (rr / big_r) * (rr / big_r));
      dab(x, y) = std::max(dab(x, y), static_cast<float>(value));
    }
  }
}

}  // namespace detail

/// Renders one FOV. Same spec, same bytes.
inline Fixture generate_fov(const FixtureSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  detail::Placement placed = detail::place(spec, rng);
  detail::check_overlaps(spec, placed.cells);

  const Polygon dcis(spec.dcis_region);
  Fixture fx;
  fx.spec = spec;
  fx.heatmap_scale = spec.heatmap_scale;
  fx.distractors = placed.distractors;
  for (auto& c : placed.cells) {
    const bool in_dcis = !spec.dcis_region.empty() && dcis.contains(c.center);
    if (in_dcis) c.cls = spec.dcis_class;
    fx.truth.push_back({c.center, c.cls, in_dcis, c.gap_start});
  }
  std::sort(fx.truth.begin(), fx.truth.end(), [](const TruthCell& a, const TruthCell& b) { return a.at < b.at; });

  const double ps = spec.pixel_size;
  Grid<float> h(spec.width, spec.height, static_cast<float>(spec.background_h));
  Grid<float> e(spec.width, spec.height, static_cast<float>(spec.background_e));
  Grid<float> dab(spec.width, spec.height, 0.0f);
  for (const auto& c : placed.cells) {
    detail::render_dome(h, c.center, spec.nucleus_radius_um, spec.nucleus_od, ps);
    if (c.cls != CellClass::NoStaining) detail::render_membrane(dab, c, spec);
  }
  for (Point p : placed.distractors) detail::render_dome(h, p, spec.distractor_radius_um, spec.distractor_od, ps);

  const double tex_px = spec.texture_scale_um / ps;
  detail::add_texture(h, spec.texture_amplitude, tex_px, rng);
  detail::add_texture(e, spec.texture_amplitude, tex_px, rng);
  detail::add_texture(dab, spec.texture_amplitude, tex_px, rng);

  fx.image = RasterImage(spec.width, spec.height, ps);
  const StainMatrix m = default_stain_matrix();
  for (std::size_t i = 0; i < fx.image.size(); ++i) {
    fx.image[i] = stains_to_rgb(std::max(h[i], 0.0f), std::max(e[i], 0.0f), std::max(dab[i], 0.0f), m);
  }

  const int s = spec.heatmap_scale;
  const int hw = (spec.width + s - 1) / s;
  const int hh = (spec.height + s - 1) / s;
  fx.heatmap = ScalarChannel(hw, hh, ps * s);
  const double sigma = spec.nucleus_radius_um / 2.0 / (ps * s);
  const int reach = static_cast<int>(std::ceil(4.0 * sigma));
  for (const auto& t : fx.truth) {
    const double cx = (t.at.x + 0.5) / s - 0.5;
    const double cy = (t.at.y + 0.5) / s - 0.5;
    const int ix = static_cast<int>(std::lround(cx));
    const int iy = static_cast<int>(std::lround(cy));
    for (int y = iy - reach; y <= iy + reach; ++y) {
      for (int x = ix - reach; x <= ix + reach; ++x) {
        if (!fx.heatmap.in_bounds(x, y)) continue;
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        fx.heatmap(x, y) = std::max(fx.heatmap(x, y), static_cast<float>(std::exp(-d2 / (2.0 * sigma * sigma))));
      }
    }
  }
  return fx;
}

/// One cell of each class in a row, left to right in priority order.
inline FixtureSpec archetype_spec(std::uint64_t seed = 1, double pixel_size = kPixelSize40x) {
  FixtureSpec spec;
  spec.seed = seed;
  spec.pixel_size = pixel_size;
  const int step = static_cast<int>(std::lround(spec.grid_spacing_um / pixel_size));
  spec.width = step * 6;
  spec.height = step * 2;
  for (int i = 0; i < kCellClassCount; ++i) {
    spec.cells.push_back({{step * (i + 1), step}, kAllCellClasses[i], 0.25 * std::numbers::pi});
  }
  return spec;
}

/// Smallest square frame that holds n grid-placed cells.
inline int frame_side_for(int n, const FixtureSpec& spec) {
  const double ps = spec.pixel_size;
  const int spacing = std::max(1, detail::um_to_px(spec.grid_spacing_um, ps));
  const int jitter = static_cast<int>(std::floor(spec.grid_jitter_um / ps));
  const int margin = static_cast<int>(std::ceil((spec.outer_radius_um() + 1.0) / ps)) + jitter;
  const int per_side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(std::max(n, 1)))));
  return 2 * margin + (per_side - 1) * spacing + 1;
}

struct SlideSpec {
  std::uint64_t seed = 1;
  int fov_count = 5;
  int cells_per_fov = 100;
  std::array<double, kCellClassCount> proportions{0, 0, 0, 0, 1};
  FixtureSpec base;  // geometry and stain levels; its cells and counts are ignored
  bool allow_boundary = false;
  double boundary_margin = 0.02;
};

struct SlideBundle {
  std::vector<Fixture> fovs;
  CellClassCounts truth_counts;
  Her2Score expected;
};

/// A slide whose true score follows from its class mix; mixes within the
/// boundary margin of a rule threshold are refused unless explicitly allowed.
inline SlideBundle generate_slide(const SlideSpec& spec, const ScoreRules& rules = breast_rules()) {
  if (spec.fov_count < 1 || spec.cells_per_fov < 1) throw ValidationError("slide needs FOVs and cells");
  const int total = spec.fov_count * spec.cells_per_fov;
  std::array<int, kCellClassCount> want{};
  int assigned = 0;
  for (int c = 0; c + 1 < kCellClassCount; ++c) {
    if (!(spec.proportions[c] >= 0.0)) throw ValidationError("class proportions must be >= 0");
    want[c] = static_cast<int>(std::floor(spec.proportions[c] * total + 0.5));
    assigned += want[c];
  }
  if (assigned > total) throw ValidationError("class proportions exceed 1");
  want[kCellClassCount - 1] = total - assigned;

  SlideBundle out;
  for (int c = 0; c < kCellClassCount; ++c) out.truth_counts.add(kAllCellClasses[c], want[c]);
  SlideCounts sc;
  sc.counts = out.truth_counts;
  for (const auto& row : rules.rows) {
    const double p = sc.proportion(row.classes);
    if (!spec.allow_boundary && std::abs(p - row.threshold) < spec.boundary_margin - 1e-9) {
      throw ValidationError("class mix puts rule " + row.id + " at proportion " + std::to_string(p) +
                            ", within the ambiguity margin of its threshold");
    }
  }
  out.expected = score(sc, rules);

  // Deal cells class by class round-robin over the FOVs.
  std::vector<std::array<int, kCellClassCount>> per_fov(static_cast<std::size_t>(spec.fov_count));
  int k = 0;
  for (int c = 0; c < kCellClassCount; ++c) {
    for (int i = 0; i < want[c]; ++i) per_fov[static_cast<std::size_t>(k++ % spec.fov_count)][c]++;
  }
  for (int f = 0; f < spec.fov_count; ++f) {
    FixtureSpec fs = spec.base;
    fs.cells.clear();
    fs.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(f));
    fs.random_counts = per_fov[static_cast<std::size_t>(f)];
    out.fovs.push_back(generate_fov(fs));
  }
  return out;
}

}  // namespace her2::synth
