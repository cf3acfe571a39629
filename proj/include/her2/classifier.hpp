#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "her2/error.hpp"
#include "her2/membrane.hpp"
#include "her2/nucleus.hpp"

namespace her2 {

/// Staining categories in priority order.
enum class CellClass : int {
  IntenseComplete = 0,
  IntenseIncomplete = 1,
  WeakComplete = 2,
  WeakIncomplete = 3,
  NoStaining = 4,
};

inline constexpr int kCellClassCount = 5;
inline constexpr std::array<CellClass, kCellClassCount> kAllCellClasses{
    CellClass::IntenseComplete, CellClass::IntenseIncomplete, CellClass::WeakComplete, CellClass::WeakIncomplete,
    CellClass::NoStaining};

inline std::string_view to_string(CellClass c) {
  switch (c) {
    case CellClass::IntenseComplete: return "IntenseComplete";
    case CellClass::IntenseIncomplete: return "IntenseIncomplete";
    case CellClass::WeakComplete: return "WeakComplete";
    case CellClass::WeakIncomplete: return "WeakIncomplete";
    case CellClass::NoStaining: return "NoStaining";
  }
  return "?";
}

inline CellClass cell_class_from_string(std::string_view s) {
  for (CellClass c : kAllCellClasses) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown cell class: " + std::string(s));
}

struct ClassifierOptions {
  // Literal weak-incomplete rule: tests the enclosed weak set again, so it
  // never fires. Off by default, which tests the dilated weak set.
  bool literal_weak_incomplete = false;
  friend bool operator==(const ClassifierOptions&, const ClassifierOptions&) = default;
};

struct ClassifiedCell {
  Point at;  // full resolution
  CellClass cls = CellClass::NoStaining;
  friend bool operator==(const ClassifiedCell&, const ClassifiedCell&) = default;
};

struct ClassifiedCells {
  std::vector<ClassifiedCell> cells;
};

struct CellClassCounts {
  std::array<std::int64_t, kCellClassCount> by_class{};
  std::int64_t total = 0;

  std::int64_t operator[](CellClass c) const { return by_class[static_cast<int>(c)]; }
  void add(CellClass c, std::int64_t n = 1) {
    by_class[static_cast<int>(c)] += n;
    total += n;
  }
  CellClassCounts& operator+=(const CellClassCounts& o) {
    for (int i = 0; i < kCellClassCount; ++i) by_class[i] += o.by_class[i];
    total += o.total;
    return *this;
  }
  friend bool operator==(const CellClassCounts&, const CellClassCounts&) = default;
};

/// Full-resolution coordinate to the working-resolution pixel containing it.
inline Point to_working(Point full, const MembraneMaskBundle& bundle) {
  const Point w{full.x / bundle.scale, full.y / bundle.scale};
  if (full.x < 0 || full.y < 0 || !bundle.p_weak.mask().in_bounds(w)) {
    throw CoordinateError("nucleus (" + std::to_string(full.x) + ", " + std::to_string(full.y) +
                          ") lies outside the membrane frame");
  }
  return w;
}

/// First-match-wins over the priority order.
inline CellClass classify_point(Point working, const MembraneMaskBundle& b, const ClassifierOptions& opt = {}) {
  if (b.p_intense_enclosed.contains(working)) return CellClass::IntenseComplete;
  if (b.p_intense.contains(working)) return CellClass::IntenseIncomplete;
  if (b.p_weak_enclosed.contains(working)) return CellClass::WeakComplete;
  const PointSet& weak_incomplete_set = opt.literal_weak_incomplete ? b.p_weak_enclosed : b.p_weak;
  if (weak_incomplete_set.contains(working)) return CellClass::WeakIncomplete;
  return CellClass::NoStaining;
}

inline ClassifiedCells classify_cells(std::span<const Point> nuclei, const MembraneMaskBundle& bundle,
                                      const ClassifierOptions& opt = {}) {
  ClassifiedCells out;
  out.cells.reserve(nuclei.size());
  for (Point p : nuclei) out.cells.push_back({p, classify_point(to_working(p, bundle), bundle, opt)});
  return out;
}

inline ClassifiedCells classify_cells(const NucleusSet& nuclei, const MembraneMaskBundle& bundle,
                                      const ClassifierOptions& opt = {}) {
  const auto pts = nuclei.points();
  return classify_cells(std::span<const Point>(pts), bundle, opt);
}

inline CellClassCounts counts(const ClassifiedCells& classified) {
  CellClassCounts c;
  for (const auto& cell : classified.cells) c.add(cell.cls);
  return c;
}

}  // namespace her2
