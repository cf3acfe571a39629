#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "her2/error.hpp"

namespace her2 {

// Integer pixel coordinate. Ordered by (y, x) so that sorting gives raster order.
struct Point {
  int x = 0;
  int y = 0;

  friend bool operator==(const Point&, const Point&) = default;
  friend std::strong_ordering operator<=>(const Point& a, const Point& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

inline std::int64_t squared_distance(Point a, Point b) {
  const std::int64_t dx = a.x - b.x;
  const std::int64_t dy = a.y - b.y;
  return dx * dx + dy * dy;
}

struct Vertex {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vertex&, const Vertex&) = default;
};

/// Closed pixel polygon. The vertex ring repeats its first vertex at the end.
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Vertex> ring) : ring_(std::move(ring)) {}

  const std::vector<Vertex>& ring() const { return ring_; }

  bool closed() const { return ring_.size() >= 4 && ring_.front() == ring_.back(); }

  // Even-odd rule on the pixel center (x, y).
  bool contains(double x, double y) const {
    bool inside = false;
    const std::size_t n = ring_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Vertex& a = ring_[i];
      const Vertex& b = ring_[j];
      if ((a.y > y) != (b.y > y)) {
        const double xc = (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x;
        if (x < xc) inside = !inside;
      }
    }
    return inside;
  }

  bool contains(Point p) const { return contains(static_cast<double>(p.x), static_cast<double>(p.y)); }

  /// Throws ValidationError if the ring is open, degenerate, self-intersecting,
  /// or leaves the [0, width] x [0, height] frame.
  void validate(int width, int height) const {
    if (!closed()) throw ValidationError("polygon is not closed (first vertex must repeat at the end)");
    const std::size_t edges = ring_.size() - 1;
    if (edges < 3) throw ValidationError("polygon needs at least three distinct vertices");
    for (const Vertex& v : ring_) {
      if (v.x < 0 || v.y < 0 || v.x > width || v.y > height) {
        throw ValidationError("polygon vertex out of bounds");
      }
    }
    if (std::abs(signed_area()) <= 0.0) throw ValidationError("polygon has zero area");
    for (std::size_t i = 0; i < edges; ++i) {
      for (std::size_t j = i + 1; j < edges; ++j) {
        const bool adjacent = (j == i + 1) || (i == 0 && j == edges - 1);
        if (adjacent) continue;
        if (segments_intersect(ring_[i], ring_[i + 1], ring_[j], ring_[j + 1])) {
          throw ValidationError("polygon is self-intersecting");
        }
      }
    }
  }

  double signed_area() const {
    double a = 0.0;
    for (std::size_t i = 0; i + 1 < ring_.size(); ++i) {
      a += ring_[i].x * ring_[i + 1].y - ring_[i + 1].x * ring_[i].y;
    }
    return 0.5 * a;
  }

 private:
  static double cross(Vertex o, Vertex a, Vertex b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  }
  static bool on_segment(Vertex p, Vertex a, Vertex b) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
  }
  static bool segments_intersect(Vertex p1, Vertex p2, Vertex q1, Vertex q2) {
    const double d1 = cross(q1, q2, p1);
    const double d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1);
    const double d4 = cross(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    if (d1 == 0 && on_segment(p1, q1, q2)) return true;
    if (d2 == 0 && on_segment(p2, q1, q2)) return true;
    if (d3 == 0 && on_segment(q1, p1, p2)) return true;
    if (d4 == 0 && on_segment(q2, p1, p2)) return true;
    return false;
  }

  std::vector<Vertex> ring_;
};

}  // namespace her2
