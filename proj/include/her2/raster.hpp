#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "her2/error.hpp"
#include "her2/geometry.hpp"

namespace her2 {

/// Dense row-major 2-D grid. Base for every raster type in the library.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ValidationError("grid dimensions must be positive");
    values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool in_bounds(Point p) const { return in_bounds(p.x, p.y); }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) { return values_[index(x, y)]; }
  const T& operator()(int x, int y) const { return values_[index(x, y)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> row(int y) { return {values_.data() + index(0, y), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int y) const {
    return {values_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool same_shape(const auto& other) const { return width_ == other.width() && height_ == other.height(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

struct Rgb {
  std::uint8_t r = 255;
  std::uint8_t g = 255;
  std::uint8_t b = 255;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline void check_pixel_size(double pixel_size) {
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) throw ValidationError("pixel size must be positive");
}

/// 8-bit RGB image with isotropic pixel size in micrometers.
class RasterImage : public Grid<Rgb> {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, double pixel_size, Rgb fill = {})
      : Grid<Rgb>(width, height, fill), pixel_size_(pixel_size) {
    check_pixel_size(pixel_size);
  }

  double pixel_size() const { return pixel_size_; }
  void set_pixel_size(double pixel_size) {
    check_pixel_size(pixel_size);
    pixel_size_ = pixel_size;
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  double pixel_size_ = 1.0;
};

/// Real-valued grid; stain channels carry optical density.
class ScalarChannel : public Grid<float> {
 public:
  ScalarChannel() = default;
  ScalarChannel(int width, int height, double pixel_size, float fill = 0.0f)
      : Grid<float>(width, height, fill), pixel_size_(pixel_size) {
    check_pixel_size(pixel_size);
  }

  double pixel_size() const { return pixel_size_; }

  bool all_finite() const {
    for (float v : values()) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const ScalarChannel&, const ScalarChannel&) = default;

 private:
  double pixel_size_ = 1.0;
};

/// Boolean grid stored one byte per pixel (0 or 1).
class BinaryMask : public Grid<std::uint8_t> {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false) : Grid<std::uint8_t>(width, height, fill ? 1 : 0) {}

  bool test(int x, int y) const { return (*this)(x, y) != 0; }
  bool test(Point p) const { return test(p.x, p.y); }
  void set(int x, int y, bool on = true) { (*this)(x, y) = on ? 1 : 0; }
  void set(Point p, bool on = true) { set(p.x, p.y, on); }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : values()) n += v;
    return n;
  }

  bool subset_of(const BinaryMask& other) const {
    if (!same_shape(other)) throw ValidationError("mask shape mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
      if ((*this)[i] && !other[i]) return false;
    }
    return true;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

inline BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw ValidationError("mask shape mismatch");
  BinaryMask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] & b[i];
  return out;
}

inline BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw ValidationError("mask shape mismatch");
  BinaryMask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] | b[i];
  return out;
}

/// Set of foreground coordinates of a mask, indexed by that mask's frame.
/// Backed by the mask itself so membership is O(1) and duplicates cannot occur.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(BinaryMask mask) : mask_(std::move(mask)), count_(mask_.count()) {}

  static PointSet from_points(int width, int height, std::span<const Point> points) {
    BinaryMask m(width, height);
    for (Point p : points) {
      if (!m.in_bounds(p)) throw CoordinateError("point outside point-set frame");
      m.set(p);
    }
    return PointSet(std::move(m));
  }

  int width() const { return mask_.width(); }
  int height() const { return mask_.height(); }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  bool contains(Point p) const { return mask_.in_bounds(p) && mask_.test(p); }

  // Raster order.
  std::vector<Point> points() const {
    std::vector<Point> out;
    out.reserve(count_);
    for (int y = 0; y < mask_.height(); ++y) {
      auto r = mask_.row(y);
      for (int x = 0; x < mask_.width(); ++x) {
        if (r[x]) out.push_back({x, y});
      }
    }
    return out;
  }

  const BinaryMask& mask() const { return mask_; }

  bool subset_of(const PointSet& other) const { return mask_.subset_of(other.mask_); }

 private:
  BinaryMask mask_;
  std::size_t count_ = 0;
};

struct StainChannels {
  ScalarChannel h;
  ScalarChannel e;
  ScalarChannel dab;
};

}  // namespace her2
