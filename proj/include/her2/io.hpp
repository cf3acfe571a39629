#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "her2/error.hpp"
#include "her2/raster.hpp"

namespace her2::io {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// PNG, JPEG or TIFF bytes to an 8-bit RGB image. Alpha is dropped; grey is expanded.
inline RasterImage decode_image(std::span<const std::uint8_t> bytes, double pixel_size) {
  if (bytes.empty()) throw DecodeError("image data is empty");
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw DecodeError(std::string("image decode failed: ") + e.what());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) throw DecodeError("unsupported or corrupt image data");
  RasterImage img(bgr.cols, bgr.rows, pixel_size);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* src = bgr.ptr<cv::Vec3b>(y);
    auto dst = img.row(y);
    for (int x = 0; x < bgr.cols; ++x) dst[x] = {src[x][2], src[x][1], src[x][0]};
  }
  return img;
}

inline RasterImage read_image(const std::filesystem::path& path, double pixel_size) {
  const auto bytes = read_file(path);
  try {
    return decode_image(bytes, pixel_size);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

inline std::vector<std::uint8_t> encode(const cv::Mat& m, const std::string& ext, const std::vector<int>& flags = {}) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(ext, m, out, flags)) throw Error("image encode failed (" + ext + ")");
  return out;
}

inline cv::Mat to_bgr(const RasterImage& image) {
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto src = image.row(y);
    auto* dst = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x) dst[x] = {src[x].b, src[x].g, src[x].r};
  }
  return bgr;
}

inline std::vector<std::uint8_t> encode_png(const RasterImage& image) { return encode(to_bgr(image), ".png"); }

/// Uncompressed TIFF.
inline std::vector<std::uint8_t> encode_tiff(const RasterImage& image) {
  return encode(to_bgr(image), ".tiff", {cv::IMWRITE_TIFF_COMPRESSION, 1});
}

inline std::vector<std::uint8_t> encode_jpeg(const RasterImage& image, int quality = 95) {
  return encode(to_bgr(image), ".jpg", {cv::IMWRITE_JPEG_QUALITY, quality});
}

inline void write_png(const std::filesystem::path& path, const RasterImage& image) {
  write_file(path, encode_png(image));
}

/// 1-bit PNG: foreground white, background black.
inline std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto src = mask.row(y);
    auto* dst = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) dst[x] = src[x] ? 255 : 0;
  }
  return encode(m, ".png", {cv::IMWRITE_PNG_BILEVEL, 1});
}

inline BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes) {
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  const cv::Mat g = cv::imdecode(raw, cv::IMREAD_GRAYSCALE);
  if (g.empty()) throw DecodeError("mask decode failed");
  BinaryMask out(g.cols, g.rows);
  for (int y = 0; y < g.rows; ++y) {
    const auto* src = g.ptr<std::uint8_t>(y);
    for (int x = 0; x < g.cols; ++x) out.set(x, y, src[x] >= 128);
  }
  return out;
}

inline void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  write_file(path, encode_mask_png(mask));
}

/// Nucleus-probability heatmap and its resolution relative to the image it belongs to.
struct Heatmap {
  ScalarChannel values;
  double scale = 1.0;  // image pixels per heatmap pixel
};

// Flat heatmap sidecar, all fields little-endian:
//   bytes 0-3   magic "H2HM"
//   bytes 4-7   uint32 width
//   bytes 8-11  uint32 height
//   bytes 12-15 float32 scale (image pixels per heatmap pixel)
//   then width*height float32 values, row-major.
inline constexpr char kHeatmapMagic[4] = {'H', '2', 'H', 'M'};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t v = 0;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}
inline float get_f32(const std::uint8_t* p) {
  const std::uint32_t v = get_u32(p);
  float f = 0.0f;
  std::memcpy(&f, &v, 4);
  return f;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_heatmap_binary(const ScalarChannel& values, double scale) {
  std::vector<std::uint8_t> out(kHeatmapMagic, kHeatmapMagic + 4);
  detail::put_u32(out, static_cast<std::uint32_t>(values.width()));
  detail::put_u32(out, static_cast<std::uint32_t>(values.height()));
  detail::put_f32(out, static_cast<float>(scale));
  out.reserve(out.size() + values.size() * 4);
  for (float v : values.values()) detail::put_f32(out, v);
  return out;
}

/// Single-channel 16-bit PNG; values in [0, 1] are stored as round(v * 65535).
inline std::vector<std::uint8_t> encode_heatmap_png16(const ScalarChannel& values) {
  cv::Mat m(values.height(), values.width(), CV_16UC1);
  for (int y = 0; y < values.height(); ++y) {
    auto src = values.row(y);
    auto* dst = m.ptr<std::uint16_t>(y);
    for (int x = 0; x < values.width(); ++x) {
      dst[x] = static_cast<std::uint16_t>(std::lround(std::clamp(src[x], 0.0f, 1.0f) * 65535.0f));
    }
  }
  return encode(m, ".png");
}

/// Reads either sidecar form. PNG heatmaps take their scale from the image width.
inline Heatmap decode_heatmap(std::span<const std::uint8_t> bytes, int image_width, int image_height,
                              double image_pixel_size) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kHeatmapMagic, 4) == 0) {
    if (bytes.size() < 16) throw DecodeError("heatmap header truncated");
    const std::uint32_t w = detail::get_u32(bytes.data() + 4);
    const std::uint32_t h = detail::get_u32(bytes.data() + 8);
    const double scale = detail::get_f32(bytes.data() + 12);
    if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) throw DecodeError("heatmap dimensions out of range");
    if (bytes.size() != 16 + static_cast<std::size_t>(w) * h * 4) throw DecodeError("heatmap payload size mismatch");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DecodeError("heatmap scale must be positive");
    Heatmap hm{ScalarChannel(static_cast<int>(w), static_cast<int>(h), image_pixel_size * scale), scale};
    for (std::size_t i = 0; i < hm.values.size(); ++i) hm.values[i] = detail::get_f32(bytes.data() + 16 + 4 * i);
    if (!hm.values.all_finite()) throw DecodeError("heatmap contains non-finite values");
    return hm;
  }
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat g;
  try {
    g = cv::imdecode(raw, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  } catch (const cv::Exception& e) {
    throw DecodeError(std::string("heatmap decode failed: ") + e.what());
  }
  if (g.empty()) throw DecodeError("heatmap is neither an H2HM grid nor a decodable image");
  const double scale = static_cast<double>(image_width) / g.cols;
  if (std::abs(scale * g.rows - image_height) > scale) {
    throw DecodeError("heatmap aspect ratio does not match the image");
  }
  const double denom = g.depth() == CV_16U ? 65535.0 : 255.0;
  Heatmap hm{ScalarChannel(g.cols, g.rows, image_pixel_size * scale), scale};
  for (int y = 0; y < g.rows; ++y) {
    for (int x = 0; x < g.cols; ++x) {
      const double v = g.depth() == CV_16U ? g.at<std::uint16_t>(y, x) : g.at<std::uint8_t>(y, x);
      hm.values(x, y) = static_cast<float>(v / denom);
    }
  }
  return hm;
}

}  // namespace her2::io
