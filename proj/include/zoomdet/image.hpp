#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "zoomdet/error.hpp"

namespace zoomdet {

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 255;
  bool operator==(const Rgba&) const = default;
};

// 8-bit RGBA raster, row-major, 4 bytes per pixel.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, Rgba fill = {}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ImageError("image dimensions must be positive");
    pixels_.resize(static_cast<std::size_t>(width) * height * 4);
    for (std::size_t i = 0; i < pixels_.size(); i += 4) {
      pixels_[i] = fill.r;
      pixels_[i + 1] = fill.g;
      pixels_[i + 2] = fill.b;
      pixels_[i + 3] = fill.a;
    }
  }
  RasterImage(int width, int height, std::vector<std::uint8_t> rgba)
      : width_(width), height_(height), pixels_(std::move(rgba)) {
    if (width <= 0 || height <= 0) throw ImageError("image dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height * 4)
      throw ImageError("RGBA buffer length does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  std::span<const std::uint8_t> data() const { return pixels_; }
  std::span<std::uint8_t> data() { return pixels_; }

  Rgba at(int x, int y) const {
    const std::uint8_t* p = &pixels_[offset(x, y)];
    return {p[0], p[1], p[2], p[3]};
  }
  void set(int x, int y, Rgba c) {
    std::uint8_t* p = &pixels_[offset(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
    p[3] = c.a;
  }

  void fill_rect(int x0, int y0, int x1, int y1, Rgba c) {
    x0 = std::clamp(x0, 0, width_);
    x1 = std::clamp(x1, 0, width_);
    y0 = std::clamp(y0, 0, height_);
    y1 = std::clamp(y1, 0, height_);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) set(x, y, c);
  }

  // Sub-image [x0,x1)×[y0,y1); the rectangle must lie inside the image.
  RasterImage crop(int x0, int y0, int x1, int y1) const {
    if (x0 < 0 || y0 < 0 || x1 > width_ || y1 > height_ || x0 >= x1 || y0 >= y1)
      throw ImageError("crop rectangle outside image");
    RasterImage out(x1 - x0, y1 - y0);
    for (int y = y0; y < y1; ++y)
      std::copy_n(&pixels_[offset(x0, y)], static_cast<std::size_t>(x1 - x0) * 4,
                  &out.pixels_[out.offset(0, y - y0)]);
    return out;
  }

  std::vector<std::uint8_t> to_rgb8() const {
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width_) * height_ * 3);
    for (std::size_t i = 0, j = 0; i < pixels_.size(); i += 4, j += 3) {
      rgb[j] = pixels_[i];
      rgb[j + 1] = pixels_[i + 1];
      rgb[j + 2] = pixels_[i + 2];
    }
    return rgb;
  }

  static RasterImage from_rgb8(int width, int height, std::span<const std::uint8_t> rgb) {
    if (width <= 0 || height <= 0 || rgb.size() != static_cast<std::size_t>(width) * height * 3)
      throw ImageError("RGB buffer length does not match dimensions");
    std::vector<std::uint8_t> rgba(static_cast<std::size_t>(width) * height * 4);
    for (std::size_t i = 0, j = 0; j < rgb.size(); i += 4, j += 3) {
      rgba[i] = rgb[j];
      rgba[i + 1] = rgb[j + 1];
      rgba[i + 2] = rgb[j + 2];
      rgba[i + 3] = 255;
    }
    return RasterImage(width, height, std::move(rgba));
  }

  bool operator==(const RasterImage&) const = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 4;
  }

  int width_ = 0, height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Bilinear resize of all four channels.
inline RasterImage resize_bilinear(const RasterImage& src, int width, int height) {
  if (src.width() == width && src.height() == height) return src;
  RasterImage out(width, height);
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double tx = fx - x0;
      const Rgba a = src.at(x0, y0), b = src.at(x1, y0), c = src.at(x0, y1), d = src.at(x1, y1);
      auto mix = [&](std::uint8_t pa, std::uint8_t pb, std::uint8_t pc, std::uint8_t pd) {
        const double v = (pa * (1 - tx) + pb * tx) * (1 - ty) + (pc * (1 - tx) + pd * tx) * ty;
        return static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
      };
      out.set(x, y, {mix(a.r, b.r, c.r, d.r), mix(a.g, b.g, c.g, d.g), mix(a.b, b.b, c.b, d.b),
                     mix(a.a, b.a, c.a, d.a)});
    }
  }
  return out;
}

}  // namespace zoomdet
