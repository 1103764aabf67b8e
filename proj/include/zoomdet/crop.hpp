#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "zoomdet/detection.hpp"
#include "zoomdet/error.hpp"
#include "zoomdet/geometry.hpp"
#include "zoomdet/labels.hpp"

namespace zoomdet {

// Integer-aligned crop rectangle inside a full frame.
struct CropRegion {
  PixelBox rect;
  int frame_width = 0, frame_height = 0;

  int width() const { return static_cast<int>(rect.width()); }
  int height() const { return static_cast<int>(rect.height()); }
  bool operator==(const CropRegion&) const = default;

  static CropRegion whole_frame(int width, int height) {
    return {PixelBox{0, 0, static_cast<double>(width), static_cast<double>(height)}, width, height};
  }
};

namespace detail {
// floor/ceil that ignore representation error just below/above an integer.
inline double snapped_floor(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : std::floor(v);
}
inline double snapped_ceil(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : std::ceil(v);
}
}  // namespace detail

// Grows each side by margin × the box extent on that axis, clamps to the
// frame and rounds outward to whole pixels.
inline CropRegion expand_and_clamp(const PixelBox& context_box, double margin, int frame_width,
                                   int frame_height) {
  if (frame_width <= 0 || frame_height <= 0) throw RangeError("frame dimensions must be positive");
  if (!(margin >= 0)) throw RangeError("crop margin must be >= 0");
  const double dx = margin * context_box.width();
  const double dy = margin * context_box.height();
  const double x0 = std::clamp(context_box.x_min - dx, 0.0, static_cast<double>(frame_width));
  const double y0 = std::clamp(context_box.y_min - dy, 0.0, static_cast<double>(frame_height));
  const double x1 = std::clamp(context_box.x_max + dx, 0.0, static_cast<double>(frame_width));
  const double y1 = std::clamp(context_box.y_max + dy, 0.0, static_cast<double>(frame_height));
  const PixelBox rect{detail::snapped_floor(x0), detail::snapped_floor(y0),
                      detail::snapped_ceil(x1), detail::snapped_ceil(y1)};
  if (!(rect.x_max > rect.x_min && rect.y_max > rect.y_min))
    throw DegenerateCrop("crop region has zero area");
  return {rect, frame_width, frame_height};
}

// Crop-normalized box -> full-frame-normalized box.
inline NormBox remap_box_to_fullframe(const NormBox& b, const CropRegion& region) {
  const double cw = region.rect.width(), ch = region.rect.height();
  const double W = region.frame_width, H = region.frame_height;
  return {(region.rect.x_min + b.cx * cw) / W, (region.rect.y_min + b.cy * ch) / H, b.w * cw / W,
          b.h * ch / H};
}

// Full-frame-normalized box -> crop-normalized box (inverse of the above).
inline NormBox remap_box_to_crop(const NormBox& b, const CropRegion& region) {
  const double cw = region.rect.width(), ch = region.rect.height();
  const double W = region.frame_width, H = region.frame_height;
  return {(b.cx * W - region.rect.x_min) / cw, (b.cy * H - region.rect.y_min) / ch, b.w * W / cw,
          b.h * H / ch};
}

inline Detection remap_to_fullframe(const Detection& det, const CropRegion& region) {
  return {det.class_id, remap_box_to_fullframe(det.box, region), det.confidence};
}

inline Detection remap_to_crop(const Detection& det, const CropRegion& region) {
  return {det.class_id, remap_box_to_crop(det.box, region), det.confidence};
}

// Clips a full-frame box to the crop and expresses it in crop coordinates;
// empty when the box does not overlap the crop.
inline std::optional<NormBox> clip_to_crop(const NormBox& b, const CropRegion& region) {
  const PixelBox px = pixel_from_norm(b, region.frame_width, region.frame_height);
  const PixelBox clipped{std::max(px.x_min, region.rect.x_min), std::max(px.y_min, region.rect.y_min),
                         std::min(px.x_max, region.rect.x_max), std::min(px.y_max, region.rect.y_max)};
  if (!(clipped.x_max > clipped.x_min && clipped.y_max > clipped.y_min)) return std::nullopt;
  const PixelBox local{clipped.x_min - region.rect.x_min, clipped.y_min - region.rect.y_min,
                       clipped.x_max - region.rect.x_min, clipped.y_max - region.rect.y_min};
  return norm_from_pixel(local, region.rect.width(), region.rect.height());
}

// Ground truth as seen through the crop: boxes intersected with the crop and
// re-normalized; boxes outside the crop are dropped.
inline std::vector<LabeledBox> crop_labels(const std::vector<LabeledBox>& labels,
                                           const CropRegion& region) {
  std::vector<LabeledBox> out;
  for (const auto& l : labels)
    if (auto b = clip_to_crop(l.box, region)) out.push_back({l.class_id, *b});
  return out;
}

}  // namespace zoomdet
