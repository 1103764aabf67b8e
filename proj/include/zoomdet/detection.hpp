#pragma once

#include <algorithm>
#include <numeric>
#include <variant>
#include <vector>

#include "zoomdet/error.hpp"
#include "zoomdet/geometry.hpp"

namespace zoomdet {

struct Detection {
  int class_id = 0;
  NormBox box;  // relative to the image the detector saw
  double confidence = 0;
  bool operator==(const Detection&) const = default;
};

inline double iou(const PixelBox& a, const PixelBox& b) {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

inline double iou(const NormBox& a, const NormBox& b) {
  return iou(PixelBox{a.x_min(), a.y_min(), a.x_max(), a.y_max()},
             PixelBox{b.x_min(), b.y_min(), b.x_max(), b.y_max()});
}

using AnyBox = std::variant<PixelBox, NormBox>;

// Runtime-typed overload; boxes in different coordinate kinds cannot be compared.
inline double iou(const AnyBox& a, const AnyBox& b) {
  if (a.index() != b.index()) throw KindError("iou between pixel and normalized boxes");
  return std::visit(
      [&](const auto& lhs) -> double {
        using T = std::decay_t<decltype(lhs)>;
        return iou(lhs, std::get<T>(b));
      },
      a);
}

// Greedy per-class suppression. Output is in descending confidence; equal
// confidences keep their input order.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.class_id == d.class_id && iou(k.box, d.box) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace zoomdet
