#pragma once

// Single-stage (all detectors on the full frame) and two-stage hierarchical
// detection: find the context object, crop around it, detect small objects in
// the crop and map them back to full-frame coordinates.

#include <chrono>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zoomdet/crop.hpp"
#include "zoomdet/detection.hpp"
#include "zoomdet/detector.hpp"
#include "zoomdet/error.hpp"

namespace zoomdet {

enum class Fallback { report_none, full_frame_detect };
enum class PipelineMode { single_stage, two_stage };

struct PipelineConfig {
  int context_class_id = 0;
  std::set<int> small_class_ids{1};
  double crop_margin = 0.10;
  double min_context_confidence = 0.25;
  Fallback fallback = Fallback::report_none;
  PipelineMode mode = PipelineMode::two_stage;

  void validate() const {
    if (small_class_ids.contains(context_class_id))
      throw ConfigError("pipeline: context class is also listed as a small class");
    if (!(crop_margin >= 0)) throw ConfigError("pipeline: crop_margin must be >= 0");
    if (!(min_context_confidence >= 0 && min_context_confidence <= 1))
      throw ConfigError("pipeline: min_context_confidence must be in [0, 1]");
  }
};

struct StageTimings {
  std::int64_t stage1_us = 0, crop_us = 0, stage2_us = 0, remap_us = 0, total_us = 0;
};

struct PipelineResult {
  std::vector<Detection> context_detections;          // full-frame coordinates
  std::vector<Detection> small_detections_fullframe;  // full-frame coordinates
  std::vector<Detection> small_detections_crop;       // crop coordinates
  // Absent means the crop is the identity (single stage, or no context found).
  std::optional<CropRegion> crop_region;
  StageTimings timings;
  bool fallback_used = false;
  std::string fallback_reason;

  std::vector<Detection> all_detections() const {
    std::vector<Detection> out = context_detections;
    out.insert(out.end(), small_detections_fullframe.begin(), small_detections_fullframe.end());
    return out;
  }
};

// A frame as the pipeline sees it; pixels are optional for GT-driven detectors.
struct Frame {
  std::uint64_t frame_id = 0;
  int width = 0, height = 0;
  const RasterImage* pixels = nullptr;

  FrameView view() const { return {frame_id, width, height, pixels}; }
};

// Highest-confidence qualifying context detection; ties go to the larger box,
// then to the smaller cx.
inline std::optional<Detection> select_context(const std::vector<Detection>& dets,
                                               const PipelineConfig& config) {
  std::optional<Detection> best;
  for (const auto& d : dets) {
    if (d.class_id != config.context_class_id || d.confidence < config.min_context_confidence)
      continue;
    if (!best) {
      best = d;
      continue;
    }
    const bool better =
        d.confidence > best->confidence ||
        (d.confidence == best->confidence &&
         (d.box.area() > best->box.area() ||
          (d.box.area() == best->box.area() && d.box.cx < best->box.cx)));
    if (better) best = d;
  }
  return best;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline std::int64_t micros(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration_cast<std::chrono::microseconds>(b - a).count();
}

inline std::vector<Detection> filter_classes(const std::vector<Detection>& dets,
                                             const std::set<int>& keep) {
  std::vector<Detection> out;
  for (const auto& d : dets)
    if (keep.contains(d.class_id)) out.push_back(d);
  return out;
}

}  // namespace detail

inline PipelineResult run_two_stage(const Frame& frame, const Detector& stage1,
                                    const Detector& stage2, const PipelineConfig& config,
                                    const GroundTruthFrame* gt = nullptr) {
  if (config.mode != PipelineMode::two_stage) throw ConfigError("pipeline: mode is not two_stage");
  config.validate();
  using detail::Clock;
  PipelineResult r;
  const auto t0 = Clock::now();

  const std::vector<Detection> first = stage1.detect(frame.view(), gt);
  const auto t1 = Clock::now();
  r.context_detections = detail::filter_classes(first, {config.context_class_id});

  std::optional<CropRegion> region;
  std::optional<RasterImage> crop_pixels;
  std::optional<GroundTruthFrame> crop_gt;
  if (const auto ctx = select_context(first, config)) {
    try {
      region = expand_and_clamp(pixel_from_norm(ctx->box, frame.width, frame.height),
                                config.crop_margin, frame.width, frame.height);
    } catch (const DegenerateCrop&) {
      r.fallback_reason = "degenerate crop";
    }
  } else {
    r.fallback_reason = "no context detection";
  }
  if (region) {
    const auto& rc = region->rect;
    if (frame.pixels)
      crop_pixels = frame.pixels->crop(static_cast<int>(rc.x_min), static_cast<int>(rc.y_min),
                                       static_cast<int>(rc.x_max), static_cast<int>(rc.y_max));
    if (gt) crop_gt = GroundTruthFrame{gt->frame_id, region->width(), region->height(),
                                       crop_labels(gt->objects, *region)};
  }
  const auto t2 = Clock::now();

  std::vector<Detection> second;
  if (region) {
    const Frame crop{frame.frame_id, region->width(), region->height(),
                     crop_pixels ? &*crop_pixels : nullptr};
    second = stage2.detect(crop.view(), crop_gt ? &*crop_gt : nullptr);
  } else {
    r.fallback_used = true;
    if (config.fallback == Fallback::full_frame_detect) {
      second = stage2.detect(frame.view(), gt);
      region = CropRegion::whole_frame(frame.width, frame.height);
    }
  }
  const auto t3 = Clock::now();

  r.small_detections_crop = detail::filter_classes(second, config.small_class_ids);
  r.crop_region = region;
  for (const auto& d : r.small_detections_crop)
    r.small_detections_fullframe.push_back(region ? remap_to_fullframe(d, *region) : d);
  const auto t4 = Clock::now();

  r.timings = {detail::micros(t0, t1), detail::micros(t1, t2), detail::micros(t2, t3),
               detail::micros(t3, t4), detail::micros(t0, t4)};
  return r;
}

inline PipelineResult run_single_stage(const Frame& frame,
                                       const std::vector<const Detector*>& detectors,
                                       const PipelineConfig& config,
                                       const GroundTruthFrame* gt = nullptr) {
  if (config.mode != PipelineMode::single_stage)
    throw ConfigError("pipeline: mode is not single_stage");
  config.validate();
  using detail::Clock;
  PipelineResult r;
  const auto t0 = Clock::now();
  std::vector<Detection> merged;
  for (const Detector* d : detectors) {
    const auto part = d->detect(frame.view(), gt);
    merged.insert(merged.end(), part.begin(), part.end());
  }
  const auto t1 = Clock::now();
  r.context_detections = detail::filter_classes(merged, {config.context_class_id});
  r.small_detections_fullframe = detail::filter_classes(merged, config.small_class_ids);
  r.small_detections_crop = r.small_detections_fullframe;
  const auto t2 = Clock::now();
  r.timings = {detail::micros(t0, t1), 0, 0, detail::micros(t1, t2), detail::micros(t0, t2)};
  return r;
}

}  // namespace zoomdet
