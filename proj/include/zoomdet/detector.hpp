#pragma once

// Detector abstraction and the ground-truth-driven mock detector.
//
// The mock stands in for a trained network with a fixed square input
// resolution. Every ground-truth box of a served class is
//   1. mapped to network-input scale, s = input_resolution / max(width, height);
//   2. missed with probability base_miss_rate, rising linearly to 1 as the
//      shorter box side at network scale falls from min_detectable_px to
//      min_detectable_px / 2 (always missed below that);
//   3. otherwise each of its four edges is shifted by N(0, loc_noise_sigma)
//      network pixels, i.e. N(0, loc_noise_sigma / s) image pixels;
//   4. given confidence clamp(1 − e / confidence_sigma_ref, confidence_floor, 1)
//      where e is the RMS edge shift in network pixels.
// Poisson(false_positive_rate) spurious boxes are added with confidence
// uniform in [0, 2 · confidence_threshold], then the list is thresholded and
// passed through NMS. All randomness comes from make_rng(seed, frame_id).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "zoomdet/detection.hpp"
#include "zoomdet/error.hpp"
#include "zoomdet/geometry.hpp"
#include "zoomdet/image.hpp"
#include "zoomdet/labels.hpp"
#include "zoomdet/rng.hpp"

namespace zoomdet {

struct DetectorConfig {
  double confidence_threshold = 0.25;
  double nms_iou_threshold = 0.45;
  int input_resolution = 416;

  void validate() const {
    if (!(confidence_threshold >= 0 && confidence_threshold <= 1))
      throw ConfigError("detector: confidence_threshold must be in [0, 1]");
    if (!(nms_iou_threshold > 0 && nms_iou_threshold <= 1))
      throw ConfigError("detector: nms_iou_threshold must be in (0, 1]");
    if (input_resolution <= 0) throw ConfigError("detector: input_resolution must be positive");
  }
};

struct MockDetectorModel {
  int input_resolution = 416;
  double loc_noise_sigma = 2.0;
  double min_detectable_px = 4.0;
  double base_miss_rate = 0.1;
  double false_positive_rate = 0.0;
  double confidence_sigma_ref = 8.0;
  double confidence_floor = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (input_resolution <= 0) throw ConfigError("mock: input_resolution must be positive");
    if (!(loc_noise_sigma >= 0)) throw ConfigError("mock: loc_noise_sigma must be >= 0");
    if (!(min_detectable_px >= 0)) throw ConfigError("mock: min_detectable_px must be >= 0");
    if (!(base_miss_rate >= 0 && base_miss_rate <= 1))
      throw ConfigError("mock: base_miss_rate must be in [0, 1]");
    if (!(false_positive_rate >= 0)) throw ConfigError("mock: false_positive_rate must be >= 0");
    if (!(confidence_sigma_ref > 0)) throw ConfigError("mock: confidence_sigma_ref must be > 0");
    if (!(confidence_floor >= 0 && confidence_floor <= 1))
      throw ConfigError("mock: confidence_floor must be in [0, 1]");
  }
};

struct GroundTruthFrame {
  std::uint64_t frame_id = 0;
  int width = 0, height = 0;
  std::vector<LabeledBox> objects;
};

// What a detector is shown: frame identity, dimensions and (optionally) pixels.
struct FrameView {
  std::uint64_t frame_id = 0;
  int width = 0, height = 0;
  const RasterImage* pixels = nullptr;
};

class Detector {
 public:
  virtual ~Detector() = default;

  // `context` carries ground truth for GT-driven detectors; others ignore it.
  virtual std::vector<Detection> detect(const FrameView& frame,
                                        const GroundTruthFrame* context) const = 0;
};

class MockDetector final : public Detector {
 public:
  MockDetector(MockDetectorModel model, DetectorConfig config, std::vector<int> classes)
      : model_(model), config_(config), classes_(std::move(classes)) {
    model_.validate();
    config_.validate();
    if (model_.input_resolution != config_.input_resolution)
      throw ConfigError("mock: input_resolution differs from detector config");
    std::sort(classes_.begin(), classes_.end());
    classes_.erase(std::unique(classes_.begin(), classes_.end()), classes_.end());
  }

  const MockDetectorModel& model() const { return model_; }
  const DetectorConfig& config() const { return config_; }
  const std::vector<int>& classes() const { return classes_; }

  bool serves(int class_id) const {
    return std::binary_search(classes_.begin(), classes_.end(), class_id);
  }

  // Probability that a box whose shorter side is `side_px` network pixels is missed.
  double miss_probability(double side_px) const {
    const double full = model_.min_detectable_px;
    if (side_px >= full) return model_.base_miss_rate;
    if (side_px <= full / 2) return 1.0;
    const double t = (full - side_px) / (full / 2);
    return model_.base_miss_rate + (1.0 - model_.base_miss_rate) * t;
  }

  double network_scale(int width, int height) const {
    return static_cast<double>(model_.input_resolution) / std::max(width, height);
  }

  std::vector<Detection> detect(const FrameView& frame,
                                const GroundTruthFrame* context) const override {
    if (context == nullptr) throw MissingGroundTruth("mock detector needs a ground-truth frame");
    if (frame.width <= 0 || frame.height <= 0) throw RangeError("frame dimensions must be positive");
    const double W = frame.width, H = frame.height;
    const double scale = network_scale(frame.width, frame.height);
    Rng rng = make_rng(model_.seed, frame.frame_id);

    std::vector<Detection> raw;
    for (const LabeledBox& gt : context->objects) {
      if (!serves(gt.class_id)) continue;
      const PixelBox px = pixel_from_norm(gt.box, W, H);
      const double side_net = std::min(px.width(), px.height()) * scale;
      // Draw every variate up front so miss decisions don't shift later streams.
      const double u_miss = uniform(rng, 0.0, 1.0);
      double n[4];
      for (double& v : n) v = gaussian(rng, 1.0);
      if (u_miss < miss_probability(side_net)) continue;

      const double sigma_img = model_.loc_noise_sigma / scale;
      PixelBox moved{px.x_min + n[0] * sigma_img, px.y_min + n[1] * sigma_img,
                     px.x_max + n[2] * sigma_img, px.y_max + n[3] * sigma_img};
      const auto box = model_.loc_noise_sigma == 0 ? std::optional<NormBox>(gt.box)
                                                   : sanitize(moved, W, H);
      if (!box) continue;
      const double rms =
          std::sqrt((n[0] * n[0] + n[1] * n[1] + n[2] * n[2] + n[3] * n[3]) / 4) *
          model_.loc_noise_sigma;
      const double conf =
          std::clamp(1.0 - rms / model_.confidence_sigma_ref, model_.confidence_floor, 1.0);
      raw.push_back({gt.class_id, *box, conf});
    }

    if (model_.false_positive_rate > 0 && !classes_.empty()) {
      const int n_fp = std::poisson_distribution<int>(model_.false_positive_rate)(rng);
      const double conf_hi = std::min(1.0, 2 * config_.confidence_threshold);
      for (int i = 0; i < n_fp; ++i) {
        const int cls = classes_[uniform_int(rng, 0, static_cast<int>(classes_.size()) - 1)];
        const double w = uniform(rng, 0.02, 0.2), h = uniform(rng, 0.02, 0.2);
        const double cx = uniform(rng, w / 2, 1 - w / 2), cy = uniform(rng, h / 2, 1 - h / 2);
        raw.push_back({cls, NormBox{cx, cy, w, h}, uniform(rng, 0.0, conf_hi)});
      }
    }

    std::erase_if(raw, [&](const Detection& d) {
      return d.confidence < config_.confidence_threshold;
    });
    return nms(raw, config_.nms_iou_threshold);
  }

 private:
  // Orders edges, enforces a 1-pixel minimum size and clips to the frame.
  static std::optional<NormBox> sanitize(PixelBox b, double W, double H) {
    if (b.x_min > b.x_max) std::swap(b.x_min, b.x_max);
    if (b.y_min > b.y_max) std::swap(b.y_min, b.y_max);
    auto widen = [](double& lo, double& hi) {
      if (hi - lo < 1.0) {
        const double c = (lo + hi) / 2;
        lo = c - 0.5;
        hi = c + 0.5;
      }
    };
    widen(b.x_min, b.x_max);
    widen(b.y_min, b.y_max);
    b = {std::max(b.x_min, 0.0), std::max(b.y_min, 0.0), std::min(b.x_max, W),
         std::min(b.y_max, H)};
    if (!(b.x_max > b.x_min && b.y_max > b.y_min)) return std::nullopt;
    return norm_from_pixel(b, W, H);
  }

  MockDetectorModel model_;
  DetectorConfig config_;
  std::vector<int> classes_;
};

}  // namespace zoomdet
