#pragma once

// Semi-synthetic sample generation: foreground sprites (alpha matte = object
// silhouette) are scaled, rotated, sheared and alpha-composited onto real
// backgrounds under randomized white/yellow illumination. Labels come from the
// rendered alpha, so they hug the silhouette.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "zoomdet/detector.hpp"
#include "zoomdet/error.hpp"
#include "zoomdet/geometry.hpp"
#include "zoomdet/image.hpp"
#include "zoomdet/labels.hpp"
#include "zoomdet/rng.hpp"

namespace zoomdet {

struct ForegroundAsset {
  RasterImage image;
  int class_id = 0;
  std::string name;

  void validate() const {
    if (image.empty()) throw ConfigError("asset '" + name + "' has no pixels");
    const auto px = image.data();
    for (std::size_t i = 3; i < px.size(); i += 4)
      if (px[i] > 0) return;
    throw ConfigError("asset '" + name + "' is fully transparent");
  }
};

struct PlacementSpec {
  int count_min = 1, count_max = 3;
  Interval scale{0.05, 0.25};  // rendered object width / background width, log-uniform
  Interval rotation{0, 0};     // radians
  Interval shear{0, 0};        // horizontal and vertical factors drawn independently
  bool allow_overlap = true;

  void validate() const {
    if (count_min < 0 || count_max < count_min) throw ConfigError("placement: bad count range");
    if (!(scale.lo > 0 && scale.lo <= scale.hi)) throw ConfigError("placement: bad scale range");
    if (!(rotation.lo <= rotation.hi)) throw ConfigError("placement: bad rotation range");
    if (!(shear.lo <= shear.hi)) throw ConfigError("placement: bad shear range");
  }
};

struct Tint {
  double r = 1, g = 1, b = 1;
  bool operator==(const Tint&) const = default;
};

enum class IlluminationTarget { foreground_only, whole_image };

struct IlluminationSpec {
  Interval brightness{0.8, 1.2};
  std::vector<Tint> tints{{1.0, 1.0, 1.0}, {1.0, 0.9, 0.6}};  // white, yellow
  IlluminationTarget apply_to = IlluminationTarget::foreground_only;

  void validate() const {
    if (!(brightness.lo > 0 && brightness.lo <= brightness.hi))
      throw ConfigError("illumination: bad brightness range");
    if (tints.empty()) throw ConfigError("illumination: tint set is empty");
  }
};

// Per-channel multiplicative gain.
struct Gain {
  double r = 1, g = 1, b = 1;
  Rgba apply(Rgba c) const {
    auto ch = [](std::uint8_t v, double k) {
      return static_cast<std::uint8_t>(std::clamp(std::round(v * k), 0.0, 255.0));
    };
    return {ch(c.r, r), ch(c.g, g), ch(c.b, b), c.a};
  }
};

inline Gain sample_gain(const IlluminationSpec& spec, Rng& rng) {
  const double level = uniform(rng, spec.brightness.lo, spec.brightness.hi);
  const Tint& t = spec.tints[uniform_int(rng, 0, static_cast<int>(spec.tints.size()) - 1)];
  return {level * t.r, level * t.g, level * t.b};
}

// Linear sprite transform about the sprite center: R(rotation)·[[1,hx],[hy,1]]·scale.
struct SpriteTransform {
  double scale = 1, rotation = 0, shear_x = 0, shear_y = 0;

  std::array<double, 4> matrix() const {
    const double c = std::cos(rotation), s = std::sin(rotation);
    return {scale * (c - s * shear_y), scale * (c * shear_x - s),
            scale * (s + c * shear_y), scale * (s * shear_x + c)};
  }
};

// Extent of the transformed sprite rectangle relative to its center.
inline PixelBox transformed_extent(int sprite_w, int sprite_h, const SpriteTransform& t) {
  const auto m = t.matrix();
  PixelBox e{1e300, 1e300, -1e300, -1e300};
  for (const double sx : {-sprite_w / 2.0, sprite_w / 2.0})
    for (const double sy : {-sprite_h / 2.0, sprite_h / 2.0}) {
      const double x = m[0] * sx + m[1] * sy, y = m[2] * sx + m[3] * sy;
      e = {std::min(e.x_min, x), std::min(e.y_min, y), std::max(e.x_max, x), std::max(e.y_max, y)};
    }
  return e;
}

// Pixel footprint (whole pixels) the transformed sprite needs.
inline std::pair<int, int> footprint(int sprite_w, int sprite_h, const SpriteTransform& t) {
  const PixelBox e = transformed_extent(sprite_w, sprite_h, t);
  return {static_cast<int>(std::ceil(e.width() - 1e-9)),
          static_cast<int>(std::ceil(e.height() - 1e-9))};
}

// Renders `sprite` onto `canvas` with the footprint's top-left at (left, top).
// Returns the envelope of destination pixels that received alpha > 0, or
// nothing if no pixel did.
inline std::optional<PixelBox> place_sprite(RasterImage& canvas, const RasterImage& sprite,
                                            const SpriteTransform& t, int left, int top,
                                            const Gain& gain = {}) {
  const auto m = t.matrix();
  const double det = m[0] * m[3] - m[1] * m[2];
  if (std::abs(det) < 1e-12) throw PlacementError("sprite transform is singular");
  const std::array<double, 4> inv{m[3] / det, -m[1] / det, -m[2] / det, m[0] / det};
  const PixelBox ext = transformed_extent(sprite.width(), sprite.height(), t);
  const auto [fw, fh] = footprint(sprite.width(), sprite.height(), t);
  const double ox = left - ext.x_min, oy = top - ext.y_min;  // sprite center on canvas
  const double scx = sprite.width() / 2.0, scy = sprite.height() / 2.0;

  auto texel = [&](int x, int y) -> std::array<double, 4> {
    if (x < 0 || y < 0 || x >= sprite.width() || y >= sprite.height()) return {0, 0, 0, 0};
    const Rgba c = sprite.at(x, y);
    const double a = c.a / 255.0;
    return {c.r * a, c.g * a, c.b * a, a};  // premultiplied
  };

  std::optional<PixelBox> env;
  for (int y = std::max(top, 0); y < std::min(top + fh, canvas.height()); ++y)
    for (int x = std::max(left, 0); x < std::min(left + fw, canvas.width()); ++x) {
      const double dx = x + 0.5 - ox, dy = y + 0.5 - oy;
      const double sx = inv[0] * dx + inv[1] * dy + scx - 0.5;
      const double sy = inv[2] * dx + inv[3] * dy + scy - 0.5;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double tx = sx - fx, ty = sy - fy;
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      std::array<double, 4> p{};
      const std::array<std::pair<double, std::array<double, 4>>, 4> taps{{
          {(1 - tx) * (1 - ty), texel(x0, y0)},
          {tx * (1 - ty), texel(x0 + 1, y0)},
          {(1 - tx) * ty, texel(x0, y0 + 1)},
          {tx * ty, texel(x0 + 1, y0 + 1)},
      }};
      for (const auto& [w, v] : taps)
        if (w > 0)
          for (int k = 0; k < 4; ++k) p[k] += w * v[k];
      const int a8 = static_cast<int>(std::round(p[3] * 255));
      if (a8 <= 0) continue;
      const double a = a8 / 255.0;
      const Rgba fg = gain.apply({static_cast<std::uint8_t>(std::clamp(std::round(p[0] / p[3]), 0.0, 255.0)),
                                  static_cast<std::uint8_t>(std::clamp(std::round(p[1] / p[3]), 0.0, 255.0)),
                                  static_cast<std::uint8_t>(std::clamp(std::round(p[2] / p[3]), 0.0, 255.0)),
                                  255});
      const Rgba bg = canvas.at(x, y);
      auto mix = [a](std::uint8_t f, std::uint8_t b) {
        return static_cast<std::uint8_t>(std::clamp(std::round(f * a + b * (1 - a)), 0.0, 255.0));
      };
      canvas.set(x, y, {mix(fg.r, bg.r), mix(fg.g, bg.g), mix(fg.b, bg.b),
                        static_cast<std::uint8_t>(std::max<int>(bg.a, a8))});
      const PixelBox px{static_cast<double>(x), static_cast<double>(y), x + 1.0, y + 1.0};
      env = env ? PixelBox{std::min(env->x_min, px.x_min), std::min(env->y_min, px.y_min),
                           std::max(env->x_max, px.x_max), std::max(env->y_max, px.y_max)}
                : px;
    }
  return env;
}

inline void apply_gain(RasterImage& image, const Gain& gain) {
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) image.set(x, y, gain.apply(image.at(x, y)));
}

// Labels whose pixel area falls below this are dropped as unlabelable.
constexpr double kMinLabelAreaPx = 4.0;

struct ComposedSample {
  RasterImage image;
  std::vector<LabeledBox> labels;
  std::vector<PixelBox> pixel_boxes;  // same order as labels
  std::size_t skipped_objects = 0;    // could not be placed without overlap
  std::size_t dropped_labels = 0;     // rendered but below kMinLabelAreaPx
};

inline ComposedSample compose_sample(const RasterImage& background,
                                     const std::vector<ForegroundAsset>& assets,
                                     const PlacementSpec& placement,
                                     const IlluminationSpec& illum, Rng& rng) {
  if (background.width() < 32 || background.height() < 32)
    throw PlacementError("background smaller than 32x32");
  placement.validate();
  illum.validate();
  ComposedSample out{background, {}, {}, 0, 0};
  const int count = uniform_int(rng, placement.count_min, placement.count_max);
  if (count > 0 && assets.empty()) throw ConfigError("no foreground assets");
  const int W = background.width(), H = background.height();

  for (int i = 0; i < count; ++i) {
    const ForegroundAsset& asset = assets[uniform_int(rng, 0, static_cast<int>(assets.size()) - 1)];
    const double width_fraction = log_uniform(rng, placement.scale.lo, placement.scale.hi);
    SpriteTransform t{width_fraction * W / asset.image.width(),
                      uniform(rng, placement.rotation.lo, placement.rotation.hi),
                      uniform(rng, placement.shear.lo, placement.shear.hi),
                      uniform(rng, placement.shear.lo, placement.shear.hi)};
    const Gain gain = illum.apply_to == IlluminationTarget::foreground_only
                          ? sample_gain(illum, rng)
                          : Gain{};

    SpriteTransform smallest = t;
    smallest.scale = placement.scale.lo * W / asset.image.width();
    const auto [min_w, min_h] = footprint(asset.image.width(), asset.image.height(), smallest);
    if (min_w > W || min_h > H)
      throw PlacementError("asset '" + asset.name + "' does not fit the background at minimum scale");
    auto [fw, fh] = footprint(asset.image.width(), asset.image.height(), t);
    if (fw > W || fh > H) {
      const PixelBox e = transformed_extent(asset.image.width(), asset.image.height(), t);
      t.scale *= std::min((W - 1e-6) / e.width(), (H - 1e-6) / e.height());
      t.scale = std::max(t.scale, smallest.scale);
      std::tie(fw, fh) = footprint(asset.image.width(), asset.image.height(), t);
    }

    int left = 0, top = 0;
    bool placed = false;
    for (int attempt = 0; attempt < (placement.allow_overlap ? 1 : 100); ++attempt) {
      left = uniform_int(rng, 0, W - fw);
      top = uniform_int(rng, 0, H - fh);
      const PixelBox cand{static_cast<double>(left), static_cast<double>(top),
                          static_cast<double>(left + fw), static_cast<double>(top + fh)};
      if (placement.allow_overlap ||
          std::none_of(out.pixel_boxes.begin(), out.pixel_boxes.end(), [&](const PixelBox& b) {
            return std::min(b.x_max, cand.x_max) > std::max(b.x_min, cand.x_min) &&
                   std::min(b.y_max, cand.y_max) > std::max(b.y_min, cand.y_min);
          })) {
        placed = true;
        break;
      }
    }
    if (!placed) {
      ++out.skipped_objects;
      continue;
    }
    const auto env = place_sprite(out.image, asset.image, t, left, top, gain);
    if (!env || env->area() < kMinLabelAreaPx) {
      ++out.dropped_labels;
      continue;
    }
    out.labels.push_back({asset.class_id, norm_from_pixel(*env, W, H)});
    out.pixel_boxes.push_back(*env);
  }

  if (illum.apply_to == IlluminationTarget::whole_image) apply_gain(out.image, sample_gain(illum, rng));
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentOp {
  enum class Kind { rot90cw, rot90ccw, rot180, shear };
  Kind kind = Kind::rot180;
  double shear_x = 0, shear_y = 0;

  static AugmentOp rot90cw() { return {Kind::rot90cw}; }
  static AugmentOp rot90ccw() { return {Kind::rot90ccw}; }
  static AugmentOp rot180() { return {Kind::rot180}; }
  static AugmentOp shear(double hx, double hy) { return {Kind::shear, hx, hy}; }

  std::string name() const {
    switch (kind) {
      case Kind::rot90cw: return "rot90cw";
      case Kind::rot90ccw: return "rot90ccw";
      case Kind::rot180: return "rot180";
      case Kind::shear: return "shear";
    }
    return "?";
  }
};

inline AugmentOp random_shear(const Interval& range, Rng& rng) {
  const double hx = uniform(rng, range.lo, range.hi);
  const double hy = uniform(rng, range.lo, range.hi);
  return AugmentOp::shear(hx, hy);
}

struct AugmentedSample {
  AugmentOp op;
  RasterImage image;
  std::vector<LabeledBox> labels;
  std::size_t dropped_boxes = 0;
};

namespace detail {

// Normalized-coordinate map for the exact 90° rotations.
inline std::pair<double, double> rotate_norm(AugmentOp::Kind k, double x, double y) {
  switch (k) {
    case AugmentOp::Kind::rot90cw: return {1 - y, x};
    case AugmentOp::Kind::rot90ccw: return {y, 1 - x};
    default: return {1 - x, 1 - y};
  }
}

inline NormBox envelope_norm(const std::array<std::pair<double, double>, 4>& pts) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& [x, y] : pts) {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  }
  return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
}

inline AugmentedSample rotate(const RasterImage& img, const std::vector<LabeledBox>& labels,
                              AugmentOp op) {
  const int W = img.width(), H = img.height();
  const bool quarter = op.kind != AugmentOp::Kind::rot180;
  RasterImage out(quarter ? H : W, quarter ? W : H);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      int sx = 0, sy = 0;
      switch (op.kind) {
        case AugmentOp::Kind::rot90cw: sx = y; sy = H - 1 - x; break;
        case AugmentOp::Kind::rot90ccw: sx = W - 1 - y; sy = x; break;
        default: sx = W - 1 - x; sy = H - 1 - y; break;
      }
      out.set(x, y, img.at(sx, sy));
    }
  AugmentedSample s{op, std::move(out), {}, 0};
  for (const auto& l : labels) {
    const NormBox& b = l.box;
    s.labels.push_back({l.class_id, envelope_norm({rotate_norm(op.kind, b.x_min(), b.y_min()),
                                                   rotate_norm(op.kind, b.x_max(), b.y_min()),
                                                   rotate_norm(op.kind, b.x_min(), b.y_max()),
                                                   rotate_norm(op.kind, b.x_max(), b.y_max())})});
  }
  return s;
}

// x' = x + hx·(y − H/2), y' = y + hy·(x − W/2), about the image center.
inline AugmentedSample shear(const RasterImage& img, const std::vector<LabeledBox>& labels,
                             AugmentOp op) {
  const double hx = op.shear_x, hy = op.shear_y;
  if (hx == 0 && hy == 0) return {op, img, labels, 0};
  const double det = 1 - hx * hy;
  if (std::abs(det) < 1e-9) throw RangeError("shear factors make the transform singular");
  const int W = img.width(), H = img.height();
  const double cx = W / 2.0, cy = H / 2.0;
  RasterImage out(W, H, Rgba{0, 0, 0, 255});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double u = x + 0.5 - cx, v = y + 0.5 - cy;
      const double su = (u - hx * v) / det, sv = (v - hy * u) / det;
      const double fx = su + cx - 0.5, fy = sv + cy - 0.5;
      if (fx < -0.5 || fy < -0.5 || fx > W - 0.5 || fy > H - 0.5) continue;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, W - 1);
      const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, H - 1);
      const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double tx = std::clamp(fx - x0, 0.0, 1.0), ty = std::clamp(fy - y0, 0.0, 1.0);
      const Rgba a = img.at(x0, y0), b = img.at(x1, y0), c = img.at(x0, y1), d = img.at(x1, y1);
      auto mix = [&](std::uint8_t pa, std::uint8_t pb, std::uint8_t pc, std::uint8_t pd) {
        const double val = (pa * (1 - tx) + pb * tx) * (1 - ty) + (pc * (1 - tx) + pd * tx) * ty;
        return static_cast<std::uint8_t>(std::clamp(std::round(val), 0.0, 255.0));
      };
      out.set(x, y, {mix(a.r, b.r, c.r, d.r), mix(a.g, b.g, c.g, d.g), mix(a.b, b.b, c.b, d.b), 255});
    }

  AugmentedSample s{op, std::move(out), {}, 0};
  for (const auto& l : labels) {
    const PixelBox p = pixel_from_norm(l.box, W, H);
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const double px : {p.x_min, p.x_max})
      for (const double py : {p.y_min, p.y_max}) {
        const double nx = px + hx * (py - cy), ny = py + hy * (px - cx);
        x0 = std::min(x0, nx);
        y0 = std::min(y0, ny);
        x1 = std::max(x1, nx);
        y1 = std::max(y1, ny);
      }
    const PixelBox clipped{std::max(x0, 0.0), std::max(y0, 0.0), std::min(x1, double(W)),
                           std::min(y1, double(H))};
    if (!(clipped.x_max > clipped.x_min && clipped.y_max > clipped.y_min) ||
        clipped.area() < kMinLabelAreaPx) {
      ++s.dropped_boxes;
      continue;
    }
    s.labels.push_back({l.class_id, norm_from_pixel(clipped, W, H)});
  }
  return s;
}

}  // namespace detail

// One output per op, labels transformed consistently with the pixels.
inline std::vector<AugmentedSample> augment(const RasterImage& image,
                                            const std::vector<LabeledBox>& labels,
                                            const std::vector<AugmentOp>& ops) {
  std::vector<AugmentedSample> out;
  out.reserve(ops.size());
  for (const AugmentOp& op : ops)
    out.push_back(op.kind == AugmentOp::Kind::shear ? detail::shear(image, labels, op)
                                                    : detail::rotate(image, labels, op));
  return out;
}

// ---------------------------------------------------------------------------
// Labels for an external renderer's viewpoints

enum class SkipReason { none, behind_camera, outside_frame, degenerate_frame };

inline const char* to_string(SkipReason r) {
  switch (r) {
    case SkipReason::none: return "ok";
    case SkipReason::behind_camera: return "behind_camera";
    case SkipReason::outside_frame: return "outside_frame";
    case SkipReason::degenerate_frame: return "degenerate_frame";
  }
  return "?";
}

struct ViewpointLabel {
  std::size_t pose_index = 0;
  std::optional<LabeledBox> label;
  SkipReason skipped = SkipReason::none;
};

inline std::vector<ViewpointLabel> render_labels_for_viewpoints(const Box3D& box,
                                                                const CameraIntrinsics& intr,
                                                                const std::vector<CameraPose>& poses,
                                                                int class_id) {
  box.validate();
  intr.validate();
  std::vector<ViewpointLabel> out;
  out.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    ViewpointLabel v{i, std::nullopt, SkipReason::none};
    try {
      const PixelBox px = project_box3(intr, extrinsics_from_pose(poses[i]), box);
      v.label = LabeledBox{class_id, norm_from_pixel(px, intr.width, intr.height)};
    } catch (const BehindCamera&) {
      v.skipped = SkipReason::behind_camera;
    } catch (const OutsideFrame&) {
      v.skipped = SkipReason::outside_frame;
    } catch (const DegenerateFrame&) {
      v.skipped = SkipReason::degenerate_frame;
    }
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly-scene layouts: one large context object (the board) holding several
// small objects (the buttons). Used for desk-scale experiments with the mock
// detector, which only needs ground truth.

struct AssemblySceneSpec {
  int width = 1280, height = 720;
  int context_class_id = 0;
  int small_class_id = 1;
  Interval context_area{0.22, 0.28};    // fraction of frame area
  Interval context_aspect{1.3, 1.8};    // width / height in pixels
  int objects_min = 3, objects_max = 6;
  Interval object_area{0.001, 0.005};   // fraction of frame area
  Interval object_aspect{0.8, 1.25};

  void validate() const {
    if (width < 32 || height < 32) throw ConfigError("scene: frame must be at least 32x32");
    if (!(context_area.lo > 0 && context_area.lo <= context_area.hi && context_area.hi < 1))
      throw ConfigError("scene: bad context_area");
    if (!(object_area.lo > 0 && object_area.lo <= object_area.hi && object_area.hi < context_area.lo))
      throw ConfigError("scene: bad object_area");
    if (!(context_aspect.lo > 0 && context_aspect.lo <= context_aspect.hi))
      throw ConfigError("scene: bad context_aspect");
    if (!(object_aspect.lo > 0 && object_aspect.lo <= object_aspect.hi))
      throw ConfigError("scene: bad object_aspect");
    if (objects_min < 0 || objects_max < objects_min) throw ConfigError("scene: bad object count");
    if (context_class_id == small_class_id) throw ConfigError("scene: class ids must differ");
  }
};

inline GroundTruthFrame layout_assembly_scene(const AssemblySceneSpec& spec, std::uint64_t seed,
                                              std::uint64_t frame_id) {
  spec.validate();
  Rng rng = make_rng(seed, frame_id);
  const double W = spec.width, H = spec.height;
  GroundTruthFrame f{frame_id, spec.width, spec.height, {}};

  const double area = uniform(rng, spec.context_area.lo, spec.context_area.hi) * W * H;
  const double aspect = uniform(rng, spec.context_aspect.lo, spec.context_aspect.hi);
  const double bw = std::min(std::sqrt(area * aspect), W * 0.95);
  const double bh = std::min(area / bw, H * 0.95);
  const double bx = uniform(rng, 0, W - bw), by = uniform(rng, 0, H - bh);
  const PixelBox board{bx, by, bx + bw, by + bh};
  f.objects.push_back({spec.context_class_id, norm_from_pixel(board, W, H)});

  std::vector<PixelBox> placed;
  const int n = uniform_int(rng, spec.objects_min, spec.objects_max);
  for (int i = 0; i < n; ++i) {
    const double oa = uniform(rng, spec.object_area.lo, spec.object_area.hi) * W * H;
    const double oaspect = uniform(rng, spec.object_aspect.lo, spec.object_aspect.hi);
    const double ow = std::sqrt(oa * oaspect), oh = oa / ow;
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double ox = uniform(rng, board.x_min, board.x_max - ow);
      const double oy = uniform(rng, board.y_min, board.y_max - oh);
      const PixelBox cand{ox, oy, ox + ow, oy + oh};
      const bool overlaps = std::any_of(placed.begin(), placed.end(), [&](const PixelBox& b) {
        return std::min(b.x_max, cand.x_max) > std::max(b.x_min, cand.x_min) &&
               std::min(b.y_max, cand.y_max) > std::max(b.y_min, cand.y_min);
      });
      if (overlaps) continue;
      placed.push_back(cand);
      f.objects.push_back({spec.small_class_id, norm_from_pixel(cand, W, H)});
      break;
    }
  }
  return f;
}

// Flat-shaded rendering of a layout; enough for transport and crop tests.
inline RasterImage render_assembly_scene(const GroundTruthFrame& frame, int context_class_id) {
  RasterImage img(frame.width, frame.height, Rgba{90, 90, 96, 255});
  auto draw = [&](const LabeledBox& l, Rgba c) {
    const PixelBox p = pixel_from_norm(l.box, frame.width, frame.height);
    img.fill_rect(static_cast<int>(std::lround(p.x_min)), static_cast<int>(std::lround(p.y_min)),
                  static_cast<int>(std::lround(p.x_max)), static_cast<int>(std::lround(p.y_max)), c);
  };
  for (const auto& l : frame.objects)
    if (l.class_id == context_class_id) draw(l, {230, 228, 220, 255});
  for (const auto& l : frame.objects)
    if (l.class_id != context_class_id) draw(l, {200, 40, 40, 255});
  return img;
}

}  // namespace zoomdet
