#pragma once

// Viewpoint sampling, look-at extrinsics and pinhole projection of oriented
// 3D boxes into 2D image labels. Image origin is top-left, u right, v down;
// camera frame is x right, y down, z along the optical axis.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "zoomdet/error.hpp"
#include "zoomdet/rng.hpp"

namespace zoomdet {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr bool operator==(const Vec3&) const = default;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static constexpr Mat3 identity() { return {}; }

  static constexpr Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
    return Mat3{{r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z}};
  }

  // Rodrigues rotation about a (not necessarily unit) axis.
  static Mat3 rotation(const Vec3& axis, double angle) {
    const double n = norm(axis);
    if (n == 0) return identity();
    const Vec3 k = axis * (1.0 / n);
    const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
    return Mat3{{t * k.x * k.x + c, t * k.x * k.y - s * k.z, t * k.x * k.z + s * k.y,
                 t * k.x * k.y + s * k.z, t * k.y * k.y + c, t * k.y * k.z - s * k.x,
                 t * k.x * k.z - s * k.y, t * k.y * k.z + s * k.x, t * k.z * k.z + c}};
  }

  constexpr double operator()(int r, int c) const { return m[r * 3 + c]; }

  constexpr Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  constexpr Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
        r.m[i * 3 + j] = s;
      }
    return r;
  }

  constexpr Mat3 transposed() const {
    return Mat3{{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
  }

  // Largest absolute entry of RᵀR − I.
  double orthonormality_error() const {
    const Mat3 p = transposed() * *this;
    double err = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) err = std::max(err, std::abs(p(i, j) - (i == j ? 1.0 : 0.0)));
    return err;
  }
};

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0 && fy > 0)) throw RangeError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw RangeError("intrinsics: image size must be positive");
    if (!(cx >= 0 && cx <= width && cy >= 0 && cy <= height))
      throw RangeError("intrinsics: principal point outside image");
  }
};

struct CameraPose {
  double azimuth = 0;    // radians, about world +y, 0 looks along world −z
  double elevation = 0;  // radians above the target's horizontal plane
  double radius = 1;     // meters
  Vec3 target{};
  Vec3 up{0, 1, 0};
};

struct Interval {
  double lo = 0, hi = 0;
  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct ViewpointSpec {
  Interval azimuth{-std::numbers::pi / 3, std::numbers::pi / 3};
  Interval elevation{std::numbers::pi / 12, 5 * std::numbers::pi / 12};
  Interval radius{0.5, 1.5};
  int n_azimuth = 5, n_elevation = 3, n_radius = 2;
  double jitter_fraction = 0.25;
  std::uint64_t seed = 0;
  Vec3 target{};
  Vec3 up{0, 1, 0};
};

struct Box3D {
  Vec3 center{};
  Vec3 half_extents{0.5, 0.5, 0.5};
  Mat3 rotation = Mat3::identity();  // object-to-world

  void validate() const {
    if (!(half_extents.x > 0 && half_extents.y > 0 && half_extents.z > 0))
      throw RangeError("box3d: half extents must be positive");
    if (rotation.orthonormality_error() > 1e-9) throw RangeError("box3d: rotation not orthonormal");
  }

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
      const Vec3 local{(i & 1) ? half_extents.x : -half_extents.x,
                       (i & 2) ? half_extents.y : -half_extents.y,
                       (i & 4) ? half_extents.z : -half_extents.z};
      out[i] = center + rotation * local;
    }
    return out;
  }
};

// Axis-aligned box in pixel coordinates.
struct PixelBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  bool valid() const { return x_min <= x_max && y_min <= y_max; }
  bool operator==(const PixelBox&) const = default;
};

// Center/size box in fractions of the image dimensions.
struct NormBox {
  double cx = 0, cy = 0, w = 0, h = 0;

  double x_min() const { return cx - w / 2; }
  double x_max() const { return cx + w / 2; }
  double y_min() const { return cy - h / 2; }
  double y_max() const { return cy + h / 2; }
  double area() const { return w * h; }
  bool valid() const { return w > 0 && h > 0 && cx >= 0 && cx <= 1 && cy >= 0 && cy <= 1; }
  bool operator==(const NormBox&) const = default;
};

// World-to-camera transform: p_cam = rotation * p_world + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::identity();
  Vec3 translation{};

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

constexpr double kProjectionEpsilon = 1e-6;

// Unit vector from the target towards the camera.
inline Vec3 view_direction(double azimuth, double elevation) {
  return {std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
          std::cos(elevation) * std::cos(azimuth)};
}

inline Vec3 camera_position(const CameraPose& pose) {
  return pose.target + view_direction(pose.azimuth, pose.elevation) * pose.radius;
}

inline RigidTransform extrinsics_from_pose(const CameraPose& pose) {
  if (!(pose.radius > 0)) throw RangeError("pose: radius must be positive");
  const Vec3 eye = camera_position(pose);
  const Vec3 forward = (pose.target - eye) * (1.0 / pose.radius);
  const double up_len = norm(pose.up);
  if (up_len == 0 || !pose.up.finite()) throw DegenerateFrame("pose: up vector is zero");
  Vec3 right = cross(forward, pose.up * (1.0 / up_len));
  const double right_len = norm(right);
  if (right_len < 1e-9) throw DegenerateFrame("pose: up vector parallel to view direction");
  right = right * (1.0 / right_len);
  const Vec3 down = cross(forward, right);
  RigidTransform t;
  t.rotation = Mat3::from_rows(right, down, forward);
  t.translation = -(t.rotation * eye);
  return t;
}

// Stratified grid over (radius, elevation, azimuth), azimuth varying fastest.
// Each grid point moves uniformly by up to ±jitter_fraction of its cell width
// and is clamped back into the range.
inline std::vector<CameraPose> sample_viewpoints(const ViewpointSpec& spec) {
  auto check = [](const Interval& r, const char* name) {
    if (!(std::isfinite(r.lo) && std::isfinite(r.hi)) || r.lo > r.hi)
      throw RangeError(std::string("viewpoints: invalid ") + name + " range");
  };
  check(spec.azimuth, "azimuth");
  check(spec.elevation, "elevation");
  check(spec.radius, "radius");
  if (spec.elevation.lo < -std::numbers::pi / 2 || spec.elevation.hi > std::numbers::pi / 2)
    throw RangeError("viewpoints: elevation outside [-pi/2, pi/2]");
  if (!(spec.radius.lo > 0)) throw RangeError("viewpoints: radius must be positive");
  if (spec.n_azimuth <= 0 || spec.n_elevation <= 0 || spec.n_radius <= 0)
    throw RangeError("viewpoints: grid counts must be positive");
  if (!(spec.jitter_fraction >= 0 && spec.jitter_fraction < 1))
    throw RangeError("viewpoints: jitter_fraction must be in [0, 1)");

  Rng rng = make_rng(spec.seed);
  auto grid_value = [&](const Interval& r, int n, int i) {
    const double cell = r.width() / n;
    const double center = r.lo + (i + 0.5) * cell;
    const double offset = uniform(rng, -spec.jitter_fraction, spec.jitter_fraction) * cell;
    return std::clamp(center + offset, r.lo, r.hi);
  };

  std::vector<CameraPose> poses;
  poses.reserve(static_cast<std::size_t>(spec.n_azimuth) * spec.n_elevation * spec.n_radius);
  for (int ir = 0; ir < spec.n_radius; ++ir)
    for (int ie = 0; ie < spec.n_elevation; ++ie)
      for (int ia = 0; ia < spec.n_azimuth; ++ia) {
        CameraPose p;
        p.radius = grid_value(spec.radius, spec.n_radius, ir);
        p.elevation = grid_value(spec.elevation, spec.n_elevation, ie);
        p.azimuth = grid_value(spec.azimuth, spec.n_azimuth, ia);
        p.target = spec.target;
        p.up = spec.up;
        poses.push_back(p);
      }
  return poses;
}

struct PixelPoint {
  double u = 0, v = 0;
};

inline PixelPoint project_point(const CameraIntrinsics& intr, const RigidTransform& extr,
                                const Vec3& p, double epsilon = kProjectionEpsilon) {
  const Vec3 c = extr.apply(p);
  if (!(c.z > epsilon)) throw BehindCamera("point behind camera");
  return {intr.fx * c.x / c.z + intr.cx, intr.fy * c.y / c.z + intr.cy};
}

// Envelope of the 8 projected corners before clipping to the image.
inline PixelBox project_box3_unclipped(const CameraIntrinsics& intr, const RigidTransform& extr,
                                       const Box3D& box) {
  PixelBox env{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Vec3& corner : box.corners()) {
    const PixelPoint q = project_point(intr, extr, corner);
    env.x_min = std::min(env.x_min, q.u);
    env.y_min = std::min(env.y_min, q.v);
    env.x_max = std::max(env.x_max, q.u);
    env.y_max = std::max(env.y_max, q.v);
  }
  return env;
}

inline PixelBox project_box3(const CameraIntrinsics& intr, const RigidTransform& extr,
                             const Box3D& box) {
  const PixelBox env = project_box3_unclipped(intr, extr, box);
  const PixelBox clipped{std::max(env.x_min, 0.0), std::max(env.y_min, 0.0),
                         std::min(env.x_max, static_cast<double>(intr.width)),
                         std::min(env.y_max, static_cast<double>(intr.height))};
  if (!(clipped.x_min < clipped.x_max && clipped.y_min < clipped.y_max))
    throw OutsideFrame("projected box does not overlap the image");
  return clipped;
}

inline NormBox norm_from_pixel(const PixelBox& b, double width, double height) {
  if (!(width > 0 && height > 0)) throw RangeError("image dimensions must be positive");
  return {(b.x_min + b.x_max) / 2 / width, (b.y_min + b.y_max) / 2 / height,
          (b.x_max - b.x_min) / width, (b.y_max - b.y_min) / height};
}

inline PixelBox pixel_from_norm(const NormBox& b, double width, double height) {
  if (!(width > 0 && height > 0)) throw RangeError("image dimensions must be positive");
  return {(b.cx - b.w / 2) * width, (b.cy - b.h / 2) * height, (b.cx + b.w / 2) * width,
          (b.cy + b.h / 2) * height};
}

}  // namespace zoomdet
