#pragma once

// Run configuration for the command-line tool, loaded from JSON.
//
// Every key is optional; omitted keys keep the defaults below. Unknown keys are
// rejected with their full path. Angles are given in degrees. The top-level
// seed drives every random stream (viewpoints, generation, mock detectors).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "zoomdet/dataset.hpp"
#include "zoomdet/detector.hpp"
#include "zoomdet/error.hpp"
#include "zoomdet/eval.hpp"
#include "zoomdet/geometry.hpp"
#include "zoomdet/labels.hpp"
#include "zoomdet/pipeline.hpp"
#include "zoomdet/synthgen.hpp"
#include "zoomdet/wire.hpp"

namespace zoomdet {

using json = nlohmann::json;

struct ObjectSpec {
  Box3D box{{0, 0, 0}, {0.1, 0.1, 0.1}};
  Vec3 rotation_axis{0, 1, 0};
  double rotation_deg = 0;
  int class_id = 1;

  Box3D resolved() const {
    Box3D b = box;
    if (rotation_deg != 0) b.rotation = Mat3::rotation(rotation_axis, rotation_deg * std::numbers::pi / 180);
    return b;
  }
};

struct ServiceSettings {
  std::string bind = "127.0.0.1:7070";
  std::string endpoint = "127.0.0.1:7070";
  std::uint32_t max_payload = wire::kDefaultMaxPayload;
  int remote_timeout_ms = 1000;
  int shutdown_deadline_ms = 2000;
  double target_fps = 10;
  std::string encoding = "raw";  // "raw" or "jpeg"
};

struct EvalSettings {
  std::vector<double> iou_thresholds = default_iou_thresholds();
  Interpolation interpolation = Interpolation::all_point;
  std::vector<int> classes;  // empty: every class present in the ground truth
};

struct BenchSettings {
  int frames = 100;
};

struct RunConfig {
  std::uint64_t seed = 0;
  ViewpointSpec viewpoints;
  CameraIntrinsics camera{800, 800, 640, 360, 1280, 720};
  ObjectSpec object3d;
  GenerationConfig generation;
  PlacementSpec placement;
  IlluminationSpec illumination;
  DetectorConfig detector;
  MockDetectorModel mock;
  PipelineConfig pipeline;
  bool gt_crops = false;
  AssemblySceneSpec scene;
  ServiceSettings service;
  EvalSettings eval;
  BenchSettings bench;

  RunConfig() {
    generation.asset_dir = "assets";
    generation.background_dir = "backgrounds";
    generation.output_dir = "dataset";
  }

  // Copies the global seed into every section that consumes randomness.
  void apply_seed() {
    viewpoints.seed = seed;
    generation.seed = seed;
    mock.seed = seed;
  }

  void validate() const {
    detector.validate();
    mock.validate();
    pipeline.validate();
    placement.validate();
    illumination.validate();
    scene.validate();
    validate_thresholds(eval.iou_thresholds);
    if (mock.input_resolution != detector.input_resolution)
      throw ConfigError("mock.input_resolution must equal detector.input_resolution");
    if (service.encoding != "raw" && service.encoding != "jpeg")
      throw ConfigError("service.encoding must be \"raw\" or \"jpeg\"");
    if (service.remote_timeout_ms <= 0) throw ConfigError("service.remote_timeout_ms must be positive");
    if (!(service.target_fps >= 0)) throw ConfigError("service.target_fps must be >= 0");
    if (bench.frames <= 0) throw ConfigError("bench.frames must be positive");
  }
};

namespace detail {

inline double deg(double rad) { return std::round(rad * 180 / std::numbers::pi * 1e9) / 1e9; }
inline double rad(double deg) { return deg * std::numbers::pi / 180; }

inline json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
inline json range(const Interval& r) { return json::array({r.lo, r.hi}); }
inline json range_deg(const Interval& r) { return json::array({deg(r.lo), deg(r.hi)}); }

inline const char* fallback_name(Fallback f) {
  return f == Fallback::report_none ? "report_none" : "full_frame_detect";
}
inline const char* mode_name(PipelineMode m) {
  return m == PipelineMode::two_stage ? "two_stage" : "single_stage";
}
inline const char* apply_to_name(IlluminationTarget t) {
  return t == IlluminationTarget::foreground_only ? "foreground_only" : "whole_image";
}
inline const char* interpolation_name(Interpolation i) {
  return i == Interpolation::all_point ? "all_point" : "eleven_point";
}

// Reads typed values out of a JSON object, naming the key path on failure.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  Section sub(const char* key) const {
    static const json empty = json::object();
    return {j_.contains(key) ? j_.at(key) : empty, join(key)};
  }

  template <typename T>
  void get(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + join(key) + "' has the wrong type");
    }
  }

  void get_vec(const char* key, Vec3& out) const {
    std::vector<double> v;
    get(key, v);
    if (!j_.contains(key)) return;
    if (v.size() != 3) throw ConfigError("config key '" + join(key) + "' must be [x, y, z]");
    out = {v[0], v[1], v[2]};
  }

  void get_range(const char* key, Interval& out, bool degrees = false) const {
    std::vector<double> v;
    get(key, v);
    if (!j_.contains(key)) return;
    if (v.size() != 2) throw ConfigError("config key '" + join(key) + "' must be [lo, hi]");
    out = degrees ? Interval{rad(v[0]), rad(v[1])} : Interval{v[0], v[1]};
  }

  template <typename E>
  void get_enum(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> names) const {
    std::string s;
    get(key, s);
    if (!j_.contains(key)) return;
    std::string allowed;
    for (const auto& [n, v] : names) {
      if (s == n) {
        out = v;
        return;
      }
      allowed += std::string(allowed.empty() ? "" : ", ") + n;
    }
    throw ConfigError("config key '" + join(key) + "' must be one of: " + allowed);
  }

  void get_path(const char* key, std::filesystem::path& out) const {
    std::string s;
    get(key, s);
    if (j_.contains(key)) out = s;
  }

 private:
  std::string join(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
};

// Every key path in `given` must also exist in `schema`; arrays are leaves.
inline void check_keys(const json& given, const json& schema, const std::string& path) {
  if (!given.is_object()) {
    if (schema.is_object()) throw ConfigError("config key '" + path + "' must be an object");
    return;
  }
  if (!schema.is_object()) return;
  for (const auto& [k, v] : given.items()) {
    const std::string p = path.empty() ? k : path + "." + k;
    if (!schema.contains(k)) throw ConfigError("unknown config key '" + p + "'");
    check_keys(v, schema.at(k), p);
  }
}

inline void flatten(const json& j, const std::string& path, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, path.empty() ? k : path + "." + k, out);
    return;
  }
  out.emplace_back(path, j.dump());
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  using namespace detail;
  json tints = json::array();
  for (const auto& t : c.illumination.tints) tints.push_back(json::array({t.r, t.g, t.b}));
  return {
      {"seed", c.seed},
      {"viewpoints",
       {{"azimuth_deg", range_deg(c.viewpoints.azimuth)},
        {"elevation_deg", range_deg(c.viewpoints.elevation)},
        {"radius", range(c.viewpoints.radius)},
        {"n_azimuth", c.viewpoints.n_azimuth},
        {"n_elevation", c.viewpoints.n_elevation},
        {"n_radius", c.viewpoints.n_radius},
        {"jitter_fraction", c.viewpoints.jitter_fraction},
        {"target", vec(c.viewpoints.target)},
        {"up", vec(c.viewpoints.up)}}},
      {"camera",
       {{"fx", c.camera.fx},
        {"fy", c.camera.fy},
        {"cx", c.camera.cx},
        {"cy", c.camera.cy},
        {"width", c.camera.width},
        {"height", c.camera.height}}},
      {"object3d",
       {{"center", vec(c.object3d.box.center)},
        {"half_extents", vec(c.object3d.box.half_extents)},
        {"rotation_axis", vec(c.object3d.rotation_axis)},
        {"rotation_deg", c.object3d.rotation_deg},
        {"class_id", c.object3d.class_id}}},
      {"generation",
       {{"asset_dir", c.generation.asset_dir.string()},
        {"background_dir", c.generation.background_dir.string()},
        {"n_images", c.generation.n_images},
        {"train_fraction", c.generation.train_fraction},
        {"resize_to", c.generation.resize_to},
        {"threads", c.generation.threads}}},
      {"placement",
       {{"count_min", c.placement.count_min},
        {"count_max", c.placement.count_max},
        {"scale", range(c.placement.scale)},
        {"rotation_deg", range_deg(c.placement.rotation)},
        {"shear", range(c.placement.shear)},
        {"allow_overlap", c.placement.allow_overlap}}},
      {"illumination",
       {{"brightness", range(c.illumination.brightness)},
        {"tints", tints},
        {"apply_to", apply_to_name(c.illumination.apply_to)}}},
      {"detector",
       {{"confidence_threshold", c.detector.confidence_threshold},
        {"nms_iou_threshold", c.detector.nms_iou_threshold},
        {"input_resolution", c.detector.input_resolution}}},
      {"mock",
       {{"input_resolution", c.mock.input_resolution},
        {"loc_noise_sigma", c.mock.loc_noise_sigma},
        {"min_detectable_px", c.mock.min_detectable_px},
        {"base_miss_rate", c.mock.base_miss_rate},
        {"false_positive_rate", c.mock.false_positive_rate},
        {"confidence_sigma_ref", c.mock.confidence_sigma_ref},
        {"confidence_floor", c.mock.confidence_floor}}},
      {"pipeline",
       {{"context_class_id", c.pipeline.context_class_id},
        {"small_class_ids", c.pipeline.small_class_ids},
        {"crop_margin", c.pipeline.crop_margin},
        {"min_context_confidence", c.pipeline.min_context_confidence},
        {"fallback", fallback_name(c.pipeline.fallback)},
        {"mode", mode_name(c.pipeline.mode)},
        {"gt_crops", c.gt_crops}}},
      {"scene",
       {{"width", c.scene.width},
        {"height", c.scene.height},
        {"context_class_id", c.scene.context_class_id},
        {"small_class_id", c.scene.small_class_id},
        {"context_area", range(c.scene.context_area)},
        {"context_aspect", range(c.scene.context_aspect)},
        {"objects_min", c.scene.objects_min},
        {"objects_max", c.scene.objects_max},
        {"object_area", range(c.scene.object_area)},
        {"object_aspect", range(c.scene.object_aspect)}}},
      {"service",
       {{"bind", c.service.bind},
        {"endpoint", c.service.endpoint},
        {"max_payload", c.service.max_payload},
        {"remote_timeout_ms", c.service.remote_timeout_ms},
        {"shutdown_deadline_ms", c.service.shutdown_deadline_ms},
        {"target_fps", c.service.target_fps},
        {"encoding", c.service.encoding}}},
      {"eval",
       {{"iou_thresholds", c.eval.iou_thresholds},
        {"interpolation", interpolation_name(c.eval.interpolation)},
        {"classes", c.eval.classes}}},
      {"bench", {{"frames", c.bench.frames}}},
  };
}

inline RunConfig config_from_json(const json& j) {
  using detail::Section;
  RunConfig c;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::check_keys(j, to_json(c), "");
  const Section root(j, "");
  root.get("seed", c.seed);

  const Section v = root.sub("viewpoints");
  v.get_range("azimuth_deg", c.viewpoints.azimuth, true);
  v.get_range("elevation_deg", c.viewpoints.elevation, true);
  v.get_range("radius", c.viewpoints.radius);
  v.get("n_azimuth", c.viewpoints.n_azimuth);
  v.get("n_elevation", c.viewpoints.n_elevation);
  v.get("n_radius", c.viewpoints.n_radius);
  v.get("jitter_fraction", c.viewpoints.jitter_fraction);
  v.get_vec("target", c.viewpoints.target);
  v.get_vec("up", c.viewpoints.up);

  const Section cam = root.sub("camera");
  cam.get("fx", c.camera.fx);
  cam.get("fy", c.camera.fy);
  cam.get("cx", c.camera.cx);
  cam.get("cy", c.camera.cy);
  cam.get("width", c.camera.width);
  cam.get("height", c.camera.height);

  const Section o = root.sub("object3d");
  o.get_vec("center", c.object3d.box.center);
  o.get_vec("half_extents", c.object3d.box.half_extents);
  o.get_vec("rotation_axis", c.object3d.rotation_axis);
  o.get("rotation_deg", c.object3d.rotation_deg);
  o.get("class_id", c.object3d.class_id);

  const Section g = root.sub("generation");
  g.get_path("asset_dir", c.generation.asset_dir);
  g.get_path("background_dir", c.generation.background_dir);
  g.get("n_images", c.generation.n_images);
  g.get("train_fraction", c.generation.train_fraction);
  g.get("resize_to", c.generation.resize_to);
  g.get("threads", c.generation.threads);

  const Section p = root.sub("placement");
  p.get("count_min", c.placement.count_min);
  p.get("count_max", c.placement.count_max);
  p.get_range("scale", c.placement.scale);
  p.get_range("rotation_deg", c.placement.rotation, true);
  p.get_range("shear", c.placement.shear);
  p.get("allow_overlap", c.placement.allow_overlap);

  const Section il = root.sub("illumination");
  il.get_range("brightness", c.illumination.brightness);
  std::vector<std::vector<double>> tints;
  il.get("tints", tints);
  if (!tints.empty() || (j.contains("illumination") && j["illumination"].contains("tints"))) {
    c.illumination.tints.clear();
    for (const auto& t : tints) {
      if (t.size() != 3) throw ConfigError("config key 'illumination.tints' entries must be [r, g, b]");
      c.illumination.tints.push_back({t[0], t[1], t[2]});
    }
  }
  il.get_enum("apply_to", c.illumination.apply_to,
              {{"foreground_only", IlluminationTarget::foreground_only},
               {"whole_image", IlluminationTarget::whole_image}});

  const Section d = root.sub("detector");
  d.get("confidence_threshold", c.detector.confidence_threshold);
  d.get("nms_iou_threshold", c.detector.nms_iou_threshold);
  d.get("input_resolution", c.detector.input_resolution);

  const Section m = root.sub("mock");
  m.get("input_resolution", c.mock.input_resolution);
  m.get("loc_noise_sigma", c.mock.loc_noise_sigma);
  m.get("min_detectable_px", c.mock.min_detectable_px);
  m.get("base_miss_rate", c.mock.base_miss_rate);
  m.get("false_positive_rate", c.mock.false_positive_rate);
  m.get("confidence_sigma_ref", c.mock.confidence_sigma_ref);
  m.get("confidence_floor", c.mock.confidence_floor);

  const Section pl = root.sub("pipeline");
  pl.get("context_class_id", c.pipeline.context_class_id);
  pl.get("small_class_ids", c.pipeline.small_class_ids);
  pl.get("crop_margin", c.pipeline.crop_margin);
  pl.get("min_context_confidence", c.pipeline.min_context_confidence);
  pl.get_enum("fallback", c.pipeline.fallback,
              {{"report_none", Fallback::report_none}, {"full_frame_detect", Fallback::full_frame_detect}});
  pl.get_enum("mode", c.pipeline.mode,
              {{"two_stage", PipelineMode::two_stage}, {"single_stage", PipelineMode::single_stage}});
  pl.get("gt_crops", c.gt_crops);

  const Section s = root.sub("scene");
  s.get("width", c.scene.width);
  s.get("height", c.scene.height);
  s.get("context_class_id", c.scene.context_class_id);
  s.get("small_class_id", c.scene.small_class_id);
  s.get_range("context_area", c.scene.context_area);
  s.get_range("context_aspect", c.scene.context_aspect);
  s.get("objects_min", c.scene.objects_min);
  s.get("objects_max", c.scene.objects_max);
  s.get_range("object_area", c.scene.object_area);
  s.get_range("object_aspect", c.scene.object_aspect);

  const Section sv = root.sub("service");
  sv.get("bind", c.service.bind);
  sv.get("endpoint", c.service.endpoint);
  sv.get("max_payload", c.service.max_payload);
  sv.get("remote_timeout_ms", c.service.remote_timeout_ms);
  sv.get("shutdown_deadline_ms", c.service.shutdown_deadline_ms);
  sv.get("target_fps", c.service.target_fps);
  sv.get("encoding", c.service.encoding);

  const Section e = root.sub("eval");
  e.get("iou_thresholds", c.eval.iou_thresholds);
  e.get_enum("interpolation", c.eval.interpolation,
             {{"all_point", Interpolation::all_point}, {"eleven_point", Interpolation::eleven_point}});
  e.get("classes", c.eval.classes);

  root.sub("bench").get("frames", c.bench.frames);

  c.apply_seed();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) throw ConfigError("config file not found: '" + path.string() + "'");
  json j;
  try {
    j = json::parse(read_text_file(path.string()));
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// "key = default" lines for every configuration key.
inline std::string describe_config_keys() {
  std::vector<std::pair<std::string, std::string>> keys;
  detail::flatten(to_json(RunConfig{}), "", keys);
  std::size_t width = 0;
  for (const auto& [k, v] : keys) width = std::max(width, k.size());
  std::ostringstream os;
  for (const auto& [k, v] : keys) os << "  " << k << std::string(width - k.size() + 2, ' ') << v << "\n";
  return os.str();
}

}  // namespace zoomdet
