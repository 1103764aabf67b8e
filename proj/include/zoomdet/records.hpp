#pragma once

// Plain-text record files exchanged between the detect and eval commands.
//
//   detections:   frame_id class_id confidence cx cy w h      (normalized, 6 decimals)
//   crops:        frame_id x_min y_min x_max y_max width height
//                 frame_id none                                 (no crop, full frame)
//   ground truth: JSON {"frames": [{"frame_id", "width", "height", "objects": [...]}]}
// Lines starting with '#' and blank lines are ignored.

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "json.hpp"
#include "zoomdet/dataset.hpp"
#include "zoomdet/eval.hpp"
#include "zoomdet/labels.hpp"

namespace zoomdet {

namespace detail {

template <typename F>
void for_each_record(const std::string& text, const std::string& what, F&& f) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    try {
      f(ls);
    } catch (const ConfigError& e) {
      throw ConfigError(what + " line " + std::to_string(n) + ": " + e.what());
    }
    std::string extra;
    if (ls >> extra) throw ConfigError(what + " line " + std::to_string(n) + ": trailing fields");
  }
}

template <typename T>
T field(std::istringstream& ls, const char* name) {
  T v{};
  if (!(ls >> v)) throw ConfigError(std::string("missing or malformed field '") + name + "'");
  return v;
}

}  // namespace detail

inline std::string format_detections(const DetectionSet& set) {
  std::string out;
  char buf[160];
  for (const auto& [id, dets] : set.frames)
    for (const auto& d : dets) {
      std::snprintf(buf, sizeof buf, "%llu %d %.6f %.6f %.6f %.6f %.6f\n",
                    static_cast<unsigned long long>(id), d.class_id, d.confidence, d.box.cx, d.box.cy,
                    d.box.w, d.box.h);
      out += buf;
    }
  return out;
}

inline DetectionSet parse_detections(const std::string& text, const std::string& what = "detections") {
  DetectionSet set;
  detail::for_each_record(text, what, [&](std::istringstream& ls) {
    const auto id = detail::field<std::uint64_t>(ls, "frame_id");
    Detection d;
    d.class_id = detail::field<int>(ls, "class_id");
    d.confidence = detail::field<double>(ls, "confidence");
    d.box = {detail::field<double>(ls, "cx"), detail::field<double>(ls, "cy"),
             detail::field<double>(ls, "w"), detail::field<double>(ls, "h")};
    if (d.class_id < 0) throw ConfigError("negative class id");
    if (!(d.confidence >= 0 && d.confidence <= 1)) throw ConfigError("confidence outside [0, 1]");
    set.frames[id].push_back(d);
  });
  return set;
}

inline DetectionSet read_detections(const std::filesystem::path& path) {
  return parse_detections(read_text_file(path.string()), path.string());
}

inline std::string format_crops(const CropMap& crops) {
  std::string out;
  char buf[160];
  for (const auto& [id, c] : crops) {
    if (c)
      std::snprintf(buf, sizeof buf, "%llu %.0f %.0f %.0f %.0f %d %d\n", static_cast<unsigned long long>(id),
                    c->rect.x_min, c->rect.y_min, c->rect.x_max, c->rect.y_max, c->frame_width,
                    c->frame_height);
    else
      std::snprintf(buf, sizeof buf, "%llu none\n", static_cast<unsigned long long>(id));
    out += buf;
  }
  return out;
}

inline CropMap parse_crops(const std::string& text, const std::string& what = "crops") {
  CropMap crops;
  detail::for_each_record(text, what, [&](std::istringstream& ls) {
    const auto id = detail::field<std::uint64_t>(ls, "frame_id");
    std::string first;
    if (!(ls >> first)) throw ConfigError("missing crop rectangle");
    if (first == "none") {
      crops[id] = std::nullopt;
      return;
    }
    CropRegion c;
    try {
      c.rect.x_min = std::stod(first);
    } catch (const std::logic_error&) {
      throw ConfigError("malformed field 'x_min'");
    }
    c.rect.y_min = detail::field<double>(ls, "y_min");
    c.rect.x_max = detail::field<double>(ls, "x_max");
    c.rect.y_max = detail::field<double>(ls, "y_max");
    c.frame_width = detail::field<int>(ls, "width");
    c.frame_height = detail::field<int>(ls, "height");
    if (!(c.rect.x_min >= 0 && c.rect.y_min >= 0 && c.rect.x_max <= c.frame_width &&
          c.rect.y_max <= c.frame_height && c.rect.x_max > c.rect.x_min && c.rect.y_max > c.rect.y_min))
      throw ConfigError("crop rectangle outside its frame or empty");
    crops[id] = c;
  });
  return crops;
}

inline CropMap read_crops(const std::filesystem::path& path) {
  return parse_crops(read_text_file(path.string()), path.string());
}

inline nlohmann::json ground_truth_to_json(const GroundTruthSet& gt) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& [id, f] : gt.frames) {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& o : f.objects)
      objs.push_back({{"class_id", o.class_id}, {"cx", o.box.cx}, {"cy", o.box.cy}, {"w", o.box.w}, {"h", o.box.h}});
    frames.push_back({{"frame_id", id}, {"width", f.width}, {"height", f.height}, {"objects", objs}});
  }
  return {{"frames", frames}};
}

inline void write_ground_truth(const std::filesystem::path& path, const GroundTruthSet& gt) {
  write_text_file(path.string(), ground_truth_to_json(gt).dump(1) + "\n");
}

// Accepts a ground-truth JSON file, a dataset manifest, or a dataset directory.
inline GroundTruthSet read_ground_truth(const std::filesystem::path& path) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) return manifest_ground_truth(read_manifest(path));
  if (!std::filesystem::exists(path, ec)) throw ConfigError("ground truth not found: '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path.string()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("ground truth '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (j.contains("entries")) return manifest_ground_truth(read_manifest(path));
  try {
    GroundTruthSet gt;
    for (const auto& f : j.at("frames")) {
      GroundTruthFrame g;
      g.frame_id = f.at("frame_id").get<std::uint64_t>();
      g.width = f.at("width").get<int>();
      g.height = f.at("height").get<int>();
      for (const auto& o : f.at("objects"))
        g.objects.push_back({o.at("class_id").get<int>(),
                             {o.at("cx").get<double>(), o.at("cy").get<double>(), o.at("w").get<double>(),
                              o.at("h").get<double>()}});
      gt.frames[g.frame_id] = std::move(g);
    }
    return gt;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed ground truth '" + path.string() + "': " + e.what());
  }
}

}  // namespace zoomdet
