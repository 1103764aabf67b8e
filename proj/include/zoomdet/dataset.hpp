#pragma once

// Dataset generation on disk plus the JSON manifest describing it.
//
// Layout under the output root:
//   train/images/img_000000.png   train/labels/img_000000.txt
//   val/images/...                val/labels/...
//   manifest.json
// Foreground assets are PNG files named "<class_id>_<name>.png".

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <future>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "zoomdet/error.hpp"
#include "zoomdet/eval.hpp"
#include "zoomdet/image_io.hpp"
#include "zoomdet/labels.hpp"
#include "zoomdet/synthgen.hpp"

namespace zoomdet {

namespace fs = std::filesystem;

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw Error("sha256 init failed");
  }

  void update(std::span<const std::uint8_t> bytes) {
    EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size());
  }
  void update(std::string_view s) { EVP_DigestUpdate(ctx_.get(), s.data(), s.size()); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", md[i]);
      out += buf;
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

struct GenerationConfig {
  fs::path asset_dir;
  fs::path background_dir;
  fs::path output_dir;
  PlacementSpec placement;
  IlluminationSpec illumination;
  int n_images = 10;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  int resize_to = 0;  // square output side in pixels; 0 keeps the background size
  int threads = 1;
};

struct ManifestEntry {
  std::string image_path;  // relative to the manifest's directory
  std::string label_path;
  std::string split;       // "train" or "val"
  int width = 0, height = 0;
  std::vector<LabeledBox> objects;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t n_train = 0, n_val = 0;
  std::string content_hash;
  std::vector<ManifestEntry> entries;
  fs::path root;  // directory holding manifest.json; not serialized
};

inline std::string manifest_filename() { return "manifest.json"; }

// Class id from a "<class_id>_<name>" file stem.
inline int asset_class_id(const fs::path& path) {
  const std::string stem = path.stem().string();
  std::size_t i = 0;
  while (i < stem.size() && std::isdigit(static_cast<unsigned char>(stem[i]))) ++i;
  if (i == 0 || i > 6 || (i < stem.size() && stem[i] != '_'))
    throw AssetError(path.string(), "file name must start with '<class_id>_'");
  return std::stoi(stem.substr(0, i));
}

inline std::vector<ForegroundAsset> load_assets(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw ConfigError("asset directory not found: '" + dir.string() + "'");
  std::vector<ForegroundAsset> assets;
  for (const auto& p : list_images(dir)) {
    ForegroundAsset a{read_image(p.string()), asset_class_id(p), p.filename().string()};
    try {
      a.validate();
    } catch (const ConfigError& e) {
      throw AssetError(p.string(), e.what());
    }
    assets.push_back(std::move(a));
  }
  if (assets.empty()) throw ConfigError("asset directory has no images: '" + dir.string() + "'");
  return assets;
}

inline std::vector<RasterImage> load_backgrounds(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw ConfigError("background directory not found: '" + dir.string() + "'");
  std::vector<RasterImage> out;
  for (const auto& p : list_images(dir)) out.push_back(read_image(p.string()));
  if (out.empty()) throw ConfigError("background directory has no images: '" + dir.string() + "'");
  return out;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& o : e.objects)
      objs.push_back({{"class_id", o.class_id},
                      {"cx", o.box.cx},
                      {"cy", o.box.cy},
                      {"w", o.box.w},
                      {"h", o.box.h}});
    entries.push_back({{"image", e.image_path},
                       {"label", e.label_path},
                       {"split", e.split},
                       {"width", e.width},
                       {"height", e.height},
                       {"objects", objs}});
  }
  return {{"seed", m.seed},
          {"split", {{"train_fraction", m.train_fraction}, {"train", m.n_train}, {"val", m.n_val}}},
          {"content_hash", m.content_hash},
          {"entries", entries}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train_fraction = j.at("split").at("train_fraction").get<double>();
    m.n_train = j.at("split").at("train").get<std::size_t>();
    m.n_val = j.at("split").at("val").get<std::size_t>();
    m.content_hash = j.at("content_hash").get<std::string>();
    for (const auto& e : j.at("entries")) {
      ManifestEntry me;
      me.image_path = e.at("image").get<std::string>();
      me.label_path = e.at("label").get<std::string>();
      me.split = e.at("split").get<std::string>();
      me.width = e.at("width").get<int>();
      me.height = e.at("height").get<int>();
      for (const auto& o : e.at("objects"))
        me.objects.push_back({o.at("class_id").get<int>(),
                              {o.at("cx").get<double>(), o.at("cy").get<double>(),
                               o.at("w").get<double>(), o.at("h").get<double>()}});
      m.entries.push_back(std::move(me));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  write_text_file(path.string(), to_json(m).dump(2) + "\n");
}

// Accepts either the manifest file or the dataset directory holding it.
inline DatasetManifest read_manifest(const fs::path& path) {
  std::error_code ec;
  const fs::path file = fs::is_directory(path, ec) ? path / manifest_filename() : path;
  if (!fs::exists(file, ec)) throw ConfigError("manifest not found: '" + file.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(file.string()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest '" + file.string() + "' is not valid JSON: " + e.what());
  }
  DatasetManifest m = manifest_from_json(j);
  m.root = file.parent_path();
  return m;
}

// SHA-256 over every image file then its label file, in entry order.
inline std::string compute_content_hash(const DatasetManifest& m) {
  Sha256 h;
  for (const auto& e : m.entries) {
    h.update(read_binary_file((m.root / e.image_path).string()));
    h.update(read_text_file((m.root / e.label_path).string()));
  }
  return h.hex();
}

// Every label file parses back to exactly the records in the manifest.
inline bool verify_labels(const DatasetManifest& m) {
  for (const auto& e : m.entries)
    if (read_label_file((m.root / e.label_path).string()) != e.objects) return false;
  return true;
}

// Ground truth keyed by entry index, which doubles as the frame id.
inline GroundTruthSet manifest_ground_truth(const DatasetManifest& m) {
  GroundTruthSet gt;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    gt.frames[i] = GroundTruthFrame{i, e.width, e.height, e.objects};
  }
  return gt;
}

inline DatasetManifest generate_dataset(const GenerationConfig& cfg) {
  if (cfg.n_images < 0) throw ConfigError("n_images must be >= 0");
  if (!(cfg.train_fraction >= 0 && cfg.train_fraction <= 1))
    throw ConfigError("train_fraction must be in [0, 1]");
  if (cfg.resize_to < 0 || (cfg.resize_to > 0 && cfg.resize_to < 32))
    throw ConfigError("resize_to must be 0 or at least 32");
  cfg.placement.validate();
  cfg.illumination.validate();
  const std::vector<RasterImage> backgrounds = load_backgrounds(cfg.background_dir);
  const std::vector<ForegroundAsset> assets = load_assets(cfg.asset_dir);

  for (const char* split : {"train", "val"})
    for (const char* kind : {"images", "labels"}) fs::create_directories(cfg.output_dir / split / kind);

  const std::size_t n = static_cast<std::size_t>(cfg.n_images);
  DatasetManifest m;
  m.seed = cfg.seed;
  m.train_fraction = cfg.train_fraction;
  m.n_train = static_cast<std::size_t>(std::llround(cfg.n_images * cfg.train_fraction));
  m.n_val = n - m.n_train;
  m.root = cfg.output_dir;
  m.entries.resize(n);

  // Each image depends only on (seed, index), so any partition of the work
  // produces identical files.
  auto produce = [&](std::size_t i) {
    Rng rng = make_rng(cfg.seed, i);
    const RasterImage& bg_src =
        backgrounds[uniform_int(rng, 0, static_cast<int>(backgrounds.size()) - 1)];
    const RasterImage bg =
        cfg.resize_to > 0 ? resize_bilinear(bg_src, cfg.resize_to, cfg.resize_to) : bg_src;
    ComposedSample s = compose_sample(bg, assets, cfg.placement, cfg.illumination, rng);
    char name[32];
    std::snprintf(name, sizeof name, "img_%06zu", i);
    ManifestEntry& e = m.entries[i];
    e.split = i < m.n_train ? "train" : "val";
    e.image_path = e.split + "/images/" + name + ".png";
    e.label_path = e.split + "/labels/" + name + ".txt";
    e.width = s.image.width();
    e.height = s.image.height();
    for (const auto& l : s.labels) e.objects.push_back(quantize_label(l));
    write_png((cfg.output_dir / e.image_path).string(), s.image);
    write_label_file((cfg.output_dir / e.label_path).string(), e.objects);
  };

  const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, std::max<std::size_t>(n, 1));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w)
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += workers) produce(i);
    }));
  for (auto& j : jobs) j.get();

  m.content_hash = compute_content_hash(m);
  write_manifest(cfg.output_dir / manifest_filename(), m);
  return m;
}

}  // namespace zoomdet
