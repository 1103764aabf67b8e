// zoomdet: dataset generation, label projection, detection runs, evaluation,
// benchmarking and the detection service, behind one command.
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zoomdet/config.hpp"
#include "zoomdet/dataset.hpp"
#include "zoomdet/eval.hpp"
#include "zoomdet/pipeline.hpp"
#include "zoomdet/records.hpp"
#include "zoomdet/service.hpp"
#include "zoomdet/synthgen.hpp"

namespace fs = std::filesystem;
using namespace zoomdet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig load_run_config(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  c.apply_seed();
  c.validate();
  return c;
}

fs::path out_dir(const Globals& g, const char* fallback) {
  fs::path p = g.out.empty() ? fs::path(fallback) : fs::path(g.out);
  fs::create_directories(p);
  return p;
}

GroundTruthSet scene_ground_truth(const RunConfig& c, std::size_t n) {
  GroundTruthSet gt;
  for (std::size_t i = 0; i < n; ++i) gt.frames[i] = layout_assembly_scene(c.scene, c.seed, i);
  return gt;
}

// Frames come either from a dataset (manifest or directory) or from generated scenes.
GroundTruthSet frame_source(const RunConfig& c, const std::string& dataset, int scene_frames) {
  if (!dataset.empty()) return manifest_ground_truth(read_manifest(dataset));
  if (scene_frames < 0) throw ConfigError("--scene must be >= 0");
  return scene_ground_truth(c, static_cast<std::size_t>(scene_frames));
}

MockDetectorModel perfect_model(const MockDetectorModel& m) {
  MockDetectorModel p = m;
  p.loc_noise_sigma = 0;
  p.base_miss_rate = 0;
  p.min_detectable_px = 0;
  p.false_positive_rate = 0;
  return p;
}

struct Detectors {
  MockDetector context, small, oracle_context;

  explicit Detectors(const RunConfig& c)
      : context(c.mock, c.detector, {c.pipeline.context_class_id}),
        small(c.mock, c.detector,
              std::vector<int>(c.pipeline.small_class_ids.begin(), c.pipeline.small_class_ids.end())),
        oracle_context(perfect_model(c.mock), c.detector, {c.pipeline.context_class_id}) {}
};

PipelineResult run_mode(PipelineMode mode, const Frame& frame, const Detectors& d, const RunConfig& c,
                        const GroundTruthFrame* gt) {
  PipelineConfig pc = c.pipeline;
  pc.mode = mode;
  if (mode == PipelineMode::two_stage)
    return run_two_stage(frame, c.gt_crops ? d.oracle_context : d.context, d.small, pc, gt);
  return run_single_stage(frame, {&d.context, &d.small}, pc, gt);
}

std::vector<PipelineMode> parse_modes(const std::string& mode) {
  if (mode == "single") return {PipelineMode::single_stage};
  if (mode == "two") return {PipelineMode::two_stage};
  if (mode == "both") return {PipelineMode::single_stage, PipelineMode::two_stage};
  throw ConfigError("--mode must be single, two or both");
}

const char* mode_tag(PipelineMode m) { return m == PipelineMode::two_stage ? "two" : "single"; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_gen(const Globals& g, const std::string& assets, const std::string& backgrounds, int n, int threads) {
  RunConfig c = load_run_config(g);
  GenerationConfig gen = c.generation;
  if (!assets.empty()) gen.asset_dir = assets;
  if (!backgrounds.empty()) gen.background_dir = backgrounds;
  if (n >= 0) gen.n_images = n;
  if (threads > 0) gen.threads = threads;
  gen.placement = c.placement;
  gen.illumination = c.illumination;
  gen.output_dir = out_dir(g, "dataset");
  const DatasetManifest m = generate_dataset(gen);
  std::cout << "manifest: " << (gen.output_dir / manifest_filename()).string() << "\n"
            << "images: " << m.entries.size() << " (train " << m.n_train << ", val " << m.n_val << ")\n"
            << "content_hash: " << m.content_hash << "\n";
  return kExitOk;
}

int cmd_labelgen(const Globals& g) {
  const RunConfig c = load_run_config(g);
  const fs::path out = out_dir(g, "viewpoint_labels");
  const auto poses = sample_viewpoints(c.viewpoints);
  const auto labels = render_labels_for_viewpoints(c.object3d.resolved(), c.camera, poses, c.object3d.class_id);
  std::string index = "# index azimuth_deg elevation_deg radius status\n";
  std::size_t labeled = 0;
  char buf[160];
  for (const auto& v : labels) {
    const CameraPose& p = poses[v.pose_index];
    std::snprintf(buf, sizeof buf, "%zu %.6f %.6f %.6f %s\n", v.pose_index, detail::deg(p.azimuth),
                  detail::deg(p.elevation), p.radius, to_string(v.skipped));
    index += buf;
    if (!v.label) continue;
    std::snprintf(buf, sizeof buf, "view_%04zu.txt", v.pose_index);
    write_label_file((out / buf).string(), {*v.label});
    ++labeled;
  }
  write_text_file((out / "viewpoints.txt").string(), index);
  std::cout << "viewpoints: " << poses.size() << ", labeled: " << labeled
            << ", skipped: " << poses.size() - labeled << "\n"
            << "labels written to " << out.string() << "\n";
  return kExitOk;
}

int cmd_detect(const Globals& g, const std::string& dataset, int scene_frames, const std::string& mode) {
  const RunConfig c = load_run_config(g);
  const auto modes = parse_modes(mode);
  if (dataset.empty() && scene_frames < 0) throw ConfigError("detect needs --dataset or --scene");
  const GroundTruthSet gt = frame_source(c, dataset, scene_frames);
  const fs::path out = out_dir(g, "detections");
  write_ground_truth(out / "ground_truth.json", gt);
  const Detectors det(c);

  std::cout << std::left << std::setw(8) << "mode" << std::right << std::setw(8) << "frames" << std::setw(10)
            << "fallback" << std::setw(12) << "stage1_us" << std::setw(10) << "crop_us" << std::setw(12)
            << "stage2_us" << std::setw(12) << "total_us" << "  (means)\n";
  for (PipelineMode m : modes) {
    DetectionSet dets;
    CropMap crops;
    std::size_t fallbacks = 0;
    double s1 = 0, cr = 0, s2 = 0, tot = 0;
    for (const auto& [id, f] : gt.frames) {
      const Frame frame{id, f.width, f.height, nullptr};
      const PipelineResult r = run_mode(m, frame, det, c, &f);
      dets.frames[id] = r.all_detections();
      crops[id] = r.crop_region;
      fallbacks += r.fallback_used;
      s1 += r.timings.stage1_us;
      cr += r.timings.crop_us;
      s2 += r.timings.stage2_us;
      tot += r.timings.total_us;
    }
    write_text_file((out / (std::string("detections_") + mode_tag(m) + ".txt")).string(), format_detections(dets));
    write_text_file((out / (std::string("crops_") + mode_tag(m) + ".txt")).string(), format_crops(crops));
    const double n = std::max<std::size_t>(gt.frames.size(), 1);
    std::cout << std::left << std::setw(8) << mode_tag(m) << std::right << std::setw(8) << gt.frames.size()
              << std::setw(10) << fallbacks << std::setw(12) << fmt("%.1f", s1 / n) << std::setw(10)
              << fmt("%.1f", cr / n) << std::setw(12) << fmt("%.1f", s2 / n) << std::setw(12)
              << fmt("%.1f", tot / n) << "\n";
  }
  std::cout << "output: " << out.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Globals& g, const std::string& gt_path, const std::vector<std::string>& det_paths,
             const std::vector<std::string>& crop_paths, const std::vector<double>& thresholds_flag,
             const std::vector<int>& classes, const std::string& interpolation, const std::string& records) {
  RunConfig c = load_run_config(g);
  const std::vector<double> thresholds = thresholds_flag.empty() ? c.eval.iou_thresholds : thresholds_flag;
  validate_thresholds(thresholds);
  if (det_paths.empty() || det_paths.size() > 2) throw ConfigError("--dets takes one or two files");
  if (!crop_paths.empty() && crop_paths.size() != 1 && crop_paths.size() != det_paths.size())
    throw ConfigError("--crops takes one file, or one per --dets file");
  EvalOptions opt;
  opt.interpolation = c.eval.interpolation;
  if (interpolation == "eleven_point") opt.interpolation = Interpolation::eleven_point;
  else if (interpolation == "all_point") opt.interpolation = Interpolation::all_point;
  else if (!interpolation.empty()) throw ConfigError("--interpolation must be all_point or eleven_point");
  opt.classes = classes.empty() ? c.eval.classes : classes;

  const GroundTruthSet gt = read_ground_truth(gt_path);
  std::vector<EvalReport> reports;
  std::string record_text;
  for (std::size_t i = 0; i < det_paths.size(); ++i) {
    DetectionSet dets = read_detections(det_paths[i]);
    GroundTruthSet frame_gt = gt;
    opt.tag = FrameTag::full_size;
    if (!crop_paths.empty()) {
      const CropMap crops = read_crops(crop_paths[crop_paths.size() == 1 ? 0 : i]);
      frame_gt = to_crop_frame(gt, crops);
      dets = to_crop_frame(dets, crops);
      opt.tag = FrameTag::cropped;
    }
    reports.push_back(evaluate(frame_gt, dets, thresholds, opt));
    std::cout << "== " << det_paths[i] << "\n" << render_report(reports.back()) << "\n";
    record_text += "# file: " + det_paths[i] + "\n" + report_records(reports.back());
  }
  if (reports.size() == 2) {
    const auto label = [](const std::string& p) { return fs::path(p).stem().string(); };
    std::cout << render_comparison(compare_reports(reports[0], reports[1]), label(det_paths[0]),
                                   label(det_paths[1]));
  }
  if (!records.empty()) write_text_file(records, record_text);
  return kExitOk;
}

int cmd_bench(const Globals& g, int frames_flag, const std::string& mode) {
  const RunConfig c = load_run_config(g);
  const int n = frames_flag >= 0 ? frames_flag : c.bench.frames;
  if (n <= 0) throw ConfigError("bench needs at least one frame");
  const auto modes = parse_modes(mode);
  const Detectors det(c);

  std::cout << "frames: " << n << " at " << c.scene.width << "x" << c.scene.height << "\n"
            << std::left << std::setw(8) << "mode" << std::right << std::setw(10) << "fps";
  for (const char* s : {"stage1", "crop", "stage2", "total"})
    std::cout << std::setw(11) << (std::string(s) + " p50") << std::setw(11) << (std::string(s) + " p95");
  std::cout << "   (us)\n";
  for (PipelineMode m : modes) {
    Reservoir s1, cr, s2, tot;
    double busy_us = 0;
    for (int i = 0; i < n; ++i) {
      const GroundTruthFrame f = layout_assembly_scene(c.scene, c.seed, i);
      const RasterImage pixels = render_assembly_scene(f, c.scene.context_class_id);
      const Frame frame{static_cast<std::uint64_t>(i), f.width, f.height, &pixels};
      const PipelineResult r = run_mode(m, frame, det, c, &f);
      s1.add(r.timings.stage1_us);
      cr.add(r.timings.crop_us);
      s2.add(r.timings.stage2_us);
      tot.add(r.timings.total_us);
      busy_us += r.timings.total_us;
    }
    const double fps = busy_us > 0 ? n / (busy_us * 1e-6) : 0;
    std::cout << std::left << std::setw(8) << mode_tag(m) << std::right << std::setw(10) << fmt("%.1f", fps);
    for (const Reservoir* r : {&s1, &cr, &s2, &tot})
      std::cout << std::setw(11) << fmt("%.0f", r->percentile(50)) << std::setw(11)
                << fmt("%.0f", r->percentile(95));
    std::cout << "\n";
  }
  return kExitOk;
}

GroundTruthStore store_from(const GroundTruthSet& gt) { return {gt.frames.begin(), gt.frames.end()}; }

int cmd_serve(const Globals& g, const std::string& bind, const std::string& dataset, int scene_frames) {
  const RunConfig c = load_run_config(g);
  ServerConfig sc;
  sc.bind = net::parse_endpoint(bind.empty() ? c.service.bind : bind);
  sc.max_payload = c.service.max_payload;
  sc.shutdown_deadline = std::chrono::milliseconds(c.service.shutdown_deadline_ms);
  GroundTruthStore store;
  if (!dataset.empty() || scene_frames >= 0) store = store_from(frame_source(c, dataset, scene_frames));
  auto processor = std::make_shared<PipelineProcessor>(c.pipeline, c.mock, c.detector, std::move(store));

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Server server(sc, processor);
  server.start();
  std::cout << "listening on " << server.endpoint().str() << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  const auto s = server.stats();
  std::cout << "stopped: received " << s.frames_received << ", processed " << s.frames_processed << ", dropped "
            << s.frames_dropped << std::endl;
  return kExitOk;
}

int cmd_replay(const Globals& g, const std::string& endpoint, const std::string& dataset,
               const std::string& images, int scene_frames, double fps, const std::string& report_path) {
  const RunConfig c = load_run_config(g);
  ReplayOptions opt;
  opt.endpoint = net::parse_endpoint(endpoint.empty() ? c.service.endpoint : endpoint);
  opt.target_fps = fps >= 0 ? fps : c.service.target_fps;
  const auto enc = c.service.encoding == "jpeg" ? wire::Encoding::jpeg : wire::Encoding::raw_rgb8;
  const int sources = !dataset.empty() + !images.empty() + (scene_frames >= 0);
  if (sources != 1) throw ConfigError("replay needs exactly one of --dataset, --images, --scene");

  ReplaySource src;
  if (!dataset.empty()) {
    src = manifest_source(read_manifest(dataset), enc);
  } else if (!images.empty()) {
    src = directory_source(images, enc);
  } else {
    src = {static_cast<std::size_t>(scene_frames), [c, enc](std::size_t i) {
             const GroundTruthFrame f = layout_assembly_scene(c.scene, c.seed, i);
             return frame_from_image(i, render_assembly_scene(f, c.scene.context_class_id), enc);
           }};
  }
  const ReplayReport r = replay_client(src, opt);

  std::cout << "frames sent: " << r.frames_sent << "\n"
            << "responses: " << r.responses.size() << "\n"
            << "achieved fps: " << fmt("%.2f", r.achieved_fps) << "\n"
            << "rtt p50/p95/p99 (us): " << fmt("%.0f", r.rtt_us.p50) << " / " << fmt("%.0f", r.rtt_us.p95)
            << " / " << fmt("%.0f", r.rtt_us.p99) << "\n";
  if (r.server_stats)
    std::cout << "server: received " << r.server_stats->frames_received << ", processed "
              << r.server_stats->frames_processed << ", dropped " << r.server_stats->frames_dropped << ", fps "
              << fmt("%.2f", r.server_stats->fps) << "\n";
  if (!report_path.empty()) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& rec : r.responses)
      frames.push_back({{"frame_id", rec.frame_id},
                        {"rtt_us", rec.rtt_us},
                        {"detections", rec.response.detections.size()},
                        {"fallback_used", rec.response.fallback_used},
                        {"stage1_us", rec.response.stage1_us},
                        {"stage2_us", rec.response.stage2_us},
                        {"total_us", rec.response.total_us}});
    nlohmann::json j{{"frames_sent", r.frames_sent},
                     {"responses", r.responses.size()},
                     {"achieved_fps", r.achieved_fps},
                     {"rtt_us", {{"p50", r.rtt_us.p50}, {"p95", r.rtt_us.p95}, {"p99", r.rtt_us.p99}}},
                     {"failed", r.failed},
                     {"error", r.error},
                     {"frames", frames}};
    if (r.server_stats)
      j["server"] = {{"frames_received", r.server_stats->frames_received},
                     {"frames_processed", r.server_stats->frames_processed},
                     {"frames_dropped", r.server_stats->frames_dropped},
                     {"fps", r.server_stats->fps}};
    write_text_file(report_path, j.dump(2) + "\n");
  }
  if (r.failed) {
    std::cerr << "replay failed: " << r.error << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zoomdet: two-stage small-object detection toolkit"};
  app.require_subcommand(1);
  app.footer("Configuration keys (JSON, all optional) and their defaults:\n" + describe_config_keys());
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "global seed (overrides the config)");
  app.add_option("--out", g.out, "output directory or file");

  std::string assets, backgrounds, dataset, images, mode = "both", gt, interpolation, records, bind,
      endpoint, report;
  int n = -1, threads = 0, scene = -1, frames = -1;
  double fps = -1;
  std::vector<std::string> dets, crops;
  std::vector<double> thresholds;
  std::vector<int> classes;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--assets", assets, "foreground directory (<class_id>_<name>.png)");
  gen->add_option("--backgrounds", backgrounds, "background directory");
  gen->add_option("-n,--count", n, "number of images");
  gen->add_option("--threads", threads, "worker threads");

  auto* labelgen = app.add_subcommand("labelgen", "project a 3D box into labels for sampled viewpoints");

  auto* detect = app.add_subcommand("detect", "run the mock pipeline and write detection files");
  detect->add_option("--dataset", dataset, "dataset directory or manifest");
  detect->add_option("--scene", scene, "use N generated assembly scenes instead of a dataset");
  detect->add_option("--mode", mode, "single, two or both");

  auto* eval = app.add_subcommand("eval", "evaluate detection files against ground truth");
  eval->add_option("--gt", gt, "ground-truth JSON, dataset directory or manifest")->required();
  eval->add_option("--dets", dets, "one or two detection files")->required();
  eval->add_option("--crops", crops, "crop files; evaluates in crop coordinates");
  eval->add_option("--thresholds", thresholds, "IoU thresholds")->delimiter(',');
  eval->add_option("--classes", classes, "restrict to these class ids")->delimiter(',');
  eval->add_option("--interpolation", interpolation, "all_point or eleven_point");
  eval->add_option("--records", records, "write per-class records to this file");

  auto* bench = app.add_subcommand("bench", "time both pipelines on generated frames");
  bench->add_option("--frames", frames, "number of frames");
  bench->add_option("--mode", mode, "single, two or both");

  auto* serve = app.add_subcommand("serve", "run the detection service until SIGINT/SIGTERM");
  serve->add_option("--bind", bind, "host:port (port 0 picks a free port)");
  serve->add_option("--dataset", dataset, "ground truth for the mock detectors");
  serve->add_option("--scene", scene, "ground truth from N generated scenes");

  auto* replay = app.add_subcommand("replay", "stream frames to a running service");
  replay->add_option("--endpoint", endpoint, "host:port");
  replay->add_option("--dataset", dataset, "dataset directory or manifest");
  replay->add_option("--images", images, "directory of images");
  replay->add_option("--scene", scene, "N generated scenes");
  replay->add_option("--fps", fps, "target send rate (0: unpaced)");
  replay->add_option("--report", report, "write a JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen) return cmd_gen(g, assets, backgrounds, n, threads);
    if (*labelgen) return cmd_labelgen(g);
    if (*detect) return cmd_detect(g, dataset, scene, mode);
    if (*eval) return cmd_eval(g, gt, dets, crops, thresholds, classes, interpolation, records);
    if (*bench) return cmd_bench(g, frames, mode);
    if (*serve) return cmd_serve(g, bind, dataset, scene);
    if (*replay) return cmd_replay(g, endpoint, dataset, images, scene, fps, report);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const AssetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
