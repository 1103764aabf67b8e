#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "ap_oracle.hpp"
#include "golden.hpp"
#include "random_instances.hpp"
#include "test_util.hpp"
#include "zoomdet/dataset.hpp"
#include "zoomdet/eval.hpp"
#include "zoomdet/geometry.hpp"
#include "zoomdet/labels.hpp"
#include "zoomdet/pipeline.hpp"
#include "zoomdet/service.hpp"
#include "zoomdet/synthgen.hpp"
#include "zoomdet/wire.hpp"

using namespace zoomdet;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail << what;
    pass = false;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// P(X >= k) for X ~ Binomial(n, 1/2).
double sign_test_p(int k, int n) {
  double p = 0;
  for (int i = k; i <= n; ++i) p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                                             n * std::log(2.0));
  return p;
}

void oracle_equivalence(Outcome& out) {
  const auto t0 = Clock::now();
  Rng rng = make_rng(20240601);
  const std::vector<double> thr{0.1, 0.3, 0.5, 0.75};
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = testutil::random_instance(rng, 3, 10, 5, 5);
    const EvalReport r = evaluate(inst.gt_set, inst.det_set, thr);
    for (const auto& t : r.thresholds)
      for (const auto& c : t.classes) {
        std::size_t n_gt = 0;
        const auto ranked = oracle::outcomes(inst.gt, inst.det, c.class_id, t.iou_threshold, n_gt);
        out.require(c.n_gt == n_gt && c.ap.has_value(), "ground-truth count mismatch");
        if (!c.ap) continue;
        worst = std::max(worst, std::abs(*c.ap - oracle::average_precision(ranked, n_gt)));
      }
  }
  const double secs = seconds_since(t0);
  out.require(worst <= 1e-9, "AP differs from oracle");
  out.require(secs < 10, "too slow");
  out.detail << (out.pass ? "" : "; ") << "max |AP - oracle| = " << worst << ", " << secs << " s";
}

struct RunMaps {
  std::vector<double> single, two;
};

RunMaps run_seed(std::uint64_t seed, Fallback fallback, const std::vector<double>& thr) {
  MockDetectorModel m;
  m.input_resolution = 416;
  m.loc_noise_sigma = 2.0;
  m.base_miss_rate = 0.1;
  m.min_detectable_px = 4;
  m.seed = seed;
  const DetectorConfig dc;
  const MockDetector s1(m, dc, {0}), s2(m, dc, {1});
  PipelineConfig two;
  two.fallback = fallback;
  PipelineConfig one = two;
  one.mode = PipelineMode::single_stage;

  const AssemblySceneSpec spec;
  GroundTruthSet gt;
  DetectionSet a, b;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const GroundTruthFrame f = layout_assembly_scene(spec, seed, i);
    gt.frames[i] = f;
    const Frame fr{i, f.width, f.height, nullptr};
    a.frames[i] = run_single_stage(fr, {&s1, &s2}, one, &f).small_detections_fullframe;
    b.frames[i] = run_two_stage(fr, s1, s2, two, &f).small_detections_fullframe;
  }
  EvalOptions o;
  o.classes = {1};
  const auto ra = evaluate(gt, a, thr, o), rb = evaluate(gt, b, thr, o);
  RunMaps maps;
  for (double t : thr) {
    maps.single.push_back(ra.at(t).map.value_or(0));
    maps.two.push_back(rb.at(t).map.value_or(0));
  }
  return maps;
}

void two_stage_advantage(Outcome& out) {
  const auto t0 = Clock::now();
  const std::vector<double> thr{0.10, 0.20, 0.30, 0.40, 0.50};
  int wins = 0, losses = 0, report_none_wins = 0;
  double sum_single = 0, sum_two = 0;
  bool monotone = true;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const RunMaps r = run_seed(seed, Fallback::full_frame_detect, thr);
    for (std::size_t i = 1; i < thr.size(); ++i)
      monotone = monotone && r.single[i] <= r.single[i - 1] + 1e-12 && r.two[i] <= r.two[i - 1] + 1e-12;
    const double s = r.single.back(), t = r.two.back();
    sum_single += s;
    sum_two += t;
    wins += t > s;
    losses += t < s;
    const RunMaps rn = run_seed(seed, Fallback::report_none, {0.5});
    report_none_wins += rn.two[0] > rn.single[0];
  }
  const double p = sign_test_p(wins, wins + losses);
  const double secs = seconds_since(t0);
  out.require(sum_two > sum_single, "mean two-stage mAP not above single-stage");
  out.require(p < 0.01, "sign test not significant");
  out.require(monotone, "mAP increased with threshold");
  out.require(secs < 120, "too slow");
  out.detail << (out.pass ? "" : "; ") << "mAP@0.5 single " << sum_single / 30 << " two " << sum_two / 30
             << ", wins " << wins << "/" << wins + losses << " p=" << p << " (report_none fallback wins "
             << report_none_wins << "/30), " << secs << " s";
}

void projection(Outcome& out) {
  const CameraIntrinsics square{100, 100, 50, 50, 100, 100};
  const RigidTransform identity{Mat3::identity(), {0, 0, 0}};
  const PixelBox b = project_box3(square, identity, Box3D{{0, 0, 4}, {0.5, 0.5, 0.5}});
  const double lo = 35.714285714285715, hi = 64.28571428571429;
  const double err = std::max({std::abs(b.x_min - lo), std::abs(b.y_min - lo), std::abs(b.x_max - hi),
                               std::abs(b.y_max - hi)});
  out.require(err <= 1e-6, "cube envelope off");

  Rng rng = make_rng(99);
  const CameraIntrinsics cam{700, 650, 320, 240, 640, 480};
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const double s = uniform(rng, 0.01, 0.5);
    const double z = uniform(rng, 1, 20);
    const PixelBox p = project_box3_unclipped(cam, identity, Box3D{{0, 0, z + s / 2}, {s / 2, s / 2, s / 2}});
    worst = std::max({worst, std::abs(p.width() - cam.fx * s / z) / (cam.fx * s / z),
                      std::abs(p.height() - cam.fy * s / z) / (cam.fy * s / z)});
  }
  out.require(worst <= 1e-12, "scale law violated");
  out.detail << (out.pass ? "" : "; ") << "envelope error " << err << ", worst relative width error " << worst;
}

PixelBox changed_pixels(const RasterImage& img, Rgba bg) {
  PixelBox b{1e9, 1e9, -1e9, -1e9};
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgba c = img.at(x, y);
      if (c.r == bg.r && c.g == bg.g && c.b == bg.b) continue;
      b = {std::min(b.x_min, double(x)), std::min(b.y_min, double(y)), std::max(b.x_max, x + 1.0),
           std::max(b.y_max, y + 1.0)};
    }
  return b;
}

void label_round_trip(Outcome& out) {
  testutil::TempDir dir;
  testutil::write_generation_fixture(dir / "assets", dir / "backgrounds", 256);
  auto config = [&](const std::string& name) {
    GenerationConfig cfg;
    cfg.asset_dir = dir / "assets";
    cfg.background_dir = dir / "backgrounds";
    cfg.output_dir = dir / name;
    cfg.n_images = 20;
    cfg.seed = 4242;
    cfg.placement.count_min = cfg.placement.count_max = 1;
    cfg.placement.scale = {0.05, 0.4};
    return cfg;
  };
  const DatasetManifest a = generate_dataset(config("a"));
  const DatasetManifest b = generate_dataset(config("b"));
  out.require(a.entries.size() == 20, "wrong image count");
  double worst = 0;
  for (const auto& e : a.entries) {
    const auto labels = read_label_file((dir / "a" / e.label_path).string());
    const RasterImage img = read_image((dir / "a" / e.image_path).string());
    if (labels.size() != 1) {
      out.require(false, "expected one label per image");
      continue;
    }
    const PixelBox lab = pixel_from_norm(labels[0].box, img.width(), img.height());
    const PixelBox got = changed_pixels(img, testutil::kBackground);
    worst = std::max({worst, std::abs(lab.x_min - got.x_min), std::abs(lab.y_min - got.y_min),
                      std::abs(lab.x_max - got.x_max), std::abs(lab.y_max - got.y_max)});
  }
  out.require(worst <= 1.0, "label off placement by more than 1 px");
  out.require(a.content_hash == b.content_hash, "content hash differs between runs");
  out.detail << (out.pass ? "" : "; ") << "worst edge error " << worst << " px, hash " << a.content_hash.substr(0, 12);
}

void throughput(Outcome& out) {
  const auto t0 = Clock::now();
  MockDetectorModel m;
  m.loc_noise_sigma = 0;
  m.base_miss_rate = 0;
  m.min_detectable_px = 0;
  AssemblySceneSpec spec;
  spec.width = 1280;
  spec.height = 720;
  GroundTruthStore store;
  std::vector<wire::FramePayload> frames;
  for (std::uint64_t i = 0; i < 100; ++i) {
    store[i] = layout_assembly_scene(spec, 5, i);
    frames.push_back(frame_from_image(i, render_assembly_scene(store[i], 0)));
  }
  ServerConfig sc;
  sc.bind = {"127.0.0.1", 0};
  Server server(sc, std::make_shared<PipelineProcessor>(PipelineConfig{}, m, DetectorConfig{}, std::move(store)));
  server.start();
  ReplayOptions opt;
  opt.endpoint = server.endpoint();
  opt.target_fps = 30;
  const ReplayReport r = replay_client({frames.size(), [&](std::size_t i) { return frames[i]; }}, opt);
  server.stop();
  const double secs = seconds_since(t0);
  out.require(!r.failed, "replay failed: " + r.error);
  out.require(r.server_errors.empty(), "server reported errors");
  out.require(r.achieved_fps >= 9.4, "below 9.4 fps");
  out.require(r.server_stats.has_value(), "no stats");
  if (r.server_stats)
    out.require(r.server_stats->frames_received == r.server_stats->frames_processed + r.server_stats->frames_dropped,
                "frame accounting mismatch");
  for (const auto& rec : r.responses)
    out.require(std::uint64_t{rec.response.total_us} >= std::uint64_t{rec.response.stage1_us} + rec.response.stage2_us,
                "stage times exceed total");
  out.require(secs < 60, "too slow");
  out.detail << (out.pass ? "" : "; ") << r.responses.size() << " responses at " << r.achieved_fps << " fps";
  if (r.server_stats)
    out.detail << ", received " << r.server_stats->frames_received << " processed "
               << r.server_stats->frames_processed << " dropped " << r.server_stats->frames_dropped;
  out.detail << ", " << secs << " s";
}

std::span<const std::uint8_t> payload_of(const std::vector<std::uint8_t>& msg) {
  return std::span<const std::uint8_t>(msg).subspan(wire::kHeaderSize);
}

void protocol(Outcome& out) {
  using namespace wire;
  const auto frame = testutil::load_hex("frame_raw.hex");
  out.require(decode_frame(payload_of(frame)) == testutil::golden_frame(), "FRAME decode");
  out.require(encode_message(MsgType::frame, encode(decode_frame(payload_of(frame)))) == frame, "FRAME re-encode");
  const auto det = testutil::load_hex("detections.hex");
  out.require(decode_detections(payload_of(det)) == testutil::golden_detections(), "DETECTIONS decode");
  out.require(encode_message(MsgType::detections, encode(decode_detections(payload_of(det)))) == det,
              "DETECTIONS re-encode");
  const auto stats = testutil::load_hex("stats_resp.hex");
  out.require(decode_stats(payload_of(stats)) == testutil::golden_stats(), "STATS_RESP decode");
  out.require(encode_message(MsgType::stats_resp, encode(decode_stats(payload_of(stats)))) == stats,
              "STATS_RESP re-encode");

  Rng rng = make_rng(8080);
  auto f32 = [&] { return static_cast<float>(uniform(rng, -1e3, 1e3)); };
  int lossless = 0;
  for (int i = 0; i < 1000; ++i) {
    FramePayload f;
    f.frame_id = rng();
    f.timestamp_us = rng();
    f.width = static_cast<std::uint32_t>(uniform_int(rng, 0, 12));
    f.height = static_cast<std::uint32_t>(uniform_int(rng, 0, 12));
    f.encoding = uniform_int(rng, 0, 1) ? Encoding::jpeg : Encoding::raw_rgb8;
    f.data.resize(f.encoding == Encoding::raw_rgb8 ? f.width * f.height * 3 : uniform_int(rng, 0, 64));
    for (auto& b : f.data) b = static_cast<std::uint8_t>(rng());
    DetectionsPayload d;
    d.frame_id = rng();
    d.fallback_used = uniform_int(rng, 0, 1);
    d.stage1_us = static_cast<std::uint32_t>(rng());
    d.stage2_us = static_cast<std::uint32_t>(rng());
    d.total_us = static_cast<std::uint32_t>(rng());
    d.detections.resize(uniform_int(rng, 0, 16));
    for (auto& x : d.detections) x = {static_cast<std::uint16_t>(rng()), f32(), f32(), f32(), f32(), f32()};
    StatsPayload s{rng(), rng(), rng(), uniform(rng, 0, 100),
                   {uniform(rng, 0, 1e6), uniform(rng, 0, 1e6), uniform(rng, 0, 1e6)},
                   {uniform(rng, 0, 1e6), uniform(rng, 0, 1e6), uniform(rng, 0, 1e6)},
                   {uniform(rng, 0, 1e6), uniform(rng, 0, 1e6), uniform(rng, 0, 1e6)}};
    ErrorPayload e{static_cast<ErrorCode>(uniform_int(rng, 1, 6)), std::string(uniform_int(rng, 0, 40), 'e')};
    lossless += decode_frame(payload_of(encode_message(MsgType::frame, encode(f)))) == f &&
                decode_detections(encode(d)) == d && decode_stats(encode(s)) == s && decode_error(encode(e)) == e;
  }
  out.require(lossless == 1000, "lossy round trip");
  out.detail << (out.pass ? "" : "; ") << "golden vectors byte-identical, " << lossless << "/1000 round trips";
}

void small_objects(Outcome& out) {
  auto area_box = [](double a) { return NormBox{0.5, 0.5, a, 1.0}; };
  const bool in_lo = is_small_object(area_box(0.0008)), in_hi = is_small_object(area_box(0.0058));
  const bool out_lo = is_small_object(area_box(0.00079)), out_hi = is_small_object(area_box(0.00581));
  out.require(in_lo && in_hi, "band edges not inclusive");
  out.require(!out_lo && !out_hi, "values outside band classified small");
  out.detail << (out.pass ? "" : "; ") << "0.0008=" << in_lo << " 0.0058=" << in_hi << " 0.00079=" << out_lo
             << " 0.00581=" << out_hi;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"1 oracle equivalence", oracle_equivalence}, {"2 two-stage advantage", two_stage_advantage},
      {"3 projection", projection},                 {"4 label round trip", label_round_trip},
      {"5 throughput accounting", throughput},      {"6 protocol stability", protocol},
      {"7 small-object band", small_objects}};
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome out;
    try {
      run(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    failed += !out.pass;
    std::printf("%s %s: %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
