#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "zoomdet/dataset.hpp"
#include "zoomdet/synthgen.hpp"

using namespace zoomdet;
using testutil::TempDir;

namespace {

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

PixelBox sprite_pixels(const RasterImage& img) {
  PixelBox b{1e9, 1e9, -1e9, -1e9};
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgba c = img.at(x, y);
      if (c.r <= c.g + 20) continue;
      b = {std::min(b.x_min, double(x)), std::min(b.y_min, double(y)), std::max(b.x_max, x + 1.0),
           std::max(b.y_max, y + 1.0)};
    }
  return b;
}

GenerationConfig fixture_config(const TempDir& dir, const std::string& out, std::uint64_t seed) {
  GenerationConfig cfg;
  cfg.asset_dir = dir / "assets";
  cfg.background_dir = dir / "backgrounds";
  cfg.output_dir = dir / out;
  cfg.n_images = 10;
  cfg.seed = seed;
  cfg.placement.count_min = 1;
  cfg.placement.count_max = 1;
  cfg.placement.scale = {0.1, 0.3};
  return cfg;
}

}  // namespace

TEST(Labels, FormatsSixDecimals) {
  EXPECT_EQ(format_label_line({1, {0.5, 0.25, 0.125, 0.0625}}), "1 0.500000 0.250000 0.125000 0.062500");
  EXPECT_EQ(format_labels({{0, {0.1, 0.2, 0.3, 0.4}}, {2, {0.5, 0.5, 1, 1}}}),
            "0 0.100000 0.200000 0.300000 0.400000\n2 0.500000 0.500000 1.000000 1.000000\n");
}

TEST(Labels, ParseRoundTrip) {
  const std::vector<LabeledBox> labels{{3, {0.123456, 0.654321, 0.2, 0.1}}, {0, {0.5, 0.5, 0.5, 0.5}}};
  EXPECT_EQ(parse_labels(format_labels(labels)), labels);
  EXPECT_EQ(parse_labels("1 0.5 0.5 0.1 0.1\r\n\n"), (std::vector<LabeledBox>{{1, {0.5, 0.5, 0.1, 0.1}}}));
}

TEST(Labels, StrictParser) {
  EXPECT_THROW(parse_labels("1 0.5 0.5 0.1\n"), ConfigError);
  EXPECT_THROW(parse_labels("1 0.5 0.5 0.1 0.1 7\n"), ConfigError);
  EXPECT_THROW(parse_labels("1 0.5 0.5 0.1 0.1 \n"), ConfigError);
  EXPECT_THROW(parse_labels("-1 0.5 0.5 0.1 0.1\n"), ConfigError);
  EXPECT_THROW(parse_labels("a 0.5 0.5 0.1 0.1\n"), ConfigError);
}

TEST(Compose, OpaqueSpriteLabel) {
  RasterImage canvas(416, 416, testutil::kBackground);
  const RasterImage sprite(50, 50, testutil::kSprite);
  const auto env = place_sprite(canvas, sprite, {}, 100, 100);
  ASSERT_TRUE(env);
  EXPECT_DOUBLE_EQ(env->x_min, 100);
  EXPECT_DOUBLE_EQ(env->y_max, 150);
  const LabeledBox l = quantize_label({1, norm_from_pixel(*env, 416, 416)});
  EXPECT_EQ(format_label_line(l), "1 0.300481 0.300481 0.120192 0.120192");
  EXPECT_NEAR(l.box.cx, 0.3005, 5e-5);
  EXPECT_NEAR(l.box.w, 0.1202, 5e-5);
  EXPECT_EQ(canvas.at(100, 100).r, testutil::kSprite.r);
  EXPECT_EQ(canvas.at(99, 100).r, testutil::kBackground.r);
  EXPECT_EQ(canvas.at(150, 150).r, testutil::kBackground.r);
}

TEST(Compose, TransparentSpriteLeavesNoLabel) {
  RasterImage canvas(64, 64, testutil::kBackground);
  EXPECT_FALSE(place_sprite(canvas, RasterImage(8, 8, Rgba{255, 0, 0, 0}), {}, 4, 4));
  EXPECT_EQ(changed_pixels(canvas, testutil::kBackground).x_min, 1e9);
}

TEST(Compose, ZeroCountLeavesImageUnchanged) {
  const RasterImage bg(64, 48, testutil::kBackground);
  PlacementSpec p;
  p.count_min = p.count_max = 0;
  Rng rng = make_rng(1);
  const ComposedSample s = compose_sample(bg, {}, p, {}, rng);
  EXPECT_TRUE(s.labels.empty());
  EXPECT_TRUE(std::equal(s.image.data().begin(), s.image.data().end(), bg.data().begin()));
}

TEST(Compose, DeterministicForSeed) {
  const RasterImage bg(128, 96, testutil::kBackground);
  const std::vector<ForegroundAsset> assets{{RasterImage(20, 12, testutil::kSprite), 1, "a"}};
  PlacementSpec p;
  p.count_max = 4;
  p.rotation = {-0.5, 0.5};
  Rng r1 = make_rng(42, 3), r2 = make_rng(42, 3);
  const auto a = compose_sample(bg, assets, p, {}, r1);
  const auto b = compose_sample(bg, assets, p, {}, r2);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_TRUE(std::equal(a.image.data().begin(), a.image.data().end(), b.image.data().begin()));
}

TEST(Compose, LabelsMatchRenderedPixels) {
  const RasterImage bg(160, 120, testutil::kBackground);
  const std::vector<ForegroundAsset> assets{{RasterImage(30, 18, testutil::kSprite), 1, "a"}};
  PlacementSpec p;
  p.count_min = p.count_max = 1;
  p.rotation = {-1.0, 1.0};
  p.shear = {-0.2, 0.2};
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng = make_rng(9, i);
    const auto s = compose_sample(bg, assets, p, {}, rng);
    ASSERT_EQ(s.labels.size(), 1u);
    const PixelBox got = changed_pixels(s.image, testutil::kBackground);
    const PixelBox lab = pixel_from_norm(s.labels[0].box, 160, 120);
    EXPECT_NEAR(got.x_min, lab.x_min, 1.0);
    EXPECT_NEAR(got.y_min, lab.y_min, 1.0);
    EXPECT_NEAR(got.x_max, lab.x_max, 1.0);
    EXPECT_NEAR(got.y_max, lab.y_max, 1.0);
  }
}

TEST(Compose, IlluminationDoesNotMoveLabels) {
  const RasterImage bg(128, 128, testutil::kBackground);
  const std::vector<ForegroundAsset> assets{{RasterImage(16, 16, testutil::kSprite), 1, "a"}};
  PlacementSpec p;
  p.count_max = 3;
  IlluminationSpec dim, bright;
  dim.brightness = {0.5, 0.6};
  bright.brightness = {1.5, 1.6};
  for (std::uint64_t i = 0; i < 20; ++i) {
    Rng r1 = make_rng(5, i), r2 = make_rng(5, i);
    const auto a = compose_sample(bg, assets, p, dim, r1);
    const auto b = compose_sample(bg, assets, p, bright, r2);
    EXPECT_EQ(a.labels, b.labels);
  }
}

TEST(Compose, Errors) {
  const std::vector<ForegroundAsset> assets{{RasterImage(16, 16, testutil::kSprite), 1, "a"}};
  Rng rng = make_rng(0);
  EXPECT_THROW(compose_sample(RasterImage(16, 16), assets, {}, {}, rng), PlacementError);
  EXPECT_THROW(compose_sample(RasterImage(64, 64), {}, {}, {}, rng), ConfigError);
  PlacementSpec bad;
  bad.count_min = 3;
  bad.count_max = 1;
  EXPECT_THROW(compose_sample(RasterImage(64, 64), assets, bad, {}, rng), ConfigError);
  PlacementSpec huge;
  huge.scale = {2.0, 3.0};
  EXPECT_THROW(compose_sample(RasterImage(64, 64), {{RasterImage(16, 64, testutil::kSprite), 1, "t"}}, huge, {}, rng),
               PlacementError);
}

TEST(Augment, Rot90cwLabel) {
  const RasterImage img(200, 100, testutil::kBackground);
  const auto out = augment(img, {{1, {0.25, 0.5, 0.1, 0.2}}}, {AugmentOp::rot90cw()});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].image.width(), 100);
  EXPECT_EQ(out[0].image.height(), 200);
  const NormBox b = out[0].labels.at(0).box;
  EXPECT_NEAR(b.cx, 0.5, 1e-12);
  EXPECT_NEAR(b.cy, 0.25, 1e-12);
  EXPECT_NEAR(b.w, 0.2, 1e-12);
  EXPECT_NEAR(b.h, 0.1, 1e-12);
}

TEST(Augment, RotationsMovePixelsWithLabels) {
  RasterImage img(40, 30, testutil::kBackground);
  img.fill_rect(4, 6, 14, 10, testutil::kSprite);
  const std::vector<LabeledBox> labels{{1, norm_from_pixel({4, 6, 14, 10}, 40, 30)}};
  for (const auto op : {AugmentOp::rot90cw(), AugmentOp::rot90ccw(), AugmentOp::rot180()}) {
    const auto s = augment(img, labels, {op})[0];
    const PixelBox got = changed_pixels(s.image, testutil::kBackground);
    const PixelBox lab = pixel_from_norm(s.labels[0].box, s.image.width(), s.image.height());
    EXPECT_NEAR(got.x_min, lab.x_min, 1e-9) << op.name();
    EXPECT_NEAR(got.y_min, lab.y_min, 1e-9) << op.name();
    EXPECT_NEAR(got.x_max, lab.x_max, 1e-9) << op.name();
    EXPECT_NEAR(got.y_max, lab.y_max, 1e-9) << op.name();
  }
}

TEST(Augment, Rot180TwiceIsIdentity) {
  RasterImage img(17, 9);
  Rng rng = make_rng(3);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 17; ++x)
      img.set(x, y, {static_cast<std::uint8_t>(uniform_int(rng, 0, 255)), 1, 2, 255});
  const std::vector<LabeledBox> labels{{2, {0.3, 0.6, 0.2, 0.4}}};
  const auto once = augment(img, labels, {AugmentOp::rot180()})[0];
  const auto twice = augment(once.image, once.labels, {AugmentOp::rot180()})[0];
  EXPECT_TRUE(std::equal(img.data().begin(), img.data().end(), twice.image.data().begin()));
  EXPECT_NEAR(twice.labels[0].box.cx, 0.3, 1e-12);
  EXPECT_NEAR(twice.labels[0].box.cy, 0.6, 1e-12);
  const auto four = augment(img, labels, {AugmentOp::rot90cw()})[0];
  auto back = four;
  for (int i = 0; i < 3; ++i) back = augment(back.image, back.labels, {AugmentOp::rot90cw()})[0];
  EXPECT_TRUE(std::equal(img.data().begin(), img.data().end(), back.image.data().begin()));
}

TEST(Augment, ZeroShearIsIdentity) {
  RasterImage img(32, 32, testutil::kBackground);
  img.fill_rect(3, 3, 9, 9, testutil::kSprite);
  const std::vector<LabeledBox> labels{{1, {0.2, 0.2, 0.1, 0.1}}};
  const auto s = augment(img, labels, {AugmentOp::shear(0, 0)})[0];
  EXPECT_EQ(s.labels, labels);
  EXPECT_TRUE(std::equal(img.data().begin(), img.data().end(), s.image.data().begin()));
}

TEST(Augment, ShearEnvelopesTheSkewedBox) {
  RasterImage img(100, 100, testutil::kBackground);
  img.fill_rect(40, 40, 60, 60, testutil::kSprite);
  const std::vector<LabeledBox> labels{{1, norm_from_pixel({40, 40, 60, 60}, 100, 100)}};
  const auto s = augment(img, labels, {AugmentOp::shear(0.3, 0)})[0];
  const PixelBox lab = pixel_from_norm(s.labels[0].box, 100, 100);
  EXPECT_NEAR(lab.x_min, 37, 1e-9);
  EXPECT_NEAR(lab.x_max, 63, 1e-9);
  EXPECT_NEAR(lab.y_min, 40, 1e-9);
  const PixelBox got = sprite_pixels(s.image);
  EXPECT_NEAR(got.x_min, lab.x_min, 1.0);
  EXPECT_NEAR(got.x_max, lab.x_max, 1.0);
  EXPECT_NEAR(got.y_max, lab.y_max, 1.0);
  EXPECT_THROW(augment(img, labels, {AugmentOp::shear(1, 1)}), RangeError);
}

TEST(Augment, OneOutputPerOp) {
  const RasterImage img(20, 10);
  const auto out = augment(img, {}, {AugmentOp::rot90cw(), AugmentOp::rot180(), AugmentOp::shear(0.1, 0)});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[1].op.name(), "rot180");
}

TEST(ViewpointLabels, MatchProjection) {
  const Box3D box{{0, 0, 0}, {0.1, 0.1, 0.1}};
  const CameraIntrinsics intr{800, 800, 640, 360, 1280, 720};
  ViewpointSpec spec;
  spec.seed = 11;
  const auto poses = sample_viewpoints(spec);
  const auto labels = render_labels_for_viewpoints(box, intr, poses, 4);
  ASSERT_EQ(labels.size(), poses.size());
  for (const auto& v : labels) {
    ASSERT_TRUE(v.label);
    EXPECT_EQ(v.label->class_id, 4);
    const PixelBox px = project_box3(intr, extrinsics_from_pose(poses[v.pose_index]), box);
    const NormBox n = norm_from_pixel(px, 1280, 720);
    EXPECT_DOUBLE_EQ(v.label->box.cx, n.cx);
    EXPECT_DOUBLE_EQ(v.label->box.w, n.w);
  }
}

TEST(ViewpointLabels, SkipsPoseBehindCamera) {
  const Box3D box{{0, 0, 0}, {0.1, 0.1, 0.1}};
  const CameraIntrinsics intr{800, 800, 640, 360, 1280, 720};
  CameraPose inside{0, 0, 0.05};
  const auto labels = render_labels_for_viewpoints(box, intr, {inside}, 1);
  EXPECT_FALSE(labels[0].label);
  EXPECT_NE(labels[0].skipped, SkipReason::none);
}

TEST(Dataset, SplitHashAndFiles) {
  TempDir dir;
  testutil::write_generation_fixture(dir / "assets", dir / "backgrounds");
  const DatasetManifest m = generate_dataset(fixture_config(dir, "out", 7));
  EXPECT_EQ(m.n_train, 8u);
  EXPECT_EQ(m.n_val, 2u);
  ASSERT_EQ(m.entries.size(), 10u);
  EXPECT_EQ(m.entries[7].split, "train");
  EXPECT_EQ(m.entries[8].split, "val");
  EXPECT_EQ(m.content_hash.size(), 64u);
  for (const auto& e : m.entries) {
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / e.image_path));
    EXPECT_EQ(read_label_file((dir / "out" / e.label_path).string()), e.objects);
  }
  const DatasetManifest back = read_manifest(dir / "out");
  EXPECT_EQ(back.content_hash, m.content_hash);
  EXPECT_TRUE(verify_labels(back));
}

TEST(Dataset, HashDeterministicAcrossThreads) {
  TempDir dir;
  testutil::write_generation_fixture(dir / "assets", dir / "backgrounds");
  const auto a = generate_dataset(fixture_config(dir, "a", 3));
  auto cfg = fixture_config(dir, "b", 3);
  cfg.threads = 4;
  const auto b = generate_dataset(cfg);
  const auto c = generate_dataset(fixture_config(dir, "c", 4));
  EXPECT_EQ(a.content_hash, b.content_hash);
  EXPECT_NE(a.content_hash, c.content_hash);
}

TEST(Dataset, LabelsWithinOnePixelOfRenderedObject) {
  TempDir dir;
  testutil::write_generation_fixture(dir / "assets", dir / "backgrounds");
  auto cfg = fixture_config(dir, "out", 21);
  cfg.placement.rotation = {-0.6, 0.6};
  const DatasetManifest m = generate_dataset(cfg);
  for (const auto& e : m.entries) {
    const RasterImage img = read_image((dir / "out" / e.image_path).string());
    ASSERT_EQ(e.objects.size(), 1u);
    const PixelBox got = changed_pixels(img, testutil::kBackground);
    const PixelBox lab = pixel_from_norm(e.objects[0].box, e.width, e.height);
    EXPECT_NEAR(got.x_min, lab.x_min, 1.0) << e.image_path;
    EXPECT_NEAR(got.y_min, lab.y_min, 1.0) << e.image_path;
    EXPECT_NEAR(got.x_max, lab.x_max, 1.0) << e.image_path;
    EXPECT_NEAR(got.y_max, lab.y_max, 1.0) << e.image_path;
  }
}

TEST(Dataset, InputErrors) {
  TempDir dir;
  testutil::write_generation_fixture(dir / "assets", dir / "backgrounds");
  std::filesystem::create_directories(dir / "empty");
  auto cfg = fixture_config(dir, "out", 1);
  cfg.background_dir = dir / "empty";
  EXPECT_THROW(generate_dataset(cfg), ConfigError);
  cfg = fixture_config(dir, "out", 1);
  cfg.asset_dir = dir / "missing";
  EXPECT_THROW(generate_dataset(cfg), ConfigError);

  write_text_file((dir / "assets" / "2_broken.png").string(), "not a png");
  cfg = fixture_config(dir, "out", 1);
  EXPECT_THROW(generate_dataset(cfg), AssetError);
  std::filesystem::remove(dir / "assets" / "2_broken.png");
  write_png((dir / "assets" / "button.png").string(), RasterImage(8, 8, testutil::kSprite));
  EXPECT_THROW(generate_dataset(cfg), AssetError);
}

TEST(Dataset, AssetClassFromFileName) {
  EXPECT_EQ(asset_class_id("x/3_resistor.png"), 3);
  EXPECT_EQ(asset_class_id("12_led.jpg"), 12);
  EXPECT_THROW(asset_class_id("led.png"), AssetError);
  EXPECT_THROW(asset_class_id("3led.png"), AssetError);
}
