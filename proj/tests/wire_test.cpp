#include <gtest/gtest.h>

#include "golden.hpp"
#include "zoomdet/rng.hpp"
#include "zoomdet/wire.hpp"

using namespace zoomdet;
using namespace zoomdet::wire;

namespace {

std::span<const std::uint8_t> payload_of(const std::vector<std::uint8_t>& msg) {
  return std::span<const std::uint8_t>(msg).subspan(kHeaderSize);
}

float rand_f32(Rng& rng) { return static_cast<float>(uniform(rng, -2.0, 2.0)); }

}  // namespace

TEST(WireGolden, Frame) {
  const auto bytes = testutil::load_hex("frame_raw.hex");
  EXPECT_EQ(encode_message(MsgType::frame, encode(testutil::golden_frame())), bytes);
  const Header h = decode_header(bytes);
  EXPECT_EQ(h.type, static_cast<std::uint8_t>(MsgType::frame));
  EXPECT_EQ(h.payload_len, 31u);
  EXPECT_EQ(decode_frame(payload_of(bytes)), testutil::golden_frame());
}

TEST(WireGolden, Detections) {
  const auto bytes = testutil::load_hex("detections.hex");
  EXPECT_EQ(encode_message(MsgType::detections, encode(testutil::golden_detections())), bytes);
  EXPECT_EQ(decode_detections(payload_of(bytes)), testutil::golden_detections());
}

TEST(WireGolden, StatsResponse) {
  const auto bytes = testutil::load_hex("stats_resp.hex");
  EXPECT_EQ(encode_message(MsgType::stats_resp, encode(testutil::golden_stats())), bytes);
  EXPECT_EQ(decode_stats(payload_of(bytes)), testutil::golden_stats());
}

TEST(WireGolden, ErrorAndPing) {
  const auto err = testutil::load_hex("error.hex");
  EXPECT_EQ(encode_message(MsgType::error, encode(testutil::golden_error())), err);
  EXPECT_EQ(decode_error(payload_of(err)), testutil::golden_error());
  const std::vector<std::uint8_t> hi{'h', 'i'};
  EXPECT_EQ(encode_message(MsgType::ping, hi), testutil::load_hex("ping.hex"));
}

TEST(WireRoundTrip, RandomMessages) {
  Rng rng = make_rng(31337);
  for (int i = 0; i < 1000; ++i) {
    FramePayload f;
    f.frame_id = rng();
    f.timestamp_us = rng();
    f.width = static_cast<std::uint32_t>(uniform_int(rng, 0, 16));
    f.height = static_cast<std::uint32_t>(uniform_int(rng, 0, 16));
    f.encoding = uniform_int(rng, 0, 1) ? Encoding::jpeg : Encoding::raw_rgb8;
    f.data.resize(f.encoding == Encoding::raw_rgb8 ? f.width * f.height * 3 : uniform_int(rng, 0, 64));
    for (auto& b : f.data) b = static_cast<std::uint8_t>(rng());
    const auto fm = encode_message(MsgType::frame, encode(f));
    ASSERT_EQ(decode_header(fm).payload_len, fm.size() - kHeaderSize);
    ASSERT_EQ(decode_frame(payload_of(fm)), f);

    DetectionsPayload d;
    d.frame_id = rng();
    d.fallback_used = uniform_int(rng, 0, 1);
    d.stage1_us = static_cast<std::uint32_t>(rng());
    d.stage2_us = static_cast<std::uint32_t>(rng());
    d.total_us = static_cast<std::uint32_t>(rng());
    d.detections.resize(uniform_int(rng, 0, 20));
    for (auto& x : d.detections)
      x = {static_cast<std::uint16_t>(rng()), rand_f32(rng), rand_f32(rng), rand_f32(rng), rand_f32(rng),
           rand_f32(rng)};
    ASSERT_EQ(decode_detections(encode(d)), d);

    StatsPayload s{rng(), rng(), rng(), uniform(rng, 0, 100),
                   {uniform(rng, 0, 1e6), uniform(rng, 0, 1e6), uniform(rng, 0, 1e6)},
                   {uniform(rng, 0, 1e6), uniform(rng, 0, 1e6), uniform(rng, 0, 1e6)},
                   {uniform(rng, 0, 1e6), uniform(rng, 0, 1e6), uniform(rng, 0, 1e6)}};
    ASSERT_EQ(decode_stats(encode(s)), s);

    ErrorPayload e{static_cast<ErrorCode>(uniform_int(rng, 1, 6)), std::string(uniform_int(rng, 0, 40), 'x')};
    ASSERT_EQ(decode_error(encode(e)), e);
  }
}

TEST(WireDecode, HeaderErrors) {
  auto bytes = testutil::load_hex("ping.hex");
  EXPECT_THROW(decode_header(std::span(bytes).first(9)), ProtocolError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_header(bad_magic), ProtocolError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(decode_header(bad_version), ProtocolError);
  auto unknown = bytes;
  unknown[5] = 42;
  EXPECT_NO_THROW(decode_header(unknown));
  EXPECT_FALSE(known_type(42));
  EXPECT_FALSE(known_type(0));
  EXPECT_TRUE(known_type(7));
}

TEST(WireDecode, MalformedPayloads) {
  const auto frame = encode(testutil::golden_frame());
  EXPECT_THROW(decode_frame(std::span(frame).first(frame.size() - 1)), ProtocolError);
  EXPECT_THROW(decode_frame(std::span(frame).first(20)), ProtocolError);
  auto bad_enc = frame;
  bad_enc[24] = 9;
  EXPECT_THROW(decode_frame(bad_enc), ProtocolError);

  const auto det = encode(testutil::golden_detections());
  EXPECT_THROW(decode_detections(std::span(det).first(det.size() - 1)), ProtocolError);
  auto extra = det;
  extra.push_back(0);
  EXPECT_THROW(decode_detections(extra), ProtocolError);
  auto bad_flag = det;
  bad_flag[8] = 2;
  EXPECT_THROW(decode_detections(bad_flag), ProtocolError);
  auto bad_count = det;
  bad_count[21] = 2;
  EXPECT_THROW(decode_detections(bad_count), ProtocolError);

  const auto stats = encode(testutil::golden_stats());
  EXPECT_THROW(decode_stats(std::span(stats).first(stats.size() - 8)), ProtocolError);
  auto long_stats = stats;
  long_stats.push_back(1);
  EXPECT_THROW(decode_stats(long_stats), ProtocolError);
  EXPECT_THROW(decode_error(std::vector<std::uint8_t>{4}), ProtocolError);
}

TEST(WireDecode, RandomBytesNeverCrash) {
  Rng rng = make_rng(99);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> junk(uniform_int(rng, 0, 80));
    for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
    for (auto fn : {+[](std::span<const std::uint8_t> p) { (void)decode_frame(p); },
                    +[](std::span<const std::uint8_t> p) { (void)decode_detections(p); },
                    +[](std::span<const std::uint8_t> p) { (void)decode_stats(p); }}) {
      try {
        fn(junk);
      } catch (const ProtocolError&) {
      }
    }
  }
}

TEST(WireConvert, DetectionRoundTripIsFloatPrecise) {
  const Detection d{3, {0.123456789, 0.5, 0.25, 0.1}, 0.87654321};
  const Detection back = from_wire(to_wire(d));
  EXPECT_EQ(back.class_id, 3);
  EXPECT_NEAR(back.box.cx, d.box.cx, 1e-7);
  EXPECT_NEAR(back.confidence, d.confidence, 1e-7);
}
