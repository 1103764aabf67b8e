#pragma once

// Binary wire protocol between camera clients and the detection service.
//
// Every message: "CCR1" magic (4 bytes), version u8 = 1, msg_type u8,
// payload_len u32 LE, then payload_len payload bytes. All integers are
// little-endian; reals are IEEE-754 (f32 in DETECTIONS, f64 in STATS_RESP).
//
//   FRAME       frame_id u64, timestamp_us u64, width u32, height u32,
//               encoding u8 (0 RAW_RGB8, 1 JPEG), pixel bytes
//   DETECTIONS  frame_id u64, fallback_used u8, stage1_us u32, stage2_us u32,
//               total_us u32, count u16, count × {class_id u16, confidence f32,
//               cx f32, cy f32, w f32, h f32}
//   PING/PONG   opaque bytes, echoed
//   STATS_REQ   empty
//   STATS_RESP  frames_received u64, frames_processed u64, frames_dropped u64,
//               fps f64, then p50/p95/p99 (f64, microseconds) for stage1,
//               stage2 and total, in that order
//   ERROR       code u16, UTF-8 message

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zoomdet/detection.hpp"
#include "zoomdet/error.hpp"

namespace zoomdet::wire {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline constexpr std::array<std::uint8_t, 4> kMagic{0x43, 0x43, 0x52, 0x31};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::uint32_t kDefaultMaxPayload = 32u << 20;

enum class MsgType : std::uint8_t {
  frame = 1,
  detections = 2,
  ping = 3,
  pong = 4,
  stats_req = 5,
  stats_resp = 6,
  error = 7,
};

inline bool known_type(std::uint8_t t) { return t >= 1 && t <= 7; }

enum class Encoding : std::uint8_t { raw_rgb8 = 0, jpeg = 1 };

enum class ErrorCode : std::uint16_t {
  bad_magic = 1,
  bad_version = 2,
  unknown_type = 3,
  payload_too_large = 4,
  malformed_payload = 5,
  processing_failed = 6,
};

struct Header {
  std::uint8_t version = kVersion;
  std::uint8_t type = 0;
  std::uint32_t payload_len = 0;
};

struct FramePayload {
  std::uint64_t frame_id = 0;
  std::uint64_t timestamp_us = 0;
  std::uint32_t width = 0, height = 0;
  Encoding encoding = Encoding::raw_rgb8;
  std::vector<std::uint8_t> data;
  bool operator==(const FramePayload&) const = default;
};

struct WireDetection {
  std::uint16_t class_id = 0;
  float confidence = 0, cx = 0, cy = 0, w = 0, h = 0;
  bool operator==(const WireDetection&) const = default;
};

struct DetectionsPayload {
  std::uint64_t frame_id = 0;
  bool fallback_used = false;
  std::uint32_t stage1_us = 0, stage2_us = 0, total_us = 0;
  std::vector<WireDetection> detections;
  bool operator==(const DetectionsPayload&) const = default;
};

struct Percentiles {
  double p50 = 0, p95 = 0, p99 = 0;
  bool operator==(const Percentiles&) const = default;
};

struct StatsPayload {
  std::uint64_t frames_received = 0, frames_processed = 0, frames_dropped = 0;
  double fps = 0;
  Percentiles stage1, stage2, total;
  bool operator==(const StatsPayload&) const = default;
};

struct ErrorPayload {
  ErrorCode code = ErrorCode::malformed_payload;
  std::string message;
  bool operator==(const ErrorPayload&) const = default;
};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t>& buffer() { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return get_le<std::uint8_t>(); }
  std::uint16_t u16() { return get_le<std::uint16_t>(); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::span<const std::uint8_t> rest() {
    auto r = data_.subspan(pos_);
    pos_ = data_.size();
    return r;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end(const char* what) const {
    if (pos_ != data_.size()) throw ProtocolError(std::string(what) + ": trailing bytes");
  }

 private:
  template <typename T>
  T get_le() {
    if (remaining() < sizeof(T)) throw ProtocolError("payload truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> encode_message(MsgType type, std::span<const std::uint8_t> payload) {
  Writer w;
  w.bytes(kMagic);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(type));
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  return w.take();
}

// Parses the fixed 10-byte header; magic/version problems raise ProtocolError.
inline Header decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw ProtocolError("header truncated");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw ProtocolError("bad magic");
  Reader r(bytes.subspan(4, kHeaderSize - 4));
  Header h;
  h.version = r.u8();
  h.type = r.u8();
  h.payload_len = r.u32();
  if (h.version != kVersion) throw ProtocolError("unsupported protocol version");
  return h;
}

inline std::vector<std::uint8_t> encode(const FramePayload& f) {
  Writer w;
  w.u64(f.frame_id);
  w.u64(f.timestamp_us);
  w.u32(f.width);
  w.u32(f.height);
  w.u8(static_cast<std::uint8_t>(f.encoding));
  w.bytes(f.data);
  return w.take();
}

inline FramePayload decode_frame(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  FramePayload f;
  f.frame_id = r.u64();
  f.timestamp_us = r.u64();
  f.width = r.u32();
  f.height = r.u32();
  const std::uint8_t enc = r.u8();
  if (enc > 1) throw ProtocolError("unknown frame encoding");
  f.encoding = static_cast<Encoding>(enc);
  const auto data = r.rest();
  f.data.assign(data.begin(), data.end());
  if (f.encoding == Encoding::raw_rgb8 &&
      f.data.size() != static_cast<std::uint64_t>(f.width) * f.height * 3)
    throw ProtocolError("RAW_RGB8 frame length does not match width x height x 3");
  return f;
}

inline std::vector<std::uint8_t> encode(const DetectionsPayload& d) {
  if (d.detections.size() > 0xFFFF) throw ProtocolError("too many detections for one message");
  Writer w;
  w.u64(d.frame_id);
  w.u8(d.fallback_used ? 1 : 0);
  w.u32(d.stage1_us);
  w.u32(d.stage2_us);
  w.u32(d.total_us);
  w.u16(static_cast<std::uint16_t>(d.detections.size()));
  for (const auto& x : d.detections) {
    w.u16(x.class_id);
    w.f32(x.confidence);
    w.f32(x.cx);
    w.f32(x.cy);
    w.f32(x.w);
    w.f32(x.h);
  }
  return w.take();
}

inline DetectionsPayload decode_detections(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  DetectionsPayload d;
  d.frame_id = r.u64();
  const std::uint8_t fb = r.u8();
  if (fb > 1) throw ProtocolError("fallback flag must be 0 or 1");
  d.fallback_used = fb == 1;
  d.stage1_us = r.u32();
  d.stage2_us = r.u32();
  d.total_us = r.u32();
  const std::uint16_t count = r.u16();
  if (r.remaining() != static_cast<std::size_t>(count) * 22)
    throw ProtocolError("detection count does not match payload length");
  d.detections.resize(count);
  for (auto& x : d.detections) {
    x.class_id = r.u16();
    x.confidence = r.f32();
    x.cx = r.f32();
    x.cy = r.f32();
    x.w = r.f32();
    x.h = r.f32();
  }
  return d;
}

inline std::vector<std::uint8_t> encode(const StatsPayload& s) {
  Writer w;
  w.u64(s.frames_received);
  w.u64(s.frames_processed);
  w.u64(s.frames_dropped);
  w.f64(s.fps);
  for (const Percentiles* p : {&s.stage1, &s.stage2, &s.total}) {
    w.f64(p->p50);
    w.f64(p->p95);
    w.f64(p->p99);
  }
  return w.take();
}

inline StatsPayload decode_stats(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  StatsPayload s;
  s.frames_received = r.u64();
  s.frames_processed = r.u64();
  s.frames_dropped = r.u64();
  s.fps = r.f64();
  for (Percentiles* p : {&s.stage1, &s.stage2, &s.total}) {
    p->p50 = r.f64();
    p->p95 = r.f64();
    p->p99 = r.f64();
  }
  r.expect_end("STATS_RESP");
  return s;
}

inline std::vector<std::uint8_t> encode(const ErrorPayload& e) {
  Writer w;
  w.u16(static_cast<std::uint16_t>(e.code));
  w.bytes({reinterpret_cast<const std::uint8_t*>(e.message.data()), e.message.size()});
  return w.take();
}

inline ErrorPayload decode_error(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  ErrorPayload e;
  e.code = static_cast<ErrorCode>(r.u16());
  const auto rest = r.rest();
  e.message.assign(rest.begin(), rest.end());
  return e;
}

inline WireDetection to_wire(const Detection& d) {
  return {static_cast<std::uint16_t>(d.class_id), static_cast<float>(d.confidence),
          static_cast<float>(d.box.cx), static_cast<float>(d.box.cy), static_cast<float>(d.box.w),
          static_cast<float>(d.box.h)};
}

inline Detection from_wire(const WireDetection& d) {
  return {d.class_id, NormBox{d.cx, d.cy, d.w, d.h}, d.confidence};
}

}  // namespace zoomdet::wire
