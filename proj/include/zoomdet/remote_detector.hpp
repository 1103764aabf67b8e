#pragma once

// Detector that ships the frame to a detection service and returns its answer.

#include <chrono>
#include <string>
#include <vector>

#include "zoomdet/detector.hpp"
#include "zoomdet/image_io.hpp"
#include "zoomdet/net.hpp"
#include "zoomdet/wire.hpp"

namespace zoomdet {

class RemoteDetector final : public Detector {
 public:
  RemoteDetector(net::Endpoint endpoint, DetectorConfig config,
                 std::chrono::milliseconds timeout = std::chrono::milliseconds(1000),
                 wire::Encoding encoding = wire::Encoding::raw_rgb8)
      : endpoint_(std::move(endpoint)), config_(config), timeout_(timeout), encoding_(encoding) {
    config_.validate();
    if (timeout_.count() <= 0) throw ConfigError("remote detector: timeout must be positive");
  }

  // One connection per call. Connection failures and timeouts raise
  // DetectorUnavailable; a malformed or truncated reply raises ProtocolError.
  std::vector<Detection> detect(const FrameView& frame, const GroundTruthFrame*) const override {
    if (frame.pixels == nullptr) throw DetectorUnavailable("remote detector needs pixel data");
    wire::FramePayload f;
    f.frame_id = frame.frame_id;
    f.width = static_cast<std::uint32_t>(frame.pixels->width());
    f.height = static_cast<std::uint32_t>(frame.pixels->height());
    f.encoding = encoding_;
    f.data = encoding_ == wire::Encoding::jpeg ? encode_jpeg(*frame.pixels, 90) : frame.pixels->to_rgb8();
    const auto request = wire::encode(f);

    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    wire::DetectionsPayload reply;
    try {
      net::Socket s = net::connect_to(endpoint_, timeout_);
      net::send_message(s.fd(), wire::MsgType::frame, request);
      for (;;) {
        const net::Message m = net::recv_message(s.fd(), wire::kDefaultMaxPayload, deadline);
        const auto type = static_cast<wire::MsgType>(m.header.type);
        if (type == wire::MsgType::error)
          throw DetectorUnavailable("server error: " + wire::decode_error(m.payload).message);
        if (type != wire::MsgType::detections) continue;
        reply = wire::decode_detections(m.payload);
        if (reply.frame_id != f.frame_id) throw ProtocolError("reply is for a different frame");
        break;
      }
    } catch (const net::ClosedError& e) {
      if (e.bytes_read() > 0) throw ProtocolError("reply truncated");
      throw DetectorUnavailable(endpoint_.str() + ": " + e.what());
    } catch (const net::NetError& e) {
      throw DetectorUnavailable(endpoint_.str() + ": " + e.what());
    }

    std::vector<Detection> out;
    for (const auto& d : reply.detections) {
      Detection det = wire::from_wire(d);
      if (det.confidence >= config_.confidence_threshold) out.push_back(det);
    }
    return nms(out, config_.nms_iou_threshold);
  }

 private:
  net::Endpoint endpoint_;
  DetectorConfig config_;
  std::chrono::milliseconds timeout_;
  wire::Encoding encoding_;
};

}  // namespace zoomdet
