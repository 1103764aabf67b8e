#pragma once

// Edge-offload streaming service: a TCP server that runs the detection
// pipeline on incoming frames, and a replay client that streams a dataset to it.
//
// Each connection owns a reader thread and a worker thread joined by a
// capacity-1 slot. A frame arriving while another is still queued replaces it
// (drop-oldest), so the worker always starts on the newest frame and responses
// leave in arrival order.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "zoomdet/dataset.hpp"
#include "zoomdet/detector.hpp"
#include "zoomdet/image_io.hpp"
#include "zoomdet/net.hpp"
#include "zoomdet/pipeline.hpp"
#include "zoomdet/rng.hpp"
#include "zoomdet/wire.hpp"

namespace zoomdet {

using SteadyClock = std::chrono::steady_clock;

// Fixed-size uniform sample of a stream (Algorithm R).
class Reservoir {
 public:
  explicit Reservoir(std::size_t capacity = 4096, std::uint64_t seed = 0)
      : capacity_(capacity), rng_(make_rng(seed, 0x5eed)) {}

  void add(double v) {
    ++seen_;
    if (samples_.size() < capacity_) {
      samples_.push_back(v);
      return;
    }
    const std::uint64_t j = std::uniform_int_distribution<std::uint64_t>(0, seen_ - 1)(rng_);
    if (j < capacity_) samples_[j] = v;
  }

  std::size_t size() const { return samples_.size(); }
  std::uint64_t seen() const { return seen_; }

  // Nearest-rank percentile; 0 when empty.
  double percentile(double p) const {
    if (samples_.empty()) return 0;
    std::vector<double> s = samples_;
    std::sort(s.begin(), s.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * s.size()));
    return s[std::clamp<std::size_t>(rank, 1, s.size()) - 1];
  }

  wire::Percentiles summary() const { return {percentile(50), percentile(95), percentile(99)}; }

 private:
  std::size_t capacity_;
  Rng rng_;
  std::uint64_t seen_ = 0;
  std::vector<double> samples_;
};

// Server-wide counters and latency samples. All updates and snapshots take the
// same lock, so a snapshot never shows more processed than received frames.
class StatsCollector {
 public:
  using Now = std::function<SteadyClock::time_point()>;

  static constexpr auto kWindow = std::chrono::seconds(5);

  explicit StatsCollector(Now now = [] { return SteadyClock::now(); }, std::size_t reservoir = 4096)
      : now_(std::move(now)), stage1_(reservoir, 1), stage2_(reservoir, 2), total_(reservoir, 3) {}

  void on_received() {
    std::lock_guard lk(mu_);
    ++received_;
  }
  void on_dropped() {
    std::lock_guard lk(mu_);
    ++dropped_;
  }
  void on_processed(std::uint32_t stage1_us, std::uint32_t stage2_us, std::uint32_t total_us) {
    std::lock_guard lk(mu_);
    ++processed_;
    done_at_.push_back(now_());
    stage1_.add(stage1_us);
    stage2_.add(stage2_us);
    total_.add(total_us);
    prune(done_at_.back());
  }
  // A frame that was taken off the queue but produced an error response.
  void on_failed() {
    std::lock_guard lk(mu_);
    ++processed_;
    done_at_.push_back(now_());
    prune(done_at_.back());
  }

  // fps = frames processed within the last 5 s, divided by 5.
  wire::StatsPayload snapshot() {
    std::lock_guard lk(mu_);
    prune(now_());
    wire::StatsPayload s;
    s.frames_received = received_;
    s.frames_processed = processed_;
    s.frames_dropped = dropped_;
    s.fps = static_cast<double>(done_at_.size()) /
            std::chrono::duration<double>(kWindow).count();
    s.stage1 = stage1_.summary();
    s.stage2 = stage2_.summary();
    s.total = total_.summary();
    return s;
  }

 private:
  void prune(SteadyClock::time_point now) {
    while (!done_at_.empty() && now - done_at_.front() >= kWindow) done_at_.pop_front();
  }

  Now now_;
  std::mutex mu_;
  std::uint64_t received_ = 0, processed_ = 0, dropped_ = 0;
  std::deque<SteadyClock::time_point> done_at_;
  Reservoir stage1_, stage2_, total_;
};

// Capacity-1 hand-off between a connection's reader and its worker.
class LatestFrameSlot {
 public:
  // Queues `f`; returns the id of the frame it displaced, if any.
  std::optional<std::uint64_t> push(wire::FramePayload f) {
    std::lock_guard lk(mu_);
    std::optional<std::uint64_t> dropped;
    if (pending_) dropped = pending_->frame_id;
    pending_ = std::move(f);
    cv_.notify_one();
    return dropped;
  }

  // Blocks for the next frame; empty once closed and drained.
  std::optional<wire::FramePayload> pop() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return pending_.has_value() || closed_; });
    if (!pending_) return std::nullopt;
    auto f = std::move(pending_);
    pending_.reset();
    return f;
  }

  // Further pushes are still accepted; pop returns empty once nothing is queued.
  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  bool has_pending() const {
    std::lock_guard lk(mu_);
    return pending_.has_value();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::optional<wire::FramePayload> pending_;
  bool closed_ = false;
};

// Connection-state view of ingest: queue the frame and account for any drop.
inline std::optional<std::uint64_t> ingest_frame(LatestFrameSlot& slot, StatsCollector& stats,
                                                 wire::FramePayload frame) {
  stats.on_received();
  auto dropped = slot.push(std::move(frame));
  if (dropped) stats.on_dropped();
  return dropped;
}

// Turns one frame into one DETECTIONS payload. Must be safe to call from
// several connections at once.
class FrameProcessor {
 public:
  virtual ~FrameProcessor() = default;
  virtual wire::DetectionsPayload process(const wire::FramePayload& frame) const = 0;
};

inline RasterImage decode_frame_pixels(const wire::FramePayload& f) {
  if (f.encoding == wire::Encoding::jpeg) {
    RasterImage img = decode_jpeg(f.data);
    if (img.width() != static_cast<int>(f.width) || img.height() != static_cast<int>(f.height))
      throw ProtocolError("JPEG dimensions differ from the frame header");
    return img;
  }
  return RasterImage::from_rgb8(static_cast<int>(f.width), static_cast<int>(f.height), f.data);
}

inline std::uint32_t clamp_us(std::int64_t us) {
  return static_cast<std::uint32_t>(std::clamp<std::int64_t>(us, 0, 0xFFFFFFFF));
}

// Ground truth for GT-driven detectors, looked up by frame id.
using GroundTruthStore = std::map<std::uint64_t, GroundTruthFrame>;

// Runs the configured pipeline with mock detectors: stage 1 serves the context
// class, stage 2 the small classes (single stage runs both on the full frame).
class PipelineProcessor final : public FrameProcessor {
 public:
  PipelineProcessor(PipelineConfig pipeline, MockDetectorModel model, DetectorConfig detector,
                    GroundTruthStore gt, bool decode_pixels = true)
      : pipeline_(std::move(pipeline)),
        stage1_(model, detector, {pipeline_.context_class_id}),
        stage2_(model, detector,
                std::vector<int>(pipeline_.small_class_ids.begin(), pipeline_.small_class_ids.end())),
        gt_(std::move(gt)),
        decode_pixels_(decode_pixels) {
    pipeline_.validate();
  }

  wire::DetectionsPayload process(const wire::FramePayload& f) const override {
    const auto t0 = SteadyClock::now();
    std::optional<RasterImage> pixels;
    if (decode_pixels_) pixels = decode_frame_pixels(f);
    const auto it = gt_.find(f.frame_id);
    const GroundTruthFrame* gt = it == gt_.end() ? nullptr : &it->second;
    if (gt && (gt->width != static_cast<int>(f.width) || gt->height != static_cast<int>(f.height)))
      throw MissingGroundTruth("ground truth for frame " + std::to_string(f.frame_id) +
                               " has different dimensions");
    const Frame frame{f.frame_id, static_cast<int>(f.width), static_cast<int>(f.height),
                      pixels ? &*pixels : nullptr};
    const PipelineResult r = pipeline_.mode == PipelineMode::two_stage
                                 ? run_two_stage(frame, stage1_, stage2_, pipeline_, gt)
                                 : run_single_stage(frame, {&stage1_, &stage2_}, pipeline_, gt);
    wire::DetectionsPayload out;
    out.frame_id = f.frame_id;
    out.fallback_used = r.fallback_used;
    out.stage1_us = clamp_us(r.timings.stage1_us);
    out.stage2_us = clamp_us(r.timings.stage2_us);
    for (const auto& d : r.all_detections()) out.detections.push_back(wire::to_wire(d));
    const auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(SteadyClock::now() - t0);
    out.total_us = std::max(clamp_us(elapsed.count()), out.stage1_us + out.stage2_us);
    return out;
  }

 private:
  PipelineConfig pipeline_;
  MockDetector stage1_, stage2_;
  GroundTruthStore gt_;
  bool decode_pixels_;
};

struct ServerConfig {
  net::Endpoint bind{"127.0.0.1", 7070};
  std::uint32_t max_payload = wire::kDefaultMaxPayload;
  std::chrono::milliseconds shutdown_deadline{2000};
};

class Server {
 public:
  Server(ServerConfig config, std::shared_ptr<const FrameProcessor> processor,
         StatsCollector::Now now = [] { return SteadyClock::now(); })
      : config_(std::move(config)), processor_(std::move(processor)), stats_(std::move(now)) {}

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  void start() {
    listener_ = net::listen_on(config_.bind);
    port_ = net::local_port(listener_);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  std::uint16_t port() const { return port_; }
  net::Endpoint endpoint() const { return {config_.bind.host, port_}; }
  wire::StatsPayload stats() { return stats_.snapshot(); }
  bool running() const { return running_; }

  // Stops accepting, lets every connection finish its queued frame, and
  // force-closes whatever is still busy when the deadline passes.
  void stop() {
    if (!running_.exchange(false)) return;
    if (accept_thread_.joinable()) accept_thread_.join();
    listener_.close();
    const auto deadline = SteadyClock::now() + config_.shutdown_deadline;
    std::list<std::unique_ptr<Connection>> conns;
    {
      std::lock_guard lk(conns_mu_);
      conns.swap(conns_);
    }
    for (auto& c : conns) {
      ::shutdown(c->sock.fd(), SHUT_RD);
      c->slot.close();
    }
    for (auto& c : conns) {
      std::unique_lock lk(c->done_mu);
      if (!c->done_cv.wait_until(lk, deadline, [&] { return c->finished == 2; }))
        c->sock.shutdown();
    }
    for (auto& c : conns) c->join();
  }

 private:
  struct Connection {
    explicit Connection(net::Socket s) : sock(std::move(s)) {}
    net::Socket sock;
    std::mutex write_mu;
    LatestFrameSlot slot;
    std::thread reader, worker;
    std::mutex done_mu;
    std::condition_variable done_cv;
    int finished = 0;

    void mark_finished() {
      std::lock_guard lk(done_mu);
      ++finished;
      done_cv.notify_all();
    }
    bool is_finished() {
      std::lock_guard lk(done_mu);
      return finished == 2;
    }
    void join() {
      if (reader.joinable()) reader.join();
      if (worker.joinable()) worker.join();
    }
    void send(wire::MsgType type, std::span<const std::uint8_t> payload) {
      std::lock_guard lk(write_mu);
      net::send_message(sock.fd(), type, payload);
    }
    void send_error(wire::ErrorCode code, const std::string& msg) {
      send(wire::MsgType::error, wire::encode(wire::ErrorPayload{code, msg}));
    }
  };

  void accept_loop() {
    while (running_) {
      reap();
      bool ready = false;
      try {
        ready = net::wait_fd(listener_.fd(), POLLIN, std::chrono::milliseconds(100));
      } catch (const net::NetError&) {
        return;
      }
      if (!ready || !running_) continue;
      const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) continue;
      net::set_nodelay(fd);
      auto conn = std::make_unique<Connection>(net::Socket(fd));
      Connection* c = conn.get();
      {
        std::lock_guard lk(conns_mu_);
        conns_.push_back(std::move(conn));
      }
      c->worker = std::thread([this, c] { worker_loop(*c); });
      c->reader = std::thread([this, c] { reader_loop(*c); });
    }
  }

  void reap() {
    std::list<std::unique_ptr<Connection>> dead;
    {
      std::lock_guard lk(conns_mu_);
      for (auto it = conns_.begin(); it != conns_.end();) {
        if ((*it)->is_finished()) {
          dead.push_back(std::move(*it));
          it = conns_.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& c : dead) c->join();
  }

  void reader_loop(Connection& c) {
    try {
      for (;;) {
        std::array<std::uint8_t, wire::kHeaderSize> hdr{};
        net::read_exact(c.sock.fd(), hdr);
        if (!std::equal(wire::kMagic.begin(), wire::kMagic.end(), hdr.begin())) {
          c.send_error(wire::ErrorCode::bad_magic, "bad magic");
          break;
        }
        if (hdr[4] != wire::kVersion) {
          c.send_error(wire::ErrorCode::bad_version, "unsupported version " + std::to_string(hdr[4]));
          break;
        }
        const wire::Header h = wire::decode_header(hdr);
        if (h.payload_len > config_.max_payload) {
          c.send_error(wire::ErrorCode::payload_too_large,
                       "payload of " + std::to_string(h.payload_len) + " bytes exceeds cap");
          break;
        }
        std::vector<std::uint8_t> payload(h.payload_len);
        net::read_exact(c.sock.fd(), payload);
        if (!wire::known_type(h.type)) {
          c.send_error(wire::ErrorCode::unknown_type, "unknown message type " + std::to_string(h.type));
          continue;
        }
        switch (static_cast<wire::MsgType>(h.type)) {
          case wire::MsgType::frame:
            try {
              ingest_frame(c.slot, stats_, wire::decode_frame(payload));
            } catch (const ProtocolError& e) {
              c.send_error(wire::ErrorCode::malformed_payload, e.what());
            }
            break;
          case wire::MsgType::ping:
            c.send(wire::MsgType::pong, payload);
            break;
          case wire::MsgType::stats_req:
            c.send(wire::MsgType::stats_resp, wire::encode(stats_.snapshot()));
            break;
          default:
            c.send_error(wire::ErrorCode::unknown_type,
                         "message type " + std::to_string(h.type) + " is not accepted by the server");
        }
      }
    } catch (const Error&) {
    }
    c.slot.close();
    c.mark_finished();
  }

  void worker_loop(Connection& c) {
    try {
      while (auto f = c.slot.pop()) {
        try {
          const wire::DetectionsPayload d = processor_->process(*f);
          stats_.on_processed(d.stage1_us, d.stage2_us, d.total_us);
          c.send(wire::MsgType::detections, wire::encode(d));
        } catch (const net::NetError&) {
          throw;
        } catch (const std::exception& e) {
          stats_.on_failed();
          c.send_error(wire::ErrorCode::processing_failed,
                       "frame " + std::to_string(f->frame_id) + ": " + e.what());
        }
      }
    } catch (const Error&) {
      c.sock.shutdown();
      while (c.slot.pop()) stats_.on_dropped();
    }
    c.mark_finished();
  }

  ServerConfig config_;
  std::shared_ptr<const FrameProcessor> processor_;
  StatsCollector stats_;
  net::Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex conns_mu_;
  std::list<std::unique_ptr<Connection>> conns_;
};

// A lazily materialized sequence of frames for the replay client. Frame i
// must carry frame id i.
struct ReplaySource {
  std::size_t count = 0;
  std::function<wire::FramePayload(std::size_t)> frame;
};

inline wire::FramePayload frame_from_image(std::uint64_t frame_id, const RasterImage& img,
                                           wire::Encoding enc = wire::Encoding::raw_rgb8,
                                           int jpeg_quality = 90) {
  wire::FramePayload f;
  f.frame_id = frame_id;
  f.timestamp_us = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::microseconds>(SteadyClock::now().time_since_epoch()).count());
  f.width = static_cast<std::uint32_t>(img.width());
  f.height = static_cast<std::uint32_t>(img.height());
  f.encoding = enc;
  f.data = enc == wire::Encoding::jpeg ? encode_jpeg(img, jpeg_quality) : img.to_rgb8();
  return f;
}

// Frame id = manifest entry index, matching manifest_ground_truth.
inline ReplaySource manifest_source(const DatasetManifest& m,
                                    wire::Encoding enc = wire::Encoding::raw_rgb8) {
  return {m.entries.size(), [m, enc](std::size_t i) {
            return frame_from_image(i, read_image((m.root / m.entries[i].image_path).string()), enc);
          }};
}

inline ReplaySource directory_source(const fs::path& dir, wire::Encoding enc = wire::Encoding::raw_rgb8) {
  std::vector<fs::path> files = list_images(dir);
  return {files.size(), [files, enc](std::size_t i) {
            return frame_from_image(i, read_image(files[i].string()), enc);
          }};
}

struct ReplayOptions {
  net::Endpoint endpoint;
  double target_fps = 10;  // <= 0 sends as fast as possible
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds drain_timeout{10000};
};

struct ReplayRecord {
  std::uint64_t frame_id = 0;
  double rtt_us = 0;
  wire::DetectionsPayload response;
};

struct ReplayReport {
  std::size_t frames_sent = 0;
  std::vector<ReplayRecord> responses;  // in arrival order
  std::vector<std::string> server_errors;
  double elapsed_s = 0;                 // first send to last response
  double achieved_fps = 0;              // responses / elapsed_s
  wire::Percentiles rtt_us;
  std::optional<wire::StatsPayload> server_stats;
  bool failed = false;
  std::string error;
};

inline ReplayReport replay_client(const ReplaySource& source, const ReplayOptions& opt) {
  ReplayReport report;
  if (source.count == 0) return report;

  net::Socket sock;
  try {
    sock = net::connect_to(opt.endpoint, opt.connect_timeout);
  } catch (const net::NetError& e) {
    report.failed = true;
    report.error = e.what();
    return report;
  }

  std::mutex mu;
  std::map<std::uint64_t, SteadyClock::time_point> sent_at;
  std::atomic<bool> sender_failed{false};
  std::string sender_error;
  const std::uint64_t last_id = source.count - 1;
  const auto start = SteadyClock::now();
  std::atomic<SteadyClock::time_point::rep> sender_done_at{0};

  std::thread sender([&] {
    try {
      for (std::size_t i = 0; i < source.count; ++i) {
        if (opt.target_fps > 0)
          std::this_thread::sleep_until(start + std::chrono::duration_cast<SteadyClock::duration>(
                                                    std::chrono::duration<double>(i / opt.target_fps)));
        const wire::FramePayload f = source.frame(i);
        const auto bytes = wire::encode(f);
        {
          std::lock_guard lk(mu);
          sent_at[f.frame_id] = SteadyClock::now();
        }
        net::send_message(sock.fd(), wire::MsgType::frame, bytes);
        std::lock_guard lk(mu);
        ++report.frames_sent;
      }
    } catch (const std::exception& e) {
      std::lock_guard lk(mu);
      sender_failed = true;
      sender_error = e.what();
    }
    sender_done_at = SteadyClock::now().time_since_epoch().count();
  });

  std::optional<std::string> recv_error;
  SteadyClock::time_point last_response = start;
  Reservoir rtts(1 << 16);
  try {
    for (;;) {
      const auto done = sender_done_at.load();
      std::optional<SteadyClock::time_point> deadline;
      if (done != 0) deadline = SteadyClock::time_point(SteadyClock::duration(done)) + opt.drain_timeout;
      if (sender_failed) throw net::NetError(sender_error);
      net::Message m;
      try {
        m = net::recv_message(sock.fd(), wire::kDefaultMaxPayload,
                              deadline ? deadline : SteadyClock::now() + opt.drain_timeout);
      } catch (const net::TimeoutError&) {
        if (sender_done_at.load() == 0 && !sender_failed) continue;
        throw net::NetError("timed out waiting for responses");
      }
      const auto now = SteadyClock::now();
      if (m.header.type == static_cast<std::uint8_t>(wire::MsgType::error)) {
        const auto e = wire::decode_error(m.payload);
        report.server_errors.push_back(e.message);
        if (e.code != wire::ErrorCode::processing_failed) throw net::NetError("server error: " + e.message);
        if (e.message.starts_with("frame " + std::to_string(last_id) + ":")) break;
        continue;
      }
      if (m.header.type != static_cast<std::uint8_t>(wire::MsgType::detections)) continue;
      ReplayRecord r;
      r.response = wire::decode_detections(m.payload);
      r.frame_id = r.response.frame_id;
      {
        std::lock_guard lk(mu);
        const auto it = sent_at.find(r.frame_id);
        if (it != sent_at.end())
          r.rtt_us = std::chrono::duration<double, std::micro>(now - it->second).count();
      }
      rtts.add(r.rtt_us);
      last_response = now;
      report.responses.push_back(std::move(r));
      if (report.responses.back().frame_id == last_id) break;
    }
  } catch (const std::exception& e) {
    recv_error = e.what();
  }
  if (recv_error) sock.shutdown();
  sender.join();

  report.elapsed_s = std::chrono::duration<double>(last_response - start).count();
  report.achieved_fps = report.elapsed_s > 0 ? report.responses.size() / report.elapsed_s : 0;
  report.rtt_us = rtts.summary();
  if (recv_error || sender_failed) {
    report.failed = true;
    report.error = recv_error ? *recv_error : sender_error;
    return report;
  }

  try {
    net::send_message(sock.fd(), wire::MsgType::stats_req, {});
    const auto deadline = SteadyClock::now() + opt.drain_timeout;
    for (;;) {
      const net::Message m = net::recv_message(sock.fd(), wire::kDefaultMaxPayload, deadline);
      if (m.header.type == static_cast<std::uint8_t>(wire::MsgType::stats_resp)) {
        report.server_stats = wire::decode_stats(m.payload);
        break;
      }
    }
  } catch (const std::exception& e) {
    report.failed = true;
    report.error = std::string("stats request failed: ") + e.what();
  }
  return report;
}

}  // namespace zoomdet
