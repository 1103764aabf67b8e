#pragma once

// Minimal blocking TCP helpers over POSIX sockets.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zoomdet/error.hpp"
#include "zoomdet/wire.hpp"

namespace zoomdet::net {

class NetError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public NetError {
 public:
  using NetError::NetError;
};

// Peer closed the connection before a complete read.
class ClosedError : public NetError {
 public:
  ClosedError(std::size_t got, std::string what) : NetError(std::move(what)), got_(got) {}
  std::size_t bytes_read() const noexcept { return got_; }

 private:
  std::size_t got_;
};

inline std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close() {
    if (fd_ >= 0) ::close(std::exchange(fd_, -1));
  }
  void shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

// "host:port"; a bare port means 127.0.0.1.
inline Endpoint parse_endpoint(const std::string& s) {
  Endpoint e;
  const auto colon = s.rfind(':');
  std::string port = s;
  if (colon != std::string::npos) {
    e.host = s.substr(0, colon);
    port = s.substr(colon + 1);
  }
  if (e.host.empty()) e.host = "127.0.0.1";
  try {
    std::size_t used = 0;
    const long p = std::stol(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument("port");
    e.port = static_cast<std::uint16_t>(p);
  } catch (const std::logic_error&) {
    throw ConfigError("invalid endpoint '" + s + "', expected host:port");
  }
  return e;
}

inline sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw NetError("cannot resolve host '" + ep.host + "'");
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

using Millis = std::chrono::milliseconds;

// Waits until fd is readable (or writable); false on timeout. Negative timeout blocks.
inline bool wait_fd(int fd, short events, Millis timeout) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int r = ::poll(&p, 1, timeout.count() < 0 ? -1 : static_cast<int>(timeout.count()));
    if (r > 0) return true;
    if (r == 0) return false;
    if (errno != EINTR) throw NetError(errno_text("poll"));
  }
}

inline Socket connect_to(const Endpoint& ep, Millis timeout) {
  const sockaddr_in addr = resolve(ep);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw NetError(errno_text("socket"));
  const int flags = ::fcntl(s.fd(), F_GETFL);
  ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
  if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    if (errno != EINPROGRESS) throw NetError("connect to " + ep.str() + ": " + std::strerror(errno));
    if (!wait_fd(s.fd(), POLLOUT, timeout)) throw TimeoutError("connect to " + ep.str() + " timed out");
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw NetError("connect to " + ep.str() + ": " + std::strerror(err));
  }
  ::fcntl(s.fd(), F_SETFL, flags);
  set_nodelay(s.fd());
  return s;
}

inline Socket listen_on(const Endpoint& ep, int backlog = 64) {
  const sockaddr_in addr = resolve(ep);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw NetError(errno_text("socket"));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    throw NetError("bind " + ep.str() + ": " + std::strerror(errno));
  if (::listen(s.fd(), backlog) != 0) throw NetError(errno_text("listen"));
  return s;
}

inline std::uint16_t local_port(const Socket& s) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

inline void write_all(int fd, std::span<const std::uint8_t> data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetError(errno_text("send"));
    }
    off += static_cast<std::size_t>(n);
  }
}

// Reads exactly out.size() bytes. With a deadline, TimeoutError when it passes.
inline void read_exact(int fd, std::span<std::uint8_t> out,
                       std::optional<std::chrono::steady_clock::time_point> deadline = {}) {
  std::size_t off = 0;
  while (off < out.size()) {
    if (deadline) {
      const auto left = std::chrono::duration_cast<Millis>(*deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0 || !wait_fd(fd, POLLIN, left)) throw TimeoutError("read timed out");
    }
    const ssize_t n = ::recv(fd, out.data() + off, out.size() - off, 0);
    if (n == 0) throw ClosedError(off, "connection closed by peer");
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) throw ClosedError(off, "connection reset by peer");
      throw NetError(errno_text("recv"));
    }
    off += static_cast<std::size_t>(n);
  }
}

struct Message {
  wire::Header header;
  std::vector<std::uint8_t> payload;
};

inline void send_message(int fd, wire::MsgType type, std::span<const std::uint8_t> payload) {
  write_all(fd, wire::encode_message(type, payload));
}

// Reads one framed message. Header problems raise ProtocolError; payloads over
// max_payload raise ProtocolError without reading the body.
inline Message recv_message(int fd, std::uint32_t max_payload = wire::kDefaultMaxPayload,
                            std::optional<std::chrono::steady_clock::time_point> deadline = {}) {
  std::array<std::uint8_t, wire::kHeaderSize> hdr{};
  read_exact(fd, hdr, deadline);
  Message m;
  m.header = wire::decode_header(hdr);
  if (m.header.payload_len > max_payload) throw ProtocolError("payload exceeds size cap");
  m.payload.resize(m.header.payload_len);
  try {
    read_exact(fd, m.payload, deadline);
  } catch (const ClosedError&) {
    throw ProtocolError("message truncated: connection closed mid-payload");
  }
  return m;
}

}  // namespace zoomdet::net
