#pragma once

// Plain TCP transport carrying the length-framed protocol messages over a
// single long-lived connection. POSIX sockets only; the emulated channel in
// transport.hpp covers reproducible experiments, this covers live runs.

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simsync/errors.hpp"
#include "simsync/protocol.hpp"

namespace simsync {

namespace detail {

inline std::pair<std::string, std::string> split_host_port(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon + 1 == addr.size()) {
    throw ConfigError("expected host:port, got '" + addr + "'");
  }
  return {addr.substr(0, colon), addr.substr(colon + 1)};
}

}  // namespace detail

/// Owning socket with framed send/recv. Move-only.
class TcpConnection {
 public:
  explicit TcpConnection(int fd) : fd_(fd) {}
  TcpConnection(TcpConnection&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  TcpConnection& operator=(TcpConnection&& other) noexcept {
    if (this != &other) {
      close_fd();
      fd_ = other.fd_;
      other.fd_ = -1;
    }
    return *this;
  }
  TcpConnection(const TcpConnection&) = delete;
  TcpConnection& operator=(const TcpConnection&) = delete;
  ~TcpConnection() { close_fd(); }

  void send_bytes(std::span<const std::uint8_t> bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  void send_message(const Message& msg) { send_bytes(encode(msg)); }

  /// Next full frame, or nullopt when the peer closed the session cleanly.
  std::optional<Message> recv_message() {
    for (;;) {
      if (auto msg = reader_.next()) return msg;
      std::uint8_t chunk[16384];
      const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        if (reader_.buffered() != 0) throw ProtocolError("peer closed mid-frame");
        return std::nullopt;
      }
      reader_.feed({chunk, static_cast<std::size_t>(n)});
    }
  }

 private:
  void close_fd() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  int fd_ = -1;
  FrameReader reader_;
};

inline TcpConnection tcp_connect(const std::string& addr) {
  const auto [host, port] = detail::split_host_port(addr);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0) {
    throw ConfigError("cannot resolve " + addr);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ConfigError("cannot connect to " + addr);
  return TcpConnection(fd);
}

/// Binds, listens, and accepts exactly one client.
class TcpListener {
 public:
  explicit TcpListener(const std::string& addr) {
    const auto [host, port] = detail::split_host_port(addr);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &res) != 0) {
      throw ConfigError("cannot resolve " + addr);
    }
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
      fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd_ < 0) continue;
      const int one = 1;
      ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
      if (::bind(fd_, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd_, 1) == 0) break;
      ::close(fd_);
      fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw ConfigError("cannot listen on " + addr);
  }

  ~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
  }

  TcpConnection accept_one() {
    const int client = ::accept(fd_, nullptr, nullptr);
    if (client < 0) throw ProtocolError(std::string("accept failed: ") + std::strerror(errno));
    return TcpConnection(client);
  }

 private:
  int fd_ = -1;
};

}  // namespace simsync
