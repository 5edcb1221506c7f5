#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "mpignite/wire.hpp"

namespace mpignite {

// Per-kind frame counts, used for diagnostics and by tests that assert how
// many frames of a kind crossed a process boundary.
class FrameCounters {
 public:
  void count_sent(FrameKind k) { sent_[index(k)].fetch_add(1, std::memory_order_relaxed); }
  void count_received(FrameKind k) {
    received_[index(k)].fetch_add(1, std::memory_order_relaxed);
  }
  std::uint64_t sent(FrameKind k) const { return sent_[index(k)].load(); }
  std::uint64_t received(FrameKind k) const { return received_[index(k)].load(); }
  std::uint64_t total_sent() const;
  void reset();

 private:
  static std::size_t index(FrameKind k) { return static_cast<std::size_t>(k); }

  std::array<std::atomic<std::uint64_t>, kFrameKindCount> sent_{};
  std::array<std::atomic<std::uint64_t>, kFrameKindCount> received_{};
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  // Throws kConnectionLost if the peer goes away.
  void send_all(std::span<const std::uint8_t> data);
  std::size_t recv_some(std::span<std::uint8_t> out);
  void shutdown_both();
  // Numeric host of the remote end.
  std::string peer_host() const;

 private:
  int fd_ = -1;
};

// Throws kTransportFailure after `attempts` failed connects.
Socket connect_to(const Address& addr, int attempts = 20);

class Listener {
 public:
  // Port 0 binds an ephemeral port; address() reports the bound one.
  explicit Listener(const Address& bind_addr);
  ~Listener();

  const Address& address() const { return bound_; }
  // Returns an invalid socket once close() has been called.
  Socket accept();
  void close();

 private:
  Socket sock_;
  Address bound_;
  std::atomic<bool> closed_{false};
};

class SocketSource final : public ByteSource {
 public:
  explicit SocketSource(Socket& s) : sock_(s) {}
  std::size_t read_some(std::span<std::uint8_t> out) override { return sock_.recv_some(out); }

 private:
  Socket& sock_;
};

/// One TCP connection carrying frames. A dedicated reader thread hands each
/// inbound frame to the handler in arrival order; outbound frames are queued
/// and written in order by a writer thread, so send() never waits on the peer.
class Connection {
 public:
  using FrameHandler = std::function<void(Frame)>;
  // Called once from the reader thread when the stream ends; nullopt means
  // a clean close at a frame boundary.
  using CloseHandler = std::function<void(std::optional<Error>)>;

  Connection(Socket sock, std::string name, FrameCounters* counters);
  ~Connection();

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  void start(FrameHandler on_frame, CloseHandler on_close);

  void send(FrameKind kind, std::span<const std::uint8_t> body);
  // Blocking read of one frame; only valid before start().
  std::optional<Frame> read_one();
  // Blocking write; only valid before start().
  void send_now(FrameKind kind, std::span<const std::uint8_t> body);

  // Flushes queued frames, shuts the socket down and joins both threads.
  void close();
  bool closed() const { return closed_.load(); }
  const std::string& name() const { return name_; }
  std::string peer_host() const { return sock_.peer_host(); }

 private:
  void reader_loop(FrameHandler on_frame, CloseHandler on_close);
  void writer_loop();

  Socket sock_;
  std::string name_;
  FrameCounters* counters_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> outbound_;
  bool stopping_ = false;
  std::atomic<bool> closed_{false};

  std::thread reader_;
  std::thread writer_;
};

}  // namespace mpignite
