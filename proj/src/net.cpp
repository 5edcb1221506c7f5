#include "mpignite/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "mpignite/log.hpp"

namespace mpignite {

std::uint64_t FrameCounters::total_sent() const {
  std::uint64_t n = 0;
  for (const auto& c : sent_) n += c.load();
  return n;
}

void FrameCounters::reset() {
  for (auto& c : sent_) c.store(0);
  for (auto& c : received_) c.store(0);
}

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(o.fd_, -1);
  }
  return *this;
}

void Socket::send_all(std::span<const std::uint8_t> data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const auto n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kConnectionLost, std::string("send: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t Socket::recv_some(std::span<std::uint8_t> out) {
  for (;;) {
    const auto n = ::recv(fd_, out.data(), out.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    // A reset after shutdown() is an end of stream for our purposes.
    if (errno == ECONNRESET || errno == EBADF || errno == ENOTCONN) return 0;
    throw Error(ErrorCode::kConnectionLost, std::string("recv: ") + std::strerror(errno));
  }
}

void Socket::shutdown_both() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

std::string Socket::peer_host() const {
  sockaddr_storage ss{};
  socklen_t len = sizeof ss;
  if (::getpeername(fd_, reinterpret_cast<sockaddr*>(&ss), &len) != 0) return "";
  char buf[INET6_ADDRSTRLEN] = {};
  if (ss.ss_family == AF_INET) {
    ::inet_ntop(AF_INET, &reinterpret_cast<sockaddr_in*>(&ss)->sin_addr, buf, sizeof buf);
  } else {
    ::inet_ntop(AF_INET6, &reinterpret_cast<sockaddr_in6*>(&ss)->sin6_addr, buf, sizeof buf);
  }
  return buf;
}

namespace {

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head) ::freeaddrinfo(head);
  }
};

AddrInfo resolve(const Address& addr, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  AddrInfo out;
  const auto port = std::to_string(addr.port);
  const char* host = addr.host.empty() ? nullptr : addr.host.c_str();
  if (int rc = ::getaddrinfo(host, port.c_str(), &hints, &out.head); rc != 0) {
    throw Error(ErrorCode::kTransportFailure,
                "cannot resolve " + addr.to_string() + ": " + ::gai_strerror(rc));
  }
  return out;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Socket connect_to(const Address& addr, int attempts) {
  std::string last_error;
  for (int i = 0; i < attempts; ++i) {
    auto info = resolve(addr, false);
    for (auto* ai = info.head; ai; ai = ai->ai_next) {
      Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
      if (!s.valid()) continue;
      if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
        set_nodelay(s.fd());
        return s;
      }
      last_error = std::strerror(errno);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50 * (i + 1)));
  }
  throw Error(ErrorCode::kTransportFailure,
              "cannot connect to " + addr.to_string() + ": " + last_error);
}

Listener::Listener(const Address& bind_addr) {
  auto info = resolve(bind_addr, true);
  for (auto* ai = info.head; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0) continue;
    if (::listen(s.fd(), 128) != 0) continue;
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
    bound_.host = bind_addr.host.empty() ? "0.0.0.0" : bind_addr.host;
    bound_.port = ntohs(bound.sin_port);
    sock_ = std::move(s);
    return;
  }
  throw Error(ErrorCode::kTransportFailure,
              "cannot listen on " + bind_addr.to_string() + ": " + std::strerror(errno));
}

Listener::~Listener() { close(); }

Socket Listener::accept() {
  for (;;) {
    const int fd = ::accept(sock_.fd(), nullptr, nullptr);
    if (fd >= 0) {
      set_nodelay(fd);
      return Socket(fd);
    }
    if (closed_.load()) return Socket();
    if (errno == EINTR || errno == ECONNABORTED) continue;
    if (errno == EINVAL || errno == EBADF) return Socket();
    throw Error(ErrorCode::kTransportFailure, std::string("accept: ") + std::strerror(errno));
  }
}

void Listener::close() {
  if (!closed_.exchange(true)) sock_.shutdown_both();
}

Connection::Connection(Socket sock, std::string name, FrameCounters* counters)
    : sock_(std::move(sock)), name_(std::move(name)), counters_(counters) {}

Connection::~Connection() {
  close();
}

void Connection::start(FrameHandler on_frame, CloseHandler on_close) {
  writer_ = std::thread([this] { writer_loop(); });
  reader_ = std::thread(
      [this, f = std::move(on_frame), c = std::move(on_close)]() mutable {
        reader_loop(std::move(f), std::move(c));
      });
}

void Connection::send(FrameKind kind, std::span<const std::uint8_t> body) {
  auto frame = write_frame(kind, body);
  {
    std::lock_guard lock(mu_);
    if (stopping_) {
      throw Error(ErrorCode::kConnectionLost, "connection " + name_ + " is closed");
    }
    outbound_.push_back(std::move(frame));
  }
  if (counters_) counters_->count_sent(kind);
  cv_.notify_one();
}

std::optional<Frame> Connection::read_one() {
  SocketSource src(sock_);
  auto f = read_frame(src);
  if (f && counters_) counters_->count_received(f->kind);
  return f;
}

void Connection::send_now(FrameKind kind, std::span<const std::uint8_t> body) {
  sock_.send_all(write_frame(kind, body));
  if (counters_) counters_->count_sent(kind);
}

void Connection::writer_loop() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [this] { return stopping_ || !outbound_.empty(); });
    if (outbound_.empty()) break;  // stopping and flushed
    auto frame = std::move(outbound_.front());
    outbound_.pop_front();
    lock.unlock();
    try {
      sock_.send_all(frame);
    } catch (const Error& e) {
      log::debug("event=write-failed conn={} what=\"{}\"", name_, e.what());
      lock.lock();
      outbound_.clear();
      stopping_ = true;
      break;
    }
    lock.lock();
  }
  lock.unlock();
  sock_.shutdown_both();
}

void Connection::reader_loop(FrameHandler on_frame, CloseHandler on_close) {
  SocketSource src(sock_);
  std::optional<Error> failure;
  try {
    while (auto f = read_frame(src)) {
      if (counters_) counters_->count_received(f->kind);
      on_frame(std::move(*f));
    }
  } catch (const Error& e) {
    failure = e;
  }
  closed_.store(true);
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (on_close) on_close(failure);
}

void Connection::close() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (writer_.joinable()) {
    if (writer_.get_id() == std::this_thread::get_id()) {
      writer_.detach();
    } else {
      writer_.join();
    }
  } else {
    sock_.shutdown_both();
  }
  if (reader_.joinable()) {
    if (reader_.get_id() == std::this_thread::get_id()) {
      reader_.detach();
    } else {
      reader_.join();
    }
  }
  closed_.store(true);
}

}  // namespace mpignite
