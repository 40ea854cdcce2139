#include "prefsteer/socket.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>

#include "prefsteer/errors.hpp"

namespace prefsteer {

namespace {

std::string errno_text() { return std::strerror(errno); }

void set_timeout(int fd, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 >= text.size()) {
    throw InvalidArgument("endpoint '" + std::string(text) + "' must look like host:port");
  }
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || port == 0 || port > 65535) {
    throw InvalidArgument("endpoint '" + std::string(text) + "' has an invalid port");
  }
  Endpoint ep;
  ep.host = colon == 0 ? "127.0.0.1" : std::string(text.substr(0, colon));
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

LineSocket::~LineSocket() { close(); }

LineSocket::LineSocket(LineSocket&& o) noexcept
    : fd_(std::exchange(o.fd_, -1)), buffer_(std::move(o.buffer_)) {}

LineSocket& LineSocket::operator=(LineSocket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = std::exchange(o.fd_, -1);
    buffer_ = std::move(o.buffer_);
  }
  return *this;
}

void LineSocket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

LineSocket LineSocket::connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw BackendUnavailable("cannot resolve " + ep.to_string() + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      last_error = errno_text();
      continue;
    }
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      set_timeout(fd, timeout);
      return LineSocket(fd);
    }
    last_error = errno_text();
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw BackendUnavailable("cannot connect to " + ep.to_string() + ": " + last_error);
}

void LineSocket::send_line(std::string_view line) {
  if (fd_ < 0) throw BackendUnavailable("send on a closed socket");
  std::string out(line);
  out.push_back('\n');
  std::size_t sent = 0;
  while (sent < out.size()) {
    ssize_t n = ::send(fd_, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendUnavailable("send failed: " + errno_text());
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineSocket::read_line() {
  if (fd_ < 0) throw BackendUnavailable("read on a closed socket");
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    char chunk[65536];
    ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      // Peer closed without a final newline: hand back the tail as the last line.
      return std::exchange(buffer_, {});
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        throw BackendUnavailable("timed out waiting for a reply");
      }
      throw BackendUnavailable("recv failed: " + errno_text());
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

LineListener LineListener::bind(const std::string& host, std::uint16_t port) {
  LineListener l;
  l.fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (l.fd_ < 0) throw BackendUnavailable("socket() failed: " + errno_text());
  int one = 1;
  ::setsockopt(l.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw InvalidArgument("listener host must be an IPv4 literal, got '" + host + "'");
  }
  if (::bind(l.fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw BackendUnavailable("bind failed: " + errno_text());
  }
  if (::listen(l.fd_, 64) != 0) throw BackendUnavailable("listen failed: " + errno_text());
  socklen_t len = sizeof addr;
  ::getsockname(l.fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  l.host_ = host;
  l.port_ = ntohs(addr.sin_port);
  return l;
}

LineListener::LineListener(LineListener&& o) noexcept
    : fd_(std::exchange(o.fd_, -1)), host_(std::move(o.host_)), port_(o.port_) {}

LineListener& LineListener::operator=(LineListener&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(o.fd_, -1);
    host_ = std::move(o.host_);
    port_ = o.port_;
  }
  return *this;
}

LineListener::~LineListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<LineSocket> LineListener::accept() {
  for (;;) {
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return LineSocket(fd);
    }
    if (errno == EINTR) continue;
    return std::nullopt;
  }
}

void LineListener::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

LineServer::LineServer(Handler handler, const std::string& host, std::uint16_t port)
    : handler_(std::move(handler)), listener_(LineListener::bind(host, port)) {
  acceptor_ = std::thread([this] { accept_loop(); });
}

LineServer::~LineServer() { stop(); }

void LineServer::stop() {
  if (stopping_.exchange(true)) return;
  listener_.shutdown();
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<Worker> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.thread.join();
}

void LineServer::reap_finished() {
  std::vector<Worker> finished;
  {
    std::lock_guard lock(mu_);
    auto split = std::partition(workers_.begin(), workers_.end(),
                                [](const Worker& w) { return !w.done->load(); });
    std::move(split, workers_.end(), std::back_inserter(finished));
    workers_.erase(split, workers_.end());
  }
  for (auto& w : finished) w.thread.join();
}

void LineServer::accept_loop() {
  while (!stopping_) {
    auto conn = listener_.accept();
    if (!conn || stopping_) return;
    reap_finished();
    auto sock = std::make_shared<LineSocket>(std::move(*conn));
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(mu_);
    // The fd stays owned by the LineSocket; it is only used here to force shutdown.
    open_fds_.push_back(sock->native_handle());
    std::thread t([this, sock, done] {
      try {
        while (auto line = sock->read_line()) {
          if (line->empty()) continue;
          sock->send_line(handler_(*line));
        }
      } catch (const std::exception&) {
        // Connection-level failure; drop the connection.
      }
      {
        std::lock_guard lk(mu_);
        const int fd = sock->native_handle();
        open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
        sock->close();
      }
      done->store(true);
    });
    workers_.push_back(Worker{std::move(t), std::move(done)});
  }
}

}  // namespace prefsteer
