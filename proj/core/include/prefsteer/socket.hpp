#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace prefsteer {

/// host:port pair. Parsed from "host:port"; the host may be a name or an IPv4 literal.
struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// Throws InvalidArgument when the port is missing or out of range.
  static Endpoint parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const Endpoint&) const = default;
};

/// Connected stream socket exchanging newline-terminated lines. Move-only.
class LineSocket {
 public:
  LineSocket() = default;
  explicit LineSocket(int fd) : fd_(fd) {}
  ~LineSocket();
  LineSocket(LineSocket&& o) noexcept;
  LineSocket& operator=(LineSocket&& o) noexcept;
  LineSocket(const LineSocket&) = delete;
  LineSocket& operator=(const LineSocket&) = delete;

  /// Throws BackendUnavailable when the connection cannot be established.
  static LineSocket connect(const Endpoint& ep,
                            std::chrono::milliseconds timeout = std::chrono::seconds(30));

  bool valid() const { return fd_ >= 0; }
  int native_handle() const { return fd_; }
  /// Appends '\n'. Throws BackendUnavailable on a write failure.
  void send_line(std::string_view line);
  /// Returns std::nullopt on orderly shutdown by the peer. Throws BackendUnavailable
  /// on errors or timeout.
  std::optional<std::string> read_line();
  void close();

 private:
  int fd_ = -1;
  std::string buffer_;
};

/// Listening socket bound to an address; port 0 picks an ephemeral port.
class LineListener {
 public:
  static LineListener bind(const std::string& host = "127.0.0.1", std::uint16_t port = 0);
  LineListener(LineListener&& o) noexcept;
  LineListener& operator=(LineListener&& o) noexcept;
  LineListener(const LineListener&) = delete;
  LineListener& operator=(const LineListener&) = delete;
  ~LineListener();

  std::uint16_t port() const { return port_; }
  Endpoint endpoint() const { return Endpoint{host_, port_}; }
  /// Blocks until a peer connects; std::nullopt once the listener has been shut down.
  std::optional<LineSocket> accept();
  /// Unblocks accept() from another thread.
  void shutdown();

 private:
  LineListener() = default;
  int fd_ = -1;
  std::string host_;
  std::uint16_t port_ = 0;
};

/// Serves one reply line per request line on a background thread, one thread per
/// connection. Stops and joins in the destructor.
class LineServer {
 public:
  using Handler = std::function<std::string(std::string_view request_line)>;

  LineServer(Handler handler, const std::string& host = "127.0.0.1", std::uint16_t port = 0);
  ~LineServer();
  LineServer(const LineServer&) = delete;
  LineServer& operator=(const LineServer&) = delete;

  Endpoint endpoint() const { return listener_.endpoint(); }
  void stop();

 private:
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void accept_loop();
  void reap_finished();

  Handler handler_;
  LineListener listener_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<Worker> workers_;
  std::vector<int> open_fds_;
  std::thread acceptor_;
};

}  // namespace prefsteer
