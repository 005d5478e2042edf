#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace lbhx {

using Bytes = std::vector<std::byte>;

// Wire frame: u32 tag | u64 payload length | payload, little-endian.
inline constexpr std::size_t kFrameHeader = 12;

Bytes encode_frame(std::uint32_t tag, std::span<const std::byte> payload);

struct Frame {
  std::uint32_t tag = 0;
  Bytes payload;
};

/// Throws CommError (naming `peer`) if the buffer is not exactly one frame.
Frame decode_frame(std::span<const std::byte> wire, int peer);

Bytes to_bytes(std::span<const double> values);
std::vector<double> to_doubles(std::span<const std::byte> bytes);

/// Point-to-point message passing between ranks. Delivery between a pair is
/// ordered per tag. One sender and one receiver per direction may use a
/// transport concurrently.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual int rank() const = 0;
  virtual int size() const = 0;
  virtual void send(int peer, std::uint32_t tag, std::span<const std::byte> payload) = 0;
  /// Next message with `tag` from `peer`; CommError on timeout or a bad frame.
  virtual Bytes recv(int peer, std::uint32_t tag, double timeout_s) = 0;

  /// Payload bytes moved to / from a peer (frame headers excluded).
  std::uint64_t bytes_sent(int peer) const;
  std::uint64_t bytes_received(int peer) const;
  void reset_counters();

 protected:
  void count_sent(int peer, std::size_t n);
  void count_received(int peer, std::size_t n);

 private:
  mutable std::mutex counter_mu_;
  std::map<int, std::uint64_t> sent_;
  std::map<int, std::uint64_t> received_;
};

/// Per-rank inboxes of raw frames, keyed by sending rank.
class Mailbox {
 public:
  void push(int from, Bytes wire);
  /// Marks the link from `from` as broken; pending and later receives from
  /// it fail with `reason`.
  void fail(int from, std::string reason);
  Frame pop(int from, std::uint32_t tag, double timeout_s, int self);

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<int, std::deque<Bytes>> inbox_;
  std::map<int, std::string> failed_;
};

class InMemoryHub;

/// In-process transport; all endpoints share one hub.
class InMemoryTransport final : public Transport {
 public:
  InMemoryTransport(std::shared_ptr<InMemoryHub> hub, int rank);

  int rank() const override { return rank_; }
  int size() const override;
  void send(int peer, std::uint32_t tag, std::span<const std::byte> payload) override;
  Bytes recv(int peer, std::uint32_t tag, double timeout_s) override;

 private:
  std::shared_ptr<InMemoryHub> hub_;
  int rank_;
};

class InMemoryHub {
 public:
  explicit InMemoryHub(int size);

  int size() const { return static_cast<int>(boxes_.size()); }
  /// Delivers raw bytes as if `from` had sent them to `to` (test hook for
  /// malformed frames).
  void inject_raw(int from, int to, Bytes wire);
  Mailbox& box(int rank);

  static std::vector<std::unique_ptr<Transport>> make_group(int size);

 private:
  std::vector<std::unique_ptr<Mailbox>> boxes_;
};

struct Endpoint {
  std::string host;
  int port = 0;
};

/// "host:port,host:port,..." -> endpoints; ConfigError on malformed input.
std::vector<Endpoint> parse_endpoints(const std::string& text);

/// Full-mesh TCP transport. Each connection has a reader thread that decodes
/// frames into the mailbox.
class TcpTransport final : public Transport {
 public:
  TcpTransport(int rank, int size);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  /// Binds and listens; port 0 picks a free port. Returns the bound port.
  int listen(const std::string& host, int port);
  /// Lower ranks accept, higher ranks connect; blocks until every peer link
  /// is up or `timeout_s` elapses (CommError).
  void connect_mesh(const std::vector<Endpoint>& endpoints, double timeout_s);

  int rank() const override { return rank_; }
  int size() const override { return size_; }
  void send(int peer, std::uint32_t tag, std::span<const std::byte> payload) override;
  Bytes recv(int peer, std::uint32_t tag, double timeout_s) override;

  /// Connected in-process group on 127.0.0.1 with OS-assigned ports.
  static std::vector<std::unique_ptr<Transport>> make_local_group(int size, double timeout_s = 30.0);

 private:
  void start_reader(int peer, int fd);
  void reader(int peer, int fd);

  int rank_;
  int size_;
  int listen_fd_ = -1;
  std::vector<int> fds_;
  std::vector<std::unique_ptr<std::mutex>> send_mu_;
  std::vector<std::thread> readers_;
  std::atomic<bool> closing_{false};
  Mailbox mailbox_;
};

}  // namespace lbhx
