#include "lbhx/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <chrono>
#include <cstring>

#include "lbhx/error.hpp"

namespace lbhx {

static_assert(std::endian::native == std::endian::little, "wire format assumes a little-endian host");

namespace {

constexpr std::uint32_t kHelloTag = 0xfffe0001u;
// Larger lengths can only come from a corrupted header.
constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 36;

using Clock = std::chrono::steady_clock;

std::string peer_name(int peer) { return "rank " + std::to_string(peer); }

template <typename T>
void put(Bytes& out, T v) {
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::byte* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

}  // namespace

Bytes encode_frame(std::uint32_t tag, std::span<const std::byte> payload) {
  Bytes out;
  out.reserve(kFrameHeader + payload.size());
  put<std::uint32_t>(out, tag);
  put<std::uint64_t>(out, payload.size());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Frame decode_frame(std::span<const std::byte> wire, int peer) {
  if (wire.size() < kFrameHeader) {
    throw CommError("corrupted frame from " + peer_name(peer) + ": " + std::to_string(wire.size()) +
                    " bytes is shorter than a frame header");
  }
  Frame f;
  f.tag = get<std::uint32_t>(wire.data());
  const auto len = get<std::uint64_t>(wire.data() + 4);
  if (len != wire.size() - kFrameHeader) {
    throw CommError("corrupted frame from " + peer_name(peer) + ": header announces " + std::to_string(len) +
                    " payload bytes, frame carries " + std::to_string(wire.size() - kFrameHeader));
  }
  f.payload.assign(wire.begin() + kFrameHeader, wire.end());
  return f;
}

Bytes to_bytes(std::span<const double> values) {
  Bytes out(values.size() * sizeof(double));
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

std::vector<double> to_doubles(std::span<const std::byte> bytes) {
  std::vector<double> out(bytes.size() / sizeof(double));
  std::memcpy(out.data(), bytes.data(), out.size() * sizeof(double));
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t Transport::bytes_sent(int peer) const {
  std::lock_guard lk(counter_mu_);
  const auto it = sent_.find(peer);
  return it == sent_.end() ? 0 : it->second;
}

std::uint64_t Transport::bytes_received(int peer) const {
  std::lock_guard lk(counter_mu_);
  const auto it = received_.find(peer);
  return it == received_.end() ? 0 : it->second;
}

void Transport::reset_counters() {
  std::lock_guard lk(counter_mu_);
  sent_.clear();
  received_.clear();
}

void Transport::count_sent(int peer, std::size_t n) {
  std::lock_guard lk(counter_mu_);
  sent_[peer] += n;
}

void Transport::count_received(int peer, std::size_t n) {
  std::lock_guard lk(counter_mu_);
  received_[peer] += n;
}

// ---------------------------------------------------------------------------

void Mailbox::push(int from, Bytes wire) {
  {
    std::lock_guard lk(mu_);
    inbox_[from].push_back(std::move(wire));
  }
  cv_.notify_all();
}

void Mailbox::fail(int from, std::string reason) {
  {
    std::lock_guard lk(mu_);
    failed_.emplace(from, std::move(reason));
  }
  cv_.notify_all();
}

Frame Mailbox::pop(int from, std::uint32_t tag, double timeout_s, int self) {
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_s));
  std::unique_lock lk(mu_);
  for (;;) {
    auto& q = inbox_[from];
    for (auto it = q.begin(); it != q.end(); ++it) {
      if (it->size() < kFrameHeader) {
        q.erase(it);
        throw CommError("corrupted frame from " + peer_name(from) + ": truncated header");
      }
      if (get<std::uint32_t>(it->data()) != tag) continue;
      Bytes wire = std::move(*it);
      q.erase(it);
      return decode_frame(wire, from);
    }
    if (const auto f = failed_.find(from); f != failed_.end()) {
      throw CommError("link from " + peer_name(from) + " failed: " + f->second);
    }
    if (cv_.wait_until(lk, deadline) == std::cv_status::timeout && Clock::now() >= deadline) {
      throw CommError("rank " + std::to_string(self) + " timed out after " + std::to_string(timeout_s) +
                      " s waiting for tag " + std::to_string(tag) + " from " + peer_name(from));
    }
  }
}

// ---------------------------------------------------------------------------

InMemoryHub::InMemoryHub(int size) {
  if (size < 1) throw ConfigError("transport group needs at least one rank");
  for (int i = 0; i < size; ++i) boxes_.push_back(std::make_unique<Mailbox>());
}

Mailbox& InMemoryHub::box(int rank) { return *boxes_.at(rank); }

void InMemoryHub::inject_raw(int from, int to, Bytes wire) { box(to).push(from, std::move(wire)); }

std::vector<std::unique_ptr<Transport>> InMemoryHub::make_group(int size) {
  auto hub = std::make_shared<InMemoryHub>(size);
  std::vector<std::unique_ptr<Transport>> out;
  for (int r = 0; r < size; ++r) out.push_back(std::make_unique<InMemoryTransport>(hub, r));
  return out;
}

InMemoryTransport::InMemoryTransport(std::shared_ptr<InMemoryHub> hub, int rank) : hub_(std::move(hub)), rank_(rank) {}

int InMemoryTransport::size() const { return hub_->size(); }

void InMemoryTransport::send(int peer, std::uint32_t tag, std::span<const std::byte> payload) {
  if (peer < 0 || peer >= size()) throw CommError("send to unknown " + peer_name(peer));
  hub_->box(peer).push(rank_, encode_frame(tag, payload));
  count_sent(peer, payload.size());
}

Bytes InMemoryTransport::recv(int peer, std::uint32_t tag, double timeout_s) {
  if (peer < 0 || peer >= size()) throw CommError("receive from unknown " + peer_name(peer));
  auto f = hub_->box(rank_).pop(peer, tag, timeout_s, rank_);
  count_received(peer, f.payload.size());
  return std::move(f.payload);
}

// ---------------------------------------------------------------------------

std::vector<Endpoint> parse_endpoints(const std::string& text) {
  std::vector<Endpoint> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto colon = item.rfind(':');
    if (item.empty() || colon == std::string::npos || colon == 0 || colon + 1 == item.size()) {
      throw ConfigError("ranks.endpoints: expected host:port, got '" + item + "'");
    }
    Endpoint e;
    e.host = item.substr(0, colon);
    try {
      std::size_t used = 0;
      e.port = std::stoi(item.substr(colon + 1), &used);
      if (used != item.size() - colon - 1 || e.port < 0 || e.port > 65535) throw std::invalid_argument("port");
    } catch (const std::exception&) {
      throw ConfigError("ranks.endpoints: bad port in '" + item + "'");
    }
    out.push_back(e);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

namespace {

void send_all(int fd, const std::byte* p, std::size_t n, int peer) {
  while (n > 0) {
    const ssize_t k = ::send(fd, p, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw CommError("send to " + peer_name(peer) + " failed: " + std::strerror(errno));
    }
    p += k;
    n -= static_cast<std::size_t>(k);
  }
}

// false on orderly EOF before any byte
bool recv_all(int fd, std::byte* p, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::recv(fd, p, n, 0);
    if (k == 0) return false;
    if (k < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

sockaddr_in resolve(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw ConfigError("cannot resolve host '" + e.host + "'");
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  freeaddrinfo(res);
  addr.sin_port = htons(static_cast<std::uint16_t>(e.port));
  return addr;
}

void tune_socket(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

double remaining(Clock::time_point deadline) {
  return std::chrono::duration<double>(deadline - Clock::now()).count();
}

}  // namespace

TcpTransport::TcpTransport(int rank, int size) : rank_(rank), size_(size), fds_(size, -1) {
  if (size < 1 || rank < 0 || rank >= size) throw ConfigError("tcp transport: rank id out of range");
  for (int i = 0; i < size; ++i) send_mu_.push_back(std::make_unique<std::mutex>());
}

TcpTransport::~TcpTransport() {
  closing_ = true;
  for (int fd : fds_) {
    if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : readers_) t.join();
  for (int fd : fds_) {
    if (fd >= 0) ::close(fd);
  }
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

int TcpTransport::listen(const std::string& host, int port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw CommError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = resolve({host, port});
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw CommError("rank " + std::to_string(rank_) + " cannot bind " + host + ":" + std::to_string(port) + ": " +
                    std::strerror(errno));
  }
  if (::listen(listen_fd_, size_) != 0) throw CommError(std::string("listen: ") + std::strerror(errno));
  socklen_t len = sizeof(addr);
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

void TcpTransport::connect_mesh(const std::vector<Endpoint>& endpoints, double timeout_s) {
  if (static_cast<int>(endpoints.size()) != size_) {
    throw ConfigError("ranks.endpoints lists " + std::to_string(endpoints.size()) + " endpoints for " +
                      std::to_string(size_) + " ranks");
  }
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_s));
  const int expected_incoming = size_ - 1 - rank_;
  if (expected_incoming > 0 && listen_fd_ < 0) listen(endpoints[rank_].host, endpoints[rank_].port);

  std::exception_ptr accept_error;
  std::thread acceptor([&] {
    try {
      for (int got = 0; got < expected_incoming;) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int wait_ms = static_cast<int>(std::max(0.0, remaining(deadline)) * 1000);
        const int r = ::poll(&pfd, 1, wait_ms);
        if (r == 0) throw CommError("rank " + std::to_string(rank_) + " timed out accepting peer connections");
        if (r < 0) {
          if (errno == EINTR) continue;
          throw CommError(std::string("poll: ") + std::strerror(errno));
        }
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        tune_socket(fd);
        std::byte hello[kFrameHeader + 4];
        if (!recv_all(fd, hello, sizeof(hello))) {
          ::close(fd);
          continue;
        }
        const Frame f = decode_frame(hello, -1);
        const int peer = static_cast<int>(get<std::uint32_t>(f.payload.data()));
        if (f.tag != kHelloTag || peer <= rank_ || peer >= size_ || fds_[peer] >= 0) {
          ::close(fd);
          throw CommError("rank " + std::to_string(rank_) + " got an unexpected handshake from " + peer_name(peer));
        }
        fds_[peer] = fd;
        ++got;
      }
    } catch (...) {
      accept_error = std::current_exception();
    }
  });

  std::exception_ptr connect_error;
  try {
    for (int peer = 0; peer < rank_; ++peer) {
      const sockaddr_in addr = resolve(endpoints[peer]);
      int fd = -1;
      for (;;) {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) break;
        ::close(fd);
        if (remaining(deadline) <= 0) {
          throw CommError("rank " + std::to_string(rank_) + " could not connect to " + peer_name(peer) + " at " +
                          endpoints[peer].host + ":" + std::to_string(endpoints[peer].port));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
      tune_socket(fd);
      Bytes id;
      put<std::uint32_t>(id, static_cast<std::uint32_t>(rank_));
      const Bytes hello = encode_frame(kHelloTag, id);
      send_all(fd, hello.data(), hello.size(), peer);
      fds_[peer] = fd;
    }
  } catch (...) {
    connect_error = std::current_exception();
  }
  acceptor.join();
  if (connect_error) std::rethrow_exception(connect_error);
  if (accept_error) std::rethrow_exception(accept_error);
  for (int peer = 0; peer < size_; ++peer) {
    if (peer != rank_) start_reader(peer, fds_[peer]);
  }
}

void TcpTransport::start_reader(int peer, int fd) {
  readers_.emplace_back([this, peer, fd] { reader(peer, fd); });
}

void TcpTransport::reader(int peer, int fd) {
  for (;;) {
    Bytes wire(kFrameHeader);
    if (!recv_all(fd, wire.data(), kFrameHeader)) {
      if (!closing_) mailbox_.fail(peer, "connection closed");
      return;
    }
    const auto len = get<std::uint64_t>(wire.data() + 4);
    if (len > kMaxPayload) {
      mailbox_.fail(peer, "corrupted frame length " + std::to_string(len));
      return;
    }
    wire.resize(kFrameHeader + len);
    if (!recv_all(fd, wire.data() + kFrameHeader, len)) {
      if (!closing_) mailbox_.fail(peer, "short read inside a frame");
      return;
    }
    mailbox_.push(peer, std::move(wire));
  }
}

void TcpTransport::send(int peer, std::uint32_t tag, std::span<const std::byte> payload) {
  if (peer < 0 || peer >= size_) throw CommError("send to unknown " + peer_name(peer));
  Bytes wire = encode_frame(tag, payload);
  if (peer == rank_) {
    mailbox_.push(peer, std::move(wire));
  } else {
    if (fds_[peer] < 0) throw CommError("no connection to " + peer_name(peer));
    std::lock_guard lk(*send_mu_[peer]);
    send_all(fds_[peer], wire.data(), wire.size(), peer);
  }
  count_sent(peer, payload.size());
}

Bytes TcpTransport::recv(int peer, std::uint32_t tag, double timeout_s) {
  if (peer < 0 || peer >= size_) throw CommError("receive from unknown " + peer_name(peer));
  auto f = mailbox_.pop(peer, tag, timeout_s, rank_);
  count_received(peer, f.payload.size());
  return std::move(f.payload);
}

std::vector<std::unique_ptr<Transport>> TcpTransport::make_local_group(int size, double timeout_s) {
  std::vector<std::unique_ptr<TcpTransport>> ts;
  std::vector<Endpoint> eps;
  for (int r = 0; r < size; ++r) {
    ts.push_back(std::make_unique<TcpTransport>(r, size));
    eps.push_back({"127.0.0.1", ts.back()->listen("127.0.0.1", 0)});
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(size);
  for (int r = 0; r < size; ++r) {
    threads.emplace_back([&, r] {
      try {
        ts[r]->connect_mesh(eps, timeout_s);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<std::unique_ptr<Transport>> out;
  for (auto& t : ts) out.push_back(std::move(t));
  return out;
}

}  // namespace lbhx
