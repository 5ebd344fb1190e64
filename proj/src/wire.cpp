#include "espresso/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>

namespace espresso {

namespace {

using Clock = std::chrono::steady_clock;

bool known_type(std::uint8_t t) {
  switch (static_cast<MsgType>(t)) {
    case MsgType::kHello:
    case MsgType::kHelloAck:
    case MsgType::kRound1:
    case MsgType::kRound2:
    case MsgType::kSetSize:
    case MsgType::kNonce:
    case MsgType::kAbort:
      return true;
  }
  return false;
}

void put_optional_size(Bytes& out, const std::optional<std::uint64_t>& size) {
  out.push_back(size ? 1 : 0);
  if (size) put_u64(out, *size);
}

std::optional<std::uint64_t> read_optional_size(ByteReader& r) {
  auto flag = r.u8();
  if (flag > 1) fail(ErrorCode::kMalformedInput, "bad optional-size flag");
  if (flag == 0) return std::nullopt;
  return r.u64();
}

}  // namespace

std::string_view msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::kHello: return "hello";
    case MsgType::kHelloAck: return "hello-ack";
    case MsgType::kRound1: return "round1";
    case MsgType::kRound2: return "round2";
    case MsgType::kSetSize: return "set-size";
    case MsgType::kNonce: return "nonce";
    case MsgType::kAbort: return "abort";
  }
  return "unknown";
}

Bytes encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) {
    fail(ErrorCode::kLengthOverflow, "frame payload exceeds 64 MiB");
  }
  Bytes out;
  out.reserve(kFrameHeaderSize + frame.payload.size());
  put_bytes(out, kFrameMagic);
  out.push_back(kWireVersion);
  out.push_back(static_cast<std::uint8_t>(frame.type));
  put_u32(out, static_cast<std::uint32_t>(frame.payload.size()));
  put_bytes(out, frame.payload);
  return out;
}

FrameHeader decode_frame_header(ByteSpan header) {
  if (header.size() < kFrameHeaderSize) fail(ErrorCode::kTruncated, "frame header truncated");
  if (!std::equal(kFrameMagic.begin(), kFrameMagic.end(), header.begin())) {
    fail(ErrorCode::kBadMagic, "bad frame magic");
  }
  if (header[4] != kWireVersion) fail(ErrorCode::kVersionMismatch, "unsupported wire version");
  if (!known_type(header[5])) fail(ErrorCode::kUnknownMessage, "unknown message type");
  ByteReader r(header.subspan(6, 4));
  auto length = r.u32();
  if (length > kMaxPayload) fail(ErrorCode::kLengthOverflow, "declared payload exceeds 64 MiB");
  return {static_cast<MsgType>(header[5]), length};
}

Frame decode_frame(ByteSpan bytes) {
  auto header = decode_frame_header(bytes.first(std::min(bytes.size(), kFrameHeaderSize)));
  auto rest = bytes.subspan(kFrameHeaderSize);
  if (rest.size() < header.length) fail(ErrorCode::kTruncated, "frame payload truncated");
  if (rest.size() > header.length) fail(ErrorCode::kMalformedInput, "trailing bytes after frame");
  return Frame{header.type, Bytes(rest.begin(), rest.end())};
}

std::string_view protocol_name(ProtocolId id) {
  switch (id) {
    case ProtocolId::kPsiCa: return "psi-ca";
    case ProtocolId::kJaccardExact: return "jaccard-exact";
    case ProtocolId::kJaccardMinhash: return "jaccard-minhash";
    case ProtocolId::kApproxCard: return "approx-card";
    case ProtocolId::kIris: return "iris";
    case ProtocolId::kMedia: return "media";
  }
  return "unknown";
}

std::optional<ProtocolId> protocol_from_name(std::string_view name) {
  for (auto id : {ProtocolId::kPsiCa, ProtocolId::kJaccardExact, ProtocolId::kJaccardMinhash,
                  ProtocolId::kApproxCard, ProtocolId::kIris, ProtocolId::kMedia}) {
    if (protocol_name(id) == name) return id;
  }
  return std::nullopt;
}

Bytes encode_handshake(const Handshake& h) {
  Bytes out;
  out.push_back(static_cast<std::uint8_t>(h.protocol));
  put_prefixed(out, h.params.serialize());
  put_u32(out, h.k);
  put_prefixed(out, h.family_seed);
  put_optional_size(out, h.declared_size);
  put_u32(out, h.n);
  put_u32(out, h.max_shift);
  return out;
}

Handshake decode_handshake(ByteSpan payload) {
  ByteReader r(payload);
  Handshake h;
  auto id = r.u8();
  if (id < 1 || id > 6) fail(ErrorCode::kMalformedInput, "unknown protocol id in handshake");
  h.protocol = static_cast<ProtocolId>(id);
  h.params = GroupParams::deserialize(r.prefixed());
  h.k = r.u32();
  auto seed = r.prefixed();
  h.family_seed.assign(seed.begin(), seed.end());
  h.declared_size = read_optional_size(r);
  h.n = r.u32();
  h.max_shift = r.u32();
  r.expect_done();
  return h;
}

Bytes encode_ack(const HandshakeAck& a) {
  Bytes out;
  put_prefixed(out, a.seed_echo);
  put_optional_size(out, a.declared_size);
  return out;
}

HandshakeAck decode_ack(ByteSpan payload) {
  ByteReader r(payload);
  HandshakeAck a;
  auto seed = r.prefixed();
  a.seed_echo.assign(seed.begin(), seed.end());
  a.declared_size = read_optional_size(r);
  r.expect_done();
  return a;
}

Bytes encode_abort(const AbortInfo& a) {
  Bytes out;
  out.push_back(static_cast<std::uint8_t>(a.code));
  put_prefixed(out, to_bytes(a.message));
  return out;
}

AbortInfo decode_abort(ByteSpan payload) {
  ByteReader r(payload);
  AbortInfo a;
  a.code = static_cast<ErrorCode>(r.u8());
  a.message = to_string(r.prefixed());
  r.expect_done();
  return a;
}

Bytes encode_round1(const GroupParams& params, const Round1Msg& msg) {
  Bytes out;
  out.reserve(msg.masked_items.size() * params.element_size());
  for (const auto& e : msg.masked_items) encode_into(params, e, out);
  return out;
}

Round1Msg decode_round1(const GroupParams& params, ByteSpan payload) {
  const auto width = params.element_size();
  if (payload.empty() || payload.size() % width != 0) {
    fail(ErrorCode::kDecode, "round 1 payload is not a whole number of elements");
  }
  Round1Msg msg;
  msg.masked_items.reserve(payload.size() / width);
  for (std::size_t off = 0; off < payload.size(); off += width) {
    msg.masked_items.push_back(decode(params, payload.subspan(off, width)));
  }
  return msg;
}

Bytes encode_round2(const GroupParams& params, const Round2Msg& msg) {
  Bytes out;
  out.reserve(msg.blinded_items.size() * params.element_size() + msg.server_tags.size() * 32);
  for (const auto& e : msg.blinded_items) encode_into(params, e, out);
  for (const auto& t : msg.server_tags) put_bytes(out, t);
  return out;
}

Round2Msg decode_round2(const GroupParams& params, ByteSpan payload, std::size_t expected_v) {
  const auto width = params.element_size();
  if (payload.size() < expected_v * width) {
    fail(ErrorCode::kProtocolAbort, "round 2 shorter than the client's item count");
  }
  auto tags = payload.subspan(expected_v * width);
  if (tags.size() % std::tuple_size_v<Tag> != 0) {
    fail(ErrorCode::kDecode, "round 2 tag section is not a whole number of tags");
  }
  Round2Msg msg;
  msg.blinded_items.reserve(expected_v);
  for (std::size_t i = 0; i < expected_v; ++i) {
    msg.blinded_items.push_back(decode(params, payload.subspan(i * width, width)));
  }
  msg.server_tags.resize(tags.size() / 32);
  for (std::size_t j = 0; j < msg.server_tags.size(); ++j) {
    std::memcpy(msg.server_tags[j].data(), tags.data() + j * 32, 32);
  }
  return msg;
}

// ---------------------------------------------------------------------------
// In-memory transport

namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> data;
  bool closed = false;
};

class MemoryTransport : public Transport {
 public:
  MemoryTransport(std::shared_ptr<Pipe> out, std::shared_ptr<Pipe> in)
      : out_(std::move(out)), in_(std::move(in)) {}
  ~MemoryTransport() override { close(); }

  void write(ByteSpan data) override {
    {
      std::lock_guard lock(out_->mu);
      if (out_->closed) fail(ErrorCode::kTransport, "write on closed in-memory transport");
      out_->data.insert(out_->data.end(), data.begin(), data.end());
    }
    out_->cv.notify_all();
  }

  void read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override {
    std::unique_lock lock(in_->mu);
    auto ready = [&] { return in_->data.size() >= out.size() || in_->closed; };
    if (!in_->cv.wait_for(lock, timeout, ready)) fail(ErrorCode::kTimeout, "read timed out");
    if (in_->data.size() < out.size()) {
      throw PeerAbortError(ErrorCode::kTransport, "peer closed the connection");
    }
    std::copy_n(in_->data.begin(), out.size(), out.begin());
    in_->data.erase(in_->data.begin(), in_->data.begin() + static_cast<std::ptrdiff_t>(out.size()));
  }

  void close() override {
    {
      std::lock_guard lock(out_->mu);
      out_->closed = true;
    }
    out_->cv.notify_all();
  }

 private:
  std::shared_ptr<Pipe> out_;
  std::shared_ptr<Pipe> in_;
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> memory_transport_pair() {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<MemoryTransport>(a_to_b, b_to_a),
          std::make_unique<MemoryTransport>(b_to_a, a_to_b)};
}

// ---------------------------------------------------------------------------
// File-pair transport

namespace {

std::filesystem::path closed_marker(const std::filesystem::path& p) {
  auto m = p;
  m += ".closed";
  return m;
}

}  // namespace

FileTransport::FileTransport(std::filesystem::path out, std::filesystem::path in)
    : out_(std::move(out)), in_(std::move(in)) {
  std::error_code ec;
  std::filesystem::remove(closed_marker(out_), ec);
  std::ofstream truncate(out_, std::ios::binary | std::ios::trunc);
  if (!truncate) fail(ErrorCode::kIo, "cannot create " + out_.string());
}

FileTransport::~FileTransport() { close(); }

std::unique_ptr<FileTransport> FileTransport::client_side(const std::filesystem::path& dir) {
  return std::make_unique<FileTransport>(dir / "request", dir / "response");
}

std::unique_ptr<FileTransport> FileTransport::server_side(const std::filesystem::path& dir) {
  return std::make_unique<FileTransport>(dir / "response", dir / "request");
}

void FileTransport::write(ByteSpan data) {
  if (closed_) fail(ErrorCode::kTransport, "write on closed file transport");
  std::ofstream f(out_, std::ios::binary | std::ios::app);
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  f.flush();
  if (!f) fail(ErrorCode::kIo, "write failed on " + out_.string());
}

void FileTransport::read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  std::size_t got = 0;
  auto backoff = std::chrono::microseconds(100);
  while (got < out.size()) {
    // The marker is checked before reading so bytes written ahead of it
    // are never missed.
    const bool peer_closed = std::filesystem::exists(closed_marker(in_));
    std::ifstream f(in_, std::ios::binary);
    if (f) {
      f.seekg(static_cast<std::streamoff>(read_pos_));
      f.read(reinterpret_cast<char*>(out.data() + got), static_cast<std::streamsize>(out.size() - got));
      auto n = static_cast<std::size_t>(f.gcount());
      got += n;
      read_pos_ += n;
      if (n > 0) {
        backoff = std::chrono::microseconds(100);
        continue;
      }
    }
    if (peer_closed) throw PeerAbortError(ErrorCode::kTransport, "peer closed the connection");
    if (Clock::now() >= deadline) fail(ErrorCode::kTimeout, "read timed out");
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, std::chrono::microseconds(5000));
  }
}

void FileTransport::close() {
  if (closed_) return;
  closed_ = true;
  std::ofstream marker(closed_marker(out_));
}

// ---------------------------------------------------------------------------
// TCP transport

namespace {

bool wait_fd(int fd, short events, std::chrono::milliseconds timeout) {
  pollfd p{fd, events, 0};
  for (;;) {
    int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) fail(ErrorCode::kTransport, std::string("poll: ") + std::strerror(errno));
  }
}

}  // namespace

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpTransport> TcpTransport::connect(const std::string& host, std::uint16_t port,
                                                    std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  auto port_str = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res); rc != 0) {
    fail(ErrorCode::kTransport, "resolve " + host + ": " + gai_strerror(rc));
  }
  const auto deadline = Clock::now() + timeout;
  std::string last_error = "no addresses";
  // Retry until the deadline so a client may start before its server.
  while (Clock::now() < deadline) {
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
      int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        ::freeaddrinfo(res);
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        return std::make_unique<TcpTransport>(fd);
      }
      last_error = std::strerror(errno);
      ::close(fd);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  ::freeaddrinfo(res);
  fail(ErrorCode::kTransport, "connect " + host + ":" + port_str + ": " + last_error);
}

void TcpTransport::write(ByteSpan data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    auto n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET) {
        throw PeerAbortError(ErrorCode::kTransport, "peer closed the connection");
      }
      fail(ErrorCode::kTransport, std::string("send: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

void TcpTransport::read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  std::size_t got = 0;
  while (got < out.size()) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0 || !wait_fd(fd_, POLLIN, left)) fail(ErrorCode::kTimeout, "read timed out");
    auto n = ::recv(fd_, out.data() + got, out.size() - got, 0);
    if (n == 0) throw PeerAbortError(ErrorCode::kTransport, "peer closed the connection");
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      if (errno == ECONNRESET) throw PeerAbortError(ErrorCode::kTransport, "connection reset");
      fail(ErrorCode::kTransport, std::string("recv: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(n);
  }
}

void TcpTransport::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

TcpListener::TcpListener(const std::string& bind_address, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail(ErrorCode::kTransport, std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    fail(ErrorCode::kInvalidArgument, "bad bind address " + bind_address);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 64) != 0) {
    auto msg = std::string(std::strerror(errno));
    ::close(fd_);
    fail(ErrorCode::kTransport, "bind " + bind_address + ":" + std::to_string(port) + ": " + msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpTransport> TcpListener::accept(std::chrono::milliseconds timeout) {
  if (!wait_fd(fd_, POLLIN, timeout)) fail(ErrorCode::kTimeout, "accept timed out");
  int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) fail(ErrorCode::kTransport, std::string("accept: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::make_unique<TcpTransport>(fd);
}

// ---------------------------------------------------------------------------
// Channel

Channel::Channel(Transport& transport, std::chrono::milliseconds round_timeout)
    : transport_(transport), timeout_(round_timeout) {}

namespace {

Digest chain(const Digest& prev, std::uint8_t direction, ByteSpan frame) {
  std::uint8_t dir = direction;
  return Sha256().update(prev).update(ByteSpan(&dir, 1)).update(frame).finish();
}

}  // namespace

void Channel::send(MsgType type, ByteSpan payload) {
  auto bytes = encode_frame(Frame{type, Bytes(payload.begin(), payload.end())});
  transport_.write(bytes);
  running_ = chain(running_, 0, bytes);
  stats_.bytes_sent += bytes.size();
  stats_.frames_sent += 1;
  stats_.payload_by_type[static_cast<std::uint8_t>(type)] += payload.size();
}

Frame Channel::receive() {
  std::array<std::uint8_t, kFrameHeaderSize> header{};
  transport_.read_exact(header, timeout_);
  auto h = decode_frame_header(header);
  Frame frame{h.type, Bytes(h.length)};
  if (h.length > 0) transport_.read_exact(frame.payload, timeout_);

  Bytes whole(header.begin(), header.end());
  put_bytes(whole, frame.payload);
  running_ = chain(running_, 1, whole);
  stats_.bytes_received += whole.size();
  stats_.frames_received += 1;
  stats_.payload_by_type[static_cast<std::uint8_t>(h.type)] += h.length;

  if (frame.type == MsgType::kAbort) {
    auto info = decode_abort(frame.payload);
    throw PeerAbortError(info.code, "peer aborted (" + std::string(error_code_name(info.code)) +
                                        "): " + info.message);
  }
  return frame;
}

Bytes Channel::expect(MsgType type) {
  auto frame = receive();
  if (frame.type != type) {
    fail(ErrorCode::kProtocolAbort, "expected " + std::string(msg_type_name(type)) + ", got " +
                                        std::string(msg_type_name(frame.type)));
  }
  return std::move(frame.payload);
}

void Channel::send_abort(const Error& error) noexcept {
  try {
    send(MsgType::kAbort, encode_abort(AbortInfo{error.code(), error.what()}));
  } catch (...) {
  }
}

Digest Channel::transcript_digest() const { return running_; }

}  // namespace espresso
