#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "espresso/common.hpp"
#include "espresso/crypto.hpp"
#include "espresso/group.hpp"
#include "espresso/psi_ca.hpp"

namespace espresso {

// ---------------------------------------------------------------------------
// Framing
//
//   magic "ESPR" | version 0x01 | msg_type u8 | length u32 BE | payload
// ---------------------------------------------------------------------------

inline constexpr std::array<std::uint8_t, 4> kFrameMagic = {'E', 'S', 'P', 'R'};
inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::size_t kFrameHeaderSize = 10;
inline constexpr std::uint32_t kMaxPayload = 64u << 20;

enum class MsgType : std::uint8_t {
  kHello = 0x01,
  kHelloAck = 0x02,
  kRound1 = 0x03,
  kRound2 = 0x04,
  kSetSize = 0x05,
  kNonce = 0x06,
  kAbort = 0x7f,
};

std::string_view msg_type_name(MsgType t);

struct Frame {
  MsgType type = MsgType::kAbort;
  Bytes payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

Bytes encode_frame(const Frame& frame);
/// Decodes exactly one frame. Errors: kBadMagic, kVersionMismatch,
/// kLengthOverflow, kTruncated, kUnknownMessage, kMalformedInput (trailing
/// bytes).
Frame decode_frame(ByteSpan bytes);

struct FrameHeader {
  MsgType type;
  std::uint32_t length;
};
FrameHeader decode_frame_header(ByteSpan header);

// ---------------------------------------------------------------------------
// Payloads
// ---------------------------------------------------------------------------

enum class ProtocolId : std::uint8_t {
  kPsiCa = 1,
  kJaccardExact = 2,
  kJaccardMinhash = 3,
  kApproxCard = 4,
  kIris = 5,
  kMedia = 6,
};

std::string_view protocol_name(ProtocolId id);
std::optional<ProtocolId> protocol_from_name(std::string_view name);

/// Common input agreed before round 1. declared_size is only present for
/// protocols whose inputs list the peer's set size.
struct Handshake {
  ProtocolId protocol = ProtocolId::kPsiCa;
  GroupParams params;
  std::uint32_t k = 0;
  Bytes family_seed;
  std::optional<std::uint64_t> declared_size;
  std::uint32_t n = 0;
  std::uint32_t max_shift = 0;

  friend bool operator==(const Handshake&, const Handshake&) = default;
};

struct HandshakeAck {
  Bytes seed_echo;
  std::optional<std::uint64_t> declared_size;

  friend bool operator==(const HandshakeAck&, const HandshakeAck&) = default;
};

struct AbortInfo {
  ErrorCode code = ErrorCode::kProtocolAbort;
  std::string message;
};

/// Raised locally when the peer sent an abort frame or hung up.
class PeerAbortError : public Error {
 public:
  PeerAbortError(ErrorCode peer_code, const std::string& what)
      : Error(ErrorCode::kPeerAbort, what), peer_code_(peer_code) {}

  ErrorCode peer_code() const noexcept { return peer_code_; }

 private:
  ErrorCode peer_code_;
};

Bytes encode_handshake(const Handshake& h);
Handshake decode_handshake(ByteSpan payload);
Bytes encode_ack(const HandshakeAck& a);
HandshakeAck decode_ack(ByteSpan payload);
Bytes encode_abort(const AbortInfo& a);
AbortInfo decode_abort(ByteSpan payload);

/// v * element_size bytes, no count prefix.
Bytes encode_round1(const GroupParams& params, const Round1Msg& msg);
Round1Msg decode_round1(const GroupParams& params, ByteSpan payload);
/// v elements followed by w 32-byte tags; v comes from the client state.
Bytes encode_round2(const GroupParams& params, const Round2Msg& msg);
Round2Msg decode_round2(const GroupParams& params, ByteSpan payload, std::size_t expected_v);

// ---------------------------------------------------------------------------
// Transports: bidirectional byte streams
// ---------------------------------------------------------------------------

inline constexpr std::chrono::milliseconds kDefaultRoundTimeout{30'000};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write(ByteSpan data) = 0;
  /// Fills out completely. Throws kTimeout, or kPeerAbort when the peer
  /// closed the stream first.
  virtual void read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

/// Two connected in-process endpoints.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> memory_transport_pair();

/// Appends outgoing bytes to one file and tails the other. A "<out>.closed"
/// marker signals end of stream.
class FileTransport : public Transport {
 public:
  FileTransport(std::filesystem::path out, std::filesystem::path in);
  ~FileTransport() override;

  /// The client writes "request" and reads "response"; the server the
  /// opposite.
  static std::unique_ptr<FileTransport> client_side(const std::filesystem::path& dir);
  static std::unique_ptr<FileTransport> server_side(const std::filesystem::path& dir);

  void write(ByteSpan data) override;
  void read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;
  void close() override;

 private:
  std::filesystem::path out_;
  std::filesystem::path in_;
  std::uint64_t read_pos_ = 0;
  bool closed_ = false;
};

class TcpTransport : public Transport {
 public:
  explicit TcpTransport(int fd) : fd_(fd) {}
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  static std::unique_ptr<TcpTransport> connect(const std::string& host, std::uint16_t port,
                                               std::chrono::milliseconds timeout = kDefaultRoundTimeout);

  void write(ByteSpan data) override;
  void read_exact(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;
  void close() override;

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  /// port 0 picks an ephemeral port; see port().
  TcpListener(const std::string& bind_address, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<TcpTransport> accept(std::chrono::milliseconds timeout = kDefaultRoundTimeout);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// ---------------------------------------------------------------------------
// Channel: framed messages over a transport, with transcript accounting
// ---------------------------------------------------------------------------

struct TranscriptStats {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
  /// Payload bytes per message type, both directions.
  std::array<std::uint64_t, 256> payload_by_type{};

  std::uint64_t total() const { return bytes_sent + bytes_received; }
};

class Channel {
 public:
  explicit Channel(Transport& transport,
                   std::chrono::milliseconds round_timeout = kDefaultRoundTimeout);

  void send(MsgType type, ByteSpan payload);
  /// Next frame. An abort frame from the peer throws kPeerAbort carrying
  /// the peer's code in the message.
  Frame receive();
  /// receive() and check the type; anything else throws kProtocolAbort.
  Bytes expect(MsgType type);
  /// Best effort; never throws.
  void send_abort(const Error& error) noexcept;

  const TranscriptStats& stats() const { return stats_; }
  /// Running digest over every frame in send/receive order, direction
  /// tagged. Identical runs give identical digests on every transport.
  Digest transcript_digest() const;

 private:
  Transport& transport_;
  std::chrono::milliseconds timeout_;
  TranscriptStats stats_;
  Digest running_{};
};

}  // namespace espresso
