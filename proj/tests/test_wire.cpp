#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "espresso/psi_ca.hpp"
#include "espresso/wire.hpp"

using namespace espresso;
using namespace std::chrono_literals;

namespace {

template <typename F>
ErrorCode code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("espresso-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Sends three frames each way and checks they arrive intact.
void exchange(Transport& left, Transport& right) {
  std::thread peer([&] {
    Channel ch(right, 5s);
    for (int i = 0; i < 3; ++i) {
      auto f = ch.receive();
      ch.send(MsgType::kRound2, f.payload);
    }
  });
  Channel ch(left, 5s);
  for (int i = 0; i < 3; ++i) {
    Bytes payload(1000 * i + 1, static_cast<std::uint8_t>(i));
    ch.send(MsgType::kRound1, payload);
    EXPECT_EQ(ch.expect(MsgType::kRound2), payload);
  }
  peer.join();
  EXPECT_EQ(ch.stats().frames_sent, 3u);
  EXPECT_EQ(ch.stats().frames_received, 3u);
}

}  // namespace

TEST(Wire, FrameLayout) {
  Frame f{MsgType::kHello, to_bytes("xy")};
  auto bytes = encode_frame(f);
  EXPECT_EQ(to_hex(bytes), "45535052" "01" "01" "00000002" "7879");
  EXPECT_EQ(decode_frame(bytes), f);
}

TEST(Wire, FrameDecodeErrors) {
  auto good = encode_frame({MsgType::kRound1, Bytes(5, 7)});
  auto bad = good;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), ErrorCode::kBadMagic);
  bad = good;
  bad[4] = 2;
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), ErrorCode::kVersionMismatch);
  bad = good;
  bad[5] = 0x42;
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), ErrorCode::kUnknownMessage);
  bad = good;
  bad.pop_back();
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), ErrorCode::kTruncated);
  bad = good;
  bad.push_back(0);
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), ErrorCode::kMalformedInput);
  bad = good;
  bad[6] = 0x10;  // 256 MiB
  EXPECT_EQ(code_of([&] { decode_frame(bad); }), ErrorCode::kLengthOverflow);
  EXPECT_EQ(code_of([&] { decode_frame(ByteSpan(good).first(4)); }), ErrorCode::kTruncated);
}

TEST(Wire, FrameRoundTripFuzz) {
  auto rng = Rng::seeded(1);
  const MsgType types[] = {MsgType::kHello, MsgType::kHelloAck, MsgType::kRound1, MsgType::kRound2,
                           MsgType::kSetSize, MsgType::kNonce, MsgType::kAbort};
  for (int i = 0; i < 1000; ++i) {
    Frame f{types[rng.uniform(7)], rng.bytes(rng.uniform(300))};
    auto bytes = encode_frame(f);
    ASSERT_EQ(bytes.size(), kFrameHeaderSize + f.payload.size());
    ASSERT_EQ(decode_frame(bytes), f);
    // Random corruption never crashes; it either decodes or throws an Error.
    auto corrupt = bytes;
    corrupt[rng.uniform(corrupt.size())] ^= static_cast<std::uint8_t>(1 + rng.uniform(255));
    try {
      decode_frame(corrupt);
    } catch (const Error&) {
    }
  }
}

TEST(Wire, HandshakeRoundTrip) {
  Handshake h;
  h.protocol = ProtocolId::kJaccardMinhash;
  h.params = toy_params();
  h.k = 400;
  h.family_seed = Bytes(32, 9);
  EXPECT_EQ(decode_handshake(encode_handshake(h)), h);
  h.protocol = ProtocolId::kIris;
  h.family_seed.clear();
  h.declared_size = 12345;
  h.n = 2048;
  h.max_shift = 5;
  EXPECT_EQ(decode_handshake(encode_handshake(h)), h);
  auto enc = encode_handshake(h);
  enc[0] = 99;
  EXPECT_THROW(decode_handshake(enc), Error);

  HandshakeAck a{Bytes(32, 3), 77};
  EXPECT_EQ(decode_ack(encode_ack(a)), a);
  AbortInfo ab{ErrorCode::kHandshakeMismatch, "k differs"};
  auto back = decode_abort(encode_abort(ab));
  EXPECT_EQ(back.code, ab.code);
  EXPECT_EQ(back.message, ab.message);
}

TEST(Wire, ProtocolNames) {
  for (auto id : {ProtocolId::kPsiCa, ProtocolId::kJaccardExact, ProtocolId::kJaccardMinhash,
                  ProtocolId::kApproxCard, ProtocolId::kIris, ProtocolId::kMedia}) {
    EXPECT_EQ(protocol_from_name(protocol_name(id)), id);
  }
  EXPECT_FALSE(protocol_from_name("nope").has_value());
}

TEST(Wire, RoundCodecs) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(2);
  std::vector<Bytes> items = {to_bytes("a"), to_bytes("b"), to_bytes("c")};
  auto [state, r1] = client_start(gp, items, rng);
  auto p1 = encode_round1(gp, r1);
  EXPECT_EQ(p1.size(), 3 * gp.element_size());
  EXPECT_EQ(decode_round1(gp, p1).masked_items, r1.masked_items);
  auto r2 = server_respond(gp, std::vector<Bytes>{to_bytes("a"), to_bytes("z")}, r1, rng);
  auto p2 = encode_round2(gp, r2);
  EXPECT_EQ(p2.size(), 3 * gp.element_size() + 2 * 32);
  auto back = decode_round2(gp, p2, 3);
  EXPECT_EQ(back.blinded_items, r2.blinded_items);
  EXPECT_EQ(back.server_tags, r2.server_tags);
  EXPECT_THROW(decode_round2(gp, p2, 4), Error);
  p1.pop_back();
  EXPECT_THROW(decode_round1(gp, p1), Error);
}

TEST(Wire, MemoryTransport) {
  auto [a, b] = memory_transport_pair();
  exchange(*a, *b);
}

TEST(Wire, FileTransport) {
  auto dir = fresh_dir("file");
  auto client = FileTransport::client_side(dir);
  auto server = FileTransport::server_side(dir);
  exchange(*client, *server);
  std::filesystem::remove_all(dir);
}

TEST(Wire, TcpTransport) {
  TcpListener listener("127.0.0.1", 0);
  ASSERT_NE(listener.port(), 0);
  std::unique_ptr<TcpTransport> server;
  std::thread acceptor([&] { server = listener.accept(5s); });
  auto client = TcpTransport::connect("127.0.0.1", listener.port(), 5s);
  acceptor.join();
  exchange(*client, *server);
}

TEST(Wire, ReadTimesOut) {
  auto [a, b] = memory_transport_pair();
  std::uint8_t buf[4];
  EXPECT_EQ(code_of([&] { a->read_exact(buf, 50ms); }), ErrorCode::kTimeout);
  auto dir = fresh_dir("timeout");
  auto f = FileTransport::client_side(dir);
  EXPECT_EQ(code_of([&] { f->read_exact(buf, 50ms); }), ErrorCode::kTimeout);
  std::filesystem::remove_all(dir);
}

TEST(Wire, PeerDroppingMidProtocolIsAnAbortNotAHang) {
  TcpListener listener("127.0.0.1", 0);
  std::thread server([&] {
    auto t = listener.accept(5s);
    Channel ch(*t, 5s);
    ch.receive();
    t->close();
  });
  auto client = TcpTransport::connect("127.0.0.1", listener.port(), 5s);
  Channel ch(*client, 5s);
  ch.send(MsgType::kHello, Bytes{1});
  auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { ch.receive(); }), ErrorCode::kPeerAbort);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 4s);
  server.join();

  auto [a, b] = memory_transport_pair();
  b->close();
  Channel mem(*a, 5s);
  EXPECT_EQ(code_of([&] { mem.receive(); }), ErrorCode::kPeerAbort);
}

TEST(Wire, AbortFrameSurfacesPeerCode) {
  auto [a, b] = memory_transport_pair();
  Channel left(*a, 1s), right(*b, 1s);
  left.send_abort(Error(ErrorCode::kEmptySet, "nothing to compare"));
  try {
    right.receive();
    FAIL();
  } catch (const PeerAbortError& e) {
    EXPECT_EQ(e.peer_code(), ErrorCode::kEmptySet);
  }
}

TEST(Wire, UnexpectedMessageTypeAborts) {
  auto [a, b] = memory_transport_pair();
  Channel left(*a, 1s), right(*b, 1s);
  left.send(MsgType::kRound2, Bytes{});
  EXPECT_EQ(code_of([&] { right.expect(MsgType::kRound1); }), ErrorCode::kProtocolAbort);
}

TEST(Wire, TranscriptDigestsAgreeAcrossTransports) {
  auto run = [](Transport& l, Transport& r) {
    Channel cl(l, 5s), cr(r, 5s);
    cl.send(MsgType::kHello, to_bytes("hello"));
    cr.receive();
    cr.send(MsgType::kHelloAck, to_bytes("ack"));
    cl.receive();
    return std::pair{cl.transcript_digest(), cr.transcript_digest()};
  };
  auto [m1, m2] = memory_transport_pair();
  auto mem = run(*m1, *m2);
  auto dir = fresh_dir("digest");
  auto f1 = FileTransport::client_side(dir);
  auto f2 = FileTransport::server_side(dir);
  auto file = run(*f1, *f2);
  EXPECT_EQ(mem, file);
  EXPECT_NE(mem.first, mem.second);  // direction tags differ
  std::filesystem::remove_all(dir);
}
