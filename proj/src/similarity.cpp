#include "espresso/similarity.hpp"

#include <set>

namespace espresso {

std::uint64_t oracle_intersection(std::span<const Bytes> a, std::span<const Bytes> b) {
  std::set<Bytes> sa(a.begin(), a.end());
  std::set<Bytes> sb(b.begin(), b.end());
  std::uint64_t count = 0;
  for (const auto& x : sa) count += sb.contains(x) ? 1 : 0;
  return count;
}

Fraction oracle_jaccard(std::span<const Bytes> a, std::span<const Bytes> b) {
  std::set<Bytes> sa(a.begin(), a.end());
  std::set<Bytes> sb(b.begin(), b.end());
  std::uint64_t inter = 0;
  for (const auto& x : sa) inter += sb.contains(x) ? 1 : 0;
  const std::uint64_t uni = sa.size() + sb.size() - inter;
  if (uni == 0) return {0, 1};
  return {inter, uni};
}

Fraction intersection_from_jaccard(const Fraction& j, std::uint64_t size_a, std::uint64_t size_b) {
  if (j.den == 0 || j.num > j.den) fail(ErrorCode::kInvalidArgument, "jaccard value outside [0, 1]");
  // j (a + b) / (j + 1) with j = n / d is n (a + b) / (n + d).
  return {j.num * (size_a + size_b), j.num + j.den};
}

namespace {

constexpr std::size_t kSeedBytes = 32;

bool uses_sketch(const Handshake& h) {
  switch (h.protocol) {
    case ProtocolId::kJaccardMinhash:
    case ProtocolId::kApproxCard:
      return true;
    case ProtocolId::kMedia:
      return h.k > 0;
    default:
      return false;
  }
}

std::vector<Bytes> sketch_items(std::span<const Bytes> items, std::uint32_t k, ByteSpan seed) {
  require_distinct_nonempty(items, "sketch");
  auto family = family_new(k, seed);
  return sketch_multi(family, items).encoded();
}

std::size_t psi_ca_rounds_client(Channel& ch, const GroupParams& params,
                                 std::span<const Bytes> items, Rng& rng) {
  auto [state, round1] = client_start(params, items, rng);
  ch.send(MsgType::kRound1, encode_round1(params, round1));
  auto payload = ch.expect(MsgType::kRound2);
  return client_finish(state, decode_round2(params, payload, state.item_count()));
}

void psi_ca_rounds_server(Channel& ch, const GroupParams& params, std::span<const Bytes> items,
                          const PsiCaServerState* precomputed, std::uint64_t expected_v, Rng& rng) {
  auto payload = ch.expect(MsgType::kRound1);
  auto round1 = decode_round1(params, payload);
  if (round1.masked_items.size() != expected_v) {
    fail(ErrorCode::kProtocolAbort, "round 1 carries " + std::to_string(round1.masked_items.size()) +
                                        " elements, expected " + std::to_string(expected_v));
  }
  Round2Msg round2;
  if (precomputed != nullptr) {
    round2 = server_respond(*precomputed, round1, rng);
  } else {
    round2 = server_respond(params, items, round1, rng);
  }
  ch.send(MsgType::kRound2, encode_round2(params, round2));
}

Handshake make_hello(ProtocolId protocol, const ProtocolOptions& opts) {
  Handshake h;
  h.protocol = protocol;
  h.params = opts.params;
  return h;
}

/// Sends the hello, reads the ack and checks the seed echo.
HandshakeAck client_handshake(Channel& ch, const Handshake& hello) {
  ch.send(MsgType::kHello, encode_handshake(hello));
  auto ack = decode_ack(ch.expect(MsgType::kHelloAck));
  if (ack.seed_echo != hello.family_seed) {
    fail(ErrorCode::kHandshakeMismatch, "server did not accept the proposed family seed");
  }
  return ack;
}

Bytes choose_seed(const ProtocolOptions& opts, Rng& rng) {
  return opts.family_seed.empty() ? rng.bytes(kSeedBytes) : opts.family_seed;
}

std::uint64_t required_size(const HandshakeAck& ack) {
  if (!ack.declared_size || *ack.declared_size == 0) {
    fail(ErrorCode::kProtocolAbort, "server did not declare a nonempty set size");
  }
  return *ack.declared_size;
}

SimilarityResult exact_client(Channel& ch, ProtocolId protocol, std::span<const Bytes> items,
                              const ProtocolOptions& opts, Rng& rng) {
  require_distinct_nonempty(items, "jaccard client");
  auto hello = make_hello(protocol, opts);
  hello.declared_size = items.size();
  auto ack = client_handshake(ch, hello);
  const auto w = required_size(ack);
  const std::uint64_t c = psi_ca_rounds_client(ch, opts.params, items, rng);
  const std::uint64_t u = items.size() + w - c;
  SimilarityResult result;
  result.jaccard = {c, u};
  result.intersection_estimate = Fraction{c, 1};
  result.mode = SimilarityResult::Mode::kExact;
  return result;
}

SimilarityResult sketch_client(Channel& ch, ProtocolId protocol, std::span<const Bytes> items,
                               const ProtocolOptions& opts, Rng& rng) {
  if (opts.k == 0) fail(ErrorCode::kInvalidArgument, "sketch protocols need k >= 1");
  auto hello = make_hello(protocol, opts);
  hello.k = opts.k;
  hello.family_seed = choose_seed(opts, rng);
  auto sketch = sketch_items(items, opts.k, hello.family_seed);
  client_handshake(ch, hello);
  const std::uint64_t matches = psi_ca_rounds_client(ch, opts.params, sketch, rng);
  SimilarityResult result;
  result.jaccard = {matches, opts.k};
  result.mode = SimilarityResult::Mode::kApproximated;
  result.k = opts.k;
  return result;
}

}  // namespace

void check_common_input(const Handshake& hello, const ProtocolOptions& opts) {
  if (!(hello.params == opts.params)) {
    fail(ErrorCode::kHandshakeMismatch, "group parameters differ (client " +
                                            hello.params.fingerprint() + ", server " +
                                            opts.params.fingerprint() + ")");
  }
}

std::size_t psi_ca_client(Channel& ch, std::span<const Bytes> items, const ProtocolOptions& opts,
                          Rng& rng) {
  return with_abort(ch, [&] {
    require_distinct_nonempty(items, "psi-ca client");
    auto hello = make_hello(ProtocolId::kPsiCa, opts);
    hello.declared_size = items.size();
    required_size(client_handshake(ch, hello));
    return psi_ca_rounds_client(ch, opts.params, items, rng);
  });
}

SimilarityResult jaccard_exact_client(Channel& ch, std::span<const Bytes> items,
                                      const ProtocolOptions& opts, Rng& rng) {
  return with_abort(ch, [&] { return exact_client(ch, ProtocolId::kJaccardExact, items, opts, rng); });
}

SimilarityResult jaccard_minhash_client(Channel& ch, std::span<const Bytes> items,
                                        const ProtocolOptions& opts, Rng& rng) {
  return with_abort(ch,
                    [&] { return sketch_client(ch, ProtocolId::kJaccardMinhash, items, opts, rng); });
}

SimilarityResult media_client(Channel& ch, std::span<const Bytes> items, bool approximate,
                              const ProtocolOptions& opts, Rng& rng) {
  return with_abort(ch, [&] {
    return approximate ? sketch_client(ch, ProtocolId::kMedia, items, opts, rng)
                       : exact_client(ch, ProtocolId::kMedia, items, opts, rng);
  });
}

CardinalityEstimate approx_cardinality_client(Channel& ch, std::span<const Bytes> items,
                                              const ProtocolOptions& opts, Rng& rng) {
  return with_abort(ch, [&] {
    auto sim = sketch_client(ch, ProtocolId::kApproxCard, items, opts, rng);
    auto size_payload = ch.expect(MsgType::kSetSize);
    ByteReader r(size_payload);
    const auto w = r.u64();
    r.expect_done();
    if (w == 0) fail(ErrorCode::kProtocolAbort, "server declared an empty set");
    const std::uint64_t v = items.size();
    const auto c = sim.jaccard.num;
    const auto k = sim.jaccard.den;
    CardinalityEstimate out;
    out.delta = sim.jaccard;
    // delta (v + w) / (1 + delta) with delta = c / k.
    out.estimate = {c * (v + w), c + k};
    out.server_size = w;
    return out;
  });
}

Handshake receive_hello(Channel& ch) {
  auto payload = ch.expect(MsgType::kHello);
  try {
    return decode_handshake(payload);
  } catch (const Error& e) {
    ch.send_abort(e);
    throw;
  }
}

ServerOutcome serve_set_protocol(Channel& ch, const Handshake& hello, std::span<const Bytes> items,
                                 const ProtocolOptions& opts, Rng& rng) {
  return with_abort(ch, [&] {
    if (hello.protocol == ProtocolId::kIris) {
      fail(ErrorCode::kHandshakeMismatch, "iris is not a set protocol");
    }
    check_common_input(hello, opts);
    require_distinct_nonempty(items, "server");
    ServerOutcome outcome;
    outcome.protocol = hello.protocol;
    outcome.k = hello.k;

    if (uses_sketch(hello)) {
      if (hello.k != opts.k) {
        fail(ErrorCode::kHandshakeMismatch, "sketch size differs (client " +
                                                std::to_string(hello.k) + ", server " +
                                                std::to_string(opts.k) + ")");
      }
      if (hello.family_seed.empty()) fail(ErrorCode::kHandshakeMismatch, "missing family seed");
      if (!opts.family_seed.empty() && opts.family_seed != hello.family_seed) {
        fail(ErrorCode::kHandshakeMismatch, "family seed differs from the configured one");
      }
      if (hello.declared_size) {
        fail(ErrorCode::kHandshakeMismatch, "sketch protocols never carry the client's size");
      }
      auto sketch = sketch_items(items, hello.k, hello.family_seed);
      ch.send(MsgType::kHelloAck, encode_ack(HandshakeAck{hello.family_seed, std::nullopt}));
      psi_ca_rounds_server(ch, opts.params, sketch, nullptr, hello.k, rng);
      if (hello.protocol == ProtocolId::kApproxCard) {
        Bytes size;
        put_u64(size, items.size());
        ch.send(MsgType::kSetSize, size);
      }
      return outcome;
    }

    if (hello.protocol == ProtocolId::kMedia && opts.k != 0) {
      fail(ErrorCode::kHandshakeMismatch, "server expects the sketched media protocol");
    }
    if (hello.k != 0 || !hello.family_seed.empty()) {
      fail(ErrorCode::kHandshakeMismatch, "exact protocols take no sketch parameters");
    }
    if (!hello.declared_size || *hello.declared_size == 0) {
      fail(ErrorCode::kHandshakeMismatch, "client did not declare its set size");
    }
    outcome.client_size = hello.declared_size;
    ch.send(MsgType::kHelloAck, encode_ack(HandshakeAck{{}, items.size()}));
    const PsiCaServerState* pre = opts.precomputed ? opts.precomputed.get() : nullptr;
    if (pre != nullptr && pre->precomputed_tags && pre->precomputed_tags->size() != items.size()) {
      fail(ErrorCode::kInvalidArgument, "precomputed tags do not match the server set");
    }
    psi_ca_rounds_server(ch, opts.params, items, pre, *hello.declared_size, rng);
    return outcome;
  });
}

}  // namespace espresso
