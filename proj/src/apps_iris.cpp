#include "espresso/apps_iris.hpp"

#include <numeric>
#include <sstream>

namespace espresso {

namespace {

constexpr std::size_t kNonceBytes = 16;

bool less_than(const Fraction& a, const Fraction& b) {
  return static_cast<unsigned __int128>(a.num) * b.den < static_cast<unsigned __int128>(b.num) * a.den;
}

std::vector<std::uint8_t> parse_bits(std::string_view line, std::size_t n, const char* what) {
  if (line.size() != n) {
    fail(ErrorCode::kMalformedInput, std::string("iris ") + what + " line has " +
                                         std::to_string(line.size()) + " characters, expected " +
                                         std::to_string(n));
  }
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (line[i] != '0' && line[i] != '1') {
      fail(ErrorCode::kMalformedInput, std::string("iris ") + what + " line holds a non-binary character");
    }
    out[i] = line[i] == '1' ? 1 : 0;
  }
  return out;
}

std::uint32_t check_k(std::uint32_t n, std::uint32_t k) {
  if (k == 0 || k > n) {
    fail(ErrorCode::kInvalidArgument, "sample size k must be in [1, n] (k=" + std::to_string(k) +
                                          ", n=" + std::to_string(n) + ")");
  }
  return k;
}

}  // namespace

void IrisCode::validate() const {
  if (bits.empty()) fail(ErrorCode::kInvalidArgument, "iris code is empty");
  if (bits.size() != mask.size()) fail(ErrorCode::kLengthMismatch, "iris bits and mask differ in length");
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1 || mask[i] > 1) fail(ErrorCode::kInvalidArgument, "iris entries must be 0 or 1");
  }
}

IrisCode parse_iris(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string n_line, bits_line, mask_line;
  if (!std::getline(in, n_line) || !std::getline(in, bits_line) || !std::getline(in, mask_line)) {
    fail(ErrorCode::kMalformedInput, "iris file needs three lines: n, bits, mask");
  }
  auto trim = [](std::string& s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  };
  trim(n_line);
  trim(bits_line);
  trim(mask_line);
  std::size_t n = 0;
  try {
    std::size_t used = 0;
    n = std::stoul(n_line, &used);
    if (used != n_line.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    fail(ErrorCode::kMalformedInput, "iris file: first line must be the bit count");
  }
  if (n == 0) fail(ErrorCode::kMalformedInput, "iris file: n must be positive");
  IrisCode code{parse_bits(bits_line, n, "bits"), parse_bits(mask_line, n, "mask")};
  return code;
}

std::string format_iris(const IrisCode& code) {
  std::string out = std::to_string(code.n()) + "\n";
  for (auto b : code.bits) out.push_back(b ? '1' : '0');
  out.push_back('\n');
  for (auto m : code.mask) out.push_back(m ? '1' : '0');
  out.push_back('\n');
  return out;
}

Fraction whd(const IrisCode& a, const IrisCode& b) {
  a.validate();
  b.validate();
  if (a.n() != b.n()) fail(ErrorCode::kLengthMismatch, "iris codes differ in length");
  std::uint64_t valid = 0, differ = 0;
  for (std::size_t i = 0; i < a.n(); ++i) {
    if (a.mask[i] && b.mask[i]) {
      ++valid;
      differ += a.bits[i] != b.bits[i] ? 1 : 0;
    }
  }
  if (valid == 0) fail(ErrorCode::kUndefinedDistance, "combined mask is all zero");
  return {differ, valid};
}

IrisCode rotate(const IrisCode& code, std::int64_t shift) {
  const auto n = static_cast<std::int64_t>(code.n());
  if (n == 0) return code;
  if (shift > n || shift < -n) fail(ErrorCode::kInvalidArgument, "rotation exceeds the code length");
  IrisCode out{std::vector<std::uint8_t>(code.n()), std::vector<std::uint8_t>(code.n())};
  for (std::int64_t i = 0; i < n; ++i) {
    auto j = static_cast<std::size_t>(((i + shift) % n + n) % n);
    out.bits[j] = code.bits[static_cast<std::size_t>(i)];
    out.mask[j] = code.mask[static_cast<std::size_t>(i)];
  }
  return out;
}

Bytes index_seed(ByteSpan client_nonce, ByteSpan server_nonce) {
  auto d = Sha256().update("ESPRESSO-R").update(client_nonce).update(server_nonce).finish();
  return Bytes(d.begin(), d.end());
}

SampleIndexSet derive_indices(ByteSpan seed, std::uint32_t n, std::uint32_t k) {
  check_k(n, k);
  auto rng = Rng::seeded(ByteSpan(sha256("espresso/iris/indices", seed)));
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 1u);
  // Partial Fisher-Yates: the first k slots are a uniform k-subset in
  // uniform order.
  for (std::uint32_t i = 0; i < k; ++i) {
    auto j = i + static_cast<std::uint32_t>(rng.uniform(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return {std::move(pool), Bytes(seed.begin(), seed.end())};
}

std::vector<Bytes> extract(const std::vector<std::uint8_t>& x, const std::vector<std::uint8_t>& y,
                           const SampleIndexSet& r, Rng& rng) {
  if (x.size() != y.size()) fail(ErrorCode::kLengthMismatch, "extract: x and y differ in length");
  std::vector<Bytes> out;
  out.reserve(r.indices.size());
  for (auto index : r.indices) {
    if (index == 0 || index > x.size()) fail(ErrorCode::kInvalidArgument, "extract: index out of range");
    auto filler = random_token(index, rng);
    out.push_back(y[index - 1] ? bit_token(x[index - 1], index) : std::move(filler));
  }
  return out;
}

std::vector<GroupElement> select_from_tables(const std::vector<BitTableRow>& rows,
                                             const std::vector<std::uint8_t>& x,
                                             const std::vector<std::uint8_t>& y,
                                             const SampleIndexSet& r) {
  if (rows.size() != r.indices.size()) fail(ErrorCode::kLengthMismatch, "table size differs from k");
  std::vector<GroupElement> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto pos = r.indices[i] - 1;
    out.push_back(!y.at(pos) ? rows[i].random : (x.at(pos) ? rows[i].one : rows[i].zero));
  }
  return out;
}

std::optional<Fraction> rotation_distance(std::uint64_t c1, std::uint64_t c2, std::uint64_t n,
                                          bool literal_formula) {
  if (c1 == 0) return std::nullopt;
  if (literal_formula) return Fraction{n - std::min(n, c2), c1};
  return Fraction{c1 - std::min(c1, c2), c1};
}

IrisMatch decide_match(std::vector<RotationResult> rotations, const Fraction& threshold) {
  IrisMatch out;
  const RotationResult* best = nullptr;
  for (const auto& rot : rotations) {
    if (!rot.distance) continue;
    if (best == nullptr || less_than(*rot.distance, *best->distance)) best = &rot;
  }
  if (best == nullptr) {
    fail(ErrorCode::kIndeterminateMatch, "no sampled position was reliable in both codes at any rotation");
  }
  out.best_distance = *best->distance;
  out.best_shift = best->shift;
  out.matched = less_than(out.best_distance, threshold);
  out.rotations = std::move(rotations);
  return out;
}

IrisMatch iris_client(Channel& ch, const IrisCode& code, const IrisOptions& iris,
                      const ProtocolOptions& opts, Rng& rng) {
  return with_abort(ch, [&] {
    code.validate();
    const auto n = static_cast<std::uint32_t>(code.n());
    check_k(n, iris.k);
    if (iris.max_shift > n) fail(ErrorCode::kInvalidArgument, "max_shift exceeds the code length");

    Handshake hello;
    hello.protocol = ProtocolId::kIris;
    hello.params = opts.params;
    hello.k = iris.k;
    hello.n = n;
    hello.max_shift = iris.max_shift;
    ch.send(MsgType::kHello, encode_handshake(hello));
    decode_ack(ch.expect(MsgType::kHelloAck));

    auto client_nonce = rng.bytes(kNonceBytes);
    ch.send(MsgType::kNonce, client_nonce);
    auto server_nonce = ch.expect(MsgType::kNonce);
    if (server_nonce.size() != kNonceBytes) fail(ErrorCode::kProtocolAbort, "bad nonce length");
    const auto r = derive_indices(index_seed(client_nonce, server_nonce), n, iris.k);

    const auto& params = opts.params;
    const auto r_mask = random_scalar(params, rng);
    const auto r_bits = random_scalar(params, rng);
    const auto mask_rows = precompute_bit_tables(params, r_mask, r.indices, rng);
    const auto bit_rows = precompute_bit_tables(params, r_bits, r.indices, rng);

    auto run = [&](const Scalar& scalar, std::vector<GroupElement> masked) {
      shuffle(masked, rng);
      auto [state, round1] = client_start_premasked(params, scalar, std::move(masked));
      ch.send(MsgType::kRound1, encode_round1(params, round1));
      auto payload = ch.expect(MsgType::kRound2);
      return static_cast<std::uint64_t>(
          client_finish(state, decode_round2(params, payload, state.item_count())));
    };

    std::vector<RotationResult> rotations;
    const auto max_shift = static_cast<std::int64_t>(iris.max_shift);
    for (std::int64_t s = -max_shift; s <= max_shift; ++s) {
      const auto rotated = rotate(code, s);
      RotationResult rot;
      rot.shift = s;
      rot.c1 = run(r_mask, select_from_tables(mask_rows, rotated.mask, rotated.mask, r));
      rot.c2 = run(r_bits, select_from_tables(bit_rows, rotated.bits, rotated.mask, r));
      rot.distance = rotation_distance(rot.c1, rot.c2, n, iris.literal_formula);
      rotations.push_back(rot);
    }
    return decide_match(std::move(rotations), iris.threshold);
  });
}

IrisServerOutcome serve_iris(Channel& ch, const Handshake& hello, const IrisCode& code,
                             const IrisOptions& iris, const ProtocolOptions& opts, Rng& rng) {
  return with_abort(ch, [&] {
    if (hello.protocol != ProtocolId::kIris) fail(ErrorCode::kHandshakeMismatch, "expected the iris protocol");
    check_common_input(hello, opts);
    code.validate();
    const auto n = static_cast<std::uint32_t>(code.n());
    if (hello.n != n) {
      fail(ErrorCode::kHandshakeMismatch, "iris length differs (client " + std::to_string(hello.n) +
                                              ", server " + std::to_string(n) + ")");
    }
    if (hello.k != iris.k || hello.max_shift != iris.max_shift) {
      fail(ErrorCode::kHandshakeMismatch, "iris k or max_shift differs from the server's");
    }
    check_k(n, hello.k);
    ch.send(MsgType::kHelloAck, encode_ack(HandshakeAck{}));

    auto client_nonce = ch.expect(MsgType::kNonce);
    if (client_nonce.size() != kNonceBytes) fail(ErrorCode::kProtocolAbort, "bad nonce length");
    auto server_nonce = rng.bytes(kNonceBytes);
    ch.send(MsgType::kNonce, server_nonce);
    const auto r = derive_indices(index_seed(client_nonce, server_nonce), n, hello.k);

    const auto& params = opts.params;
    auto [mask_state, mask_tags] = server_precompute(params, extract(code.mask, code.mask, r, rng), rng);
    auto [bit_state, bit_tags] = server_precompute(params, extract(code.bits, code.mask, r, rng), rng);

    auto respond = [&](const PsiCaServerState& state) {
      auto round1 = decode_round1(params, ch.expect(MsgType::kRound1));
      if (round1.masked_items.size() != hello.k) {
        fail(ErrorCode::kProtocolAbort, "iris round 1 must carry exactly k elements");
      }
      ch.send(MsgType::kRound2, encode_round2(params, server_respond(state, round1, rng)));
    };

    const std::uint32_t rotations = 2 * hello.max_shift + 1;
    for (std::uint32_t i = 0; i < rotations; ++i) {
      respond(mask_state);
      respond(bit_state);
    }
    return IrisServerOutcome{n, hello.k, rotations};
  });
}

IrisCode random_iris(std::uint32_t n, double mask_density, Rng& rng) {
  IrisCode code{std::vector<std::uint8_t>(n), std::vector<std::uint8_t>(n)};
  for (std::uint32_t i = 0; i < n; ++i) {
    code.bits[i] = static_cast<std::uint8_t>(rng.uniform(2));
    code.mask[i] = rng.unit() < mask_density ? 1 : 0;
  }
  return code;
}

IrisCode perturb_iris(const IrisCode& base, double flip_rate, double mask_density, Rng& rng) {
  IrisCode code = base;
  for (std::size_t i = 0; i < code.n(); ++i) {
    if (rng.unit() < flip_rate) code.bits[i] ^= 1;
    code.mask[i] = rng.unit() < mask_density ? 1 : 0;
  }
  return code;
}

}  // namespace espresso
