#include "espresso/group.hpp"

#include <algorithm>

namespace espresso {

namespace {

constexpr std::string_view kHashDomain = "espresso/H/v1";

std::size_t bit_length(const mpz_class& v) { return mpz_sizeinbase(v.get_mpz_t(), 2); }

mpz_class powm(const mpz_class& base, const mpz_class& exp, const mpz_class& mod) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

mpz_class random_bits(unsigned bits, Rng& rng) {
  auto raw = rng.bytes((bits + 7) / 8);
  mpz_class v = mpz_from_bytes(raw);
  auto excess = raw.size() * 8 - bits;
  if (excess > 0) v >>= excess;
  return v;
}

}  // namespace

bool is_probable_prime(const mpz_class& n) {
  return mpz_probab_prime_p(n.get_mpz_t(), kPrimalityRounds) > 0;
}

GroupParams::GroupParams(mpz_class p, mpz_class q, mpz_class g)
    : p_(std::move(p)), q_(std::move(q)), g_(std::move(g)) {
  if (p_ < 5 || q_ < 2 || q_ >= p_) fail(ErrorCode::kInvalidArgument, "group: bad p/q sizes");
  if (!is_probable_prime(q_)) fail(ErrorCode::kInvalidArgument, "group: q is not prime");
  if (!is_probable_prime(p_)) fail(ErrorCode::kInvalidArgument, "group: p is not prime");
  mpz_class pm1 = p_ - 1;
  if (!mpz_divisible_p(pm1.get_mpz_t(), q_.get_mpz_t())) {
    fail(ErrorCode::kInvalidArgument, "group: q does not divide p - 1");
  }
  if (g_ <= 1 || g_ >= p_ || powm(g_, q_, p_) != 1) {
    fail(ErrorCode::kInvalidArgument, "group: g does not generate the order-q subgroup");
  }
  cofactor_ = pm1 / q_;
  element_size_ = (bit_length(p_) + 7) / 8;
}

Bytes GroupParams::serialize() const {
  Bytes out;
  for (const auto* v : {&p_, &q_, &g_}) {
    put_prefixed(out, mpz_to_bytes(*v, (bit_length(*v) + 7) / 8));
  }
  return out;
}

GroupParams GroupParams::deserialize(ByteSpan data) {
  ByteReader r(data);
  auto p = mpz_from_bytes(r.prefixed());
  auto q = mpz_from_bytes(r.prefixed());
  auto g = mpz_from_bytes(r.prefixed());
  r.expect_done();
  return GroupParams(std::move(p), std::move(q), std::move(g));
}

std::string GroupParams::fingerprint() const {
  auto d = sha256(serialize());
  return to_hex(ByteSpan(d.data(), 8));
}

const GroupParams& builtin_params() {
  static const GroupParams params(
      mpz_class("B10B8F96A080E01DDE92DE5EAE5D54EC52C99FBCFB06A3C69A6A9DCA52D23B61"
                "6073E28675A23D189838EF1E2EE652C013ECB4AEA906112324975C3CD49B83BF"
                "ACCBDD7D90C4BD7098488E9C219A73724EFFD6FAE5644738FAA31A4FF55BCCC0"
                "A151AF5F0DC8B4BD45BF37DF365C1A65E68CFDA76D4DA708DF1FB2BC2E4A4371",
                16),
      mpz_class("F518AA8781A8DF278ABA4E7D64B7CB9D49462353", 16),
      mpz_class("A4D1CBD5C3FD34126765A442EFB99905F8104DD258AC507FD6406CFF14266D31"
                "266FEA1E5C41564B777E690F5504F213160217B4B01B886A5E91547F9E2749F4"
                "D7FBD7D3B9A92EE1909D0D2263F80A76A6A24C087A091F531DBF0A0169B6A28A"
                "D662A4D18E73AFA32D779D5918D08BC8858F4DCEF97C2A24855E6EEB22B3B2E5",
                16));
  return params;
}

const GroupParams& toy_params() {
  // generate_params(64, 32, "espresso-toy-params"), frozen.
  static const GroupParams params(mpz_class("ae5d4ddf106fdd31", 16), mpz_class("ee2145ab", 16),
                                  mpz_class("5db7f5c308340c50", 16));
  return params;
}

GroupParams generate_params(unsigned p_bits, unsigned q_bits, const std::optional<Bytes>& seed,
                            unsigned max_attempts) {
  if (p_bits < 64) fail(ErrorCode::kInvalidArgument, "generate_params: p_bits must be >= 64");
  if (q_bits < 16 || q_bits >= p_bits) {
    fail(ErrorCode::kInvalidArgument, "generate_params: need 16 <= q_bits < p_bits");
  }
  Rng rng = seed ? Rng::seeded(ByteSpan(*seed)) : Rng::system();

  mpz_class q;
  unsigned attempts = 0;
  for (;;) {
    if (++attempts > max_attempts) fail(ErrorCode::kGenerationTimeout, "no prime q found");
    q = random_bits(q_bits, rng);
    mpz_setbit(q.get_mpz_t(), q_bits - 1);
    mpz_setbit(q.get_mpz_t(), 0);
    if (is_probable_prime(q)) break;
  }

  const unsigned m_bits = p_bits - q_bits;
  mpz_class p;
  attempts = 0;
  for (;;) {
    if (++attempts > max_attempts) fail(ErrorCode::kGenerationTimeout, "no prime p found");
    mpz_class m = random_bits(m_bits, rng);
    mpz_setbit(m.get_mpz_t(), m_bits - 1);
    mpz_clrbit(m.get_mpz_t(), 0);
    p = q * m + 1;
    if (bit_length(p) != p_bits) continue;
    if (is_probable_prime(p)) break;
  }

  mpz_class cofactor = (p - 1) / q;
  for (mpz_class h = 2; h < p - 1; ++h) {
    mpz_class g = powm(h, cofactor, p);
    if (g != 1) return GroupParams(p, q, g);
  }
  fail(ErrorCode::kGenerationTimeout, "no generator found");
}

Scalar::Scalar(const GroupParams& params, mpz_class v) : value_(std::move(v)) {
  if (value_ < 1 || value_ >= params.q()) fail(ErrorCode::kInvalidArgument, "scalar out of range");
}

bool is_member(const GroupParams& params, const mpz_class& v) {
  if (v < 1 || v >= params.p()) return false;
  return powm(v, params.q(), params.p()) == 1;
}

GroupElement generator(const GroupParams& params) { return GroupElement::unchecked(params.g()); }

GroupElement hash_to_group(const GroupParams& params, ByteSpan data) {
  // Expand to |p| + 128 bits so the reduction mod p is close to uniform.
  const std::size_t want = params.element_size() + 16;
  for (std::uint32_t retry = 0;; ++retry) {
    Sha256 seed_hash;
    seed_hash.update(kHashDomain).update(data);
    if (retry > 0) seed_hash.update_u32(retry);
    auto seed = seed_hash.finish();

    Bytes wide;
    wide.reserve(want + 32);
    for (std::uint32_t block = 0; wide.size() < want; ++block) {
      auto d = Sha256().update(kHashDomain).update(seed).update_u32(block).finish();
      wide.insert(wide.end(), d.begin(), d.end());
    }
    wide.resize(want);
    mpz_class x = mpz_from_bytes(wide) % params.p();
    if (x == 0) continue;
    mpz_class e = powm(x, params.cofactor(), params.p());
    if (e != 1) return GroupElement::unchecked(std::move(e));
  }
}

GroupElement pow(const GroupParams& params, const GroupElement& base, const Scalar& exp) {
  return GroupElement::unchecked(powm(base.value(), exp.value(), params.p()));
}

Scalar inv(const GroupParams& params, const Scalar& s) {
  mpz_class out;
  if (mpz_invert(out.get_mpz_t(), s.value().get_mpz_t(), params.q().get_mpz_t()) == 0) {
    fail(ErrorCode::kInvalidArgument, "scalar not invertible");
  }
  return Scalar(params, out);
}

Scalar random_scalar(const GroupParams& params, Rng& rng) {
  mpz_class qm1 = params.q() - 1;
  return Scalar(params, random_below(qm1, rng) + 1);
}

void encode_into(const GroupParams& params, const GroupElement& e, Bytes& out) {
  const auto width = params.element_size();
  const auto start = out.size();
  out.resize(start + width, 0);
  std::size_t count = 0;
  const auto used = (bit_length(e.value()) + 7) / 8;
  if (used > width) fail(ErrorCode::kInvalidArgument, "element wider than modulus");
  mpz_export(out.data() + start + (width - used), &count, 1, 1, 1, 0, e.value().get_mpz_t());
}

Bytes encode(const GroupParams& params, const GroupElement& e) {
  Bytes out;
  encode_into(params, e, out);
  return out;
}

GroupElement decode(const GroupParams& params, ByteSpan bytes) {
  if (bytes.size() != params.element_size()) {
    fail(ErrorCode::kDecode, "element encoding has wrong length");
  }
  mpz_class v = mpz_from_bytes(bytes);
  if (v < 1 || v >= params.p()) fail(ErrorCode::kDecode, "element out of range");
  if (powm(v, params.q(), params.p()) != 1) fail(ErrorCode::kDecode, "element not in subgroup");
  return GroupElement::unchecked(std::move(v));
}

mpz_class mpz_from_bytes(ByteSpan bytes) {
  mpz_class v;
  if (!bytes.empty()) mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  return v;
}

Bytes mpz_to_bytes(const mpz_class& v, std::size_t width) {
  const auto used = v == 0 ? 0 : (bit_length(v) + 7) / 8;
  if (used > width) fail(ErrorCode::kInvalidArgument, "integer wider than field");
  Bytes out(width, 0);
  std::size_t count = 0;
  if (used > 0) mpz_export(out.data() + (width - used), &count, 1, 1, 1, 0, v.get_mpz_t());
  return out;
}

mpz_class random_below(const mpz_class& bound, Rng& rng) {
  if (bound <= 0) fail(ErrorCode::kInvalidArgument, "random_below: bound must be positive");
  const auto bits = static_cast<unsigned>(bit_length(bound));
  for (;;) {
    auto v = random_bits(bits, rng);
    if (v < bound) return v;
  }
}

}  // namespace espresso
