#include "espresso/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cstring>

namespace espresso {

struct Sha256::Ctx {
  EVP_MD_CTX* md = nullptr;
};

Sha256::Sha256() : ctx_(std::make_unique<Ctx>()) {
  ctx_->md = EVP_MD_CTX_new();
  if (ctx_->md == nullptr || EVP_DigestInit_ex(ctx_->md, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kInvalidArgument, "SHA-256 initialisation failed");
  }
}

Sha256::~Sha256() {
  if (ctx_ && ctx_->md != nullptr) EVP_MD_CTX_free(ctx_->md);
}

Sha256& Sha256::update(ByteSpan data) {
  EVP_DigestUpdate(ctx_->md, data.data(), data.size());
  return *this;
}

Sha256& Sha256::update(std::string_view s) {
  EVP_DigestUpdate(ctx_->md, s.data(), s.size());
  return *this;
}

Sha256& Sha256::update_u32(std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                       static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
  return update(ByteSpan(b, 4));
}

Digest Sha256::finish() {
  Digest out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx_->md, out.data(), &len);
  return out;
}

Digest sha256(ByteSpan data) { return Sha256().update(data).finish(); }

Digest sha256(std::string_view domain, ByteSpan data) {
  return Sha256().update(domain).update(data).finish();
}

Rng Rng::system() { return Rng(false, Digest{}); }

Rng Rng::seeded(ByteSpan seed) { return Rng(true, sha256("espresso/rng/seed", seed)); }

Rng Rng::seeded(std::uint64_t seed) {
  Bytes b;
  put_u64(b, seed);
  return seeded(ByteSpan(b));
}

void Rng::refill() {
  Bytes ctr;
  put_u64(ctr, counter_++);
  block_ = Sha256().update("espresso/rng/block").update(key_).update(ctr).finish();
  block_pos_ = 0;
}

void Rng::fill(std::span<std::uint8_t> out) {
  if (!seeded_) {
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
      fail(ErrorCode::kInvalidArgument, "system CSPRNG failure");
    }
    return;
  }
  std::size_t done = 0;
  while (done < out.size()) {
    if (block_pos_ == block_.size()) refill();
    auto n = std::min(out.size() - done, block_.size() - block_pos_);
    std::memcpy(out.data() + done, block_.data() + block_pos_, n);
    block_pos_ += n;
    done += n;
  }
}

Bytes Rng::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

std::uint64_t Rng::next_u64() {
  std::uint8_t b[8];
  fill(b);
  std::uint64_t v = 0;
  for (auto c : b) v = v << 8 | c;
  return v;
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
  if (bound == 0) fail(ErrorCode::kInvalidArgument, "uniform: zero bound");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    auto v = next_u64();
    if (v < limit) return v % bound;
  }
}

double Rng::unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

Rng Rng::fork(std::string_view label) {
  if (!seeded_) return system();
  auto material = bytes(32);
  return Rng(true, Sha256().update("espresso/rng/fork").update(label).update(material).finish());
}

}  // namespace espresso
