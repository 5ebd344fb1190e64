#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "espresso/common.hpp"

namespace espresso {

using Digest = std::array<std::uint8_t, 32>;

/// Incremental SHA-256 (OpenSSL EVP underneath).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(ByteSpan data);
  Sha256& update(std::string_view s);
  Sha256& update_u32(std::uint32_t v);
  Digest finish();

 private:
  struct Ctx;
  std::unique_ptr<Ctx> ctx_;
};

Digest sha256(ByteSpan data);
Digest sha256(std::string_view domain, ByteSpan data);

/// Randomness source handed explicitly to every operation that needs it.
///
/// Two modes: the system CSPRNG, and a seeded SHA-256 counter-mode stream
/// used by tests and reproducible runs. The seeded stream is a pure function
/// of the seed, so identical seeds give identical transcripts on any
/// transport or platform.
class Rng {
 public:
  static Rng system();
  static Rng seeded(ByteSpan seed);
  static Rng seeded(std::string_view seed) { return seeded(ByteSpan(to_bytes(seed))); }
  static Rng seeded(std::uint64_t seed);

  void fill(std::span<std::uint8_t> out);
  Bytes bytes(std::size_t n);
  std::uint64_t next_u64();
  /// Uniform in [0, bound); rejection sampling, bound > 0.
  std::uint64_t uniform(std::uint64_t bound);
  /// Uniform double in [0, 1).
  double unit();

  /// Independent child stream, e.g. one per party in a loopback run.
  Rng fork(std::string_view label);

  bool deterministic() const { return seeded_; }

 private:
  Rng(bool seeded, Digest key) : seeded_(seeded), key_(key) {}
  void refill();

  bool seeded_ = false;
  Digest key_{};
  std::uint64_t counter_ = 0;
  Digest block_{};
  std::size_t block_pos_ = block_.size();
};

/// In-place Fisher-Yates shuffle driven by rng.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.uniform(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace espresso
