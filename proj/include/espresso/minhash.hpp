#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "espresso/common.hpp"
#include "espresso/crypto.hpp"

namespace espresso {

/// Mersenne prime 2^61 - 1, the domain of the linear permutations.
inline constexpr std::uint64_t kFieldPrime = (std::uint64_t{1} << 61) - 1;

/// k linear permutations h_i(x) = a_i x + b_i mod P, derived from a seed.
struct HashFamily {
  std::size_t k = 0;
  std::uint64_t field_prime = kFieldPrime;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> coefficients;
  Bytes seed;

  std::uint64_t apply(std::size_t i, std::uint64_t x) const;
  friend bool operator==(const HashFamily&, const HashFamily&) = default;
};

/// Deterministic in (k, seed). Throws kInvalidArgument when k == 0.
HashFamily family_new(std::size_t k, ByteSpan seed);

/// Items enter the permutations as a 64-bit SHA-256 prefix reduced mod P.
std::uint64_t item_digest(ByteSpan item);

struct SketchEntry {
  Bytes item;
  std::uint32_t index = 0;  // 1-based

  friend bool operator==(const SketchEntry&, const SketchEntry&) = default;
};

/// Multi-hash MinHash: entry i is <argmin over S of h_i, i>.
struct MinHashSketch {
  std::vector<SketchEntry> entries;

  std::size_t k() const { return entries.size(); }
  /// Position-encoded entries, the PSI-CA input of the sketch protocols.
  std::vector<Bytes> encoded() const;
  friend bool operator==(const MinHashSketch&, const MinHashSketch&) = default;
};

/// Ties on the permuted value are broken by the smaller item digest, then
/// by the item bytes. Throws kEmptySet.
MinHashSketch sketch_multi(const HashFamily& family, std::span<const Bytes> items);
/// Fraction of indices where both sketches hold the same item.
Fraction estimate_multi(const MinHashSketch& a, const MinHashSketch& b);

/// k-smallest sketch under the first permutation of a family.
struct SingleHashSketch {
  std::size_t k = 0;
  std::pair<std::uint64_t, std::uint64_t> function{};
  std::vector<Bytes> survivors;
};

SingleHashSketch sketch_single(const HashFamily& family, std::span<const Bytes> items,
                               std::size_t k);
/// |h_k(h_k(A) ∪ h_k(B)) ∩ h_k(A) ∩ h_k(B)| / |h_k(h_k(A) ∪ h_k(B))|.
Fraction estimate_single(const SingleHashSketch& a, const SingleHashSketch& b);

/// Compares <a_r, r> against <b_r, r> at k indices drawn uniformly with
/// replacement from [1, n]. Throws kLengthMismatch when |a| != |b|.
Fraction vector_sample_estimate(std::span<const Bytes> a, std::span<const Bytes> b,
                                std::size_t k, Rng& rng);

/// k as u32, then per entry a length-prefixed item and a u32 index.
Bytes serialize(const MinHashSketch& sketch);
MinHashSketch deserialize_sketch(ByteSpan data);

}  // namespace espresso
