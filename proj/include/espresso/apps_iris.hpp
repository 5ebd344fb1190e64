#pragma once

#include <optional>
#include <string>
#include <vector>

#include "espresso/common.hpp"
#include "espresso/similarity.hpp"

namespace espresso {

/// n-bit iris code with its n-bit reliability mask; one byte per bit.
struct IrisCode {
  std::vector<std::uint8_t> bits;
  std::vector<std::uint8_t> mask;

  std::size_t n() const { return bits.size(); }
  /// Throws kInvalidArgument unless |bits| = |mask| > 0 and every entry is 0/1.
  void validate() const;
  friend bool operator==(const IrisCode&, const IrisCode&) = default;
};

inline constexpr std::uint32_t kDefaultIrisBits = 2048;
inline constexpr std::uint32_t kDefaultIrisK = 25;
inline constexpr std::uint32_t kDefaultMaxShift = 5;

/// Three lines: n, the bits as '0'/'1', the mask likewise.
IrisCode parse_iris(std::string_view text);
std::string format_iris(const IrisCode& code);

/// Weighted Hamming distance over M = M_A ∧ M_B. Throws kLengthMismatch,
/// or kUndefinedDistance when M is all zero.
Fraction whd(const IrisCode& a, const IrisCode& b);

/// Cyclic shift of bits and mask together; positive shifts move bits to
/// higher positions.
IrisCode rotate(const IrisCode& code, std::int64_t shift);

/// k distinct 1-based positions in [1, n].
struct SampleIndexSet {
  std::vector<std::uint32_t> indices;
  Bytes seed;
};

/// Deterministic in (seed, n, k). Throws kInvalidArgument unless 1 <= k <= n.
SampleIndexSet derive_indices(ByteSpan seed, std::uint32_t n, std::uint32_t k);

/// Seed material from the two nonces, client's first.
Bytes index_seed(ByteSpan client_nonce, ByteSpan server_nonce);

/// Token per sampled position: <x bit, r_i> where y is 1, else a fresh
/// 64-bit random value with r_i. One random token is drawn per position
/// whether used or not, in the same order as precompute_bit_tables.
std::vector<Bytes> extract(const std::vector<std::uint8_t>& x, const std::vector<std::uint8_t>& y,
                           const SampleIndexSet& r, Rng& rng);

/// Selects from precomputed rows exactly what client_start would mask for
/// extract(x, y) with the rows' random tokens.
std::vector<GroupElement> select_from_tables(const std::vector<BitTableRow>& rows,
                                             const std::vector<std::uint8_t>& x,
                                             const std::vector<std::uint8_t>& y,
                                             const SampleIndexSet& r);

struct RotationResult {
  std::int64_t shift = 0;
  std::uint64_t c1 = 0;
  std::uint64_t c2 = 0;
  /// Absent when c1 = 0.
  std::optional<Fraction> distance;
};

struct IrisMatch {
  bool matched = false;
  Fraction best_distance;
  std::int64_t best_shift = 0;
  std::vector<RotationResult> rotations;
};

struct IrisOptions {
  std::uint32_t k = kDefaultIrisK;
  std::uint32_t max_shift = kDefaultMaxShift;
  /// Match iff the smallest distance is below threshold.
  Fraction threshold{1, 3};
  /// Use (n - c2) / c1 instead of (c1 - c2) / c1.
  bool literal_formula = false;
};

/// Per-rotation distance under the chosen formula, or nullopt when c1 = 0.
std::optional<Fraction> rotation_distance(std::uint64_t c1, std::uint64_t c2, std::uint64_t n,
                                          bool literal_formula);

/// Picks the best rotation and applies the threshold. Throws
/// kIndeterminateMatch when every rotation had c1 = 0.
IrisMatch decide_match(std::vector<RotationResult> rotations, const Fraction& threshold);

IrisMatch iris_client(Channel& ch, const IrisCode& code, const IrisOptions& iris,
                      const ProtocolOptions& opts, Rng& rng);

struct IrisServerOutcome {
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  std::uint32_t rotations = 0;
};

/// Serves one iris session after the hello was read.
IrisServerOutcome serve_iris(Channel& ch, const Handshake& hello, const IrisCode& code,
                             const IrisOptions& iris, const ProtocolOptions& opts, Rng& rng);

/// Random code with the given mask density; for tests and benchmarks.
IrisCode random_iris(std::uint32_t n, double mask_density, Rng& rng);
/// Copy of base with each bit flipped with probability flip_rate and a
/// fresh mask of the given density.
IrisCode perturb_iris(const IrisCode& base, double flip_rate, double mask_density, Rng& rng);

}  // namespace espresso
