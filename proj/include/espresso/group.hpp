#pragma once

#include <gmpxx.h>

#include <optional>
#include <string>

#include "espresso/common.hpp"
#include "espresso/crypto.hpp"

namespace espresso {

/// Prime-order subgroup setting: primes p and q with q | p - 1 and a
/// generator g of the order-q subgroup of Z_p^*.
class GroupParams {
 public:
  GroupParams() = default;
  /// Validates every invariant; throws kInvalidArgument on violation.
  GroupParams(mpz_class p, mpz_class q, mpz_class g);

  const mpz_class& p() const { return p_; }
  const mpz_class& q() const { return q_; }
  const mpz_class& g() const { return g_; }
  /// (p - 1) / q, the exponent that projects Z_p^* onto the subgroup.
  const mpz_class& cofactor() const { return cofactor_; }

  std::size_t p_bits() const { return mpz_sizeinbase(p_.get_mpz_t(), 2); }
  std::size_t q_bits() const { return mpz_sizeinbase(q_.get_mpz_t(), 2); }
  /// Fixed encoded length of a group element, ceil(|p| / 8).
  std::size_t element_size() const { return element_size_; }
  /// Anything below 1024/160 is for tests only.
  bool insecure() const { return p_bits() < 1024 || q_bits() < 160; }

  /// Length-prefixed big-endian p, q, g.
  Bytes serialize() const;
  static GroupParams deserialize(ByteSpan data);
  std::string fingerprint() const;

  friend bool operator==(const GroupParams& a, const GroupParams& b) {
    return a.p_ == b.p_ && a.q_ == b.q_ && a.g_ == b.g_;
  }

 private:
  mpz_class p_, q_, g_, cofactor_;
  std::size_t element_size_ = 0;
};

/// RFC 5114 1024-bit MODP group with 160-bit prime-order subgroup.
const GroupParams& builtin_params();
/// Deterministic 64/32-bit toy group; never use outside tests.
const GroupParams& toy_params();

/// Searches for fresh parameters. Deterministic when a seed is given.
/// Throws kGenerationTimeout when max_attempts candidates for p fail.
GroupParams generate_params(unsigned p_bits, unsigned q_bits,
                            const std::optional<Bytes>& seed = std::nullopt,
                            unsigned max_attempts = 1u << 16);

/// Probabilistic primality with the number of Miller-Rabin rounds used
/// throughout this library.
bool is_probable_prime(const mpz_class& n);
inline constexpr int kPrimalityRounds = 64;

/// Element of the order-q subgroup, 1 <= value < p.
class GroupElement {
 public:
  GroupElement() = default;

  /// No membership check; for values produced by the group operations
  /// below or for tests that need to forge an invalid element.
  static GroupElement unchecked(mpz_class v) { return GroupElement(std::move(v)); }

  const mpz_class& value() const { return value_; }

  friend bool operator==(const GroupElement& a, const GroupElement& b) {
    return a.value_ == b.value_;
  }

 private:
  explicit GroupElement(mpz_class v) : value_(std::move(v)) {}
  mpz_class value_;
};

/// Exponent in [1, q - 1].
class Scalar {
 public:
  Scalar() = default;
  /// Throws kInvalidArgument unless 1 <= v < q.
  Scalar(const GroupParams& params, mpz_class v);

  const mpz_class& value() const { return value_; }

  friend bool operator==(const Scalar& a, const Scalar& b) { return a.value_ == b.value_; }

 private:
  mpz_class value_;
};

bool is_member(const GroupParams& params, const mpz_class& v);
GroupElement generator(const GroupParams& params);

/// Random-oracle map into the subgroup (H). Never returns the identity.
GroupElement hash_to_group(const GroupParams& params, ByteSpan data);

GroupElement pow(const GroupParams& params, const GroupElement& base, const Scalar& exp);
Scalar inv(const GroupParams& params, const Scalar& s);
Scalar random_scalar(const GroupParams& params, Rng& rng);

/// Fixed-length big-endian encoding, element_size() bytes.
Bytes encode(const GroupParams& params, const GroupElement& e);
void encode_into(const GroupParams& params, const GroupElement& e, Bytes& out);
/// Rejects wrong lengths, values outside [1, p-1] and non-members (kDecode).
GroupElement decode(const GroupParams& params, ByteSpan bytes);

mpz_class mpz_from_bytes(ByteSpan bytes);
/// Big-endian, left-padded to width bytes.
Bytes mpz_to_bytes(const mpz_class& v, std::size_t width);
mpz_class random_below(const mpz_class& bound, Rng& rng);

}  // namespace espresso
