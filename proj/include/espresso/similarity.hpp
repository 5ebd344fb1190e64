#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "espresso/common.hpp"
#include "espresso/group.hpp"
#include "espresso/minhash.hpp"
#include "espresso/psi_ca.hpp"
#include "espresso/wire.hpp"

namespace espresso {

// ---------------------------------------------------------------------------
// Plaintext oracles
// ---------------------------------------------------------------------------

/// |A ∩ B| by enumeration. Duplicates inside one input count once.
std::uint64_t oracle_intersection(std::span<const Bytes> a, std::span<const Bytes> b);
/// |A ∩ B| / |A ∪ B|, unreduced so the denominator is the union size.
/// J(∅, ∅) is 0.
Fraction oracle_jaccard(std::span<const Bytes> a, std::span<const Bytes> b);
/// j (|A| + |B|) / (j + 1), evaluated exactly.
Fraction intersection_from_jaccard(const Fraction& j, std::uint64_t size_a, std::uint64_t size_b);

// ---------------------------------------------------------------------------
// Two-party protocols
// ---------------------------------------------------------------------------

struct SimilarityResult {
  enum class Mode { kExact, kApproximated };

  Fraction jaccard;
  std::optional<Fraction> intersection_estimate;
  Mode mode = Mode::kExact;
  std::optional<std::uint32_t> k;

  friend bool operator==(const SimilarityResult&, const SimilarityResult&) = default;
};

struct ProtocolOptions {
  GroupParams params = builtin_params();
  /// Sketch size for the MinHash-based protocols.
  std::uint32_t k = 400;
  /// Client: the proposed family seed, 32 random bytes when empty.
  /// Server: when set, a client proposing any other seed is refused.
  Bytes family_seed;
  std::chrono::milliseconds timeout = kDefaultRoundTimeout;
  /// Server only: tags fixed offline for the exact protocols.
  std::shared_ptr<const PsiCaServerState> precomputed;
};

/// Plain PSI-CA: the client learns |A ∩ B|.
std::size_t psi_ca_client(Channel& ch, std::span<const Bytes> items, const ProtocolOptions& opts,
                          Rng& rng);
SimilarityResult jaccard_exact_client(Channel& ch, std::span<const Bytes> items,
                                      const ProtocolOptions& opts, Rng& rng);
SimilarityResult jaccard_minhash_client(Channel& ch, std::span<const Bytes> items,
                                        const ProtocolOptions& opts, Rng& rng);

struct CardinalityEstimate {
  Fraction delta;     // matches / k
  Fraction estimate;  // delta (v + w) / (1 + delta)
  std::uint64_t server_size = 0;
};

/// The size-hiding variant: only the server's size travels on the wire.
CardinalityEstimate approx_cardinality_client(Channel& ch, std::span<const Bytes> items,
                                              const ProtocolOptions& opts, Rng& rng);

/// What the server learned from one session.
struct ServerOutcome {
  ProtocolId protocol = ProtocolId::kPsiCa;
  /// Client set size; absent for the sketch protocols.
  std::optional<std::uint64_t> client_size;
  std::uint32_t k = 0;
};

/// Reads the client's hello.
Handshake receive_hello(Channel& ch);

/// Serves psi-ca, jaccard-exact, jaccard-minhash, approx-card or media
/// (exact when k = 0, sketched otherwise) after the hello was read.
ServerOutcome serve_set_protocol(Channel& ch, const Handshake& hello, std::span<const Bytes> items,
                                 const ProtocolOptions& opts, Rng& rng);

/// Media runs jaccard-exact or jaccard-minhash under its own protocol id.
SimilarityResult media_client(Channel& ch, std::span<const Bytes> items, bool approximate,
                              const ProtocolOptions& opts, Rng& rng);

/// Checks the fields every protocol must agree on; throws
/// kHandshakeMismatch.
void check_common_input(const Handshake& hello, const ProtocolOptions& opts);

/// Runs body; on a local Error, sends an abort frame before rethrowing.
template <typename F>
auto with_abort(Channel& ch, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const PeerAbortError&) {
    throw;
  } catch (const Error& e) {
    ch.send_abort(e);
    throw;
  }
}

}  // namespace espresso
