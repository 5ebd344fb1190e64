#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "espresso/group.hpp"

namespace espresso {

/// Output of the second random oracle, applied to an encoded group element.
using Tag = std::array<std::uint8_t, 32>;

Tag tag_of(const GroupParams& params, const GroupElement& e);

/// Client -> server: one masked element H(a_i)^{R_a} per client item.
struct Round1Msg {
  std::vector<GroupElement> masked_items;
};

/// Server -> client: the client's elements raised to R_b in shuffled
/// order, and the server's own tags.
struct Round2Msg {
  std::vector<GroupElement> blinded_items;
  std::vector<Tag> server_tags;
};

class PsiCaClientState {
 public:
  PsiCaClientState(GroupParams params, Scalar r_a, std::size_t item_count)
      : params_(std::move(params)), r_a_(std::move(r_a)), item_count_(item_count),
        round1_sent_(true) {}

  const GroupParams& params() const { return params_; }
  const Scalar& r_a() const { return r_a_; }
  std::size_t item_count() const { return item_count_; }
  bool round1_sent() const { return round1_sent_; }

 private:
  GroupParams params_;
  Scalar r_a_;
  std::size_t item_count_;
  bool round1_sent_;
};

/// Server-side secret R_b with the tags computed from it. Built once by
/// server_precompute and reusable across any number of sessions.
struct PsiCaServerState {
  GroupParams params;
  Scalar r_b;
  std::optional<std::vector<Tag>> precomputed_tags;
};

/// Hashes and masks every item with a fresh R_a. Round1 preserves the
/// order of items. Throws kEmptySet / kDuplicateItem.
std::pair<PsiCaClientState, Round1Msg> client_start(const GroupParams& params,
                                                    std::span<const Bytes> items, Rng& rng);
/// Same as client_start with a caller-chosen R_a.
std::pair<PsiCaClientState, Round1Msg> client_start_with_scalar(const GroupParams& params,
                                                                std::span<const Bytes> items,
                                                                const Scalar& r_a);
/// Client start from elements already masked under r_a, e.g. selected
/// from precompute_bit_tables.
std::pair<PsiCaClientState, Round1Msg> client_start_premasked(const GroupParams& params,
                                                              const Scalar& r_a,
                                                              std::vector<GroupElement> masked);

/// Fixes R_b and the shuffled tag list for items.
std::pair<PsiCaServerState, std::vector<Tag>> server_precompute(const GroupParams& params,
                                                                std::span<const Bytes> items,
                                                                Rng& rng);

/// Blinds the client's elements with state.r_b, shuffles them, and attaches
/// the precomputed tags verbatim. Throws kProtocolAbort if any incoming
/// element is outside the subgroup.
Round2Msg server_respond(const PsiCaServerState& state, const Round1Msg& msg, Rng& rng);
/// One-shot variant: fresh R_b and tags for this session only.
Round2Msg server_respond(const GroupParams& params, std::span<const Bytes> items,
                         const Round1Msg& msg, Rng& rng);

/// |{ta_i} ∩ {tb_j}|. Throws kProtocolAbort on a length mismatch.
std::size_t client_finish(const PsiCaClientState& state, const Round2Msg& msg);

/// Token for a sampled bit: <bit, index> with a one-byte value.
Bytes bit_token(std::uint8_t bit, std::uint32_t index);
/// Width of the random filler value used for unreliable positions.
inline constexpr std::size_t kRandomTokenBytes = 8;
/// Token for an unreliable position: <fresh 64-bit random, index>.
Bytes random_token(std::uint32_t index, Rng& rng);

/// One precomputed row: masked encodings of bit 0, bit 1 and a random
/// token, all tied to the same sampled index.
struct BitTableRow {
  GroupElement zero;
  GroupElement one;
  GroupElement random;
  Bytes random_token;
};

/// Precomputes k rows for indices r_1..r_k under the scalar r. Throws
/// kInvalidArgument on duplicate indices.
std::vector<BitTableRow> precompute_bit_tables(const GroupParams& params, const Scalar& r,
                                               std::span<const std::uint32_t> indices, Rng& rng);

}  // namespace espresso
