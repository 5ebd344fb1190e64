#include "espresso/psi_ca.hpp"

#include <cstring>
#include <set>
#include <unordered_set>

namespace espresso {

namespace {

constexpr std::string_view kTagDomain = "espresso/H'/v1";

struct TagHash {
  std::size_t operator()(const Tag& t) const {
    std::size_t h;
    std::memcpy(&h, t.data(), sizeof(h));
    return h;
  }
};

}  // namespace

Tag tag_of(const GroupParams& params, const GroupElement& e) {
  return sha256(kTagDomain, encode(params, e));
}

std::pair<PsiCaClientState, Round1Msg> client_start(const GroupParams& params,
                                                    std::span<const Bytes> items, Rng& rng) {
  require_distinct_nonempty(items, "psi-ca client");
  return client_start_with_scalar(params, items, random_scalar(params, rng));
}

std::pair<PsiCaClientState, Round1Msg> client_start_with_scalar(const GroupParams& params,
                                                                std::span<const Bytes> items,
                                                                const Scalar& r_a) {
  require_distinct_nonempty(items, "psi-ca client");
  Round1Msg msg;
  msg.masked_items.reserve(items.size());
  for (const auto& item : items) {
    msg.masked_items.push_back(pow(params, hash_to_group(params, item), r_a));
  }
  return {PsiCaClientState(params, r_a, items.size()), std::move(msg)};
}

std::pair<PsiCaClientState, Round1Msg> client_start_premasked(const GroupParams& params,
                                                              const Scalar& r_a,
                                                              std::vector<GroupElement> masked) {
  if (masked.empty()) fail(ErrorCode::kEmptySet, "psi-ca client: input set is empty");
  auto count = masked.size();
  return {PsiCaClientState(params, r_a, count), Round1Msg{std::move(masked)}};
}

std::pair<PsiCaServerState, std::vector<Tag>> server_precompute(const GroupParams& params,
                                                                std::span<const Bytes> items,
                                                                Rng& rng) {
  require_distinct_nonempty(items, "psi-ca server");
  std::vector<const Bytes*> order;
  order.reserve(items.size());
  for (const auto& item : items) order.push_back(&item);
  shuffle(order, rng);

  auto r_b = random_scalar(params, rng);
  std::vector<Tag> tags;
  tags.reserve(order.size());
  for (const auto* item : order) {
    tags.push_back(tag_of(params, pow(params, hash_to_group(params, *item), r_b)));
  }
  return {PsiCaServerState{params, r_b, tags}, tags};
}

Round2Msg server_respond(const PsiCaServerState& state, const Round1Msg& msg, Rng& rng) {
  if (!state.precomputed_tags) {
    fail(ErrorCode::kInvalidArgument, "psi-ca server: state has no precomputed tags");
  }
  if (msg.masked_items.empty()) fail(ErrorCode::kProtocolAbort, "psi-ca server: empty round 1");
  const auto& params = state.params;
  Round2Msg out;
  out.blinded_items.reserve(msg.masked_items.size());
  for (const auto& alpha : msg.masked_items) {
    if (!is_member(params, alpha.value())) {
      fail(ErrorCode::kProtocolAbort, "psi-ca server: round 1 element outside the subgroup");
    }
    out.blinded_items.push_back(pow(params, alpha, state.r_b));
  }
  shuffle(out.blinded_items, rng);
  out.server_tags = *state.precomputed_tags;
  return out;
}

Round2Msg server_respond(const GroupParams& params, std::span<const Bytes> items,
                         const Round1Msg& msg, Rng& rng) {
  auto [state, tags] = server_precompute(params, items, rng);
  return server_respond(state, msg, rng);
}

std::size_t client_finish(const PsiCaClientState& state, const Round2Msg& msg) {
  if (!state.round1_sent()) fail(ErrorCode::kProtocolAbort, "psi-ca client: round 1 not sent");
  if (msg.blinded_items.size() != state.item_count()) {
    fail(ErrorCode::kProtocolAbort, "psi-ca client: round 2 length mismatch");
  }
  const auto& params = state.params();
  std::unordered_set<Tag, TagHash> server_tags(msg.server_tags.begin(), msg.server_tags.end());
  const auto unmask = inv(params, state.r_a());
  std::size_t count = 0;
  for (const auto& blinded : msg.blinded_items) {
    if (server_tags.contains(tag_of(params, pow(params, blinded, unmask)))) ++count;
  }
  return count;
}

Bytes bit_token(std::uint8_t bit, std::uint32_t index) {
  const std::uint8_t value = bit ? 1 : 0;
  return position_encode(ByteSpan(&value, 1), index);
}

Bytes random_token(std::uint32_t index, Rng& rng) {
  auto value = rng.bytes(kRandomTokenBytes);
  return position_encode(value, index);
}

std::vector<BitTableRow> precompute_bit_tables(const GroupParams& params, const Scalar& r,
                                               std::span<const std::uint32_t> indices, Rng& rng) {
  std::set<std::uint32_t> seen(indices.begin(), indices.end());
  if (seen.size() != indices.size()) {
    fail(ErrorCode::kInvalidArgument, "bit tables: duplicate sample index");
  }
  std::vector<BitTableRow> rows;
  rows.reserve(indices.size());
  for (auto index : indices) {
    auto token = random_token(index, rng);
    rows.push_back(BitTableRow{
        pow(params, hash_to_group(params, bit_token(0, index)), r),
        pow(params, hash_to_group(params, bit_token(1, index)), r),
        pow(params, hash_to_group(params, token), r),
        token,
    });
  }
  return rows;
}

}  // namespace espresso
