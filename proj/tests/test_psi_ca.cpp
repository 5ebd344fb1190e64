#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "espresso/bench.hpp"
#include "espresso/psi_ca.hpp"
#include "espresso/similarity.hpp"

using namespace espresso;

namespace {

template <typename F>
ErrorCode code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

std::vector<Bytes> set_of(std::initializer_list<const char*> xs) {
  std::vector<Bytes> out;
  for (const auto* x : xs) out.push_back(to_bytes(x));
  return out;
}

std::size_t run(const GroupParams& gp, const std::vector<Bytes>& a, const std::vector<Bytes>& b,
                Rng& rng) {
  auto [state, r1] = client_start(gp, a, rng);
  auto r2 = server_respond(gp, b, r1, rng);
  return client_finish(state, r2);
}

}  // namespace

TEST(PsiCa, SmallExample) {
  auto rng = Rng::seeded(1);
  EXPECT_EQ(run(builtin_params(), set_of({"a", "b", "c"}), set_of({"b", "c", "d"}), rng), 2u);
}

TEST(PsiCa, IdenticalAndDisjointSets) {
  auto rng = Rng::seeded(2);
  auto a = set_of({"x", "y", "z", "w"});
  EXPECT_EQ(run(builtin_params(), a, a, rng), 4u);
  EXPECT_EQ(run(builtin_params(), a, set_of({"p", "q"}), rng), 0u);
}

TEST(PsiCa, SingleItemMaskingFormula) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(3);
  auto r_a = random_scalar(gp, rng);
  auto items = set_of({"x"});
  auto [state, r1] = client_start_with_scalar(gp, items, r_a);
  ASSERT_EQ(r1.masked_items.size(), 1u);
  EXPECT_EQ(r1.masked_items[0], pow(gp, hash_to_group(gp, to_bytes("x")), r_a));
  EXPECT_TRUE(state.round1_sent());
  EXPECT_EQ(state.item_count(), 1u);
}

TEST(PsiCa, FreshRandomnessPerSession) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(4);
  auto items = set_of({"a", "b"});
  auto [s1, m1] = client_start(gp, items, rng);
  auto [s2, m2] = client_start(gp, items, rng);
  EXPECT_NE(m1.masked_items, m2.masked_items);
  auto [t1, tags1] = server_precompute(gp, items, rng);
  auto [t2, tags2] = server_precompute(gp, items, rng);
  std::set<Tag> a(tags1.begin(), tags1.end()), b(tags2.begin(), tags2.end());
  EXPECT_NE(a, b);
}

TEST(PsiCa, ThousandItemsGiveThousandMaskedElements) {
  auto rng = Rng::seeded(5);
  auto [a, b] = random_set_pair(1000, 10, 0, rng);
  auto [state, r1] = client_start(toy_params(), a, rng);
  EXPECT_EQ(r1.masked_items.size(), 1000u);
}

TEST(PsiCa, EmptyAndDuplicateInputsRejected) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(6);
  std::vector<Bytes> none;
  EXPECT_EQ(code_of([&] { client_start(gp, none, rng); }), ErrorCode::kEmptySet);
  auto [state, r1] = client_start(gp, set_of({"a"}), rng);
  EXPECT_EQ(code_of([&] { server_respond(gp, none, r1, rng); }), ErrorCode::kEmptySet);
  EXPECT_EQ(code_of([&] { client_start(gp, set_of({"a", "a"}), rng); }), ErrorCode::kDuplicateItem);
}

TEST(PsiCa, ServerOutputShape) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(7);
  auto [state, r1] = client_start(gp, set_of({"a", "b", "c"}), rng);
  auto r2 = server_respond(gp, set_of({"a", "d", "e", "f", "g"}), r1, rng);
  EXPECT_EQ(r2.blinded_items.size(), 3u);
  EXPECT_EQ(r2.server_tags.size(), 5u);
}

TEST(PsiCa, NonMemberElementAborts) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(8);
  auto [state, r1] = client_start(gp, set_of({"a", "b"}), rng);
  mpz_class outside = 2;
  while (is_member(gp, outside)) ++outside;
  r1.masked_items[1] = GroupElement::unchecked(outside);
  EXPECT_EQ(code_of([&] { server_respond(gp, set_of({"a"}), r1, rng); }), ErrorCode::kProtocolAbort);
}

TEST(PsiCa, LengthMismatchAborts) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(9);
  auto [state, r1] = client_start(gp, set_of({"a", "b"}), rng);
  auto r2 = server_respond(gp, set_of({"a"}), r1, rng);
  r2.blinded_items.pop_back();
  EXPECT_EQ(code_of([&] { client_finish(state, r2); }), ErrorCode::kProtocolAbort);
}

TEST(PsiCa, PrecomputedTagsAreReusedVerbatim) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(10);
  auto b = set_of({"b", "c", "d", "e"});
  auto [state, tags] = server_precompute(gp, b, rng);
  EXPECT_EQ(tags.size(), 4u);
  auto a = set_of({"a", "b", "c"});
  auto [c1, m1] = client_start(gp, a, rng);
  auto [c2, m2] = client_start(gp, a, rng);
  auto r1 = server_respond(state, m1, rng);
  auto r2 = server_respond(state, m2, rng);
  EXPECT_EQ(r1.server_tags, tags);
  EXPECT_EQ(r2.server_tags, tags);
  EXPECT_EQ(client_finish(c1, r1), 2u);
  EXPECT_EQ(client_finish(c2, r2), 2u);
}

TEST(PsiCa, PrecomputedMatchesOneShotOnRandomSets) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(11);
  for (int t = 0; t < 100; ++t) {
    auto common = rng.uniform(20);
    auto [a, b] = random_set_pair(common + 1 + rng.uniform(20), common + 1 + rng.uniform(20), common, rng);
    auto [state, tags] = server_precompute(gp, b, rng);
    auto [cs, m] = client_start(gp, a, rng);
    auto pre = client_finish(cs, server_respond(state, m, rng));
    auto direct = run(gp, a, b, rng);
    ASSERT_EQ(pre, direct);
    ASSERT_EQ(pre, oracle_intersection(a, b));
  }
}

// Exactness against the plaintext oracle over random instances; the
// acceptance binary repeats this at 1000 instances on both groups.
TEST(PsiCa, MatchesOracleOnRandomInstances) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(12);
  for (int t = 0; t < 300; ++t) {
    auto va = 1 + rng.uniform(60), vb = 1 + rng.uniform(60);
    auto common = rng.uniform(std::min(va, vb) + 1);
    auto [a, b] = random_set_pair(va, vb, common, rng);
    auto got = run(gp, a, b, rng);
    ASSERT_EQ(got, oracle_intersection(a, b));
    ASSERT_LE(got, std::min(a.size(), b.size()));
  }
}

TEST(PsiCa, OrderOfInputsDoesNotMatter) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(13);
  auto [a, b] = random_set_pair(30, 40, 12, rng);
  auto expected = run(gp, a, b, rng);
  for (int t = 0; t < 5; ++t) {
    shuffle(a, rng);
    shuffle(b, rng);
    EXPECT_EQ(run(gp, a, b, rng), expected);
  }
}

TEST(PsiCa, ShuffleOnlyReordersBlindedElements) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(14);
  auto a = set_of({"a", "b", "c", "d", "e", "f"});
  auto [cs, m] = client_start(gp, a, rng);
  auto [state, tags] = server_precompute(gp, set_of({"z"}), rng);
  auto r1 = server_respond(state, m, rng);
  auto r2 = server_respond(state, m, rng);
  auto key = [](const std::vector<GroupElement>& v) {
    std::vector<std::string> s;
    for (const auto& e : v) s.push_back(e.value().get_str(16));
    std::sort(s.begin(), s.end());
    return s;
  };
  EXPECT_EQ(key(r1.blinded_items), key(r2.blinded_items));
  std::vector<GroupElement> direct;
  for (const auto& e : m.masked_items) direct.push_back(pow(gp, e, state.r_b));
  EXPECT_EQ(key(r1.blinded_items), key(direct));
}

TEST(PsiCa, BitTokensAndTables) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(15);
  EXPECT_EQ(bit_token(1, 7), position_encode(Bytes{1}, 7));
  EXPECT_EQ(random_token(3, rng).size(), 4 + kRandomTokenBytes + 4);

  std::vector<std::uint32_t> indices(25);
  std::iota(indices.begin(), indices.end(), 1u);
  auto r = random_scalar(gp, rng);
  auto rows = precompute_bit_tables(gp, r, indices, rng);
  ASSERT_EQ(rows.size(), 25u);
  // Row for index 7 holds what client_start masks for <1, 7>.
  auto [state, m] = client_start_with_scalar(gp, std::vector<Bytes>{bit_token(1, 7)}, r);
  EXPECT_EQ(rows[6].one, m.masked_items[0]);
  EXPECT_EQ(rows[6].zero, pow(gp, hash_to_group(gp, bit_token(0, 7)), r));
  EXPECT_EQ(rows[6].random, pow(gp, hash_to_group(gp, rows[6].random_token), r));

  indices.push_back(3);
  EXPECT_EQ(code_of([&] { precompute_bit_tables(gp, r, indices, rng); }), ErrorCode::kInvalidArgument);
}
