#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "espresso/apps_iris.hpp"
#include "espresso/session.hpp"

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

IrisCode code_from(const std::string& bits, const std::string& mask) {
  IrisCode c;
  for (char ch : bits) c.bits.push_back(ch == '1');
  for (char ch : mask) c.mask.push_back(ch == '1');
  return c;
}

// Plain-text recomputation of what the protocol measures at one shift on
// the sampled positions.
std::pair<std::uint64_t, std::uint64_t> sampled_counts(const IrisCode& client, const IrisCode& server,
                                                       std::int64_t shift,
                                                       const std::vector<std::uint32_t>& indices) {
  auto rc = rotate(client, shift);
  std::uint64_t c1 = 0, c2 = 0;
  for (auto i : indices) {
    auto p = i - 1;
    if (rc.mask[p] && server.mask[p]) {
      ++c1;
      if (rc.bits[p] == server.bits[p]) ++c2;
    }
  }
  return {c1, c2};
}

SessionPair run_iris(const IrisCode& client, const IrisCode& server, const IrisOptions& iris,
                     std::uint64_t seed) {
  SessionConfig config;
  config.options.params = toy_params();
  config.iris = iris;
  SessionInputs ci, si;
  ci.iris = client;
  si.iris = server;
  auto rng = Rng::seeded(seed);
  return run_loopback(ProtocolId::kIris, ci, si, config, rng);
}

}  // namespace

TEST(Iris, WeightedHammingExamples) {
  auto a = code_from("1010", "1111");
  auto b = code_from("1001", "1111");
  EXPECT_EQ(whd(a, b), (Fraction{2, 4}));
  auto c = code_from("0101", "1100");
  EXPECT_EQ(whd(a, c), (Fraction{2, 2}));
  EXPECT_EQ(whd(a, a).num, 0u);
  auto masked_out = code_from("1010", "0000");
  EXPECT_EQ(code_of([&] { whd(a, masked_out); }), ErrorCode::kUndefinedDistance);
  EXPECT_EQ(code_of([&] { whd(a, code_from("10", "11")); }), ErrorCode::kLengthMismatch);
}

TEST(Iris, RotateMovesBitsUp) {
  auto a = code_from("1000", "1100");
  auto r = rotate(a, 1);
  EXPECT_EQ(r, code_from("0100", "0110"));
  EXPECT_EQ(rotate(a, -1), code_from("0001", "1001"));
  EXPECT_EQ(rotate(rotate(a, 3), -3), a);
  EXPECT_EQ(rotate(a, 4), a);
}

TEST(Iris, WhdIsInvariantUnderJointRotation) {
  auto rng = Rng::seeded(1);
  for (int t = 0; t < 50; ++t) {
    auto a = random_iris(128, 0.75, rng);
    auto b = perturb_iris(a, 0.2, 0.75, rng);
    auto s = static_cast<std::int64_t>(rng.uniform(20)) - 10;
    ASSERT_EQ(whd(rotate(a, s), rotate(b, s)), whd(a, b));
    auto d = whd(a, b);
    ASSERT_LE(d.num, d.den);
  }
}

TEST(Iris, IndexDerivation) {
  auto seed = index_seed(Bytes(16, 1), Bytes(16, 2));
  EXPECT_EQ(seed.size(), 32u);
  EXPECT_NE(seed, index_seed(Bytes(16, 2), Bytes(16, 1)));
  auto r1 = derive_indices(seed, 2048, 25);
  auto r2 = derive_indices(seed, 2048, 25);
  EXPECT_EQ(r1.indices, r2.indices);
  std::set<std::uint32_t> distinct(r1.indices.begin(), r1.indices.end());
  EXPECT_EQ(distinct.size(), 25u);
  for (auto i : r1.indices) {
    EXPECT_GE(i, 1u);
    EXPECT_LE(i, 2048u);
  }
  auto all = derive_indices(seed, 64, 64);
  std::set<std::uint32_t> perm(all.indices.begin(), all.indices.end());
  EXPECT_EQ(perm.size(), 64u);
  EXPECT_EQ(*perm.begin(), 1u);
  EXPECT_EQ(*perm.rbegin(), 64u);
  EXPECT_EQ(code_of([&] { derive_indices(seed, 10, 0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { derive_indices(seed, 10, 11); }), ErrorCode::kInvalidArgument);
}

TEST(Iris, IndicesAreUniform) {
  // Chi-square over 10^4 seeds, n = 64, k = 8: each position is expected
  // 1250 times. 63 degrees of freedom; the 0.999 quantile is about 103.
  const std::uint32_t n = 64, k = 8;
  std::vector<double> counts(n);
  for (std::uint64_t s = 0; s < 10000; ++s) {
    Bytes seed;
    put_u64(seed, s);
    for (auto i : derive_indices(seed, n, k).indices) counts[i - 1] += 1;
  }
  const double expected = 10000.0 * k / n;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 103.4);
}

TEST(Iris, ExtractTokens) {
  auto rng = Rng::seeded(2);
  std::vector<std::uint8_t> x = {1, 0, 1, 1}, y = {1, 1, 0, 1};
  SampleIndexSet r{{2, 3, 4}, {}};
  auto tokens = extract(x, y, r, rng);
  ASSERT_EQ(tokens.size(), 3u);
  EXPECT_EQ(tokens[0], bit_token(0, 2));
  EXPECT_EQ(tokens[2], bit_token(1, 4));
  EXPECT_EQ(tokens[1].size(), 4 + kRandomTokenBytes + 4);
  // Fresh random filler each call.
  EXPECT_NE(extract(x, y, r, rng)[1], tokens[1]);
  // A fully masked-out code shares nothing with anything.
  std::vector<std::uint8_t> zeros(4, 0);
  auto a = extract(x, zeros, r, rng), b = extract(x, zeros, r, rng);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NE(a[i], b[i]);
}

TEST(Iris, TableSelectionMatchesDirectMasking) {
  const auto& gp = toy_params();
  auto rng = Rng::seeded(3);
  auto code = random_iris(64, 0.6, rng);
  auto r = derive_indices(Bytes(32, 7), 64, 20);
  auto scalar = random_scalar(gp, rng);
  // Same stream for the table and for extract, so both draw the same
  // random tokens.
  auto t_rng = Rng::seeded(44), e_rng = Rng::seeded(44);
  auto rows = precompute_bit_tables(gp, scalar, r.indices, t_rng);
  auto selected = select_from_tables(rows, code.bits, code.mask, r);
  auto tokens = extract(code.bits, code.mask, r, e_rng);
  auto [state, direct] = client_start_with_scalar(gp, tokens, scalar);
  EXPECT_EQ(selected, direct.masked_items);
}

TEST(Iris, RotationDistanceFormulas) {
  EXPECT_FALSE(rotation_distance(0, 0, 2048, false).has_value());
  EXPECT_EQ(*rotation_distance(20, 15, 2048, false), (Fraction{5, 20}));
  EXPECT_EQ(*rotation_distance(20, 15, 2048, true), (Fraction{2033, 20}));
}

TEST(Iris, DecideMatch) {
  std::vector<RotationResult> rots = {{-1, 10, 5, Fraction{5, 10}}, {0, 0, 0, std::nullopt},
                                      {1, 20, 18, Fraction{2, 20}}};
  auto m = decide_match(rots, {1, 3});
  EXPECT_TRUE(m.matched);
  EXPECT_EQ(m.best_shift, 1);
  EXPECT_EQ(m.best_distance, (Fraction{2, 20}));
  EXPECT_FALSE(decide_match(rots, {1, 10}).matched);  // strict
  std::vector<RotationResult> none = {{0, 0, 0, std::nullopt}};
  EXPECT_EQ(code_of([&] { decide_match(none, {1, 3}); }), ErrorCode::kIndeterminateMatch);
}

TEST(Iris, LoopbackIdenticalCodesMatchAtZeroShift) {
  auto rng = Rng::seeded(4);
  auto a = random_iris(256, 0.75, rng);
  IrisOptions opts;
  opts.k = 25;
  opts.max_shift = 2;
  auto out = run_iris(a, a, opts, 5);
  ASSERT_TRUE(out.client.iris.has_value());
  const auto& m = *out.client.iris;
  EXPECT_TRUE(m.matched);
  EXPECT_EQ(m.best_distance.num, 0u);
  EXPECT_EQ(m.best_shift, 0);
  EXPECT_EQ(m.rotations.size(), 5u);
  for (const auto& r : m.rotations) {
    EXPECT_LE(r.c2, r.c1);
    EXPECT_LE(r.c1, opts.k);
  }
  EXPECT_EQ(out.server.served_iris->rotations, 5u);
}

TEST(Iris, FullSampleIsExactAtEveryShift) {
  auto rng = Rng::seeded(6);
  auto server = random_iris(96, 0.75, rng);
  auto client = rotate(perturb_iris(server, 0.15, 0.75, rng), -2);
  IrisOptions opts;
  opts.k = 96;
  opts.max_shift = 3;
  auto out = run_iris(client, server, opts, 7);
  const auto& m = *out.client.iris;
  std::vector<std::uint32_t> all(96);
  std::iota(all.begin(), all.end(), 1u);
  for (const auto& r : m.rotations) {
    auto [c1, c2] = sampled_counts(client, server, r.shift, all);
    EXPECT_EQ(r.c1, c1);
    EXPECT_EQ(r.c2, c2);
    EXPECT_EQ(*r.distance, whd(rotate(client, r.shift), server));
  }
  EXPECT_EQ(m.best_shift, 2);
}

TEST(Iris, FullyMaskedCodeIsIndeterminate) {
  auto rng = Rng::seeded(8);
  auto server = random_iris(64, 0.75, rng);
  auto client = server;
  std::fill(client.mask.begin(), client.mask.end(), 0);
  IrisOptions opts;
  opts.k = 10;
  opts.max_shift = 1;
  EXPECT_EQ(code_of([&] { run_iris(client, server, opts, 9); }), ErrorCode::kIndeterminateMatch);
}

TEST(Iris, LiteralFormulaFlag) {
  auto rng = Rng::seeded(10);
  auto a = random_iris(64, 0.75, rng);
  IrisOptions opts;
  opts.k = 10;
  opts.max_shift = 0;
  opts.literal_formula = true;
  auto m = *run_iris(a, a, opts, 11).client.iris;
  const auto& r = m.rotations.at(0);
  EXPECT_EQ(*r.distance, (Fraction{64 - r.c2, r.c1}));
  EXPECT_FALSE(m.matched);
}

TEST(Iris, ServerRefusesOtherLength) {
  auto rng = Rng::seeded(12);
  IrisOptions opts;
  opts.k = 5;
  opts.max_shift = 0;
  EXPECT_EQ(code_of([&] { run_iris(random_iris(64, 0.7, rng), random_iris(65, 0.7, rng), opts, 13); }),
            ErrorCode::kPeerAbort);
}

TEST(Iris, TextFormat) {
  auto rng = Rng::seeded(14);
  auto a = random_iris(50, 0.5, rng);
  auto text = format_iris(a);
  EXPECT_EQ(parse_iris(text), a);
  EXPECT_EQ(code_of([] { parse_iris("3\n101\n10\n"); }), ErrorCode::kMalformedInput);
  EXPECT_EQ(code_of([] { parse_iris("3\n1a1\n101\n"); }), ErrorCode::kMalformedInput);
  EXPECT_EQ(code_of([] { parse_iris("x\n1\n1\n"); }), ErrorCode::kMalformedInput);
  EXPECT_EQ(code_of([] { parse_iris("2\n11\n"); }), ErrorCode::kMalformedInput);
}
