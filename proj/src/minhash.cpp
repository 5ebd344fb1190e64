#include "espresso/minhash.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace espresso {

namespace {

std::uint64_t mulmod_p61(std::uint64_t a, std::uint64_t b) {
  unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(prod) & kFieldPrime;
  std::uint64_t hi = static_cast<std::uint64_t>(prod >> 61);
  std::uint64_t r = lo + hi;
  if (r >= kFieldPrime) r -= kFieldPrime;
  return r;
}

std::uint64_t addmod_p61(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = a + b;
  if (r >= kFieldPrime) r -= kFieldPrime;
  return r;
}

std::uint64_t linear(std::pair<std::uint64_t, std::uint64_t> ab, std::uint64_t x) {
  return addmod_p61(mulmod_p61(ab.first, x), ab.second);
}

struct Ranked {
  std::uint64_t hash;
  std::uint64_t digest;
  const Bytes* item;

  bool operator<(const Ranked& o) const {
    return std::tie(hash, digest, *item) < std::tie(o.hash, o.digest, *o.item);
  }
};

std::vector<Bytes> k_smallest(std::pair<std::uint64_t, std::uint64_t> fn,
                              std::span<const Bytes> items, std::size_t k) {
  std::vector<Ranked> ranked;
  ranked.reserve(items.size());
  for (const auto& item : items) {
    auto d = item_digest(item);
    ranked.push_back({linear(fn, d), d, &item});
  }
  const auto keep = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end());
  std::vector<Bytes> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(*ranked[i].item);
  return out;
}

}  // namespace

std::uint64_t HashFamily::apply(std::size_t i, std::uint64_t x) const {
  return linear(coefficients.at(i), x % field_prime);
}

HashFamily family_new(std::size_t k, ByteSpan seed) {
  if (k == 0) fail(ErrorCode::kInvalidArgument, "hash family: k must be positive");
  HashFamily family;
  family.k = k;
  family.seed.assign(seed.begin(), seed.end());
  auto derived = sha256("espresso/minhash/family", seed);
  auto rng = Rng::seeded(ByteSpan(derived));
  family.coefficients.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    auto a = 1 + rng.uniform(kFieldPrime - 1);
    auto b = rng.uniform(kFieldPrime);
    family.coefficients.emplace_back(a, b);
  }
  return family;
}

std::uint64_t item_digest(ByteSpan item) {
  auto d = sha256("espresso/minhash/item", item);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | d[i];
  return v % kFieldPrime;
}

std::vector<Bytes> MinHashSketch::encoded() const {
  std::vector<Bytes> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(position_encode(e.item, e.index));
  return out;
}

MinHashSketch sketch_multi(const HashFamily& family, std::span<const Bytes> items) {
  if (items.empty()) fail(ErrorCode::kEmptySet, "sketch: input set is empty");
  std::vector<std::uint64_t> digests;
  digests.reserve(items.size());
  for (const auto& item : items) digests.push_back(item_digest(item));

  MinHashSketch sketch;
  sketch.entries.reserve(family.k);
  for (std::size_t i = 0; i < family.k; ++i) {
    const auto fn = family.coefficients[i];
    std::size_t best = 0;
    auto best_hash = linear(fn, digests[0]);
    for (std::size_t j = 1; j < items.size(); ++j) {
      auto h = linear(fn, digests[j]);
      if (std::tie(h, digests[j], items[j]) < std::tie(best_hash, digests[best], items[best])) {
        best = j;
        best_hash = h;
      }
    }
    sketch.entries.push_back({items[best], static_cast<std::uint32_t>(i + 1)});
  }
  return sketch;
}

Fraction estimate_multi(const MinHashSketch& a, const MinHashSketch& b) {
  if (a.k() != b.k()) fail(ErrorCode::kInvalidArgument, "estimate: sketch sizes differ");
  std::uint64_t matches = 0;
  for (std::size_t i = 0; i < a.k(); ++i) {
    if (a.entries[i].item == b.entries[i].item) ++matches;
  }
  return {matches, a.k()};
}

SingleHashSketch sketch_single(const HashFamily& family, std::span<const Bytes> items,
                               std::size_t k) {
  if (k == 0) fail(ErrorCode::kInvalidArgument, "single-hash sketch: k must be positive");
  if (items.empty()) fail(ErrorCode::kEmptySet, "single-hash sketch: input set is empty");
  const auto fn = family.coefficients.at(0);
  return SingleHashSketch{k, fn, k_smallest(fn, items, k)};
}

Fraction estimate_single(const SingleHashSketch& a, const SingleHashSketch& b) {
  if (a.k != b.k || a.function != b.function) {
    fail(ErrorCode::kInvalidArgument, "estimate: sketches use different hash functions or k");
  }
  std::set<Bytes> sa(a.survivors.begin(), a.survivors.end());
  std::set<Bytes> sb(b.survivors.begin(), b.survivors.end());
  std::vector<Bytes> both;
  std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(both));
  auto top = k_smallest(a.function, both, a.k);
  std::uint64_t hits = 0;
  for (const auto& item : top) {
    if (sa.contains(item) && sb.contains(item)) ++hits;
  }
  return {hits, top.size()};
}

Fraction vector_sample_estimate(std::span<const Bytes> a, std::span<const Bytes> b,
                                std::size_t k, Rng& rng) {
  if (a.size() != b.size()) fail(ErrorCode::kLengthMismatch, "vector sample: lengths differ");
  if (a.empty() || k == 0) fail(ErrorCode::kInvalidArgument, "vector sample: need n >= 1, k >= 1");
  // Draws are counted as a multiset so repeated indices keep a = b at 1.
  std::uint64_t common = 0;
  for (std::size_t i = 0; i < k; ++i) {
    auto r = static_cast<std::uint32_t>(rng.uniform(a.size()));
    if (position_encode(a[r], r + 1) == position_encode(b[r], r + 1)) ++common;
  }
  return {common, k};
}

Bytes serialize(const MinHashSketch& sketch) {
  Bytes out;
  put_u32(out, static_cast<std::uint32_t>(sketch.k()));
  for (const auto& e : sketch.entries) {
    put_prefixed(out, e.item);
    put_u32(out, e.index);
  }
  return out;
}

MinHashSketch deserialize_sketch(ByteSpan data) {
  ByteReader r(data);
  auto k = r.u32();
  MinHashSketch sketch;
  for (std::uint32_t i = 0; i < k; ++i) {
    auto item = r.prefixed();
    auto index = r.u32();
    if (index != i + 1) fail(ErrorCode::kMalformedInput, "sketch: entry index out of order");
    sketch.entries.push_back({Bytes(item.begin(), item.end()), index});
  }
  r.expect_done();
  return sketch;
}

}  // namespace espresso
