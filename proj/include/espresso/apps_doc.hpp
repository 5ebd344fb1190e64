#pragma once

#include <set>
#include <string>
#include <vector>

#include "espresso/common.hpp"
#include "espresso/crypto.hpp"

namespace espresso {

/// Set of n-grams over the alphabet [a-z0-9].
struct TrigramSet {
  std::size_t n = 3;
  std::set<std::string> grams;

  std::vector<Bytes> items() const;
  friend bool operator==(const TrigramSet&, const TrigramSet&) = default;
};

struct TrigramResult {
  TrigramSet set;
  /// The normalized text was shorter than n, so the set is empty.
  bool too_short = false;
};

/// NFC, ASCII lowercase, then drop everything outside [a-z0-9].
std::string normalize_text(std::string_view text);

/// All successive n-character windows of the normalized text.
/// Throws kInvalidArgument when n == 0.
TrigramResult trigram_set(std::string_view text, std::size_t n = 3);

/// Sorted grams, one per line.
std::string export_grams(const TrigramSet& set);

/// Synthetic documents cut from a source text: each is a window of
/// words_per_doc words at a random offset, with a per-document fraction of
/// words replaced, dropped or duplicated.
std::vector<std::string> synthetic_corpus(std::string_view source, std::size_t count,
                                          std::size_t words_per_doc, Rng& rng);

}  // namespace espresso
