#include "espresso/apps_doc.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <sstream>

namespace espresso {

std::vector<Bytes> TrigramSet::items() const {
  std::vector<Bytes> out;
  out.reserve(grams.size());
  for (const auto& g : grams) out.push_back(to_bytes(g));
  return out;
}

std::string normalize_text(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const auto* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) fail(ErrorCode::kInvalidArgument, "ICU NFC normalizer unavailable");
  auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  auto normalized = nfc->normalize(src, status);
  if (U_FAILURE(status)) fail(ErrorCode::kMalformedInput, "text normalization failed");

  std::string out;
  out.reserve(static_cast<std::size_t>(normalized.length()));
  for (int32_t i = 0; i < normalized.length(); ++i) {
    char16_t c = normalized.charAt(i);
    if (c >= u'A' && c <= u'Z') c = static_cast<char16_t>(c - u'A' + u'a');
    if ((c >= u'a' && c <= u'z') || (c >= u'0' && c <= u'9')) out.push_back(static_cast<char>(c));
  }
  return out;
}

TrigramResult trigram_set(std::string_view text, std::size_t n) {
  if (n == 0) fail(ErrorCode::kInvalidArgument, "gram length must be positive");
  TrigramResult result;
  result.set.n = n;
  const auto norm = normalize_text(text);
  if (norm.size() < n) {
    result.too_short = true;
    return result;
  }
  for (std::size_t i = 0; i + n <= norm.size(); ++i) result.set.grams.insert(norm.substr(i, n));
  return result;
}

std::string export_grams(const TrigramSet& set) {
  std::string out;
  for (const auto& g : set.grams) {
    out += g;
    out += '\n';
  }
  return out;
}

std::vector<std::string> synthetic_corpus(std::string_view source, std::size_t count,
                                          std::size_t words_per_doc, Rng& rng) {
  std::vector<std::string> words;
  std::istringstream in{std::string(source)};
  for (std::string w; in >> w;) words.push_back(w);
  if (words.empty() || words_per_doc == 0) {
    fail(ErrorCode::kInvalidArgument, "corpus source has no words");
  }

  std::vector<std::string> docs;
  docs.reserve(count);
  for (std::size_t d = 0; d < count; ++d) {
    const auto start = rng.uniform(words.size());
    const double edit_rate = 0.4 * rng.unit();
    std::string doc;
    for (std::size_t i = 0; i < words_per_doc; ++i) {
      const auto& w = words[(start + i) % words.size()];
      if (rng.unit() < edit_rate) {
        switch (rng.uniform(3)) {
          case 0:
            doc += words[rng.uniform(words.size())];
            doc += ' ';
            break;
          case 1:
            break;
          default:
            doc += w + ' ' + w + ' ';
            break;
        }
        continue;
      }
      doc += w;
      doc += ' ';
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace espresso
