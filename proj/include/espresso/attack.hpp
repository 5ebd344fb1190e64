#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "espresso/common.hpp"

namespace espresso {

/// Directed overlap graph: x -> y iff x[1] == y[0] and x[2] == y[1].
struct TrigramGraph {
  std::set<std::string> vertices;
  std::map<std::string, std::vector<std::string>> successors;

  std::size_t edge_count() const;
  bool has_edge(const std::string& x, const std::string& y) const;
};

/// Throws kMalformedInput for any element that is not three characters.
TrigramGraph build_graph(const std::set<std::string>& space);

/// Union of the trigram sets of the given documents.
std::set<std::string> build_space(const std::vector<std::string>& documents);

enum class Membership { kAbsent, kPossiblyPresent };

std::string_view membership_name(Membership m);

/// kPossiblyPresent iff every successive trigram of the normalized word is
/// in space. Throws kInvalidArgument when the normalized word is shorter
/// than three characters.
Membership word_in_space(const std::set<std::string>& space, std::string_view word);

/// First vertex in full, then the last character of every later vertex.
std::string path_to_string(const std::vector<std::string>& path);

/// Depth-first walk over simple paths, starting from vertices without
/// predecessors and then from every other vertex. A path is emitted when
/// it cannot be extended or reaches max_len characters. Duplicates are
/// dropped; at most limit fragments are returned.
std::vector<std::string> extract_fragments(const TrigramGraph& graph, std::size_t max_len,
                                           std::size_t limit);

/// Keeps fragments that contain at least one dictionary word of at least
/// min_word_len characters.
std::vector<std::string> filter_fragments(const std::vector<std::string>& fragments,
                                          const std::vector<std::string>& dictionary,
                                          std::size_t min_word_len = 4);

struct FalsePositiveReport {
  std::size_t probes = 0;
  /// Probes that truly do not occur in any document.
  std::size_t negatives = 0;
  /// Negatives reported as possibly present.
  std::size_t false_positives = 0;
  /// Positives reported absent; must be zero.
  std::size_t false_negatives = 0;

  double rate() const {
    return negatives == 0 ? 0.0 : static_cast<double>(false_positives) / static_cast<double>(negatives);
  }
};

/// Sweeps probe words against the space of documents and tallies the
/// verdicts against direct substring search. Probes shorter than three
/// characters after normalization are skipped.
FalsePositiveReport measure_word_test(const std::vector<std::string>& documents,
                                      const std::vector<std::string>& probes);

}  // namespace espresso
