#include "espresso/attack.hpp"

#include <functional>

#include "espresso/apps_doc.hpp"

namespace espresso {

std::size_t TrigramGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& [v, next] : successors) n += next.size();
  return n;
}

bool TrigramGraph::has_edge(const std::string& x, const std::string& y) const {
  auto it = successors.find(x);
  if (it == successors.end()) return false;
  return std::find(it->second.begin(), it->second.end(), y) != it->second.end();
}

TrigramGraph build_graph(const std::set<std::string>& space) {
  TrigramGraph g;
  std::map<std::string, std::vector<std::string>> by_prefix;
  for (const auto& t : space) {
    if (t.size() != 3) fail(ErrorCode::kMalformedInput, "not a trigram: '" + t + "'");
    g.vertices.insert(t);
    by_prefix[t.substr(0, 2)].push_back(t);
  }
  for (const auto& x : g.vertices) {
    auto& next = g.successors[x];
    auto it = by_prefix.find(x.substr(1, 2));
    if (it != by_prefix.end()) next = it->second;
  }
  return g;
}

std::set<std::string> build_space(const std::vector<std::string>& documents) {
  std::set<std::string> space;
  for (const auto& doc : documents) {
    auto grams = trigram_set(doc, 3).set.grams;
    space.insert(grams.begin(), grams.end());
  }
  return space;
}

std::string_view membership_name(Membership m) {
  return m == Membership::kAbsent ? "absent" : "possibly-present";
}

Membership word_in_space(const std::set<std::string>& space, std::string_view word) {
  const auto norm = normalize_text(word);
  if (norm.size() < 3) {
    fail(ErrorCode::kInvalidArgument, "word must have at least three letters or digits");
  }
  for (std::size_t i = 0; i + 3 <= norm.size(); ++i) {
    if (!space.contains(norm.substr(i, 3))) return Membership::kAbsent;
  }
  return Membership::kPossiblyPresent;
}

std::string path_to_string(const std::vector<std::string>& path) {
  if (path.empty()) return {};
  std::string out = path.front();
  for (std::size_t i = 1; i < path.size(); ++i) out.push_back(path[i].back());
  return out;
}

std::vector<std::string> extract_fragments(const TrigramGraph& graph, std::size_t max_len,
                                           std::size_t limit) {
  if (limit == 0) fail(ErrorCode::kInvalidArgument, "limit must be at least 1");
  if (max_len < 3) fail(ErrorCode::kInvalidArgument, "max_len must be at least 3");

  std::set<std::string> has_pred;
  for (const auto& [v, next] : graph.successors) {
    for (const auto& w : next) {
      if (w != v) has_pred.insert(w);
    }
  }
  std::vector<const std::string*> starts;
  for (const auto& v : graph.vertices) {
    if (!has_pred.contains(v)) starts.push_back(&v);
  }
  for (const auto& v : graph.vertices) {
    if (has_pred.contains(v)) starts.push_back(&v);
  }

  std::vector<std::string> out;
  std::set<std::string> seen;
  std::vector<std::string> path;
  std::set<std::string> on_path;
  const std::size_t max_vertices = max_len - 2;

  std::function<void(const std::string&)> dfs = [&](const std::string& v) {
    if (out.size() >= limit) return;
    path.push_back(v);
    on_path.insert(v);
    bool extended = false;
    if (path.size() < max_vertices) {
      auto it = graph.successors.find(v);
      if (it != graph.successors.end()) {
        for (const auto& w : it->second) {
          if (on_path.contains(w)) continue;
          extended = true;
          dfs(w);
          if (out.size() >= limit) break;
        }
      }
    }
    if (!extended && out.size() < limit) {
      auto s = path_to_string(path);
      if (seen.insert(s).second) out.push_back(std::move(s));
    }
    on_path.erase(v);
    path.pop_back();
  };

  for (const auto* s : starts) {
    if (out.size() >= limit) break;
    dfs(*s);
  }
  return out;
}

std::vector<std::string> filter_fragments(const std::vector<std::string>& fragments,
                                          const std::vector<std::string>& dictionary,
                                          std::size_t min_word_len) {
  std::vector<std::string> words;
  for (const auto& w : dictionary) {
    auto norm = normalize_text(w);
    if (norm.size() >= min_word_len) words.push_back(std::move(norm));
  }
  std::vector<std::string> out;
  for (const auto& f : fragments) {
    for (const auto& w : words) {
      if (f.find(w) != std::string::npos) {
        out.push_back(f);
        break;
      }
    }
  }
  return out;
}

FalsePositiveReport measure_word_test(const std::vector<std::string>& documents,
                                      const std::vector<std::string>& probes) {
  const auto space = build_space(documents);
  std::vector<std::string> normalized;
  normalized.reserve(documents.size());
  for (const auto& d : documents) normalized.push_back(normalize_text(d));

  FalsePositiveReport report;
  for (const auto& probe : probes) {
    const auto word = normalize_text(probe);
    if (word.size() < 3) continue;
    ++report.probes;
    bool occurs = false;
    for (const auto& d : normalized) {
      if (d.find(word) != std::string::npos) {
        occurs = true;
        break;
      }
    }
    const auto verdict = word_in_space(space, word);
    if (occurs) {
      if (verdict == Membership::kAbsent) ++report.false_negatives;
    } else {
      ++report.negatives;
      if (verdict == Membership::kPossiblyPresent) ++report.false_positives;
    }
  }
  return report;
}

}  // namespace espresso
