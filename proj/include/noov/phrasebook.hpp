#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "noov/corpus.hpp"
#include "noov/error.hpp"
#include "noov/text.hpp"

namespace noov {

struct PhraseEntry {
  Sentence source;
  Sentence target;
};

struct PhraseMatch {
  std::size_t entry = 0;
  std::size_t span_begin = 0;  // [begin, end) into the query sentence
  std::size_t span_end = 0;
  std::size_t trigger_position = 0;  // index of the trigger inside the target phrase

  friend bool operator==(const PhraseMatch&, const PhraseMatch&) = default;
};

/// Bilingual phrase look-up table. Surface forms are preserved; the indexes
/// and all matching use case-folded tokens.
class PhraseTable {
 public:
  PhraseTable() = default;

  /// Adds an entry unless the same (source, target) pair already exists.
  /// Returns false for duplicates.
  bool add(Sentence source, Sentence target) {
    if (source.empty() || target.empty()) throw ValidationError("phrase entry with an empty side");
    if (!seen_.insert({text::join(source), text::join(target)}).second) return false;
    const std::size_t id = entries_.size();
    std::vector<Token> folded_src, folded_tgt;
    for (const auto& t : source) folded_src.push_back(text::fold_case(t));
    for (const auto& t : target) folded_tgt.push_back(text::fold_case(t));
    std::set<Token> distinct(folded_tgt.begin(), folded_tgt.end());
    for (const auto& t : distinct) by_target_token_[t].push_back(id);
    by_source_first_[folded_src.front()].push_back(id);
    folded_source_.push_back(std::move(folded_src));
    folded_target_.push_back(std::move(folded_tgt));
    entries_.push_back({std::move(source), std::move(target)});
    return true;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const PhraseEntry& entry(std::size_t id) const { return entries_.at(id); }
  const std::vector<PhraseEntry>& entries() const { return entries_; }

  /// Entry ids whose target phrase contains `token` (case-insensitive).
  const std::vector<std::size_t>& entries_with_target_token(const Token& token) const {
    static const std::vector<std::size_t> none;
    auto it = by_target_token_.find(text::fold_case(token));
    return it == by_target_token_.end() ? none : it->second;
  }

  /// Entry ids whose source phrase starts with `token` (case-insensitive).
  const std::vector<std::size_t>& entries_with_source_first(const Token& token) const {
    static const std::vector<std::size_t> none;
    auto it = by_source_first_.find(text::fold_case(token));
    return it == by_source_first_.end() ? none : it->second;
  }

  const std::vector<Token>& folded_source(std::size_t id) const { return folded_source_.at(id); }
  const std::vector<Token>& folded_target(std::size_t id) const { return folded_target_.at(id); }

 private:
  std::vector<PhraseEntry> entries_;
  std::vector<std::vector<Token>> folded_source_, folded_target_;
  std::set<std::pair<std::string, std::string>> seen_;
  std::unordered_map<Token, std::vector<std::size_t>> by_target_token_;
  std::unordered_map<Token, std::vector<std::size_t>> by_source_first_;
};

/// TSV `source_phrase<TAB>target_phrase`; duplicates keep the first row.
inline PhraseTable load_phrase_table(const std::string& path) {
  const auto lines = text::read_lines(path);
  PhraseTable table;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto& line = lines[ln];
    const std::string where = path + ":" + std::to_string(ln + 1) + ": ";
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw FormatError(where + "expected exactly one TAB");
    }
    Sentence src = text::split_whitespace(std::string_view(line).substr(0, tab));
    Sentence tgt = text::split_whitespace(std::string_view(line).substr(tab + 1));
    if (src.empty() || tgt.empty()) throw FormatError(where + "empty phrase");
    table.add(std::move(src), std::move(tgt));
  }
  return table;
}

inline void save_phrase_table(const PhraseTable& t, const std::string& path) {
  std::vector<std::string> lines;
  for (const auto& e : t.entries()) lines.push_back(text::join(e.source) + '\t' + text::join(e.target));
  text::write_lines(path, lines);
}

/// Leftmost start of `needle` inside `hay` as a contiguous token run.
inline std::optional<std::size_t> find_subsequence(const std::vector<Token>& hay,
                                                   const std::vector<Token>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return std::nullopt;
  for (std::size_t s = 0; s + needle.size() <= hay.size(); ++s) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(s))) {
      return s;
    }
  }
  return std::nullopt;
}

/// Among entries whose target phrase contains `trigger` and whose source
/// phrase occurs contiguously in `src`, picks the longest source phrase;
/// ties go to the leftmost occurrence, then the smallest entry id.
inline std::optional<PhraseMatch> find_match(const Sentence& src, const Token& trigger,
                                             const PhraseTable& table) {
  std::vector<Token> folded;
  folded.reserve(src.size());
  for (const auto& t : src) folded.push_back(text::fold_case(t));
  const Token key = text::fold_case(trigger);

  std::optional<PhraseMatch> best;
  std::size_t best_len = 0;
  for (std::size_t id : table.entries_with_target_token(trigger)) {
    const auto& phrase = table.folded_source(id);
    const auto start = find_subsequence(folded, phrase);
    if (!start) continue;
    const std::size_t len = phrase.size();
    const bool better = !best || len > best_len || (len == best_len && *start < best->span_begin);
    if (!better) continue;  // equal length and start: the earlier id stays
    const auto& tgt = table.folded_target(id);
    const auto pos = static_cast<std::size_t>(std::find(tgt.begin(), tgt.end(), key) - tgt.begin());
    best = PhraseMatch{id, *start, *start + len, pos};
    best_len = len;
  }
  return best;
}

/// Target token that follows the trigger in the matched phrase; empty when
/// the trigger is the last token.
inline std::optional<Token> continuation(const PhraseMatch& m, const PhraseTable& table) {
  const auto& tgt = table.entry(m.entry).target;
  if (m.trigger_position + 1 >= tgt.size()) return std::nullopt;
  return tgt[m.trigger_position + 1];
}

}  // namespace noov
