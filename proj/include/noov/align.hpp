#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "noov/corpus.hpp"
#include "noov/error.hpp"
#include "noov/text.hpp"

namespace noov {

struct LexEntry {
  Token target;
  double prob = 0;

  friend bool operator==(const LexEntry&, const LexEntry&) = default;
};

/// Per-source-token distribution over target tokens, p(target | source).
/// Rows are sorted by descending probability, ties by target token.
class Lexicon {
 public:
  using Row = std::vector<LexEntry>;

  bool empty() const { return rows_.empty(); }
  std::size_t size() const { return rows_.size(); }
  bool contains(const Token& source) const { return rows_.count(source) != 0; }

  const Row* find(const Token& source) const {
    auto it = rows_.find(source);
    return it == rows_.end() ? nullptr : &it->second;
  }

  /// Probability of `target` given `source`, 0 if absent.
  double prob(const Token& source, const Token& target) const {
    if (const Row* r = find(source)) {
      for (const auto& e : *r) {
        if (e.target == target) return e.prob;
      }
    }
    return 0.0;
  }

  /// Installs a row after dropping non-positive entries, renormalizing and
  /// sorting. An empty result removes the source token.
  void set(const Token& source, Row row) {
    std::erase_if(row, [](const LexEntry& e) { return !(e.prob > 0); });
    if (row.empty()) {
      rows_.erase(source);
      return;
    }
    double total = 0;
    for (const auto& e : row) total += e.prob;
    for (auto& e : row) e.prob /= total;
    std::sort(row.begin(), row.end(), [](const LexEntry& a, const LexEntry& b) {
      return a.prob != b.prob ? a.prob > b.prob : a.target < b.target;
    });
    rows_[source] = std::move(row);
  }

  const std::map<Token, Row>& rows() const { return rows_; }

  friend bool operator==(const Lexicon&, const Lexicon&) = default;

 private:
  std::map<Token, Row> rows_;
};

struct EmConfig {
  int iterations = 20;
  double smoothing = 0.0;
  bool null_word = true;
};

inline constexpr const char* kNullToken = "<null>";

namespace detail {

/// IBM Model 1 over an ordered list of pairs. Emits the per-iteration corpus
/// log-likelihood (evaluated with the parameters entering that iteration).
inline Lexicon ibm1_em_pairs(const std::vector<const SentencePair*>& pairs, const EmConfig& cfg,
                             std::vector<double>* log_likelihood) {
  if (pairs.empty()) throw ValidationError("EM requires a non-empty corpus");
  if (cfg.iterations < 1) throw ValidationError("EM iterations must be >= 1");
  if (cfg.smoothing < 0) throw ValidationError("EM smoothing must be >= 0");

  std::unordered_map<Token, int> src_ids, tgt_ids;
  std::vector<Token> src_tokens;
  if (cfg.null_word) {
    src_ids.emplace(kNullToken, 0);
    src_tokens.emplace_back(kNullToken);
  }
  std::size_t n_targets = 0;
  const auto src_id = [&](const Token& t) {
    auto [it, fresh] = src_ids.emplace(t, static_cast<int>(src_tokens.size()));
    if (fresh) src_tokens.push_back(t);
    return it->second;
  };
  const auto tgt_id = [&](const Token& t) {
    auto [it, fresh] = tgt_ids.emplace(t, static_cast<int>(n_targets));
    if (fresh) ++n_targets;
    return it->second;
  };

  // Sentences as id lists; the NULL word (if any) is appended to every source.
  std::vector<std::vector<int>> src(pairs.size()), tgt(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (const auto& t : pairs[k]->source) src[k].push_back(src_id(t));
    if (cfg.null_word) src[k].push_back(0);
    for (const auto& t : pairs[k]->target) tgt[k].push_back(tgt_id(t));
  }

  // Sparse table: for each source id the sorted list of co-occurring targets.
  std::vector<std::vector<int>> cooc(src_tokens.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (int e : src[k]) cooc[static_cast<std::size_t>(e)].insert(
        cooc[static_cast<std::size_t>(e)].end(), tgt[k].begin(), tgt[k].end());
  }
  std::vector<std::size_t> offset(src_tokens.size() + 1, 0);
  for (std::size_t e = 0; e < cooc.size(); ++e) {
    auto& fs = cooc[e];
    std::sort(fs.begin(), fs.end());
    fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
    offset[e + 1] = offset[e] + fs.size();
  }
  const auto slot_of = [&](int e, int f) {
    const auto& fs = cooc[static_cast<std::size_t>(e)];
    auto it = std::lower_bound(fs.begin(), fs.end(), f);
    return offset[static_cast<std::size_t>(e)] + static_cast<std::size_t>(it - fs.begin());
  };
  // slots[k][j * |src_k| + i] indexes t(f_j | e_i).
  std::vector<std::vector<std::size_t>> slots(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    slots[k].reserve(src[k].size() * tgt[k].size());
    for (int f : tgt[k]) {
      for (int e : src[k]) slots[k].push_back(slot_of(e, f));
    }
  }

  std::vector<double> t(offset.back(), 1.0 / static_cast<double>(n_targets));
  std::vector<double> counts(t.size());
  if (log_likelihood) log_likelihood->clear();

  for (int it = 0; it < cfg.iterations; ++it) {
    std::fill(counts.begin(), counts.end(), 0.0);
    double ll = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const std::size_t l = src[k].size();
      const auto* row = slots[k].data();
      for (std::size_t j = 0; j < tgt[k].size(); ++j, row += l) {
        double z = 0;
        for (std::size_t i = 0; i < l; ++i) z += t[row[i]];
        ll += std::log(z / static_cast<double>(l));
        for (std::size_t i = 0; i < l; ++i) counts[row[i]] += t[row[i]] / z;
      }
    }
    if (log_likelihood) log_likelihood->push_back(ll);
    for (std::size_t e = 0; e < cooc.size(); ++e) {
      double total = 0;
      for (std::size_t s = offset[e]; s < offset[e + 1]; ++s) total += counts[s] + cfg.smoothing;
      if (total <= 0) continue;
      for (std::size_t s = offset[e]; s < offset[e + 1]; ++s) {
        t[s] = (counts[s] + cfg.smoothing) / total;
      }
    }
  }

  std::vector<Token> tgt_tokens(n_targets);
  for (const auto& [tok, id] : tgt_ids) tgt_tokens[static_cast<std::size_t>(id)] = tok;

  Lexicon lex;
  for (std::size_t e = cfg.null_word ? 1 : 0; e < cooc.size(); ++e) {
    Lexicon::Row row;
    for (std::size_t s = offset[e]; s < offset[e + 1]; ++s) {
      row.push_back({tgt_tokens[static_cast<std::size_t>(cooc[e][s - offset[e]])], t[s]});
    }
    lex.set(src_tokens[e], std::move(row));
  }
  return lex;
}

}  // namespace detail

/// Global lexicon by IBM Model 1 EM: uniform initialization, corpus-order
/// accumulation. If `log_likelihood` is given it receives one value per
/// iteration; the sequence is non-decreasing when smoothing is 0.
inline Lexicon ibm1_em(const ParallelCorpus& c, const EmConfig& cfg = {},
                       std::vector<double>* log_likelihood = nullptr) {
  std::vector<const SentencePair*> pairs;
  pairs.reserve(c.size());
  for (const auto& p : c.pairs) pairs.push_back(&p);
  return detail::ibm1_em_pairs(pairs, cfg, log_likelihood);
}

/// Inverted index from source token to the ids of pairs containing it.
class CooccurrenceIndex {
 public:
  CooccurrenceIndex() = default;

  explicit CooccurrenceIndex(const ParallelCorpus& c) {
    for (const auto& p : c.pairs) {
      for (const auto& t : p.source) {
        auto& ids = index_[t];
        if (ids.empty() || ids.back() != p.id) ids.push_back(p.id);
      }
    }
  }

  /// Sorted pair ids, or nullptr for a token absent from the corpus.
  const std::vector<std::size_t>* pairs_with(const Token& t) const {
    auto it = index_.find(t);
    return it == index_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return index_.size(); }

 private:
  std::unordered_map<Token, std::vector<std::size_t>> index_;
};

/// Lexicon re-estimated on the pairs whose source side shares at least one
/// surface token with `src`. When more than `max_pairs` qualify, the ones
/// sharing the most distinct tokens are kept (ties by smaller id). The
/// result only covers tokens of `src`; no sharing pair gives an empty lexicon.
inline Lexicon context_lexicon(const Sentence& src, const ParallelCorpus& c,
                               const CooccurrenceIndex& idx, const EmConfig& cfg = {},
                               std::size_t max_pairs = 5000) {
  std::set<Token> wanted;
  for (const auto& t : src) {
    if (!Vocabulary::is_special(t)) wanted.insert(t);
  }
  std::map<std::size_t, int> shared;
  for (const auto& t : wanted) {
    if (const auto* ids = idx.pairs_with(t)) {
      for (auto id : *ids) ++shared[id];
    }
  }
  if (shared.empty()) return {};

  std::vector<std::pair<std::size_t, int>> chosen(shared.begin(), shared.end());
  if (chosen.size() > max_pairs) {
    std::stable_sort(chosen.begin(), chosen.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    chosen.resize(max_pairs);
    std::sort(chosen.begin(), chosen.end());
  }
  std::vector<const SentencePair*> pairs;
  pairs.reserve(chosen.size());
  for (const auto& [id, n] : chosen) {
    if (id >= c.size()) throw ValidationError("co-occurrence index does not match the corpus");
    pairs.push_back(&c.pairs[id]);
  }
  const Lexicon full = detail::ibm1_em_pairs(pairs, cfg, nullptr);
  Lexicon out;
  for (const auto& t : wanted) {
    if (const auto* row = full.find(t)) out.set(t, *row);
  }
  return out;
}

/// Keeps per source token the `top_k` most probable targets with probability
/// at least `min_prob`, then renormalizes.
inline Lexicon prune_lexicon(const Lexicon& l, std::size_t top_k, double min_prob = 0.0) {
  if (top_k < 1) throw ValidationError("top_k must be >= 1");
  if (!(min_prob >= 0 && min_prob < 1)) throw ValidationError("min_prob must lie in [0, 1)");
  Lexicon out;
  for (const auto& [src, row] : l.rows()) {
    Lexicon::Row kept;
    for (const auto& e : row) {
      if (kept.size() == top_k) break;
      if (e.prob >= min_prob) kept.push_back(e);
    }
    out.set(src, std::move(kept));
  }
  return out;
}

/// TSV `source<TAB>target<TAB>probability`, 12 significant digits.
inline void save_lexicon(const Lexicon& l, const std::string& path) {
  std::string data;
  char buf[64];
  for (const auto& [src, row] : l.rows()) {
    for (const auto& e : row) {
      std::snprintf(buf, sizeof buf, "%.12g", e.prob);
      data += src + '\t' + e.target + '\t' + buf + '\n';
    }
  }
  text::write_file(path, data);
}

inline Lexicon load_lexicon(const std::string& path) {
  const auto lines = text::read_lines(path);
  std::map<Token, Lexicon::Row> rows;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto& line = lines[ln];
    const std::string where = path + ":" + std::to_string(ln + 1) + ": ";
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw FormatError(where + "expected source<TAB>target<TAB>probability");
    }
    Token src = line.substr(0, t1);
    Token tgt = line.substr(t1 + 1, t2 - t1 - 1);
    if (src.empty() || tgt.empty()) throw FormatError(where + "empty token");
    double p = 0;
    try {
      std::size_t used = 0;
      const std::string num = line.substr(t2 + 1);
      p = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument(num);
    } catch (const std::logic_error&) {
      throw FormatError(where + "probability is not a number");
    }
    if (!(p > 0 && p <= 1)) {
      throw ValidationError(where + "probability " + line.substr(t2 + 1) + " outside (0, 1]");
    }
    rows[src].push_back({std::move(tgt), p});
  }
  Lexicon out;
  for (auto& [src, row] : rows) {
    double total = 0;
    for (const auto& e : row) total += e.prob;
    if (std::abs(total - 1.0) > 1e-6) {
      throw ValidationError(path + ": probabilities for source token '" + src + "' sum to " +
                            std::to_string(total));
    }
    out.set(src, std::move(row));
  }
  return out;
}

}  // namespace noov
