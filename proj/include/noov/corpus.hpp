#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "noov/error.hpp"
#include "noov/random.hpp"
#include "noov/text.hpp"

namespace noov {

using Token = std::string;
using Sentence = std::vector<Token>;

struct SentencePair {
  std::size_t id = 0;
  Sentence source;
  Sentence target;
};

/// Line-aligned bilingual corpus. Pair ids are 0..size()-1 in order.
struct ParallelCorpus {
  std::string name;
  std::vector<SentencePair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  /// Appends a pair, assigning the next id. Both sides must be non-empty.
  void add(Sentence source, Sentence target) {
    if (source.empty() || target.empty()) {
      throw ValidationError("sentence pair " + std::to_string(pairs.size()) + " has an empty side");
    }
    pairs.push_back({pairs.size(), std::move(source), std::move(target)});
  }

  std::vector<Sentence> source_side() const {
    std::vector<Sentence> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.source);
    return out;
  }

  std::vector<Sentence> target_side() const {
    std::vector<Sentence> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.target);
    return out;
  }

  /// Concatenation; ids are renumbered.
  static ParallelCorpus concat(const std::vector<ParallelCorpus>& parts, std::string name) {
    ParallelCorpus out;
    out.name = std::move(name);
    for (const auto& part : parts) {
      for (const auto& p : part.pairs) out.add(p.source, p.target);
    }
    return out;
  }
};

inline bool operator==(const SentencePair& a, const SentencePair& b) {
  return a.id == b.id && a.source == b.source && a.target == b.target;
}

inline bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
         (c >= '{' && c <= '~');
}

/// Whitespace tokenization. With `split_punct`, leading and trailing ASCII
/// punctuation characters become standalone tokens ("shot." -> "shot", ".").
inline Sentence tokenize(std::string_view line, bool split_punct = false) {
  Sentence pieces = text::split_whitespace(line);
  if (!split_punct) return pieces;
  Sentence out;
  for (const auto& piece : pieces) {
    std::size_t b = 0;
    std::size_t e = piece.size();
    while (b < e && is_ascii_punct(piece[b])) ++b;
    if (b == e) {
      out.push_back(piece);  // all punctuation, e.g. "..." or "."
      continue;
    }
    while (e > b && is_ascii_punct(piece[e - 1])) --e;
    for (std::size_t i = 0; i < b; ++i) out.emplace_back(1, piece[i]);
    out.push_back(piece.substr(b, e - b));
    for (std::size_t i = e; i < piece.size(); ++i) out.emplace_back(1, piece[i]);
  }
  return out;
}

/// Bidirectional token/id map with occurrence counts. Ids 0-3 are reserved
/// for PAD, BOS, EOS and UNK.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;
  static constexpr std::array<std::string_view, 4> kSpecialTokens{"<pad>", "<s>", "</s>",
                                                                   "<unk>"};

  Vocabulary() {
    for (auto s : kSpecialTokens) push(Token(s), 0);
  }

  static bool is_special(std::string_view surface) {
    return std::find(kSpecialTokens.begin(), kSpecialTokens.end(), surface) !=
           kSpecialTokens.end();
  }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

  /// Ids: specials first, then tokens by descending count, ties broken
  /// lexicographically. Tokens seen fewer than `min_count` times are dropped.
  static Vocabulary build(const std::vector<Sentence>& side, std::int64_t min_count = 1) {
    std::map<Token, std::int64_t> counts;
    for (const auto& s : side) {
      for (const auto& t : s) {
        if (!is_special(t)) ++counts[t];
      }
    }
    std::vector<std::pair<Token, std::int64_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary v;
    for (auto& [tok, n] : ranked) {
      if (n >= min_count) v.push(tok, n);
    }
    return v;
  }

  std::size_t size() const { return tokens_.size(); }

  std::optional<int> find(std::string_view surface) const {
    auto it = ids_.find(std::string(surface));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view surface) const { return find(surface).has_value(); }

  /// Id of `surface`, or UNK.
  int id(std::string_view surface) const { return find(surface).value_or(kUnk); }

  const Token& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw Error("vocabulary id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::int64_t count(int id) const { return counts_.at(static_cast<std::size_t>(id)); }

  const std::vector<Token>& tokens() const { return tokens_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }

  /// Rebuilds from an id-ordered token list (as stored in checkpoints).
  static Vocabulary from_tokens(const std::vector<Token>& tokens,
                                const std::vector<std::int64_t>& counts) {
    if (tokens.size() < kNumSpecials || tokens.size() != counts.size()) {
      throw FormatError("vocabulary listing is too short or count list is misaligned");
    }
    Vocabulary v;
    for (int i = 0; i < kNumSpecials; ++i) {
      if (tokens[static_cast<std::size_t>(i)] != kSpecialTokens[static_cast<std::size_t>(i)]) {
        throw FormatError("vocabulary special token mismatch at id " + std::to_string(i));
      }
    }
    for (std::size_t i = kNumSpecials; i < tokens.size(); ++i) {
      if (is_special(tokens[i]) || v.contains(tokens[i]) || tokens[i].empty()) {
        throw FormatError("vocabulary token '" + tokens[i] + "' is duplicated or reserved");
      }
      v.push(tokens[i], counts[i]);
    }
    return v;
  }

  /// TSV `token<TAB>id<TAB>count`, specials included.
  void save(const std::string& path) const {
    std::string data;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      data += tokens_[i] + '\t' + std::to_string(i) + '\t' + std::to_string(counts_[i]) + '\n';
    }
    text::write_file(path, data);
  }

  static Vocabulary load(const std::string& path) {
    const auto lines = text::read_lines(path);
    std::vector<Token> tokens;
    std::vector<std::int64_t> counts;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      const auto& line = lines[ln];
      const auto t1 = line.find('\t');
      const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
      if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
        throw FormatError(path + ":" + std::to_string(ln + 1) + ": expected token<TAB>id<TAB>count");
      }
      try {
        const long long id = std::stoll(line.substr(t1 + 1, t2 - t1 - 1));
        if (id != static_cast<long long>(ln)) {
          throw FormatError(path + ":" + std::to_string(ln + 1) + ": ids must be consecutive from 0");
        }
        counts.push_back(std::stoll(line.substr(t2 + 1)));
      } catch (const std::logic_error&) {
        throw FormatError(path + ":" + std::to_string(ln + 1) + ": non-numeric id or count");
      }
      tokens.push_back(line.substr(0, t1));
    }
    return from_tokens(tokens, counts);
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
  }

 private:
  void push(Token t, std::int64_t count) {
    ids_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(std::move(t));
    counts_.push_back(count);
  }

  std::vector<Token> tokens_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<Token, int> ids_;
};

/// Ids plus the surface forms they came from, so the lexicon and phrase
/// paths can still act on tokens whose id is UNK.
struct EncodedSentence {
  std::vector<int> ids;
  Sentence surfaces;
};

inline EncodedSentence encode_sentence(const Sentence& s, const Vocabulary& v, bool add_bounds) {
  EncodedSentence out;
  if (add_bounds) {
    out.ids.push_back(Vocabulary::kBos);
    out.surfaces.emplace_back(Vocabulary::kSpecialTokens[Vocabulary::kBos]);
  }
  for (const auto& t : s) {
    out.ids.push_back(v.id(t));
    out.surfaces.push_back(t);
  }
  if (add_bounds) {
    out.ids.push_back(Vocabulary::kEos);
    out.surfaces.emplace_back(Vocabulary::kSpecialTokens[Vocabulary::kEos]);
  }
  return out;
}

inline Sentence decode_ids(const std::vector<int>& ids, const Vocabulary& v) {
  Sentence out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(v.token(id));
  return out;
}

struct TokenizeOptions {
  bool split_punct = false;
};

/// Reads two line-aligned files into a corpus.
inline ParallelCorpus load_parallel(const std::string& source_path, const std::string& target_path,
                                    TokenizeOptions opts = {}) {
  const auto src = text::read_lines(source_path);
  const auto tgt = text::read_lines(target_path);
  if (src.size() != tgt.size()) {
    throw AlignmentError("line count mismatch between '" + source_path + "' and '" + target_path +
                         "': " + std::to_string(src.size()) + " ≠ " +
                         std::to_string(tgt.size()));
  }
  ParallelCorpus corpus;
  corpus.name = source_path;
  for (std::size_t i = 0; i < src.size(); ++i) {
    Sentence s = tokenize(src[i], opts.split_punct);
    Sentence t = tokenize(tgt[i], opts.split_punct);
    if (s.empty()) throw FormatError(source_path + ":" + std::to_string(i + 1) + ": empty line");
    if (t.empty()) throw FormatError(target_path + ":" + std::to_string(i + 1) + ": empty line");
    corpus.add(std::move(s), std::move(t));
  }
  return corpus;
}

inline void save_parallel(const ParallelCorpus& c, const std::string& source_path,
                          const std::string& target_path) {
  std::vector<std::string> src, tgt;
  for (const auto& p : c.pairs) {
    src.push_back(text::join(p.source));
    tgt.push_back(text::join(p.target));
  }
  text::write_lines(source_path, src);
  text::write_lines(target_path, tgt);
}

/// Loads one monolingual side (e.g. a test source file). Empty lines are
/// kept as empty sentences.
inline std::vector<Sentence> load_sentences(const std::string& path, TokenizeOptions opts = {}) {
  std::vector<Sentence> out;
  for (const auto& line : text::read_lines(path)) out.push_back(tokenize(line, opts.split_punct));
  return out;
}

struct SplitSpec {
  double test_fraction = 0.2;
  double dev_fraction_of_rest = 0.1;
  std::uint64_t seed = 0;
};

struct CorpusSplit {
  ParallelCorpus train, dev, test;
  /// Original pair ids that ended up in each part, in output order.
  std::vector<std::size_t> train_ids, dev_ids, test_ids;
};

inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

/// Deterministic shuffle followed by test / dev / train carving.
inline CorpusSplit split_corpus(const ParallelCorpus& c, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0 && spec.test_fraction < 1) ||
      !(spec.dev_fraction_of_rest > 0 && spec.dev_fraction_of_rest < 1)) {
    throw ValidationError("split fractions must lie strictly between 0 and 1");
  }
  if (c.size() < 10) {
    throw ValidationError("corpus has " + std::to_string(c.size()) +
                          " pairs; at least 10 are required to split");
  }
  const std::size_t n = c.size();
  const std::size_t n_test = round_half_up(static_cast<double>(n) * spec.test_fraction);
  const std::size_t n_dev = round_half_up(static_cast<double>(n - n_test) * spec.dev_fraction_of_rest);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);

  CorpusSplit out;
  out.test_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.dev_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                     order.begin() + static_cast<std::ptrdiff_t>(n_test + n_dev));
  out.train_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_dev), order.end());
  const auto fill = [&](ParallelCorpus& part, const std::vector<std::size_t>& ids,
                        const std::string& suffix) {
    part.name = c.name + suffix;
    for (auto id : ids) part.add(c.pairs[id].source, c.pairs[id].target);
  };
  fill(out.train, out.train_ids, ".train");
  fill(out.dev, out.dev_ids, ".dev");
  fill(out.test, out.test_ids, ".test");
  return out;
}

/// Fraction of non-special token occurrences absent from `v`.
inline double oov_rate(const std::vector<Sentence>& side, const Vocabulary& v) {
  std::size_t total = 0;
  std::size_t unknown = 0;
  for (const auto& s : side) {
    for (const auto& t : s) {
      if (Vocabulary::is_special(t)) continue;
      ++total;
      if (!v.contains(t)) ++unknown;
    }
  }
  if (total == 0) throw ValidationError("OOV rate is undefined on an empty token sequence");
  return static_cast<double>(unknown) / static_cast<double>(total);
}

}  // namespace noov
