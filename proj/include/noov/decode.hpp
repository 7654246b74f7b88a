#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "noov/align.hpp"
#include "noov/corpus.hpp"
#include "noov/error.hpp"
#include "noov/model.hpp"
#include "noov/phrasebook.hpp"
#include "noov/text.hpp"

namespace noov {

enum class Renormalize { softmax, none };
enum class LexiconMode { global, context, context_backoff_global };
enum class RepetitionTrigger { output_argmax, attention_argmax };

struct DecodeConfig {
  int beam_size = 8;
  double alpha = 0.2;
  int max_len = 0;  // 0: floor(2.5 * source length) + 5
  Renormalize renormalize = Renormalize::softmax;
  LexiconMode lexicon_mode = LexiconMode::context_backoff_global;
  bool repetition_fix = true;
  RepetitionTrigger trigger = RepetitionTrigger::output_argmax;

  void validate() const {
    if (beam_size < 1) throw ValidationError("beam size must be >= 1");
    if (!(alpha >= 0 && alpha <= 1)) throw ValidationError("alpha must lie in [0, 1]");
    if (max_len < 0) throw ValidationError("max_len must be >= 0");
  }

  std::size_t max_length(std::size_t source_length) const {
    if (max_len > 0) return static_cast<std::size_t>(max_len);
    return static_cast<std::size_t>(std::floor(2.5 * static_cast<double>(source_length))) + 5;
  }
};

// Enum <-> string, shared by config files and flags.
inline std::string to_string(Renormalize r) { return r == Renormalize::softmax ? "softmax" : "none"; }
inline std::string to_string(LexiconMode m) {
  switch (m) {
    case LexiconMode::global: return "global";
    case LexiconMode::context: return "context";
    default: return "context_backoff_global";
  }
}
inline std::string to_string(RepetitionTrigger t) {
  return t == RepetitionTrigger::output_argmax ? "output_argmax" : "attention_argmax";
}
inline Renormalize parse_renormalize(const std::string& s) {
  if (s == "softmax") return Renormalize::softmax;
  if (s == "none") return Renormalize::none;
  throw ValidationError("unknown renormalize mode '" + s + "' (softmax, none)");
}
inline LexiconMode parse_lexicon_mode(const std::string& s) {
  if (s == "global") return LexiconMode::global;
  if (s == "context") return LexiconMode::context;
  if (s == "context_backoff_global") return LexiconMode::context_backoff_global;
  throw ValidationError("unknown lexicon mode '" + s + "' (global, context, context_backoff_global)");
}
inline RepetitionTrigger parse_trigger(const std::string& s) {
  if (s == "output_argmax") return RepetitionTrigger::output_argmax;
  if (s == "attention_argmax") return RepetitionTrigger::attention_argmax;
  throw ValidationError("unknown repetition trigger '" + s + "' (output_argmax, attention_argmax)");
}

struct LexiconBias {
  std::vector<double> probs;       // over the target vocabulary, sums to 1
  bool neutral = false;            // no lexicon evidence: uniform
  std::optional<Token> best_oov;   // heaviest target outside the vocabulary
};

/// Lexicon rows of one source sentence resolved against the target
/// vocabulary, so that each decoder step only pays for the weighted sum.
class SentenceLexicon {
 public:
  SentenceLexicon(const Sentence& src, const Lexicon& lex, const Vocabulary& vt)
      : vocab_size_(vt.size()) {
    rows_.resize(src.size());
    for (std::size_t j = 0; j < src.size(); ++j) {
      const auto* row = lex.find(src[j]);
      if (!row) continue;
      for (const auto& e : *row) {
        const auto id = vt.find(e.target);
        if (!id) {
          rows_[j].push_back({Vocabulary::kUnk, e.prob, oov_index(e.target)});
        } else if (*id != Vocabulary::kPad && *id != Vocabulary::kBos) {
          rows_[j].push_back({*id, e.prob, -1});
        }
      }
    }
  }

  std::size_t length() const { return rows_.size(); }

  LexiconBias distribution(std::span<const double> att, Renormalize mode) const {
    if (att.size() != rows_.size()) {
      throw ShapeError("lexicon bias: " + std::to_string(att.size()) + " attention weights for " +
                       std::to_string(rows_.size()) + " source tokens");
    }
    LexiconBias out;
    out.probs.assign(vocab_size_, 0.0);
    std::vector<double> oov_mass(oov_.size(), 0.0);
    for (std::size_t j = 0; j < rows_.size(); ++j) {
      for (const auto& c : rows_[j]) {
        out.probs[static_cast<std::size_t>(c.id)] += att[j] * c.prob;
        if (c.oov >= 0) oov_mass[static_cast<std::size_t>(c.oov)] += att[j] * c.prob;
      }
    }
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < oov_.size(); ++k) {
      if (oov_mass[k] > 0 && (!best || oov_mass[k] > oov_mass[*best] ||
                              (oov_mass[k] == oov_mass[*best] && oov_[k] < oov_[*best]))) {
        best = k;
      }
    }
    if (best) out.best_oov = oov_[*best];

    std::size_t support = 0;
    double total = 0;
    for (double p : out.probs) {
      if (p > 0) {
        ++support;
        total += p;
      }
    }
    if (support == 0) {
      out.neutral = true;
      const double u = 1.0 / static_cast<double>(vocab_size_ - 2);
      for (std::size_t k = 0; k < vocab_size_; ++k) out.probs[k] = emittable(k) ? u : 0.0;
      return out;
    }
    if (mode == Renormalize::none) {
      for (double& p : out.probs) p /= total;
      return out;
    }
    // exp-normalization over the support plus one pooled cell (pr = 0)
    // standing for every other emittable token.
    const std::size_t others = vocab_size_ - 2 - support;
    double z = others > 0 ? 1.0 : 0.0;
    for (double p : out.probs) {
      if (p > 0) z += std::exp(p);
    }
    const double other_each = others > 0 ? 1.0 / (z * static_cast<double>(others)) : 0.0;
    for (std::size_t k = 0; k < vocab_size_; ++k) {
      double& p = out.probs[k];
      if (p > 0) {
        p = std::exp(p) / z;
      } else {
        p = emittable(k) ? other_each : 0.0;
      }
    }
    return out;
  }

 private:
  struct Cell {
    int id;
    double prob;
    int oov;  // index into oov_, -1 for in-vocabulary targets
  };

  static bool emittable(std::size_t id) { return id != Vocabulary::kPad && id != Vocabulary::kBos; }

  int oov_index(const Token& t) {
    auto it = std::find(oov_.begin(), oov_.end(), t);
    if (it != oov_.end()) return static_cast<int>(it - oov_.begin());
    oov_.push_back(t);
    return static_cast<int>(oov_.size() - 1);
  }

  std::size_t vocab_size_;
  std::vector<std::vector<Cell>> rows_;
  std::vector<Token> oov_;
};

/// Attention-weighted lexicon evidence over the target vocabulary. Targets
/// missing from the vocabulary pool into UNK.
inline LexiconBias lexicon_bias_distribution(std::span<const double> att, const Sentence& src,
                                             const Lexicon& lex, const Vocabulary& vt,
                                             Renormalize mode = Renormalize::softmax) {
  return SentenceLexicon(src, lex, vt).distribution(att, mode);
}

/// alpha * lexicon + (1 - alpha) * decoder. The boundaries return the
/// respective input unchanged.
inline std::vector<double> mix_distributions(std::span<const double> decoder,
                                             std::span<const double> lexicon, double alpha) {
  if (!(alpha >= 0 && alpha <= 1)) throw ValidationError("alpha must lie in [0, 1]");
  if (decoder.size() != lexicon.size()) {
    throw ShapeError("mix: decoder has " + std::to_string(decoder.size()) + " entries, lexicon " +
                     std::to_string(lexicon.size()));
  }
  if (alpha == 0) return {decoder.begin(), decoder.end()};
  if (alpha == 1) return {lexicon.begin(), lexicon.end()};
  std::vector<double> out(decoder.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = alpha * lexicon[k] + (1 - alpha) * decoder[k];
  return out;
}

struct Hypothesis {
  std::vector<int> ids;                 // fed to the decoder; ends in EOS when finished
  Sentence surfaces;                    // emitted words, EOS excluded
  std::vector<double> token_logprobs;   // per position, sums to score
  std::vector<bool> substituted;        // positions filled by the phrase table
  double score = 0;
  nn::DecoderState<float> state;
  int prev_argmax = -1;
  int prev_attention_argmax = -1;
  bool finished = false;
};

/// True when the next argmax repeats the previously emitted word.
inline bool detect_repetition(const Hypothesis& h, const Token& next_argmax) {
  if (h.surfaces.empty() || Vocabulary::is_special(next_argmax)) return false;
  return h.surfaces.back() == next_argmax;
}

/// Continuation of the best phrase-table match for the previous word.
inline std::optional<Token> phrase_substitute(const Hypothesis& h, const Sentence& src,
                                              const PhraseTable& table) {
  if (h.surfaces.empty()) return std::nullopt;
  const auto m = find_match(src, h.surfaces.back(), table);
  if (!m) return std::nullopt;
  return continuation(*m, table);
}

/// Supplies the lexicon used for one source sentence.
class LexiconProvider {
 public:
  LexiconProvider() = default;

  LexiconProvider(LexiconMode mode, std::shared_ptr<const Lexicon> global,
                  std::shared_ptr<const ParallelCorpus> corpus, EmConfig em = {},
                  std::size_t max_pairs = 5000)
      : mode_(mode), global_(std::move(global)), corpus_(std::move(corpus)), em_(em),
        max_pairs_(max_pairs) {
    if (mode_ == LexiconMode::global && !global_) {
      throw ValidationError("lexicon mode 'global' needs a lexicon");
    }
    if (mode_ == LexiconMode::context && !corpus_) {
      throw ValidationError("lexicon mode 'context' needs a training corpus");
    }
    if (corpus_) index_ = std::make_shared<CooccurrenceIndex>(*corpus_);
  }

  static LexiconProvider fixed(Lexicon lex) {
    return LexiconProvider(LexiconMode::global, std::make_shared<const Lexicon>(std::move(lex)), nullptr);
  }

  LexiconMode mode() const { return mode_; }

  /// Context rows where available; with back-off, global rows fill the
  /// remaining source tokens.
  Lexicon for_sentence(const Sentence& src) const {
    if (mode_ == LexiconMode::global) return global_ ? *global_ : Lexicon{};
    Lexicon out;
    if (corpus_) out = context_lexicon(src, *corpus_, *index_, em_, max_pairs_);
    if (mode_ == LexiconMode::context_backoff_global && global_) {
      for (const auto& t : src) {
        if (out.contains(t)) continue;
        if (const auto* row = global_->find(t)) out.set(t, *row);
      }
    }
    return out;
  }

 private:
  LexiconMode mode_ = LexiconMode::global;
  std::shared_ptr<const Lexicon> global_;
  std::shared_ptr<const ParallelCorpus> corpus_;
  std::shared_ptr<const CooccurrenceIndex> index_;
  EmConfig em_;
  std::size_t max_pairs_ = 5000;
};

struct Translation {
  Sentence tokens;
  std::vector<int> ids;
  std::vector<double> token_logprobs;
  std::vector<bool> substituted;
  double score = 0;
  double normalized_score = 0;  // score / number of decoder outputs (EOS counted)
  bool finished = false;
};

struct BeamResult {
  Translation best;
  std::vector<Translation> nbest;  // best first
};

namespace detail {

struct Extension {
  int id;
  Token surface;
  double logp;
  bool substituted;
};

inline int argmax_index(std::span<const double> v) {
  int best = -1;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (best < 0 || v[k] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

/// Per-sentence decoding context shared by greedy and beam search.
class StepScorer {
 public:
  StepScorer(const ModelCheckpoint& m, const Sentence& src, const Lexicon& lex,
             const PhraseTable* table, const DecodeConfig& cfg)
      : m_(m), src_(src), table_(table), cfg_(cfg),
        lex_(cfg.alpha > 0 ? std::optional<SentenceLexicon>(std::in_place, src, lex, m.target_vocab)
                           : std::nullopt) {}

  struct Outcome {
    std::vector<double> mixed;
    int argmax = -1;
    int attention_argmax = -1;
    std::vector<Extension> extensions;  // best first, at most `k`
  };

  Outcome score(const Hypothesis& h, std::span<const float> dec, std::span<const float> att,
                std::size_t k) const {
    Outcome o;
    std::vector<double> d(dec.begin(), dec.end());
    std::vector<double> a(att.begin(), att.end());
    std::optional<Token> oov;
    if (lex_) {
      auto bias = lex_->distribution(a, cfg_.renormalize);
      oov = bias.best_oov;
      o.mixed = mix_distributions(d, bias.probs, cfg_.alpha);
    } else {
      o.mixed = std::move(d);
    }
    const auto& vt = m_.target_vocab;
    const auto surface = [&](int id) {
      return id == Vocabulary::kUnk && oov ? *oov : vt.token(id);
    };
    const auto allowed = [&](int id) {
      return id != Vocabulary::kPad && id != Vocabulary::kBos &&
             o.mixed[static_cast<std::size_t>(id)] > 0;
    };
    for (std::size_t w = 0; w < o.mixed.size(); ++w) {
      const int id = static_cast<int>(w);
      if (allowed(id) && (o.argmax < 0 || o.mixed[w] > o.mixed[static_cast<std::size_t>(o.argmax)])) {
        o.argmax = id;
      }
    }
    o.attention_argmax = argmax_index(a);
    if (o.argmax < 0) return o;

    std::optional<Token> sub;
    if (cfg_.repetition_fix && table_ && !h.surfaces.empty()) {
      const bool fires = cfg_.trigger == RepetitionTrigger::output_argmax
                             ? detect_repetition(h, surface(o.argmax))
                             : o.attention_argmax == h.prev_attention_argmax;
      if (fires) sub = phrase_substitute(h, src_, *table_);
    }
    int skip = -1;
    if (sub) {
      const int sid = vt.id(*sub);
      o.extensions.push_back({sid, *sub, std::log(o.mixed[static_cast<std::size_t>(o.argmax)]), true});
      skip = vt.find(*sub) ? sid : -1;
    }
    // Remaining extensions by probability, ties to the smaller id.
    std::vector<int> order;
    for (std::size_t w = 0; w < o.mixed.size(); ++w) {
      const int id = static_cast<int>(w);
      if (!allowed(id) || id == skip || (sub && id == o.argmax)) continue;
      order.push_back(id);
    }
    const std::size_t want = std::min(order.size(), k - o.extensions.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(want), order.end(),
                      [&](int x, int y) {
                        const double px = o.mixed[static_cast<std::size_t>(x)];
                        const double py = o.mixed[static_cast<std::size_t>(y)];
                        return px != py ? px > py : x < y;
                      });
    for (std::size_t r = 0; r < want; ++r) {
      const int id = order[r];
      o.extensions.push_back({id, surface(id), std::log(o.mixed[static_cast<std::size_t>(id)]), false});
    }
    return o;
  }

 private:
  const ModelCheckpoint& m_;
  const Sentence& src_;
  const PhraseTable* table_;
  DecodeConfig cfg_;
  std::optional<SentenceLexicon> lex_;
};

inline nn::DecoderState<float> column(const nn::DecoderState<float>& s, Eigen::Index k) {
  nn::DecoderState<float> out;
  for (const auto& h : s.h) out.h.push_back(h.col(k));
  for (const auto& c : s.c) out.c.push_back(c.col(k));
  return out;
}

inline nn::DecoderState<float> stack(const std::vector<const nn::DecoderState<float>*>& states) {
  nn::DecoderState<float> out;
  const auto K = static_cast<Eigen::Index>(states.size());
  const std::size_t L = states.front()->h.size();
  for (std::size_t l = 0; l < L; ++l) {
    nn::Matrix<float> h(states.front()->h[l].rows(), K), c(states.front()->c[l].rows(), K);
    for (Eigen::Index k = 0; k < K; ++k) {
      h.col(k) = states[static_cast<std::size_t>(k)]->h[l];
      c.col(k) = states[static_cast<std::size_t>(k)]->c[l];
    }
    out.h.push_back(std::move(h));
    out.c.push_back(std::move(c));
  }
  return out;
}

inline void extend(Hypothesis& h, const Extension& e, int argmax, int att_argmax) {
  h.ids.push_back(e.id);
  if (e.id == Vocabulary::kEos && !e.substituted) {
    h.finished = true;
  } else {
    h.surfaces.push_back(e.surface);
  }
  h.token_logprobs.push_back(e.logp);
  h.substituted.push_back(e.substituted);
  h.score += e.logp;
  h.prev_argmax = argmax;
  h.prev_attention_argmax = att_argmax;
}

inline Translation to_translation(const Hypothesis& h) {
  Translation t;
  t.tokens = h.surfaces;
  t.ids = h.ids;
  t.token_logprobs = h.token_logprobs;
  t.substituted = h.substituted;
  t.score = h.score;
  t.normalized_score = h.ids.empty() ? h.score : h.score / static_cast<double>(h.ids.size());
  t.finished = h.finished;
  return t;
}

inline std::vector<int> source_ids(const ModelCheckpoint& m, const Sentence& src) {
  if (src.empty()) throw ValidationError("cannot translate an empty source sentence");
  return encode_sentence(src, m.source_vocab, false).ids;
}

}  // namespace detail

/// Greedy decoding: the single best extension at every step.
inline Translation greedy_decode(const ModelCheckpoint& m, const Sentence& src, const Lexicon& lex,
                                 const PhraseTable* table, const DecodeConfig& cfg) {
  cfg.validate();
  const auto enc = encode(m, detail::source_ids(m, src));
  const detail::StepScorer scorer(m, src, lex, table, cfg);
  Hypothesis h;
  h.state = initial_state(m, enc);
  const std::size_t max_len = cfg.max_length(src.size());
  while (!h.finished && h.ids.size() < max_len) {
    const int prev = h.ids.empty() ? Vocabulary::kBos : h.ids.back();
    auto step = nn::decoder_step(m.params, enc, h.state, {prev});
    const auto o = scorer.score(h, std::span<const float>(step.probs.data(), step.probs.size()),
                                std::span<const float>(step.att.data(), step.att.size()), 1);
    if (o.extensions.empty()) break;
    detail::extend(h, o.extensions.front(), o.argmax, o.attention_argmax);
    h.state = std::move(step.next);
  }
  return detail::to_translation(h);
}

/// Beam search over the mixed distribution. Each step keeps the best
/// `beam_size` extensions of all live hypotheses; those ending in EOS
/// retire. Ranking uses the length-normalized score.
inline BeamResult beam_search(const ModelCheckpoint& m, const Sentence& src, const Lexicon& lex,
                              const PhraseTable* table, const DecodeConfig& cfg) {
  cfg.validate();
  const auto enc = encode(m, detail::source_ids(m, src));
  const detail::StepScorer scorer(m, src, lex, table, cfg);
  const auto beam = static_cast<std::size_t>(cfg.beam_size);
  const std::size_t max_len = cfg.max_length(src.size());

  std::vector<Hypothesis> live(1);
  live[0].state = initial_state(m, enc);
  std::vector<Hypothesis> finished;

  for (std::size_t t = 0; t < max_len && !live.empty() && finished.size() < beam; ++t) {
    const auto K = static_cast<Eigen::Index>(live.size());
    std::vector<const nn::DecoderState<float>*> states;
    std::vector<int> prev;
    for (const auto& h : live) {
      states.push_back(&h.state);
      prev.push_back(h.ids.empty() ? Vocabulary::kBos : h.ids.back());
    }
    const auto encK = K == 1 ? enc : nn::broadcast(enc, K);
    auto step = nn::decoder_step(m.params, encK, detail::stack(states), prev);

    struct Candidate {
      double score;
      std::size_t parent;
      std::size_t rank;
      detail::Extension ext;
      int argmax, att_argmax;
    };
    std::vector<Candidate> cands;
    for (Eigen::Index k = 0; k < K; ++k) {
      const nn::Vector<float> probs = step.probs.col(k);
      const nn::Vector<float> att = step.att.col(k);
      const auto& h = live[static_cast<std::size_t>(k)];
      auto o = scorer.score(h, std::span<const float>(probs.data(), probs.size()),
                            std::span<const float>(att.data(), att.size()), beam);
      for (std::size_t r = 0; r < o.extensions.size(); ++r) {
        cands.push_back({h.score + o.extensions[r].logp, static_cast<std::size_t>(k), r,
                         std::move(o.extensions[r]), o.argmax, o.attention_argmax});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.score > b.score;
    });
    if (cands.size() > beam) cands.resize(beam);

    std::vector<Hypothesis> next;
    for (const auto& c : cands) {
      Hypothesis h = live[c.parent];
      detail::extend(h, c.ext, c.argmax, c.att_argmax);
      if (h.finished) {
        finished.push_back(std::move(h));
      } else {
        h.state = detail::column(step.next, static_cast<Eigen::Index>(c.parent));
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }
  for (auto& h : live) finished.push_back(std::move(h));

  BeamResult r;
  for (const auto& h : finished) r.nbest.push_back(detail::to_translation(h));
  std::stable_sort(r.nbest.begin(), r.nbest.end(), [](const Translation& a, const Translation& b) {
    return a.normalized_score > b.normalized_score;
  });
  if (r.nbest.size() > beam) r.nbest.resize(beam);
  r.best = r.nbest.front();
  return r;
}

inline BeamResult beam_search(const ModelCheckpoint& m, const Sentence& src,
                              const LexiconProvider& lexicons, const PhraseTable* table,
                              const DecodeConfig& cfg) {
  const Lexicon lex = cfg.alpha > 0 ? lexicons.for_sentence(src) : Lexicon{};
  return beam_search(m, src, lex, table, cfg);
}

/// Number of decoding workers: NOOV_THREADS when set, else hardware threads.
inline std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("NOOV_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ValidationError(std::string("NOOV_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return n;
}

/// Translates every sentence; empty inputs give empty translations. Order
/// is preserved whatever the number of workers.
inline std::vector<Translation> translate_corpus(const ModelCheckpoint& m,
                                                 const std::vector<Sentence>& sources,
                                                 const LexiconProvider& lexicons,
                                                 const PhraseTable* table, const DecodeConfig& cfg,
                                                 std::size_t threads = 1) {
  cfg.validate();
  std::vector<Translation> out(sources.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (std::size_t i = next++; i < sources.size(); i = next++) {
      try {
        if (!sources[i].empty()) out[i] = beam_search(m, sources[i], lexicons, table, cfg).best;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = sources.size();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, sources.size()));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back([&work] { work(); });
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline void write_translations(const std::vector<Translation>& ts, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(ts.size());
  for (const auto& t : ts) lines.push_back(text::join(t.tokens));
  text::write_lines(path, lines);
}

/// Sidecar TSV `line<TAB>score<TAB>length`, lines numbered from 1.
inline void write_scores(const std::vector<Translation>& ts, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(ts.size());
  char buf[64];
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", ts[i].score);
    lines.push_back(std::to_string(i + 1) + '\t' + buf + '\t' + std::to_string(ts[i].tokens.size()));
  }
  text::write_lines(path, lines);
}

}  // namespace noov
