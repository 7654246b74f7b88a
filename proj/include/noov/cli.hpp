#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "noov/align.hpp"
#include "noov/checkpoint.hpp"
#include "noov/config.hpp"
#include "noov/corpus.hpp"
#include "noov/decode.hpp"
#include "noov/eval.hpp"
#include "noov/model.hpp"
#include "noov/phrasebook.hpp"

namespace noov::cli {

namespace detail {

// Flags that map onto config keys. Only flags given on the command line
// are applied, on top of whatever the config file set.
class Overrides {
 public:
  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& section,
                      const std::string& key, T def, const std::string& help) {
    auto value = std::make_shared<T>(std::move(def));
    auto* opt = app->add_option(flag, *value, help + " (" + section + "." + key + ")");
    entries_.push_back({opt, [value, section, key](nlohmann::json& j) { j[section][key] = *value; }});
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& flag, const std::string& section,
                    const std::string& key, bool value, const std::string& help) {
    const std::string desc = help + " (" + section + "." + key + ", default: " + (value ? "off" : "on") + ")";
    auto* opt = app->add_flag(flag, desc);
    entries_.push_back({opt, [section, key, value](nlohmann::json& j) { j[section][key] = value; }});
    return opt;
  }

  void apply(nlohmann::json& j) const {
    for (const auto& e : entries_) {
      if (e.opt->count() > 0) e.set(j);
    }
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::function<void(nlohmann::json&)> set;
  };
  std::vector<Entry> entries_;
};

struct Args {
  std::string config;
  std::vector<std::string> src, tgt, dev_src, dev_tgt, ctx_src, ctx_tgt, hyps, labels;
  std::string input, scores, ref, eval_src, buckets = "10,20,30", table_file, trigger, sentence;
  bool greedy = false;
  std::size_t threads = 0;
};

inline const RunConfig& defaults() {
  static const RunConfig d;
  return d;
}

inline void add_corpus_flags(CLI::App* app, Overrides& o) {
  const auto& d = defaults().corpus;
  o.option(app, "--test-frac", "corpus", "test_fraction", d.test_fraction, "Fraction held out for testing");
  o.option(app, "--dev-frac", "corpus", "dev_fraction", d.dev_fraction, "Dev fraction of the remainder");
  o.option(app, "--seed", "corpus", "seed", d.seed, "Shuffle seed");
}

inline void add_tokenize_flag(CLI::App* app, Overrides& o) {
  o.flag(app, "--split-punct", "corpus", "split_punct", true, "Split ASCII punctuation off tokens");
}

inline void add_align_flags(CLI::App* app, Overrides& o) {
  const auto& d = defaults().align;
  o.option(app, "--iters", "align", "iterations", d.em.iterations, "EM iterations");
  o.option(app, "--smoothing", "align", "smoothing", d.em.smoothing, "Additive smoothing of expected counts");
  o.flag(app, "--no-null", "align", "null_word", false, "Disable the NULL source word");
  o.option(app, "--max-pairs", "align", "max_pairs", d.max_pairs, "Cap on the context sub-corpus");
}

inline void add_model_flags(CLI::App* app, Overrides& o) {
  const auto& d = defaults().model;
  o.option(app, "--hidden", "model", "hidden_size", d.hidden_size, "LSTM hidden size");
  o.option(app, "--embedding", "model", "embedding_size", d.embedding_size, "Embedding size");
  o.option(app, "--layers", "model", "layers", d.layers, "LSTM layers in encoder and decoder");
  o.option(app, "--batch", "model", "batch_size", d.batch_size, "Batch size");
  o.option(app, "--dropout", "model", "dropout", d.dropout, "Dropout rate");
  o.option(app, "--clip", "model", "grad_clip", d.grad_clip, "Global gradient norm clip");
  o.option(app, "--lr", "model", "lr", d.lr, "Adam learning rate");
  o.option(app, "--epochs", "model", "max_epochs", d.max_epochs, "Maximum epochs");
  o.option(app, "--patience", "model", "patience", d.patience, "Epochs without dev improvement before stopping");
  o.option(app, "--seed", "model", "seed", d.seed, "Initialization and shuffling seed");
}

inline void add_decode_flags(CLI::App* app, Overrides& o, bool with_alpha) {
  const auto& d = defaults().decode;
  o.option(app, "--beam", "decode", "beam", d.beam_size, "Beam size");
  if (with_alpha) o.option(app, "--alpha", "decode", "alpha", d.alpha, "Lexicon weight in [0, 1]");
  o.option(app, "--max-len", "decode", "max_len", d.max_len, "Output length cap, 0 for 2.5 x source + 5");
  o.option(app, "--lexicon-mode", "decode", "lexicon_mode", to_string(d.lexicon_mode), "Lexicon source")
      ->check(CLI::IsMember({"global", "context", "context_backoff_global"}));
  o.option(app, "--renormalize", "decode", "renormalize", to_string(d.renormalize), "Lexicon normalization")
      ->check(CLI::IsMember({"softmax", "none"}));
  o.flag(app, "--no-repetition-fix", "decode", "repetition_fix", false, "Disable phrase-table substitution");
  o.option(app, "--repetition-trigger", "decode", "repetition_trigger", to_string(d.trigger),
           "What counts as a repetition")
      ->check(CLI::IsMember({"output_argmax", "attention_argmax"}));
}

inline void add_lexicon_sources(CLI::App* app, Overrides& o, Args& a) {
  o.option(app, "--lexicon", "paths", "lexicon", std::string(), "Global lexicon TSV");
  o.option(app, "--phrase-table", "paths", "phrase_table", std::string(), "Phrase table TSV");
  app->add_option("--context-src", a.ctx_src, "Training source file(s) for context lexicons");
  app->add_option("--context-tgt", a.ctx_tgt, "Training target file(s) for context lexicons");
}

inline void add_config_flag(CLI::App* app, Args& a) {
  app->add_option("--config", a.config, "JSON run configuration; flags override it");
}

inline void require_path(const std::string& value, const std::string& what) {
  if (value.empty()) throw ValidationError("missing " + what);
}

/// Defaults, then the config file, then explicit flags.
inline RunConfig effective_config(const Args& a, const Overrides& o, nlohmann::json base = to_json(defaults())) {
  if (!a.config.empty()) {
    const RunConfig from_file = load_run_config(a.config);  // strict check
    nlohmann::json file = nlohmann::json::parse(text::read_file(a.config));
    base.merge_patch(file);
    (void)from_file;
  }
  o.apply(base);
  return run_config_from_json(base);
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create directory: " + ec.message());
}

inline void ensure_parent(const std::string& file) {
  const auto parent = std::filesystem::path(file).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline ParallelCorpus load_file_sets(const std::vector<std::string>& src, const std::vector<std::string>& tgt,
                                     TokenizeOptions opts, const std::string& name) {
  if (src.size() != tgt.size()) {
    throw ValidationError(name + ": " + std::to_string(src.size()) + " source files but " +
                          std::to_string(tgt.size()) + " target files");
  }
  std::vector<ParallelCorpus> parts;
  for (std::size_t k = 0; k < src.size(); ++k) parts.push_back(load_parallel(src[k], tgt[k], opts));
  return ParallelCorpus::concat(parts, name);
}

inline std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline LexiconProvider make_provider(const RunConfig& cfg, const Args& a) {
  std::shared_ptr<const Lexicon> global;
  if (!cfg.paths.lexicon.empty()) global = std::make_shared<const Lexicon>(load_lexicon(cfg.paths.lexicon));
  std::shared_ptr<const ParallelCorpus> corpus;
  if (!a.ctx_src.empty() || !a.ctx_tgt.empty()) {
    corpus = std::make_shared<const ParallelCorpus>(
        load_file_sets(a.ctx_src, a.ctx_tgt, cfg.corpus.tokenize(), "context"));
  }
  const auto mode = cfg.decode.lexicon_mode;
  if (mode == LexiconMode::global && !global) throw ValidationError("lexicon mode 'global' needs --lexicon");
  if (mode == LexiconMode::context && !corpus) {
    throw ValidationError("lexicon mode 'context' needs --context-src/--context-tgt");
  }
  if (mode == LexiconMode::context_backoff_global && !global && !corpus) {
    throw ValidationError("lexicon mode 'context_backoff_global' needs --lexicon and/or --context-src/--context-tgt");
  }
  return LexiconProvider(mode, global, corpus, cfg.align.em, cfg.align.max_pairs);
}

inline std::unique_ptr<PhraseTable> load_table(const RunConfig& cfg, std::ostream& err, const char* cmd) {
  if (cfg.paths.phrase_table.empty()) {
    if (cfg.decode.repetition_fix) err << "noov " << cmd << ": no phrase table; repetition fix cannot fire\n";
    return nullptr;
  }
  return std::make_unique<PhraseTable>(load_phrase_table(cfg.paths.phrase_table));
}

inline std::vector<Translation> decode_all(const ModelCheckpoint& m, const std::vector<Sentence>& src,
                                           const LexiconProvider& provider, const PhraseTable* table,
                                           const DecodeConfig& dc, bool greedy, std::size_t threads) {
  if (!greedy) return translate_corpus(m, src, provider, table, dc, threads);
  std::vector<Translation> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].empty()) continue;
    const Lexicon lex = dc.alpha > 0 ? provider.for_sentence(src[i]) : Lexicon{};
    out[i] = greedy_decode(m, src[i], lex, table, dc);
  }
  return out;
}

inline std::vector<Sentence> hypotheses(const std::vector<Translation>& ts) {
  std::vector<Sentence> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(t.tokens);
  return out;
}

inline std::vector<std::size_t> parse_boundaries(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(piece, &used);
      if (used != piece.size() || v <= 0) throw std::invalid_argument(piece);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ValidationError("--buckets: '" + piece + "' is not a positive integer");
    }
  }
  return out;
}

inline nlohmann::json report_json(const BleuReport& r) {
  return {{"bleu", r.bleu},
          {"precisions", r.precisions},
          {"brevity_penalty", r.brevity_penalty},
          {"hyp_length", r.hyp_length},
          {"ref_length", r.ref_length}};
}

// ---- commands -------------------------------------------------------------

inline void cmd_prepare(const Args& a, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_path(cfg.paths.output, "--out");
  if (a.src.size() != 1 || a.tgt.size() != 1) throw ValidationError("prepare takes one --src and one --tgt");
  const auto corpus = load_parallel(a.src[0], a.tgt[0], cfg.corpus.tokenize());
  const auto split = split_corpus(corpus, cfg.corpus.split());
  const auto& dir = cfg.paths.output;
  ensure_dir(dir);
  save_parallel(split.train, join_path(dir, "train.src"), join_path(dir, "train.tgt"));
  save_parallel(split.dev, join_path(dir, "dev.src"), join_path(dir, "dev.tgt"));
  save_parallel(split.test, join_path(dir, "test.src"), join_path(dir, "test.tgt"));
  const auto vs = Vocabulary::build(split.train.source_side());
  const auto vt = Vocabulary::build(split.train.target_side());
  vs.save(join_path(dir, "vocab.src"));
  vt.save(join_path(dir, "vocab.tgt"));
  save_run_config(cfg, join_path(dir, "config.json"));
  out << "train\t" << split.train.size() << "\ndev\t" << split.dev.size() << "\ntest\t" << split.test.size()
      << "\ntest_oov_source\t" << format_g(oov_rate(split.test.source_side(), vs)) << "\ntest_oov_target\t"
      << format_g(oov_rate(split.test.target_side(), vt)) << '\n';
  err << "noov prepare: " << corpus.size() << " pairs written to " << dir << '\n';
}

inline void cmd_align(const Args& a, const RunConfig& cfg, std::ostream& err) {
  require_path(cfg.paths.output, "--out");
  const auto corpus = load_file_sets(a.src, a.tgt, cfg.corpus.tokenize(), "train");
  if (corpus.empty()) throw ValidationError("align needs at least one --src/--tgt pair");
  std::vector<double> ll;
  Lexicon lex = ibm1_em(corpus, cfg.align.em, &ll);
  if (cfg.align.top_k > 0 || cfg.align.min_prob > 0) {
    lex = prune_lexicon(lex, cfg.align.top_k > 0 ? cfg.align.top_k : SIZE_MAX, cfg.align.min_prob);
  }
  for (std::size_t it = 0; it < ll.size(); ++it) {
    err << "noov align: iteration " << it + 1 << " log-likelihood " << format_g(ll[it]) << '\n';
  }
  ensure_parent(cfg.paths.output);
  save_lexicon(lex, cfg.paths.output);
  save_run_config(cfg, cfg.paths.output + ".config.json");
  err << "noov align: " << lex.size() << " source tokens written to " << cfg.paths.output << '\n';
}

inline void cmd_phrasebook(const Args& a, bool inspect, std::ostream& out) {
  const auto table = load_phrase_table(a.table_file);
  if (!inspect) {
    out << table.size() << " entries\n";
    return;
  }
  if (a.trigger.empty()) {
    for (std::size_t id = 0; id < table.size(); ++id) {
      out << id << '\t' << text::join(table.entry(id).source) << '\t' << text::join(table.entry(id).target)
          << '\n';
    }
    return;
  }
  const auto m = find_match(tokenize(a.sentence), a.trigger, table);
  if (!m) {
    out << "no match\n";
    return;
  }
  const auto next = continuation(*m, table);
  out << "entry\t" << m->entry << "\nspan\t" << m->span_begin << '\t' << m->span_end << "\ncontinuation\t"
      << (next ? *next : "-") << '\n';
}

inline void write_training_outputs(const ModelCheckpoint& ck, const RunConfig& cfg, std::ostream& err,
                                   const char* cmd) {
  const auto& dir = cfg.paths.output;
  save_checkpoint(ck, join_path(dir, "model.noov"));
  std::vector<std::string> log{"epoch\ttrain_loss\tdev_loss"};
  for (const auto& h : ck.meta.history) {
    log.push_back(std::to_string(h.epoch) + '\t' + format_g(h.train_loss) + '\t' + format_g(h.dev_loss));
  }
  text::write_lines(join_path(dir, "train_log.tsv"), log);
  save_run_config(cfg, join_path(dir, "config.json"));
  err << "noov " << cmd << ": selected epoch " << ck.meta.epoch << " (dev loss " << format_g(ck.meta.dev_loss)
      << "), wrote " << join_path(dir, "model.noov") << '\n';
}

inline EpochCallback epoch_logger(std::ostream& err, const char* cmd) {
  return [&err, cmd](const EpochLog& l) {
    err << "noov " << cmd << ": epoch " << l.epoch << " train_loss " << format_g(l.train_loss) << " dev_loss "
        << format_g(l.dev_loss) << '\n';
  };
}

inline void cmd_train(const Args& a, const RunConfig& cfg, std::ostream& err) {
  require_path(cfg.paths.output, "--out");
  const auto train_set = load_file_sets(a.src, a.tgt, cfg.corpus.tokenize(), "train");
  const auto dev = load_file_sets(a.dev_src, a.dev_tgt, cfg.corpus.tokenize(), "dev");
  ensure_dir(cfg.paths.output);
  const auto ck = train(train_set, dev, cfg.model, epoch_logger(err, "train"));
  write_training_outputs(ck, cfg, err, "train");
}

inline void cmd_finetune(const Args& a, const ModelCheckpoint& base, const RunConfig& cfg, std::ostream& err) {
  require_path(cfg.paths.output, "--out");
  const auto train_set = load_file_sets(a.src, a.tgt, cfg.corpus.tokenize(), "train");
  const auto dev = load_file_sets(a.dev_src, a.dev_tgt, cfg.corpus.tokenize(), "dev");
  ensure_dir(cfg.paths.output);
  const auto ck = fine_tune(base, train_set, dev, cfg.model, epoch_logger(err, "finetune"));
  write_training_outputs(ck, cfg, err, "finetune");
}

inline void cmd_translate(const Args& a, const RunConfig& cfg, std::ostream& err) {
  require_path(cfg.paths.checkpoint, "--checkpoint");
  require_path(cfg.paths.output, "--output");
  require_path(a.input, "--input");
  const auto model = load_checkpoint(cfg.paths.checkpoint);
  const auto src = load_sentences(a.input, cfg.corpus.tokenize());
  const auto provider = cfg.decode.alpha > 0 ? make_provider(cfg, a) : LexiconProvider::fixed(Lexicon{});
  const auto table = load_table(cfg, err, "translate");
  const std::size_t threads = a.threads > 0 ? a.threads : worker_count();
  const auto ts = decode_all(model, src, provider, table.get(), cfg.decode, a.greedy, threads);
  ensure_parent(cfg.paths.output);
  write_translations(ts, cfg.paths.output);
  if (!a.scores.empty()) {
    ensure_parent(a.scores);
    write_scores(ts, a.scores);
  }
  save_run_config(cfg, cfg.paths.output + ".config.json");
  err << "noov translate: " << ts.size() << " lines written to " << cfg.paths.output << '\n';
}

inline void cmd_evaluate(const Args& a, const RunConfig& cfg, bool buckets_requested, std::ostream& out,
                         std::ostream& err) {
  require_path(a.ref, "--ref");
  if (a.hyps.empty()) throw ValidationError("missing --hyp");
  if (!a.labels.empty() && a.labels.size() != a.hyps.size()) {
    throw ValidationError(std::to_string(a.labels.size()) + " labels for " + std::to_string(a.hyps.size()) +
                          " hypothesis files");
  }
  const bool buckets = buckets_requested || !a.eval_src.empty();
  if (buckets && a.eval_src.empty()) throw ValidationError("--buckets needs --src for source lengths");
  const auto opts = cfg.corpus.tokenize();
  const auto refs = load_sentences(a.ref, opts);
  std::vector<std::size_t> src_lengths;
  if (buckets) {
    for (const auto& s : load_sentences(a.eval_src, opts)) src_lengths.push_back(s.size());
  }
  const auto boundaries = parse_boundaries(a.buckets);
  const auto& dir = cfg.paths.output;
  if (!dir.empty()) ensure_dir(dir);

  std::vector<std::pair<std::string, BleuReport>> runs;
  nlohmann::json report = nlohmann::json::array();
  std::string report_text;
  for (std::size_t k = 0; k < a.hyps.size(); ++k) {
    const std::string label = a.labels.empty() ? (a.hyps.size() == 1 ? "hyp" : "hyp" + std::to_string(k + 1))
                                               : a.labels[k];
    const auto hyps = load_sentences(a.hyps[k], opts);
    const auto r = bleu_corpus(hyps, refs);
    runs.emplace_back(label, r);
    nlohmann::json entry = report_json(r);
    entry["label"] = label;
    std::string line = bleu_report_text(r);
    report_text += a.hyps.size() == 1 ? line : label + ": " + line;
    if (buckets) {
      const auto br = length_bucket_report(hyps, refs, src_lengths, boundaries);
      nlohmann::json bj = nlohmann::json::array();
      for (const auto& b : br.buckets) {
        bj.push_back({{"bucket", b.label()},
                      {"count", b.count},
                      {"report", b.report ? report_json(*b.report) : nlohmann::json(nullptr)}});
      }
      entry["boundaries"] = br.boundaries;
      entry["buckets"] = bj;
      const auto tsv = bucket_report_tsv(br);
      report_text += tsv;
      if (!dir.empty()) {
        const std::string stem = a.hyps.size() == 1 ? "buckets" : "buckets_" + label;
        text::write_file(join_path(dir, stem + ".tsv"), tsv);
        text::write_file(join_path(dir, stem + ".svg"), bucket_report_svg(br));
      }
    }
    report.push_back(entry);
  }
  const auto summary = experiment_summary(runs);
  out << report_text;
  if (a.hyps.size() > 1) out << summary.text;
  if (!dir.empty()) {
    text::write_file(join_path(dir, "bleu.txt"), report_text);
    text::write_file(join_path(dir, "summary.tsv"), summary.tsv);
    text::write_file(join_path(dir, "summary.txt"), summary.text);
    text::write_file(join_path(dir, "report.json"), report.dump(2) + "\n");
    save_run_config(cfg, join_path(dir, "config.json"));
    err << "noov evaluate: reports written to " << dir << '\n';
  }
}

inline void cmd_tune_alpha(const Args& a, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_path(cfg.paths.checkpoint, "--checkpoint");
  if (a.dev_src.size() != 1 || a.dev_tgt.size() != 1) throw ValidationError("tune-alpha takes one --dev-src and one --dev-tgt");
  const auto model = load_checkpoint(cfg.paths.checkpoint);
  const auto src = load_sentences(a.dev_src[0], cfg.corpus.tokenize());
  const auto ref = load_sentences(a.dev_tgt[0], cfg.corpus.tokenize());
  const auto provider = make_provider(cfg, a);
  const auto table = load_table(cfg, err, "tune-alpha");
  const std::size_t threads = a.threads > 0 ? a.threads : worker_count();
  std::vector<std::string> lines{"alpha\tbleu"};
  double best_alpha = 0, best_bleu = -1;
  for (double alpha : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    DecodeConfig dc = cfg.decode;
    dc.alpha = alpha;
    const auto r = bleu_corpus(hypotheses(decode_all(model, src, provider, table.get(), dc, a.greedy, threads)), ref);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f", alpha);
    lines.push_back(std::string(buf) + '\t' + bleu_percent(r.bleu));
    err << "noov tune-alpha: alpha " << buf << " BLEU " << bleu_percent(r.bleu) << '\n';
    if (r.bleu > best_bleu) {
      best_bleu = r.bleu;
      best_alpha = alpha;
    }
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", best_alpha);
  lines.push_back(std::string("best\t") + buf);
  for (const auto& l : lines) out << l << '\n';
  if (!cfg.paths.output.empty()) {
    ensure_parent(cfg.paths.output);
    text::write_lines(cfg.paths.output, lines);
    save_run_config(cfg, cfg.paths.output + ".config.json");
  }
}

}  // namespace detail

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 on success, 1 on a runtime failure, CLI11's code on a usage error.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace detail;
  CLI::App app{"Neural translation with lexicon-biased decoding and phrase-table repair", "noov"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "noov 1.0");

  Args a;
  Overrides o;
  const auto input_files = [&](CLI::App* sub, bool required) {
    auto* s = sub->add_option("--src", a.src, "Source file(s); repeat with --tgt for several sets");
    auto* t = sub->add_option("--tgt", a.tgt, "Target file(s), aligned with --src");
    if (required) {
      s->required();
      t->required();
    }
  };

  auto* prepare = app.add_subcommand("prepare", "Split a parallel corpus into train/dev/test and build vocabularies");
  add_config_flag(prepare, a);
  input_files(prepare, true);
  o.option(prepare, "--out", "paths", "output", std::string(), "Output directory");
  add_corpus_flags(prepare, o);
  add_tokenize_flag(prepare, o);

  auto* align = app.add_subcommand("align", "Estimate a global lexicon with IBM Model 1 EM");
  add_config_flag(align, a);
  input_files(align, true);
  o.option(align, "--out", "paths", "output", std::string(), "Lexicon TSV to write");
  add_align_flags(align, o);
  o.option(align, "--top-k", "align", "top_k", defaults().align.top_k, "Keep the k best targets per row, 0 keeps all");
  o.option(align, "--min-prob", "align", "min_prob", defaults().align.min_prob, "Drop entries below this probability");
  add_tokenize_flag(align, o);

  auto* phrasebook = app.add_subcommand("phrasebook", "Check or query a phrase table");
  phrasebook->require_subcommand(1);
  auto* pb_validate = phrasebook->add_subcommand("validate", "Load a phrase table and report its size");
  pb_validate->add_option("table", a.table_file, "Phrase table TSV")->required();
  auto* pb_inspect = phrasebook->add_subcommand("inspect", "List entries, or show the match for a trigger");
  pb_inspect->add_option("table", a.table_file, "Phrase table TSV")->required();
  pb_inspect->add_option("--trigger", a.trigger, "Target token to look up");
  pb_inspect->add_option("--sentence", a.sentence, "Source sentence to match against");

  auto* train_cmd = app.add_subcommand("train", "Train a model from scratch");
  add_config_flag(train_cmd, a);
  input_files(train_cmd, true);
  train_cmd->add_option("--dev-src", a.dev_src, "Dev source file(s)");
  train_cmd->add_option("--dev-tgt", a.dev_tgt, "Dev target file(s)");
  o.option(train_cmd, "--out", "paths", "output", std::string(), "Output directory");
  add_model_flags(train_cmd, o);
  add_tokenize_flag(train_cmd, o);

  auto* finetune = app.add_subcommand("finetune", "Continue training a checkpoint on new data");
  add_config_flag(finetune, a);
  input_files(finetune, true);
  finetune->add_option("--dev-src", a.dev_src, "Dev source file(s)");
  finetune->add_option("--dev-tgt", a.dev_tgt, "Dev target file(s)");
  o.option(finetune, "--init-checkpoint", "paths", "checkpoint", std::string(), "Checkpoint to start from");
  o.option(finetune, "--out", "paths", "output", std::string(), "Output directory");
  add_model_flags(finetune, o);
  add_tokenize_flag(finetune, o);

  auto* translate = app.add_subcommand("translate", "Translate a file with beam search");
  add_config_flag(translate, a);
  o.option(translate, "--checkpoint", "paths", "checkpoint", std::string(), "Model checkpoint");
  translate->add_option("--input", a.input, "Source sentences, one per line")->required();
  o.option(translate, "--output", "paths", "output", std::string(), "Translation file to write");
  translate->add_option("--scores", a.scores, "Optional TSV of line, score and length");
  translate->add_flag("--greedy", a.greedy, "Greedy decoding instead of beam search");
  translate->add_option("--threads", a.threads, "Decoding workers, 0 for NOOV_THREADS or all cores");
  add_lexicon_sources(translate, o, a);
  add_decode_flags(translate, o, true);
  add_align_flags(translate, o);
  add_tokenize_flag(translate, o);

  auto* evaluate = app.add_subcommand("evaluate", "Corpus BLEU, optionally by source-length bucket");
  add_config_flag(evaluate, a);
  evaluate->add_option("--hyp", a.hyps, "Hypothesis file(s)")->required();
  evaluate->add_option("--label", a.labels, "Label per hypothesis file for the summary table");
  evaluate->add_option("--ref", a.ref, "Reference file")->required();
  evaluate->add_option("--src", a.eval_src, "Source file, needed for length buckets");
  auto* buckets_opt = evaluate->add_option("--buckets", a.buckets, "Comma-separated bucket upper bounds");
  o.option(evaluate, "--out", "paths", "output", std::string(), "Report directory");
  add_tokenize_flag(evaluate, o);

  auto* tune = app.add_subcommand("tune-alpha", "Dev BLEU for alpha in 0, 0.2, ..., 1");
  add_config_flag(tune, a);
  o.option(tune, "--checkpoint", "paths", "checkpoint", std::string(), "Model checkpoint");
  tune->add_option("--dev-src", a.dev_src, "Dev source file")->required();
  tune->add_option("--dev-tgt", a.dev_tgt, "Dev reference file")->required();
  o.option(tune, "--out", "paths", "output", std::string(), "Optional TSV of the sweep");
  tune->add_flag("--greedy", a.greedy, "Greedy decoding instead of beam search");
  tune->add_option("--threads", a.threads, "Decoding workers, 0 for NOOV_THREADS or all cores");
  add_lexicon_sources(tune, o, a);
  add_decode_flags(tune, o, false);
  add_align_flags(tune, o);
  add_tokenize_flag(tune, o);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (prepare->parsed()) {
      cmd_prepare(a, effective_config(a, o), out, err);
    } else if (align->parsed()) {
      cmd_align(a, effective_config(a, o), err);
    } else if (pb_validate->parsed()) {
      cmd_phrasebook(a, false, out);
    } else if (pb_inspect->parsed()) {
      cmd_phrasebook(a, true, out);
    } else if (train_cmd->parsed()) {
      cmd_train(a, effective_config(a, o), err);
    } else if (finetune->parsed()) {
      // The checkpoint's own settings are the baseline for the model section.
      RunConfig probe = effective_config(a, o);
      require_path(probe.paths.checkpoint, "--init-checkpoint");
      const auto base = load_checkpoint(probe.paths.checkpoint);
      nlohmann::json j = to_json(defaults());
      j["model"] = model_config_json(base.config);
      cmd_finetune(a, base, effective_config(a, o, j), err);
    } else if (translate->parsed()) {
      cmd_translate(a, effective_config(a, o), err);
    } else if (evaluate->parsed()) {
      cmd_evaluate(a, effective_config(a, o), buckets_opt->count() > 0, out, err);
    } else if (tune->parsed()) {
      cmd_tune_alpha(a, effective_config(a, o), out, err);
    }
  } catch (const std::exception& e) {
    err << "noov: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace noov::cli
