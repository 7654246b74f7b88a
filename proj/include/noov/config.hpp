#pragma once

#include <cstdint>
#include <set>
#include <string>

#include <json.hpp>

#include "noov/align.hpp"
#include "noov/corpus.hpp"
#include "noov/decode.hpp"
#include "noov/error.hpp"
#include "noov/model.hpp"
#include "noov/text.hpp"

namespace noov {

struct CorpusSettings {
  double test_fraction = 0.2;
  double dev_fraction = 0.1;  // of what remains after the test carve-out
  std::uint64_t seed = 0;
  bool split_punct = false;

  SplitSpec split() const { return {test_fraction, dev_fraction, seed}; }
  TokenizeOptions tokenize() const { return {split_punct}; }
};

struct AlignSettings {
  EmConfig em;
  std::size_t max_pairs = 5000;  // cap on the context sub-corpus
  std::size_t top_k = 0;         // 0 keeps every row entry
  double min_prob = 0.0;
};

struct PathSettings {
  std::string lexicon;
  std::string phrase_table;
  std::string checkpoint;
  std::string output;
};

/// Everything a run can be configured with; serialized as one JSON document.
struct RunConfig {
  CorpusSettings corpus;
  AlignSettings align;
  ModelConfig model;
  DecodeConfig decode;
  PathSettings paths;

  void validate() const {
    if (!(corpus.test_fraction > 0 && corpus.test_fraction < 1) ||
        !(corpus.dev_fraction > 0 && corpus.dev_fraction < 1)) {
      throw ValidationError("corpus fractions must lie strictly between 0 and 1");
    }
    if (align.em.iterations < 1) throw ValidationError("align.iterations must be >= 1");
    if (!(align.em.smoothing >= 0)) throw ValidationError("align.smoothing must be >= 0");
    if (align.max_pairs < 1) throw ValidationError("align.max_pairs must be >= 1");
    if (!(align.min_prob >= 0 && align.min_prob < 1)) throw ValidationError("align.min_prob must lie in [0, 1)");
    model.validate();
    decode.validate();
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {
      {"corpus",
       {{"test_fraction", c.corpus.test_fraction},
        {"dev_fraction", c.corpus.dev_fraction},
        {"seed", c.corpus.seed},
        {"split_punct", c.corpus.split_punct}}},
      {"align",
       {{"iterations", c.align.em.iterations},
        {"smoothing", c.align.em.smoothing},
        {"null_word", c.align.em.null_word},
        {"max_pairs", c.align.max_pairs},
        {"top_k", c.align.top_k},
        {"min_prob", c.align.min_prob}}},
      {"model",
       {{"hidden_size", c.model.hidden_size},
        {"embedding_size", c.model.embedding_size},
        {"layers", c.model.layers},
        {"batch_size", c.model.batch_size},
        {"dropout", c.model.dropout},
        {"grad_clip", c.model.grad_clip},
        {"lr", c.model.lr},
        {"max_epochs", c.model.max_epochs},
        {"patience", c.model.patience},
        {"seed", c.model.seed}}},
      {"decode",
       {{"beam", c.decode.beam_size},
        {"alpha", c.decode.alpha},
        {"max_len", c.decode.max_len},
        {"lexicon_mode", to_string(c.decode.lexicon_mode)},
        {"renormalize", to_string(c.decode.renormalize)},
        {"repetition_fix", c.decode.repetition_fix},
        {"repetition_trigger", to_string(c.decode.trigger)}}},
      {"paths",
       {{"lexicon", c.paths.lexicon},
        {"phrase_table", c.paths.phrase_table},
        {"checkpoint", c.paths.checkpoint},
        {"output", c.paths.output}}},
  };
}

namespace detail {

// Reads known keys of one section; anything else is an error.
class SectionReader {
 public:
  SectionReader(const nlohmann::json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    section_ = &root.at(name);
    if (!section_->is_object()) throw ValidationError("config: '" + name + "' must be an object");
  }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!section_ || !section_->contains(key)) return;
    const auto& v = section_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ValidationError("expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ValidationError("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned()) throw ValidationError("expected a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ValidationError("expected a number");
      } else {
        if (!v.is_string()) throw ValidationError("expected a string");
      }
      out = v.get<T>();
    } catch (const ValidationError& e) {
      throw ValidationError("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    if (!section_) return;
    for (const auto& [key, value] : section_->items()) {
      if (!seen_.count(key)) throw ValidationError("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  const nlohmann::json* section_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Missing keys keep their defaults; unknown keys and wrong types are errors.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  static const std::set<std::string> sections{"corpus", "align", "model", "decode", "paths"};
  for (const auto& [key, value] : j.items()) {
    if (!sections.count(key)) throw ValidationError("config: unknown section '" + key + "'");
  }
  RunConfig c;
  {
    detail::SectionReader r(j, "corpus");
    r.read("test_fraction", c.corpus.test_fraction);
    r.read("dev_fraction", c.corpus.dev_fraction);
    r.read("seed", c.corpus.seed);
    r.read("split_punct", c.corpus.split_punct);
    r.finish();
  }
  {
    detail::SectionReader r(j, "align");
    r.read("iterations", c.align.em.iterations);
    r.read("smoothing", c.align.em.smoothing);
    r.read("null_word", c.align.em.null_word);
    r.read("max_pairs", c.align.max_pairs);
    r.read("top_k", c.align.top_k);
    r.read("min_prob", c.align.min_prob);
    r.finish();
  }
  {
    detail::SectionReader r(j, "model");
    r.read("hidden_size", c.model.hidden_size);
    r.read("embedding_size", c.model.embedding_size);
    r.read("layers", c.model.layers);
    r.read("batch_size", c.model.batch_size);
    r.read("dropout", c.model.dropout);
    r.read("grad_clip", c.model.grad_clip);
    r.read("lr", c.model.lr);
    r.read("max_epochs", c.model.max_epochs);
    r.read("patience", c.model.patience);
    r.read("seed", c.model.seed);
    r.finish();
  }
  {
    detail::SectionReader r(j, "decode");
    std::string mode = to_string(c.decode.lexicon_mode);
    std::string renorm = to_string(c.decode.renormalize);
    std::string trigger = to_string(c.decode.trigger);
    r.read("beam", c.decode.beam_size);
    r.read("alpha", c.decode.alpha);
    r.read("max_len", c.decode.max_len);
    r.read("lexicon_mode", mode);
    r.read("renormalize", renorm);
    r.read("repetition_fix", c.decode.repetition_fix);
    r.read("repetition_trigger", trigger);
    r.finish();
    c.decode.lexicon_mode = parse_lexicon_mode(mode);
    c.decode.renormalize = parse_renormalize(renorm);
    c.decode.trigger = parse_trigger(trigger);
  }
  {
    detail::SectionReader r(j, "paths");
    r.read("lexicon", c.paths.lexicon);
    r.read("phrase_table", c.paths.phrase_table);
    r.read("checkpoint", c.paths.checkpoint);
    r.read("output", c.paths.output);
    r.finish();
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": invalid JSON: " + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void save_run_config(const RunConfig& c, const std::string& path) {
  text::write_file(path, to_json(c).dump(2) + "\n");
}

}  // namespace noov
