#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "noov/corpus.hpp"
#include "noov/network.hpp"

namespace noov {

struct ModelConfig {
  int hidden_size = 128;
  int embedding_size = 128;
  int layers = 2;
  int batch_size = 32;
  double dropout = 0.2;
  double grad_clip = 5.0;
  double lr = 0.001;
  int max_epochs = 100;
  int patience = 5;
  std::uint64_t seed = 1;

  void validate() const {
    if (hidden_size <= 0 || embedding_size <= 0 || layers <= 0 || batch_size <= 0) {
      throw ValidationError("model sizes must be positive");
    }
    if (!(dropout >= 0 && dropout < 1)) throw ValidationError("dropout must lie in [0, 1)");
    if (!(grad_clip > 0) || !(lr > 0)) throw ValidationError("grad_clip and lr must be positive");
    if (max_epochs < 0 || patience < 0) throw ValidationError("max_epochs and patience must be >= 0");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double dev_loss = 0;
};

struct TrainingMeta {
  int epoch = 0;  // epoch of the selected parameters (0 = initial)
  double dev_loss = std::numeric_limits<double>::infinity();
  std::vector<EpochLog> history;
};

/// Everything needed to translate: configuration, both vocabularies and
/// the (32-bit) parameters.
struct ModelCheckpoint {
  ModelConfig config;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  nn::Parameters<float> params;
  TrainingMeta meta;
};

inline nn::Architecture architecture_for(const ModelConfig& cfg, const Vocabulary& src,
                                         const Vocabulary& tgt) {
  nn::Architecture a;
  a.source_vocab = static_cast<int>(src.size());
  a.target_vocab = static_cast<int>(tgt.size());
  a.embedding = cfg.embedding_size;
  a.hidden = cfg.hidden_size;
  a.layers = cfg.layers;
  a.attention = cfg.hidden_size;
  return a;
}

/// A corpus converted to ids: sources without bounds, targets ending in EOS.
struct EncodedCorpus {
  std::vector<std::vector<int>> source;
  std::vector<std::vector<int>> target;
  std::size_t size() const { return source.size(); }
};

inline EncodedCorpus encode_corpus(const ParallelCorpus& c, const Vocabulary& src,
                                   const Vocabulary& tgt) {
  EncodedCorpus out;
  for (const auto& p : c.pairs) {
    out.source.push_back(encode_sentence(p.source, src, false).ids);
    auto t = encode_sentence(p.target, tgt, false).ids;
    t.push_back(Vocabulary::kEos);
    out.target.push_back(std::move(t));
  }
  return out;
}

inline nn::SequenceBatch make_batch(const EncodedCorpus& c, const std::vector<std::size_t>& rows) {
  nn::SequenceBatch b;
  for (auto r : rows) {
    b.source.push_back(c.source[r]);
    b.target.push_back(c.target[r]);
  }
  return b;
}

/// Batches of up to `batch_size` rows, grouped by source length after a
/// seeded shuffle; batch order is shuffled again.
inline std::vector<std::vector<std::size_t>> make_batches(const EncodedCorpus& c,
                                                          std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(c.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return c.source[a].size() < c.source[b].size();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  rng.shuffle(batches);
  return batches;
}

/// Mean per-token NLL over a corpus, without dropout.
template <class Real>
double corpus_loss(const nn::Parameters<Real>& p, const EncodedCorpus& c, std::size_t batch_size) {
  nn::LossResult total;
  for (std::size_t i = 0; i < c.size(); i += batch_size) {
    std::vector<std::size_t> rows;
    for (std::size_t r = i; r < std::min(c.size(), i + batch_size); ++r) rows.push_back(r);
    const auto l = nn::sequence_loss<Real>(p, make_batch(c, rows), 0.0, nullptr, nullptr);
    total.nll += l.nll;
    total.tokens += l.tokens;
  }
  return total.mean();
}

/// Owns parameters and optimizer state for teacher-forced training.
class Trainer {
 public:
  Trainer(const ModelConfig& cfg, nn::Parameters<float> params)
      : cfg_(cfg),
        params_(std::move(params)),
        grads_(nn::Parameters<float>::zeros(params_.arch)),
        adam_(nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8}),
        rng_(cfg.seed ^ 0x9E3779B97F4A7C15ull) {}

  /// One optimizer update on a batch; returns the mean per-token loss
  /// before the update.
  double train_step(const nn::SequenceBatch& batch) {
    if (batch.source.empty()) throw ValidationError("train_step: empty batch");
    grads_.set_zero();
    const auto loss = nn::sequence_loss<float>(params_, batch, cfg_.dropout, &rng_, &grads_);
    nn::clip_gradients(grads_.tensors(), cfg_.grad_clip);
    adam_.step(params_.tensors(), grads_.tensors());
    return loss.mean();
  }

  /// One pass over the corpus; returns the token-weighted mean loss.
  double train_epoch(const EncodedCorpus& c) {
    double nll = 0;
    double tokens = 0;
    for (const auto& rows : make_batches(c, static_cast<std::size_t>(cfg_.batch_size), rng_)) {
      const auto batch = make_batch(c, rows);
      double n = 0;
      for (const auto& t : batch.target) n += static_cast<double>(t.size());
      nll += train_step(batch) * n;
      tokens += n;
    }
    return tokens > 0 ? nll / tokens : 0.0;
  }

  const nn::Parameters<float>& params() const { return params_; }
  Rng& rng() { return rng_; }

 private:
  ModelConfig cfg_;
  nn::Parameters<float> params_;
  nn::Parameters<float> grads_;
  nn::Adam<float> adam_;
  Rng rng_;
};

using EpochCallback = std::function<void(const EpochLog&)>;

namespace detail {

/// Shared epoch loop. Epoch 0 is the starting point; it only competes for
/// selection when `include_initial` is set (fine-tuning).
inline ModelCheckpoint run_training(ModelCheckpoint start, const ParallelCorpus& train,
                                    const ParallelCorpus& dev, const ModelConfig& cfg,
                                    bool include_initial, const EpochCallback& on_epoch) {
  const EncodedCorpus tr = encode_corpus(train, start.source_vocab, start.target_vocab);
  const EncodedCorpus dv = encode_corpus(dev, start.source_vocab, start.target_vocab);
  const std::size_t eval_batch = static_cast<std::size_t>(cfg.batch_size);
  const auto select_loss = [&](const nn::Parameters<float>& p) {
    return dv.size() ? corpus_loss(p, dv, eval_batch) : corpus_loss(p, tr, eval_batch);
  };

  ModelCheckpoint best = start;
  best.config = cfg;
  best.meta = {};
  if (include_initial) {
    best.meta.epoch = 0;
    best.meta.dev_loss = select_loss(start.params);
  }
  Trainer trainer(cfg, std::move(start.params));
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = trainer.train_epoch(tr);
    log.dev_loss = select_loss(trainer.params());
    best.meta.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.dev_loss < best.meta.dev_loss) {
      best.params = trainer.params();
      best.meta.dev_loss = log.dev_loss;
      best.meta.epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }
  return best;
}

}  // namespace detail

/// Trains from scratch. Vocabularies come from the training corpus (all
/// words kept). Stops after `max_epochs` or `patience` epochs without a
/// dev-loss improvement and returns the best-dev parameters.
inline ModelCheckpoint train(const ParallelCorpus& train_set, const ParallelCorpus& dev,
                             const ModelConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("training corpus is empty");
  ModelCheckpoint ck;
  ck.config = cfg;
  ck.source_vocab = Vocabulary::build(train_set.source_side(), 1);
  ck.target_vocab = Vocabulary::build(train_set.target_side(), 1);
  ck.params = nn::Parameters<float>::zeros(architecture_for(cfg, ck.source_vocab, ck.target_vocab));
  Rng init_rng(cfg.seed);
  ck.params.init(init_rng);
  // Without a single finished epoch there is nothing to select from.
  ModelConfig run_cfg = cfg;
  run_cfg.max_epochs = std::max(1, cfg.max_epochs);
  return detail::run_training(std::move(ck), train_set, dev, run_cfg, false, on_epoch);
}

/// Continues training a checkpoint on new data with a fresh optimizer.
/// Vocabularies are kept; unseen words map to UNK. The starting parameters
/// take part in best-dev selection, so zero epochs return them unchanged.
inline ModelCheckpoint fine_tune(const ModelCheckpoint& ck, const ParallelCorpus& train_set,
                                 const ParallelCorpus& dev, const ModelConfig& cfg,
                                 const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("fine-tuning corpus is empty");
  if (cfg.hidden_size != ck.config.hidden_size || cfg.layers != ck.config.layers ||
      cfg.embedding_size != ck.config.embedding_size) {
    throw ValidationError("fine-tuning config changes the architecture of the checkpoint");
  }
  return detail::run_training(ck, train_set, dev, cfg, true, on_epoch);
}

}  // namespace noov

namespace noov {

/// Single-sentence encoding with the checkpoint's parameters.
inline nn::EncoderOutput<float> encode(const ModelCheckpoint& m, const std::vector<int>& src_ids) {
  return nn::bilstm_encode(m.params, src_ids);
}

inline nn::DecoderState<float> initial_state(const ModelCheckpoint& m,
                                             const nn::EncoderOutput<float>& enc) {
  return nn::bridge(m.params, enc);
}

struct DecodeStep {
  std::vector<double> distribution;  // over the target vocabulary
  std::vector<double> attention;     // over source positions
  nn::DecoderState<float> state;
};

/// One inference step for a single hypothesis.
inline DecodeStep decode_step(const ModelCheckpoint& m, const nn::DecoderState<float>& state,
                              int prev_token, const nn::EncoderOutput<float>& enc) {
  auto r = nn::decoder_step(m.params, enc, state, {prev_token});
  DecodeStep out;
  out.distribution.assign(r.probs.data(), r.probs.data() + r.probs.size());
  out.attention.assign(r.att.data(), r.att.data() + r.att.size());
  out.state = std::move(r.next);
  return out;
}

}  // namespace noov
