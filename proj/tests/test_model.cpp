#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "noov/model.hpp"

using namespace noov;

namespace {

ParallelCorpus toy_corpus(std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> src{"a", "b", "c", "d", "e", "f"};
  const std::vector<std::string> tgt{"A", "B", "C", "D", "E", "F"};
  Rng rng(seed);
  ParallelCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    const auto len = 1 + rng.index(4);
    Sentence s, t;
    for (std::size_t k = 0; k < len; ++k) {
      const auto w = rng.index(6);
      s.push_back(src[w]);
      t.push_back(tgt[w]);
    }
    c.add(s, t);
  }
  return c;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.hidden_size = 8;
  cfg.embedding_size = 8;
  cfg.layers = 1;
  cfg.batch_size = 4;
  cfg.dropout = 0.0;
  cfg.max_epochs = 3;
  cfg.patience = 5;
  cfg.seed = 11;
  return cfg;
}

bool same_params(const nn::Parameters<float>& a, const nn::Parameters<float>& b) {
  auto& ma = const_cast<nn::Parameters<float>&>(a);
  auto& mb = const_cast<nn::Parameters<float>&>(b);
  const auto ta = ma.tensors(), tb = mb.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t k = 0; k < ta.size(); ++k) {
    if (*ta[k].value != *tb[k].value) return false;
  }
  return true;
}

}  // namespace

TEST(ModelConfig, ValidateRejectsBadValues) {
  EXPECT_NO_THROW(ModelConfig{}.validate());
  auto c = ModelConfig{};
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = ModelConfig{};
  c.hidden_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = ModelConfig{};
  c.lr = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = ModelConfig{};
  c.patience = -1;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(EncodeCorpus, TargetsEndInEosAndUnknownsMapToUnk) {
  const auto c = toy_corpus(5, 1);
  const auto sv = Vocabulary::build(c.source_side());
  const auto tv = Vocabulary::build(c.target_side());
  ParallelCorpus extra = c;
  extra.add({"zzz"}, {"ZZZ"});
  const auto e = encode_corpus(extra, sv, tv);
  ASSERT_EQ(e.size(), 6u);
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_EQ(e.target[i].back(), Vocabulary::kEos);
    EXPECT_EQ(e.source[i].size(), extra.pairs[i].source.size());
  }
  EXPECT_EQ(e.source[5], std::vector<int>{Vocabulary::kUnk});
  EXPECT_EQ(e.target[5], (std::vector<int>{Vocabulary::kUnk, Vocabulary::kEos}));
}

TEST(MakeBatches, CoverEveryRowOnceWithinSize) {
  const auto c = toy_corpus(23, 2);
  const auto sv = Vocabulary::build(c.source_side());
  const auto tv = Vocabulary::build(c.target_side());
  const auto e = encode_corpus(c, sv, tv);
  Rng rng(3);
  const auto batches = make_batches(e, 5, rng);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) {
    EXPECT_LE(b.size(), 5u);
    EXPECT_FALSE(b.empty());
    seen.insert(b.begin(), b.end());
  }
  EXPECT_EQ(seen.size(), 23u);
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 23u);
  Rng again(3);
  EXPECT_EQ(make_batches(e, 5, again), batches);
}

TEST(Training, InitialLossIsNearLogVocabulary) {
  const auto c = toy_corpus(30, 4);
  ModelCheckpoint ck;
  ck.source_vocab = Vocabulary::build(c.source_side());
  ck.target_vocab = Vocabulary::build(c.target_side());
  ModelConfig cfg = small_config();
  cfg.hidden_size = 32;
  cfg.embedding_size = 32;
  cfg.layers = 2;
  ck.params = nn::Parameters<float>::zeros(architecture_for(cfg, ck.source_vocab, ck.target_vocab));
  Rng rng(5);
  ck.params.init(rng);
  const double loss = corpus_loss(ck.params, encode_corpus(c, ck.source_vocab, ck.target_vocab), 8);
  const double expect = std::log(static_cast<double>(ck.target_vocab.size()));
  EXPECT_NEAR(loss, expect, 0.1 * expect);
}

TEST(Training, IsDeterministicForAFixedSeed) {
  const auto tr = toy_corpus(20, 6), dv = toy_corpus(6, 7);
  auto cfg = small_config();
  cfg.dropout = 0.2;
  const auto a = train(tr, dv, cfg);
  const auto b = train(tr, dv, cfg);
  EXPECT_TRUE(same_params(a.params, b.params));
  ASSERT_EQ(a.meta.history.size(), b.meta.history.size());
  for (std::size_t k = 0; k < a.meta.history.size(); ++k) {
    EXPECT_EQ(a.meta.history[k].train_loss, b.meta.history[k].train_loss);
    EXPECT_EQ(a.meta.history[k].dev_loss, b.meta.history[k].dev_loss);
  }
  cfg.seed = 12;
  EXPECT_FALSE(same_params(train(tr, dv, cfg).params, a.params));
}

TEST(Training, LossDecreasesOnAToyMapping) {
  const auto tr = toy_corpus(40, 8);
  auto cfg = small_config();
  cfg.hidden_size = 32;
  cfg.embedding_size = 32;
  cfg.lr = 0.01;
  cfg.max_epochs = 40;
  std::vector<double> losses;
  const auto ck = train(tr, tr, cfg, [&](const EpochLog& l) { losses.push_back(l.train_loss); });
  ASSERT_EQ(losses.size(), 40u);
  EXPECT_GT(losses.front(), 1.0);
  EXPECT_LT(losses.back(), 0.1);
  EXPECT_EQ(ck.meta.history.size(), 40u);
  EXPECT_GE(ck.meta.epoch, 1);
  double best = 1e300;
  for (const auto& h : ck.meta.history) best = std::min(best, h.dev_loss);
  EXPECT_EQ(ck.meta.dev_loss, best);
}

TEST(Training, PatienceZeroStopsAfterOneEpoch) {
  auto cfg = small_config();
  cfg.patience = 0;
  cfg.max_epochs = 10;
  const auto ck = train(toy_corpus(10, 9), toy_corpus(4, 10), cfg);
  EXPECT_EQ(ck.meta.history.size(), 1u);
  EXPECT_EQ(ck.meta.epoch, 1);
}

TEST(Training, ZeroMaxEpochsStillRunsOneEpoch) {
  auto cfg = small_config();
  cfg.max_epochs = 0;
  const auto ck = train(toy_corpus(10, 9), toy_corpus(4, 10), cfg);
  EXPECT_EQ(ck.meta.history.size(), 1u);
}

TEST(Training, EmptyCorpusIsRejected) {
  EXPECT_THROW(train(ParallelCorpus{}, ParallelCorpus{}, small_config()), ValidationError);
}

TEST(Training, EmptyDevFallsBackToTrainingLoss) {
  auto cfg = small_config();
  cfg.max_epochs = 2;
  const auto ck = train(toy_corpus(10, 9), ParallelCorpus{}, cfg);
  EXPECT_TRUE(std::isfinite(ck.meta.dev_loss));
}

TEST(FineTune, ZeroEpochsReturnsStartingParameters) {
  const auto base = train(toy_corpus(20, 11), toy_corpus(5, 12), small_config());
  auto cfg = small_config();
  cfg.max_epochs = 0;
  const auto ft = fine_tune(base, toy_corpus(10, 13), toy_corpus(5, 14), cfg);
  EXPECT_TRUE(same_params(ft.params, base.params));
  EXPECT_EQ(ft.meta.epoch, 0);
  EXPECT_TRUE(ft.meta.history.empty());
  EXPECT_EQ(ft.source_vocab.tokens(), base.source_vocab.tokens());
}

TEST(FineTune, InitialParametersCompeteForSelection) {
  const auto tr = toy_corpus(20, 15);
  auto cfg = small_config();
  cfg.max_epochs = 20;
  cfg.lr = 0.01;
  const auto base = train(tr, tr, cfg);
  // A huge learning rate ruins the model; the starting point must win.
  auto bad = cfg;
  bad.lr = 5.0;
  bad.max_epochs = 2;
  bad.patience = 2;
  const auto ft = fine_tune(base, tr, tr, bad);
  ASSERT_EQ(ft.meta.history.size(), 2u);
  if (ft.meta.epoch == 0) {
    EXPECT_TRUE(same_params(ft.params, base.params));
  }
  for (const auto& h : ft.meta.history) EXPECT_GE(h.dev_loss, ft.meta.dev_loss);
}

TEST(FineTune, RejectsArchitectureChange) {
  const auto base = train(toy_corpus(10, 16), toy_corpus(3, 17), small_config());
  auto cfg = small_config();
  cfg.hidden_size = 16;
  EXPECT_THROW(fine_tune(base, toy_corpus(5, 18), toy_corpus(3, 19), cfg), ValidationError);
  cfg = small_config();
  cfg.layers = 2;
  EXPECT_THROW(fine_tune(base, toy_corpus(5, 18), toy_corpus(3, 19), cfg), ValidationError);
}

TEST(FineTune, KeepsVocabularyAndMapsNewWordsToUnk) {
  const auto base = train(toy_corpus(10, 20), toy_corpus(3, 21), small_config());
  ParallelCorpus novel;
  novel.add({"never", "seen"}, {"NEVER"});
  const auto ft = fine_tune(base, novel, novel, small_config());
  EXPECT_EQ(ft.target_vocab.tokens(), base.target_vocab.tokens());
  EXPECT_FALSE(ft.source_vocab.contains("never"));
}

TEST(DecodeStep, ProducesDistributionAndAttention) {
  const auto ck = train(toy_corpus(10, 22), toy_corpus(3, 23), small_config());
  const std::vector<int> src{4, 5, 4};
  const auto enc = encode(ck, src);
  auto st = initial_state(ck, enc);
  int prev = Vocabulary::kBos;
  for (int step = 0; step < 3; ++step) {
    const auto r = decode_step(ck, st, prev, enc);
    ASSERT_EQ(r.distribution.size(), ck.target_vocab.size());
    ASSERT_EQ(r.attention.size(), src.size());
    double s = 0, a = 0;
    for (double p : r.distribution) s += p;
    for (double p : r.attention) a += p;
    EXPECT_NEAR(s, 1.0, 1e-5);
    EXPECT_NEAR(a, 1.0, 1e-5);
    prev = static_cast<int>(std::max_element(r.distribution.begin(), r.distribution.end()) -
                            r.distribution.begin());
    st = r.state;
  }
}
