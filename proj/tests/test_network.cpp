#include <gtest/gtest.h>

#include <set>

#include "noov/network.hpp"

using namespace noov;
using namespace noov::nn;

namespace {

Architecture tiny_arch(int layers = 2) {
  Architecture a;
  a.source_vocab = 7;
  a.target_vocab = 6;
  a.embedding = 3;
  a.hidden = 3;
  a.layers = layers;
  a.attention = 4;
  return a;
}

Parameters<double> random_params(const Architecture& a, std::uint64_t seed, double scale = 0.5) {
  auto p = Parameters<double>::zeros(a);
  Rng rng(seed);
  for (auto& t : p.tensors()) {
    for (Eigen::Index k = 0; k < t.value->size(); ++k) t.value->data()[k] = rng.uniform(-scale, scale);
  }
  return p;
}

GradCheckResult check_loss(Parameters<double>& p, const SequenceBatch& batch, double dropout = 0.0) {
  auto g = Parameters<double>::zeros(p.arch);
  Rng rng(99);
  sequence_loss<double>(p, batch, dropout, &rng, &g);
  const auto loss = [&] {
    Rng r(99);  // same masks on every evaluation
    return sequence_loss<double>(p, batch, dropout, &r, nullptr).mean();
  };
  return grad_check<double>(p.tensors(), g.tensors(), loss);
}

// Unidirectional single-layer run built from lstm_cell alone.
std::vector<Matrix<double>> run_direction(const LstmWeights<double>& w, const std::vector<Matrix<double>>& xs,
                                          bool reverse) {
  const Eigen::Index H = w.hidden();
  Matrix<double> h = Matrix<double>::Zero(H, 1), c = Matrix<double>::Zero(H, 1);
  std::vector<Matrix<double>> out(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const std::size_t t = reverse ? xs.size() - 1 - k : k;
    std::tie(h, c) = lstm_cell(w, xs[t], h, c);
    out[t] = h;
  }
  return out;
}

}  // namespace

TEST(Parameters, InitIsBoundedWithUnitForgetBias) {
  auto p = Parameters<float>::zeros(tiny_arch());
  Rng rng(1);
  p.init(rng, 0.1);
  const Eigen::Index H = p.arch.hidden;
  for (auto& t : p.tensors()) {
    EXPECT_LE(t.value->cwiseAbs().maxCoeff(), 1.0f) << t.name;
    if (t.name.ends_with(".b") && (t.name.starts_with("enc.") || t.name.starts_with("dec."))) {
      EXPECT_TRUE(t.value->middleRows(H, H).isOnes()) << t.name;
      EXPECT_TRUE(t.value->topRows(H).isZero()) << t.name;
    } else if (t.name.ends_with(".b")) {
      EXPECT_TRUE(t.value->isZero()) << t.name;
    } else {
      EXPECT_LE(t.value->cwiseAbs().maxCoeff(), 0.1f) << t.name;
    }
  }
  EXPECT_TRUE(p.all_finite());
  auto q = Parameters<float>::zeros(tiny_arch());
  Rng same(1);
  q.init(same, 0.1);
  EXPECT_EQ(p.out_w, q.out_w);
}

TEST(Parameters, TensorNamesAreUniqueAndOrdered) {
  auto p = Parameters<double>::zeros(tiny_arch());
  const auto t = p.tensors();
  EXPECT_EQ(t.front().name, "src_emb");
  EXPECT_EQ(t.back().name, "out.b");
  std::set<std::string> names;
  for (const auto& r : t) names.insert(r.name);
  EXPECT_EQ(names.size(), t.size());
}

TEST(Encoder, MatchesManualBidirectionalStack) {
  const auto a = tiny_arch();
  const auto p = random_params(a, 3);
  const std::vector<int> ids{4, 5, 6, 4};
  const auto enc = encoder_forward<double>(p, {ids}, 0.0, nullptr);
  std::vector<Matrix<double>> xs;
  for (int id : ids) xs.push_back(p.src_emb.row(id).transpose());
  for (int l = 0; l < a.layers; ++l) {
    const auto fw = run_direction(p.enc_fwd[static_cast<std::size_t>(l)], xs, false);
    const auto bw = run_direction(p.enc_bwd[static_cast<std::size_t>(l)], xs, true);
    EXPECT_TRUE(enc.final_fwd[static_cast<std::size_t>(l)].isApprox(fw.back(), 1e-14));
    EXPECT_TRUE(enc.final_bwd[static_cast<std::size_t>(l)].isApprox(bw.front(), 1e-14));
    for (std::size_t t = 0; t < xs.size(); ++t) {
      xs[t].resize(2 * a.hidden, 1);
      xs[t] << fw[t], bw[t];
    }
  }
  for (std::size_t t = 0; t < ids.size(); ++t) {
    EXPECT_TRUE(enc.states[t].isApprox(xs[t], 1e-14)) << t;
    EXPECT_TRUE(enc.proj[t].isApprox(p.att_enc * xs[t], 1e-14)) << t;
  }
}

TEST(Encoder, ForwardDirectionIsCausal) {
  const auto a = tiny_arch(1);
  const auto p = random_params(a, 4);
  const auto e1 = encoder_forward<double>(p, {{4, 5, 6}}, 0.0, nullptr);
  const auto e2 = encoder_forward<double>(p, {{4, 5, 1}}, 0.0, nullptr);
  const Eigen::Index H = a.hidden;
  for (std::size_t t = 0; t < 2; ++t) {
    EXPECT_EQ(e1.states[t].topRows(H), e2.states[t].topRows(H)) << t;
  }
  EXPECT_NE(e1.states[2].topRows(H), e2.states[2].topRows(H));
  // The backward direction at position 0 sees the future.
  EXPECT_NE(e1.states[0].bottomRows(H), e2.states[0].bottomRows(H));
}

TEST(Encoder, PaddingDoesNotLeakIntoShorterSentences) {
  const auto a = tiny_arch();
  const auto p = random_params(a, 5);
  const std::vector<int> s1{4, 5}, s2{6, 4, 5, 6};
  const auto alone = encoder_forward<double>(p, {s1}, 0.0, nullptr);
  const auto batch = encoder_forward<double>(p, {s1, s2}, 0.0, nullptr);
  for (std::size_t t = 0; t < s1.size(); ++t) {
    EXPECT_TRUE(batch.states[t].col(0).isApprox(alone.states[t].col(0), 1e-13)) << t;
  }
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_TRUE(batch.final_fwd[l].col(0).isApprox(alone.final_fwd[l].col(0), 1e-13));
    EXPECT_TRUE(batch.final_bwd[l].col(0).isApprox(alone.final_bwd[l].col(0), 1e-13));
  }
  EXPECT_EQ(batch.mask(3, 0), 0.0);
  EXPECT_EQ(batch.mask(3, 1), 1.0);
  EXPECT_THROW(encoder_forward<double>(p, {{}}, 0.0, nullptr), ShapeError);
}

TEST(Attention, SingleTokenSourceGetsAllWeight) {
  const auto p = random_params(tiny_arch(), 6);
  const auto enc = bilstm_encode(p, {5});
  const Vector<double> h = Vector<double>::Constant(3, 0.2), e = Vector<double>::Constant(3, -0.1);
  const auto att = attention_scores(p, enc, h, e);
  ASSERT_EQ(att.size(), 1);
  EXPECT_DOUBLE_EQ(att[0], 1.0);
}

TEST(Attention, MaskedPositionsGetZeroWeight) {
  const auto p = random_params(tiny_arch(), 7);
  const auto enc = encoder_forward<double>(p, {{4}, {4, 5, 6}}, 0.0, nullptr);
  const auto st = bridge(p, enc);
  const auto r = decoder_step(p, enc, st, {Vocabulary::kBos, Vocabulary::kBos});
  EXPECT_DOUBLE_EQ(r.att(0, 0), 1.0);
  EXPECT_EQ(r.att(1, 0), 0.0);
  EXPECT_NEAR(r.att.col(1).sum(), 1.0, 1e-14);
}

TEST(DecoderStep, DistributionSumsToOne) {
  const auto p = random_params(tiny_arch(), 8);
  const auto enc = bilstm_encode(p, {4, 5, 6});
  auto st = bridge(p, enc);
  int prev = Vocabulary::kBos;
  for (int step = 0; step < 4; ++step) {
    auto r = decoder_step(p, enc, st, {prev});
    EXPECT_NEAR(r.probs.sum(), 1.0, 1e-12);
    EXPECT_TRUE((r.probs.array() > 0).all());
    EXPECT_NEAR(r.att.sum(), 1.0, 1e-12);
    r.probs.col(0).maxCoeff(&prev);
    st = std::move(r.next);
  }
}

TEST(DecoderStep, BroadcastMatchesSingleColumn) {
  const auto p = random_params(tiny_arch(), 9);
  const auto enc = bilstm_encode(p, {4, 6});
  const auto st = bridge(p, enc);
  const auto one = decoder_step(p, enc, st, {Vocabulary::kBos});
  DecoderState<double> st3;
  for (std::size_t l = 0; l < st.h.size(); ++l) {
    st3.h.push_back(st.h[l].replicate(1, 3));
    st3.c.push_back(st.c[l].replicate(1, 3));
  }
  const auto three = decoder_step(p, broadcast(enc, 3), st3, {Vocabulary::kBos, Vocabulary::kBos, Vocabulary::kBos});
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_TRUE(three.probs.col(k).isApprox(one.probs.col(0), 1e-14));
}

TEST(DecoderStep, RejectsMismatchedBatch) {
  const auto p = random_params(tiny_arch(), 10);
  const auto enc = bilstm_encode(p, {4});
  const auto st = bridge(p, enc);
  EXPECT_THROW(decoder_step(p, enc, st, {1, 1}), ShapeError);
  EXPECT_THROW(decoder_step(p, enc, st, {99}), ShapeError);
}

TEST(GradCheck, OneDecodeStepWithAttention) {
  auto p = random_params(tiny_arch(), 12);
  const auto r = check_loss(p, {{{4, 5, 6}}, {{3}}});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_tensor << "[" << r.worst_index << "]";
  EXPECT_LT(r.max_abs_error, 1e-8);
}

TEST(GradCheck, TwoTokenPairEndToEnd) {
  auto p = random_params(tiny_arch(), 13);
  const auto r = check_loss(p, {{{4, 5}}, {{4, 2}}});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_tensor << "[" << r.worst_index << "]";
  EXPECT_LT(r.max_abs_error, 1e-8);
}

TEST(GradCheck, PaddedBatchWithDropout) {
  auto p = random_params(tiny_arch(), 14);
  const auto r = check_loss(p, {{{4, 5, 6}, {6}}, {{5, 4, 2}, {3, 2}}}, 0.3);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_tensor << "[" << r.worst_index << "]";
  EXPECT_LT(r.max_abs_error, 1e-8);
}

TEST(GradCheck, SingleLayerModel) {
  auto p = random_params(tiny_arch(1), 15);
  const auto r = check_loss(p, {{{6, 4}}, {{5, 5, 2}}});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_tensor << "[" << r.worst_index << "]";
  EXPECT_LT(r.max_abs_error, 1e-8);
}

TEST(SequenceLoss, CountsTokensAndMatchesStepProbabilities) {
  const auto p = random_params(tiny_arch(), 16);
  std::vector<Matrix<double>> probs;
  const auto l = sequence_loss<double>(p, {{{4, 5}, {6}}, {{3, 2}, {2}}}, 0.0, nullptr, nullptr, &probs);
  EXPECT_EQ(l.tokens, 3u);
  ASSERT_EQ(probs.size(), 2u);
  const double expect = -std::log(probs[0](3, 0)) - std::log(probs[1](2, 0)) - std::log(probs[0](2, 1));
  EXPECT_NEAR(l.nll, expect, 1e-12);
}
