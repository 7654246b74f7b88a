#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "noov/corpus.hpp"
#include "noov/neural.hpp"

namespace noov::nn {

struct Architecture {
  int source_vocab = 0;
  int target_vocab = 0;
  int embedding = 128;
  int hidden = 128;
  int layers = 2;
  int attention = 128;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Every trainable tensor of the encoder-decoder. The same type doubles as
/// the gradient accumulator.
template <class Real>
struct Parameters {
  Architecture arch;
  Matrix<Real> src_emb;  // |Vs| x E
  Matrix<Real> tgt_emb;  // |Vt| x E
  std::vector<LstmWeights<Real>> enc_fwd, enc_bwd;  // per layer
  std::vector<Matrix<Real>> bridge_w;               // per layer, H x 2H
  std::vector<Matrix<Real>> bridge_b;               // per layer, H x 1
  Matrix<Real> att_enc;  // A x 2H
  Matrix<Real> att_dec;  // A x H
  Matrix<Real> att_emb;  // A x E
  Matrix<Real> att_b;    // A x 1
  Matrix<Real> att_v;    // A x 1
  std::vector<LstmWeights<Real>> dec;  // layer 0 reads [embedding; context]
  Matrix<Real> out_w;  // |Vt| x H
  Matrix<Real> out_b;  // |Vt| x 1

  static Parameters zeros(const Architecture& a) {
    if (a.source_vocab <= 0 || a.target_vocab <= 0 || a.embedding <= 0 || a.hidden <= 0 ||
        a.layers <= 0 || a.attention <= 0) {
      throw ShapeError("architecture sizes must be positive");
    }
    const Eigen::Index E = a.embedding, H = a.hidden, A = a.attention;
    Parameters p;
    p.arch = a;
    p.src_emb = Matrix<Real>::Zero(a.source_vocab, E);
    p.tgt_emb = Matrix<Real>::Zero(a.target_vocab, E);
    for (int l = 0; l < a.layers; ++l) {
      const Eigen::Index in = l == 0 ? E : 2 * H;
      p.enc_fwd.push_back(LstmWeights<Real>::zeros(in, H));
      p.enc_bwd.push_back(LstmWeights<Real>::zeros(in, H));
      p.bridge_w.push_back(Matrix<Real>::Zero(H, 2 * H));
      p.bridge_b.push_back(Matrix<Real>::Zero(H, 1));
      p.dec.push_back(LstmWeights<Real>::zeros(l == 0 ? E + 2 * H : H, H));
    }
    p.att_enc = Matrix<Real>::Zero(A, 2 * H);
    p.att_dec = Matrix<Real>::Zero(A, H);
    p.att_emb = Matrix<Real>::Zero(A, E);
    p.att_b = Matrix<Real>::Zero(A, 1);
    p.att_v = Matrix<Real>::Zero(A, 1);
    p.out_w = Matrix<Real>::Zero(a.target_vocab, H);
    p.out_b = Matrix<Real>::Zero(a.target_vocab, 1);
    return p;
  }

  /// All tensors in a fixed order; this order is the checkpoint layout.
  std::vector<TensorRef<Real>> tensors() {
    std::vector<TensorRef<Real>> t;
    t.push_back({"src_emb", &src_emb});
    t.push_back({"tgt_emb", &tgt_emb});
    const auto lstm = [&](const std::string& prefix, LstmWeights<Real>& w) {
      t.push_back({prefix + ".wx", &w.wx});
      t.push_back({prefix + ".wh", &w.wh});
      t.push_back({prefix + ".b", &w.b});
    };
    for (std::size_t l = 0; l < enc_fwd.size(); ++l) {
      lstm("enc." + std::to_string(l) + ".fwd", enc_fwd[l]);
      lstm("enc." + std::to_string(l) + ".bwd", enc_bwd[l]);
    }
    for (std::size_t l = 0; l < bridge_w.size(); ++l) {
      t.push_back({"bridge." + std::to_string(l) + ".w", &bridge_w[l]});
      t.push_back({"bridge." + std::to_string(l) + ".b", &bridge_b[l]});
    }
    t.push_back({"att.enc", &att_enc});
    t.push_back({"att.dec", &att_dec});
    t.push_back({"att.emb", &att_emb});
    t.push_back({"att.b", &att_b});
    t.push_back({"att.v", &att_v});
    for (std::size_t l = 0; l < dec.size(); ++l) lstm("dec." + std::to_string(l), dec[l]);
    t.push_back({"out.w", &out_w});
    t.push_back({"out.b", &out_b});
    return t;
  }

  /// Weights uniform in [-scale, scale], biases zero except LSTM forget
  /// gates (+1). Draws in tensor order, row-major within each tensor.
  void init(Rng& rng, double scale = 0.1) {
    for (auto& t : tensors()) {
      const bool bias = t.name.ends_with(".b") || t.name == "out.b";
      if (!bias) {
        for (Eigen::Index k = 0; k < t.value->size(); ++k) {
          t.value->data()[k] = static_cast<Real>(rng.uniform(-scale, scale));
        }
        continue;
      }
      t.value->setZero();
      const bool lstm_bias = t.name.starts_with("enc.") || t.name.starts_with("dec.");
      if (lstm_bias) {
        const Eigen::Index H = arch.hidden;
        t.value->middleRows(H, H).setConstant(Real(1));
      }
    }
  }

  void set_zero() {
    for (auto& t : tensors()) t.value->setZero();
  }

  template <class To>
  Parameters<To> cast() const {
    Parameters self = *this;
    Parameters<To> out = Parameters<To>::zeros(arch);
    auto src = self.tensors();
    auto dst = out.tensors();
    for (std::size_t k = 0; k < src.size(); ++k) *dst[k].value = src[k].value->template cast<To>();
    return out;
  }

  bool all_finite() const {
    Parameters self = *this;
    for (auto& t : self.tensors()) {
      if (!t.value->allFinite()) return false;
    }
    return true;
  }
};

template <class Real>
Matrix<Real> embed(const Matrix<Real>& table, const std::vector<int>& ids) {
  Matrix<Real> out(table.cols(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t b = 0; b < ids.size(); ++b) {
    if (ids[b] < 0 || ids[b] >= table.rows()) {
      throw ShapeError("token id " + std::to_string(ids[b]) + " outside embedding table of " +
                       std::to_string(table.rows()) + " rows");
    }
    out.col(static_cast<Eigen::Index>(b)) = table.row(ids[b]).transpose();
  }
  return out;
}

template <class Real>
void scatter_rows(Matrix<Real>& table_grad, const std::vector<int>& ids, const Matrix<Real>& d) {
  for (std::size_t b = 0; b < ids.size(); ++b) {
    table_grad.row(ids[b]) += d.col(static_cast<Eigen::Index>(b)).transpose();
  }
}

/// h = m * h_new + (1 - m) * h_old, with m a 1 x B row of 0/1.
template <class Real>
Matrix<Real> blend(const Matrix<Real>& fresh, const Matrix<Real>& old, const Matrix<Real>& m) {
  Matrix<Real> out = fresh;
  out.array().rowwise() *= m.array().row(0);
  Matrix<Real> keep = old;
  keep.array().rowwise() *= (Real(1) - m.array()).row(0);
  return out + keep;
}

template <class Real>
Matrix<Real> scale_columns(const Matrix<Real>& x, const Matrix<Real>& row) {
  Matrix<Real> out = x;
  out.array().rowwise() *= row.array().row(0);
  return out;
}

/// Encoder states for one batch. `states[t]` is [h_fwd_t ; h_bwd_t] of the
/// top layer; `proj[t]` is the attention projection of that state.
template <class Real>
struct EncoderOutput {
  std::vector<Matrix<Real>> states;  // T entries, 2H x B
  std::vector<Matrix<Real>> proj;    // T entries, A x B
  Matrix<Real> mask;                 // T x B, 1 on real positions
  std::vector<Matrix<Real>> final_fwd, final_bwd;  // per layer, H x B

  Eigen::Index length() const { return static_cast<Eigen::Index>(states.size()); }
  Eigen::Index batch() const { return mask.cols(); }
};

template <class Real>
struct EncoderCache {
  std::vector<std::vector<int>> ids;  // [t][b], PAD beyond each length
  std::vector<std::vector<Matrix<Real>>> drop;  // [layer][t], empty when no dropout
  std::vector<std::vector<LstmCache<Real>>> fwd, bwd;  // [layer][t]
};

/// Stacked bidirectional LSTM over a padded batch. Forward states freeze
/// past each sentence end; backward states start from zero at each end.
template <class Real>
EncoderOutput<Real> encoder_forward(const Parameters<Real>& p,
                                    const std::vector<std::vector<int>>& batch, double dropout_p,
                                    Rng* rng, EncoderCache<Real>* cache = nullptr) {
  if (batch.empty()) throw ShapeError("encoder: empty batch");
  std::size_t T = 0;
  for (const auto& s : batch) {
    if (s.empty()) throw ShapeError("encoder: empty input sequence");
    T = std::max(T, s.size());
  }
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index H = p.arch.hidden;
  const int L = p.arch.layers;
  const bool drop = dropout_p > 0 && rng != nullptr;

  std::vector<std::vector<int>> ids(T, std::vector<int>(batch.size(), Vocabulary::kPad));
  EncoderOutput<Real> out;
  out.mask = Matrix<Real>::Zero(static_cast<Eigen::Index>(T), B);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t t = 0; t < batch[b].size(); ++t) {
      ids[t][b] = batch[b][t];
      out.mask(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b)) = Real(1);
    }
  }
  if (cache) {
    cache->ids = ids;
    cache->drop.assign(static_cast<std::size_t>(L), {});
    cache->fwd.assign(static_cast<std::size_t>(L), std::vector<LstmCache<Real>>(T));
    cache->bwd.assign(static_cast<std::size_t>(L), std::vector<LstmCache<Real>>(T));
  }

  std::vector<Matrix<Real>> inputs(T);
  for (std::size_t t = 0; t < T; ++t) inputs[t] = embed(p.src_emb, ids[t]);

  for (int l = 0; l < L; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    if (l > 0 && drop) {
      for (std::size_t t = 0; t < T; ++t) {
        Matrix<Real> m = dropout_mask<Real>(inputs[t].rows(), B, dropout_p, *rng);
        inputs[t] = inputs[t].cwiseProduct(m);
        if (cache) cache->drop[ul].push_back(std::move(m));
      }
    }
    std::vector<Matrix<Real>> hf(T), hb(T);
    Matrix<Real> h = Matrix<Real>::Zero(H, B), c = Matrix<Real>::Zero(H, B);
    for (std::size_t t = 0; t < T; ++t) {
      const Matrix<Real> m = out.mask.row(static_cast<Eigen::Index>(t));
      auto [hn, cn] = lstm_cell(p.enc_fwd[ul], inputs[t], h, c, cache ? &cache->fwd[ul][t] : nullptr);
      h = blend(hn, h, m);
      c = blend(cn, c, m);
      hf[t] = h;
    }
    h.setZero();
    c.setZero();
    for (std::size_t t = T; t-- > 0;) {
      const Matrix<Real> m = out.mask.row(static_cast<Eigen::Index>(t));
      auto [hn, cn] = lstm_cell(p.enc_bwd[ul], inputs[t], h, c, cache ? &cache->bwd[ul][t] : nullptr);
      h = blend(hn, h, m);
      c = blend(cn, c, m);
      hb[t] = h;
    }
    out.final_fwd.push_back(hf[T - 1]);
    out.final_bwd.push_back(hb[0]);
    for (std::size_t t = 0; t < T; ++t) {
      inputs[t].resize(2 * H, B);
      inputs[t] << hf[t], hb[t];
    }
  }
  out.states = std::move(inputs);
  for (const auto& s : out.states) out.proj.push_back(p.att_enc * s);
  return out;
}

/// Gradients w.r.t. the top-layer states and the per-layer final states
/// flow back into the encoder weights and source embeddings.
template <class Real>
void encoder_backward(const Parameters<Real>& p, const EncoderOutput<Real>& enc,
                      const EncoderCache<Real>& cache, std::vector<Matrix<Real>> d_states,
                      const std::vector<Matrix<Real>>& d_final_fwd,
                      const std::vector<Matrix<Real>>& d_final_bwd, Parameters<Real>& g) {
  const std::size_t T = d_states.size();
  const Eigen::Index H = p.arch.hidden;
  const Eigen::Index B = enc.batch();
  for (int l = p.arch.layers; l-- > 0;) {
    const auto ul = static_cast<std::size_t>(l);
    std::vector<Matrix<Real>> d_in(T);
    const auto run = [&](const LstmWeights<Real>& w, const std::vector<LstmCache<Real>>& steps,
                         LstmWeights<Real>& gw, bool forward_dir) {
      Matrix<Real> dh_carry = Matrix<Real>::Zero(H, B), dc_carry = Matrix<Real>::Zero(H, B);
      for (std::size_t k = 0; k < T; ++k) {
        const std::size_t t = forward_dir ? T - 1 - k : k;
        const Matrix<Real> m = enc.mask.row(static_cast<Eigen::Index>(t));
        Matrix<Real> dh = dh_carry + (forward_dir ? d_states[t].topRows(H) : d_states[t].bottomRows(H));
        if (forward_dir && t == T - 1) dh += d_final_fwd[ul];
        if (!forward_dir && t == 0) dh += d_final_bwd[ul];
        const Matrix<Real>& dc = dc_carry;
        const Matrix<Real> inv = Matrix<Real>::Ones(1, B) - m;
        auto [dx, dhp, dcp] = lstm_cell_backward(w, steps[t], scale_columns(dh, m),
                                                 scale_columns(dc, m), gw);
        dh_carry = dhp + scale_columns(dh, inv);
        dc_carry = dcp + scale_columns(dc, inv);
        if (d_in[t].size() == 0) {
          d_in[t] = std::move(dx);
        } else {
          d_in[t] += dx;
        }
      }
    };
    run(p.enc_fwd[ul], cache.fwd[ul], g.enc_fwd[ul], true);
    run(p.enc_bwd[ul], cache.bwd[ul], g.enc_bwd[ul], false);
    if (l > 0) {
      for (std::size_t t = 0; t < T; ++t) {
        d_states[t] = cache.drop[ul].empty() ? d_in[t] : d_in[t].cwiseProduct(cache.drop[ul][t]);
      }
    } else {
      for (std::size_t t = 0; t < T; ++t) scatter_rows(g.src_emb, cache.ids[t], d_in[t]);
    }
  }
}

/// Per-layer recurrent state of the decoder; one column per hypothesis.
template <class Real>
struct DecoderState {
  std::vector<Matrix<Real>> h, c;
};

template <class Real>
struct BridgeCache {
  std::vector<Matrix<Real>> input, output;
};

/// Initial decoder state: h_l = tanh(W_l [h_fwd_last ; h_bwd_first] + b_l),
/// c_l = 0, using encoder layer l for decoder layer l.
template <class Real>
DecoderState<Real> bridge(const Parameters<Real>& p, const EncoderOutput<Real>& enc,
                          BridgeCache<Real>* cache = nullptr) {
  DecoderState<Real> s;
  const Eigen::Index H = p.arch.hidden;
  for (std::size_t l = 0; l < p.dec.size(); ++l) {
    Matrix<Real> in(2 * H, enc.batch());
    in << enc.final_fwd[l], enc.final_bwd[l];
    Matrix<Real> z = p.bridge_w[l] * in;
    z.colwise() += p.bridge_b[l].col(0);
    Matrix<Real> h = z.array().tanh().matrix();
    s.c.push_back(Matrix<Real>::Zero(H, enc.batch()));
    if (cache) {
      cache->input.push_back(std::move(in));
      cache->output.push_back(h);
    }
    s.h.push_back(std::move(h));
  }
  return s;
}

template <class Real>
std::pair<std::vector<Matrix<Real>>, std::vector<Matrix<Real>>> bridge_backward(
    const Parameters<Real>& p, const BridgeCache<Real>& cache, const DecoderState<Real>& d,
    Parameters<Real>& g) {
  const Eigen::Index H = p.arch.hidden;
  std::vector<Matrix<Real>> d_fwd, d_bwd;
  for (std::size_t l = 0; l < p.dec.size(); ++l) {
    const Matrix<Real>& h = cache.output[l];
    Matrix<Real> dz = d.h[l].cwiseProduct(
        (Matrix<Real>::Ones(h.rows(), h.cols()) - h.cwiseProduct(h)));
    g.bridge_w[l].noalias() += dz * cache.input[l].transpose();
    g.bridge_b[l] += dz.rowwise().sum();
    Matrix<Real> din = p.bridge_w[l].transpose() * dz;
    d_fwd.push_back(din.topRows(H));
    d_bwd.push_back(din.bottomRows(H));
  }
  return {std::move(d_fwd), std::move(d_bwd)};
}

/// Additive attention: e_j = v' tanh(W_enc h_j + W_dec h_prev + W_emb w_prev + b),
/// softmax over real positions. Returns T x B weights; fills `pre` with the
/// tanh activations when given.
template <class Real>
Matrix<Real> attend(const Parameters<Real>& p, const EncoderOutput<Real>& enc,
                    const Matrix<Real>& h_prev, const Matrix<Real>& w_prev_embedding,
                    std::vector<Matrix<Real>>* pre = nullptr) {
  const Eigen::Index T = enc.length(), B = enc.batch();
  expect_shape(h_prev, p.arch.hidden, B, "attention decoder state");
  expect_shape(w_prev_embedding, p.arch.embedding, B, "attention previous-word embedding");
  Matrix<Real> q = p.att_dec * h_prev + p.att_emb * w_prev_embedding;
  q.colwise() += p.att_b.col(0);
  Matrix<Real> att(T, B);
  if (pre) pre->clear();
  for (Eigen::Index t = 0; t < T; ++t) {
    Matrix<Real> a = (enc.proj[static_cast<std::size_t>(t)] + q).array().tanh().matrix();
    att.row(t) = p.att_v.transpose() * a;
    if (pre) pre->push_back(std::move(a));
  }
  for (Eigen::Index b = 0; b < B; ++b) {
    Real mx = -std::numeric_limits<Real>::infinity();
    for (Eigen::Index t = 0; t < T; ++t) {
      if (enc.mask(t, b) > 0) mx = std::max(mx, att(t, b));
    }
    Real total = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
      att(t, b) = enc.mask(t, b) > 0 ? std::exp(att(t, b) - mx) : Real(0);
      total += att(t, b);
    }
    att.col(b) /= total;
  }
  return att;
}

template <class Real>
struct StepCache {
  std::vector<int> prev;
  Matrix<Real> e, h_top_prev;
  std::vector<Matrix<Real>> pre;
  Matrix<Real> att, u, u_drop;
  std::vector<LstmCache<Real>> lstm;
  std::vector<Matrix<Real>> drop;  // per layer (index 0 unused)
  Matrix<Real> h_top, probs;
};

template <class Real>
struct StepResult {
  Matrix<Real> probs;  // |Vt| x B
  Matrix<Real> att;    // T x B
  DecoderState<Real> next;
};

/// One decoder step: attention over the encoder, context u = sum_j att_j h_j,
/// stacked LSTM on [w_prev ; u], softmax over the target vocabulary.
template <class Real>
StepResult<Real> decoder_step(const Parameters<Real>& p, const EncoderOutput<Real>& enc,
                              const DecoderState<Real>& state, const std::vector<int>& prev,
                              double dropout_p = 0, Rng* rng = nullptr,
                              StepCache<Real>* cache = nullptr) {
  const Eigen::Index B = static_cast<Eigen::Index>(prev.size());
  const Eigen::Index H = p.arch.hidden, E = p.arch.embedding;
  const int L = p.arch.layers;
  if (enc.batch() != B) {
    throw ShapeError("decoder: encoder batch " + std::to_string(enc.batch()) + " != " +
                     std::to_string(B) + " previous tokens");
  }
  if (state.h.size() != static_cast<std::size_t>(L) || state.c.size() != static_cast<std::size_t>(L)) {
    throw ShapeError("decoder: state has the wrong number of layers");
  }
  const bool drop = dropout_p > 0 && rng != nullptr;

  Matrix<Real> e = embed(p.tgt_emb, prev);
  std::vector<Matrix<Real>> pre;
  Matrix<Real> att = attend(p, enc, state.h.back(), e, cache ? &pre : nullptr);
  Matrix<Real> u = Matrix<Real>::Zero(2 * H, B);
  for (Eigen::Index t = 0; t < enc.length(); ++t) {
    Matrix<Real> s = enc.states[static_cast<std::size_t>(t)];
    s.array().rowwise() *= att.array().row(t);
    u += s;
  }
  Matrix<Real> u_drop;
  Matrix<Real> x(E + 2 * H, B);
  if (drop) {
    u_drop = dropout_mask<Real>(2 * H, B, dropout_p, *rng);
    x << e, u.cwiseProduct(u_drop);
  } else {
    x << e, u;
  }

  StepResult<Real> r;
  std::vector<LstmCache<Real>> lstm(cache ? static_cast<std::size_t>(L) : 0);
  std::vector<Matrix<Real>> drops(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    if (l > 0 && drop) {
      drops[ul] = dropout_mask<Real>(x.rows(), B, dropout_p, *rng);
      x = x.cwiseProduct(drops[ul]);
    }
    auto [h, c] = lstm_cell(p.dec[ul], x, state.h[ul], state.c[ul], cache ? &lstm[ul] : nullptr);
    r.next.h.push_back(h);
    r.next.c.push_back(std::move(c));
    x = std::move(h);
  }
  r.probs = p.out_w * x;
  r.probs.colwise() += p.out_b.col(0);
  softmax_columns(r.probs);
  r.att = att;
  if (cache) {
    *cache = {prev,  std::move(e), state.h.back(), std::move(pre), std::move(att), std::move(u),
              std::move(u_drop), std::move(lstm), std::move(drops), std::move(x), r.probs};
  }
  return r;
}

/// Backward of decoder_step given d(loss)/d(logits) and the gradient
/// arriving from the next step. Accumulates encoder-side gradients into
/// `d_states` / `d_proj` and returns the gradient w.r.t. the input state.
template <class Real>
DecoderState<Real> decoder_step_backward(const Parameters<Real>& p, const EncoderOutput<Real>& enc,
                                         const StepCache<Real>& k, const Matrix<Real>& dlogits,
                                         const DecoderState<Real>& d_next, Parameters<Real>& g,
                                         std::vector<Matrix<Real>>& d_states,
                                         std::vector<Matrix<Real>>& d_proj) {
  const Eigen::Index E = p.arch.embedding;
  const int L = p.arch.layers;
  g.out_w.noalias() += dlogits * k.h_top.transpose();
  g.out_b += dlogits.rowwise().sum();
  Matrix<Real> dh_above = p.out_w.transpose() * dlogits;

  DecoderState<Real> d_prev;
  d_prev.h.resize(static_cast<std::size_t>(L));
  d_prev.c.resize(static_cast<std::size_t>(L));
  Matrix<Real> dx0;
  for (int l = L; l-- > 0;) {
    const auto ul = static_cast<std::size_t>(l);
    Matrix<Real> dh = d_next.h[ul] + dh_above;
    auto [dx, dhp, dcp] = lstm_cell_backward(p.dec[ul], k.lstm[ul], dh, d_next.c[ul], g.dec[ul]);
    d_prev.h[ul] = std::move(dhp);
    d_prev.c[ul] = std::move(dcp);
    if (l > 0) {
      dh_above = k.drop[ul].size() ? dx.cwiseProduct(k.drop[ul]) : dx;
    } else {
      dx0 = std::move(dx);
    }
  }
  Matrix<Real> de = dx0.topRows(E);
  Matrix<Real> du = dx0.bottomRows(dx0.rows() - E);
  if (k.u_drop.size()) du = du.cwiseProduct(k.u_drop);

  const Eigen::Index T = enc.length();
  Matrix<Real> datt(T, du.cols());
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    datt.row(t) = enc.states[ut].cwiseProduct(du).colwise().sum();
    Matrix<Real> ds = du;
    ds.array().rowwise() *= k.att.array().row(t);
    d_states[ut] += ds;
  }
  Matrix<Real> weighted = k.att.cwiseProduct(datt);
  Matrix<Real> ds = weighted;
  ds -= scale_columns(k.att, Matrix<Real>(weighted.colwise().sum()));

  Matrix<Real> dq = Matrix<Real>::Zero(p.arch.attention, du.cols());
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const Matrix<Real>& pre = k.pre[ut];
    g.att_v.noalias() += pre * ds.row(t).transpose();
    Matrix<Real> dz = (p.att_v * ds.row(t)).cwiseProduct(
        Matrix<Real>::Ones(pre.rows(), pre.cols()) - pre.cwiseProduct(pre));
    d_proj[ut] += dz;
    dq += dz;
  }
  g.att_dec.noalias() += dq * k.h_top_prev.transpose();
  d_prev.h.back() += p.att_dec.transpose() * dq;
  g.att_emb.noalias() += dq * k.e.transpose();
  de += p.att_emb.transpose() * dq;
  g.att_b += dq.rowwise().sum();
  scatter_rows(g.tgt_emb, k.prev, de);
  return d_prev;
}

/// Teacher-forced batch: targets exclude BOS and end with EOS.
struct SequenceBatch {
  std::vector<std::vector<int>> source;
  std::vector<std::vector<int>> target;
};

struct LossResult {
  double nll = 0;
  std::size_t tokens = 0;
  double mean() const { return tokens ? nll / static_cast<double>(tokens) : 0.0; }
};

/// Summed negative log-likelihood of the batch. With `grads`, also runs the
/// backward pass for the mean per-token loss and accumulates into it.
/// `step_probs`, when given, receives the |Vt| x B distribution of every step.
template <class Real>
LossResult sequence_loss(const Parameters<Real>& p, const SequenceBatch& batch, double dropout_p,
                         Rng* rng, Parameters<Real>* grads,
                         std::vector<Matrix<Real>>* step_probs = nullptr) {
  if (batch.source.empty() || batch.source.size() != batch.target.size()) {
    throw ShapeError("sequence_loss: empty batch or source/target count mismatch");
  }
  const std::size_t B = batch.source.size();
  std::size_t Tt = 0;
  for (const auto& t : batch.target) {
    if (t.empty()) throw ShapeError("sequence_loss: empty target sequence");
    Tt = std::max(Tt, t.size());
  }

  EncoderCache<Real> ec;
  const EncoderOutput<Real> enc = encoder_forward(p, batch.source, dropout_p, rng, grads ? &ec : nullptr);
  BridgeCache<Real> bc;
  DecoderState<Real> state = bridge(p, enc, grads ? &bc : nullptr);

  LossResult loss;
  std::vector<StepCache<Real>> steps(grads ? Tt : 0);
  std::vector<int> prev(B, Vocabulary::kBos);
  if (step_probs) step_probs->clear();
  for (std::size_t t = 0; t < Tt; ++t) {
    auto r = decoder_step(p, enc, state, prev, dropout_p, rng, grads ? &steps[t] : nullptr);
    for (std::size_t b = 0; b < B; ++b) {
      const auto& tgt = batch.target[b];
      if (t < tgt.size()) {
        loss.nll -= std::log(static_cast<double>(r.probs(tgt[t], static_cast<Eigen::Index>(b))));
        ++loss.tokens;
        prev[b] = tgt[t];
      } else {
        prev[b] = Vocabulary::kPad;
      }
    }
    if (step_probs) step_probs->push_back(r.probs);
    state = std::move(r.next);
  }
  if (!grads) return loss;

  const Real scale = Real(1) / static_cast<Real>(loss.tokens);
  const Eigen::Index H = p.arch.hidden, A = p.arch.attention;
  const Eigen::Index Bi = static_cast<Eigen::Index>(B);
  std::vector<Matrix<Real>> d_states(enc.states.size(), Matrix<Real>::Zero(2 * H, Bi));
  std::vector<Matrix<Real>> d_proj(enc.states.size(), Matrix<Real>::Zero(A, Bi));
  DecoderState<Real> d_next;
  for (int l = 0; l < p.arch.layers; ++l) {
    d_next.h.push_back(Matrix<Real>::Zero(H, Bi));
    d_next.c.push_back(Matrix<Real>::Zero(H, Bi));
  }
  for (std::size_t t = Tt; t-- > 0;) {
    Matrix<Real> dlogits = steps[t].probs;
    for (std::size_t b = 0; b < B; ++b) {
      const auto& tgt = batch.target[b];
      const auto bi = static_cast<Eigen::Index>(b);
      if (t < tgt.size()) {
        dlogits(tgt[t], bi) -= Real(1);
      } else {
        dlogits.col(bi).setZero();
      }
    }
    dlogits *= scale;
    d_next = decoder_step_backward(p, enc, steps[t], dlogits, d_next, *grads, d_states, d_proj);
  }
  auto [d_fwd, d_bwd] = bridge_backward(p, bc, d_next, *grads);
  for (std::size_t t = 0; t < enc.states.size(); ++t) {
    grads->att_enc.noalias() += d_proj[t] * enc.states[t].transpose();
    d_states[t].noalias() += p.att_enc.transpose() * d_proj[t];
  }
  encoder_backward(p, enc, ec, std::move(d_states), d_fwd, d_bwd, *grads);
  return loss;
}

/// Single-sentence encoder pass (no dropout).
template <class Real>
EncoderOutput<Real> bilstm_encode(const Parameters<Real>& p, const std::vector<int>& ids) {
  if (ids.empty()) throw ShapeError("encoder: empty input sequence");
  return encoder_forward<Real>(p, {ids}, 0.0, nullptr, nullptr);
}

/// Attention weights of a single-sentence encoding for one decoder state.
template <class Real>
Vector<Real> attention_scores(const Parameters<Real>& p, const EncoderOutput<Real>& enc,
                              const Vector<Real>& h_prev, const Vector<Real>& w_prev_embedding) {
  Matrix<Real> h = h_prev;
  Matrix<Real> e = w_prev_embedding;
  return attend(p, enc, h, e).col(0);
}

/// Replicates a single-sentence encoding across `k` columns (one per
/// beam hypothesis).
template <class Real>
EncoderOutput<Real> broadcast(const EncoderOutput<Real>& enc, Eigen::Index k) {
  if (enc.batch() != 1) throw ShapeError("broadcast expects a single-sentence encoding");
  EncoderOutput<Real> out;
  const auto rep = [k](const Matrix<Real>& m) { return Matrix<Real>(m.replicate(1, k)); };
  for (const auto& s : enc.states) out.states.push_back(rep(s));
  for (const auto& s : enc.proj) out.proj.push_back(rep(s));
  out.mask = rep(enc.mask);
  for (const auto& s : enc.final_fwd) out.final_fwd.push_back(rep(s));
  for (const auto& s : enc.final_bwd) out.final_bwd.push_back(rep(s));
  return out;
}

}  // namespace noov::nn
