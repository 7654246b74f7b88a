#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "noov/error.hpp"
#include "noov/random.hpp"

namespace noov::nn {

/// Row-major dense matrix. Batched activations keep one example per column.
template <class Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Real>
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <class M>
void expect_shape(const M& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + shape_str(rows, cols) + ", got " +
                     shape_str(m.rows(), m.cols()));
  }
}

template <class Real>
Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

template <class Derived>
auto sigmoid_array(const Eigen::ArrayBase<Derived>& a) {
  using Real = typename Derived::Scalar;
  return (Real(1) + (-a).exp()).inverse();
}

/// Numerically stable softmax of a vector.
template <class Real>
Vector<Real> softmax(std::span<const Real> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  Real mx = logits[0];
  for (Real v : logits) mx = std::max(mx, v);
  Vector<Real> out(static_cast<Eigen::Index>(logits.size()));
  Real total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = std::exp(logits[i] - mx);
    total += out[static_cast<Eigen::Index>(i)];
  }
  return out / total;
}

/// Column-wise softmax, in place.
template <class Real>
void softmax_columns(Matrix<Real>& m) {
  for (Eigen::Index b = 0; b < m.cols(); ++b) {
    const Real mx = m.col(b).maxCoeff();
    m.col(b) = (m.col(b).array() - mx).exp().matrix();
    m.col(b) /= m.col(b).sum();
  }
}

/// Negative log-probability of `target` under a distribution.
template <class Real>
Real cross_entropy(std::span<const Real> probs, std::size_t target) {
  if (target >= probs.size()) throw ShapeError("cross_entropy target out of range");
  return -std::log(probs[target]);
}

/// Inverted-dropout mask: entries are 0 with probability p, else 1/(1-p).
/// p == 0 yields all ones and draws nothing from the generator.
template <class Real>
Matrix<Real> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  if (!(p >= 0 && p < 1)) throw Error("dropout rate must lie in [0, 1)");
  Matrix<Real> m = Matrix<Real>::Ones(rows, cols);
  if (p == 0) return m;
  const Real keep = static_cast<Real>(1.0 / (1.0 - p));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform() < p ? Real(0) : keep;
  }
  return m;
}

template <class Real>
Matrix<Real> dropout(const Matrix<Real>& x, double p, Rng& rng) {
  return x.cwiseProduct(dropout_mask<Real>(x.rows(), x.cols(), p, rng));
}

/// Gate order inside the stacked weights: input, forget, candidate, output.
template <class Real>
struct LstmWeights {
  Matrix<Real> wx;  // 4H x input
  Matrix<Real> wh;  // 4H x H
  Matrix<Real> b;   // 4H x 1

  Eigen::Index hidden() const { return wh.cols(); }
  Eigen::Index input() const { return wx.cols(); }

  static LstmWeights zeros(Eigen::Index input, Eigen::Index hidden) {
    return {Matrix<Real>::Zero(4 * hidden, input), Matrix<Real>::Zero(4 * hidden, hidden),
            Matrix<Real>::Zero(4 * hidden, 1)};
  }
};

template <class Real>
struct LstmCache {
  Matrix<Real> x, h_prev, c_prev;
  Matrix<Real> i, f, g, o;
  Matrix<Real> c, tanh_c, h;
};

/// One LSTM step over a batch (columns). Returns (h', c'); fills `cache`
/// when the backward pass is needed.
template <class Real>
std::pair<Matrix<Real>, Matrix<Real>> lstm_cell(const LstmWeights<Real>& w, const Matrix<Real>& x,
                                                const Matrix<Real>& h, const Matrix<Real>& c,
                                                LstmCache<Real>* cache = nullptr) {
  const Eigen::Index H = w.hidden();
  expect_shape(w.wx, 4 * H, x.rows(), "lstm input weights");
  expect_shape(w.b, 4 * H, 1, "lstm bias");
  expect_shape(h, H, x.cols(), "lstm hidden state");
  expect_shape(c, H, x.cols(), "lstm cell state");

  Matrix<Real> gates = w.wx * x + w.wh * h;
  gates.colwise() += w.b.col(0);
  Matrix<Real> i = sigmoid_array(gates.topRows(H).array()).matrix();
  Matrix<Real> f = sigmoid_array(gates.middleRows(H, H).array()).matrix();
  Matrix<Real> g = gates.middleRows(2 * H, H).array().tanh().matrix();
  Matrix<Real> o = sigmoid_array(gates.bottomRows(H).array()).matrix();
  Matrix<Real> c_new = f.cwiseProduct(c) + i.cwiseProduct(g);
  Matrix<Real> tanh_c = c_new.array().tanh().matrix();
  Matrix<Real> h_new = o.cwiseProduct(tanh_c);
  if (cache) {
    *cache = {x, h, c, std::move(i), std::move(f), std::move(g), std::move(o), c_new, tanh_c, h_new};
  }
  return {std::move(h_new), std::move(c_new)};
}

/// Backward of lstm_cell. Accumulates weight gradients into `grad` and
/// returns gradients for (x, h_prev, c_prev).
template <class Real>
std::tuple<Matrix<Real>, Matrix<Real>, Matrix<Real>> lstm_cell_backward(
    const LstmWeights<Real>& w, const LstmCache<Real>& k, const Matrix<Real>& dh,
    const Matrix<Real>& dc, LstmWeights<Real>& grad) {
  const Eigen::Index H = w.hidden();
  const auto one = [](const Matrix<Real>& m) { return Matrix<Real>::Ones(m.rows(), m.cols()); };
  Matrix<Real> dc_total =
      dc + dh.cwiseProduct(k.o).cwiseProduct(one(k.tanh_c) - k.tanh_c.cwiseProduct(k.tanh_c));
  Matrix<Real> dgates(4 * H, dh.cols());
  dgates.topRows(H) = dc_total.cwiseProduct(k.g).cwiseProduct(k.i.cwiseProduct(one(k.i) - k.i));
  dgates.middleRows(H, H) =
      dc_total.cwiseProduct(k.c_prev).cwiseProduct(k.f.cwiseProduct(one(k.f) - k.f));
  dgates.middleRows(2 * H, H) =
      dc_total.cwiseProduct(k.i).cwiseProduct(one(k.g) - k.g.cwiseProduct(k.g));
  dgates.bottomRows(H) =
      dh.cwiseProduct(k.tanh_c).cwiseProduct(k.o.cwiseProduct(one(k.o) - k.o));

  grad.wx.noalias() += dgates * k.x.transpose();
  grad.wh.noalias() += dgates * k.h_prev.transpose();
  grad.b += dgates.rowwise().sum();
  Matrix<Real> dx = w.wx.transpose() * dgates;
  Matrix<Real> dh_prev = w.wh.transpose() * dgates;
  Matrix<Real> dc_prev = dc_total.cwiseProduct(k.f);
  return {std::move(dx), std::move(dh_prev), std::move(dc_prev)};
}

/// A named view of one trainable tensor.
template <class Real>
struct TensorRef {
  std::string name;
  Matrix<Real>* value;
};

template <class Real>
double global_norm(const std::vector<TensorRef<Real>>& grads) {
  double sq = 0;
  for (const auto& g : grads) sq += g.value->template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

/// Rescales the gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <class Real>
double clip_gradients(const std::vector<TensorRef<Real>>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0) {
    const Real scale = static_cast<Real>(max_norm / norm);
    for (const auto& g : grads) *g.value *= scale;
  }
  return norm;
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments.
template <class Real>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  long step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  void step(const std::vector<TensorRef<Real>>& params, const std::vector<TensorRef<Real>>& grads) {
    if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Matrix<Real>::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(Matrix<Real>::Zero(p.value->rows(), p.value->cols()));
      }
    }
    if (m_.size() != params.size()) throw ShapeError("adam: parameter set changed between steps");
    ++step_;
    const Real b1 = static_cast<Real>(cfg_.beta1);
    const Real b2 = static_cast<Real>(cfg_.beta2);
    const Real corr1 = static_cast<Real>(1.0 - std::pow(cfg_.beta1, static_cast<double>(step_)));
    const Real corr2 = static_cast<Real>(1.0 - std::pow(cfg_.beta2, static_cast<double>(step_)));
    const Real lr = static_cast<Real>(cfg_.lr);
    const Real eps = static_cast<Real>(cfg_.eps);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& g = *grads[k].value;
      expect_shape(g, params[k].value->rows(), params[k].value->cols(), "adam gradient");
      m_[k] = b1 * m_[k] + (Real(1) - b1) * g;
      v_[k] = b2 * v_[k] + (Real(1) - b2) * g.cwiseProduct(g);
      auto mhat = m_[k].array() / corr1;
      auto vhat = v_[k].array() / corr2;
      params[k].value->array() -= lr * mhat / (vhat.sqrt() + eps);
    }
  }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Matrix<Real>> m_, v_;
};

struct GradCheckResult {
  double max_rel_error = 0;
  double max_abs_error = 0;
  std::string worst_tensor;
  Eigen::Index worst_index = -1;
  std::size_t checked = 0;
};

/// Central finite differences against analytic gradients. The relative
/// error per element is |a - n| / max(floor, |a| + |n|); the floor keeps
/// roundoff on near-zero gradients from dominating. Requires 64-bit
/// parameters; `loss` must be a pure function of the parameter values.
template <class Real, class LossFn>
GradCheckResult grad_check(const std::vector<TensorRef<Real>>& params,
                           const std::vector<TensorRef<Real>>& analytic, LossFn&& loss,
                           double epsilon = 1e-4, double floor = 1e-6) {
  static_assert(std::is_same_v<Real, double>, "gradient checking runs in 64-bit mode");
  if (params.size() != analytic.size()) throw ShapeError("grad_check: tensor count mismatch");
  GradCheckResult r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix<Real>& p = *params[k].value;
    const Matrix<Real>& a = *analytic[k].value;
    expect_shape(a, p.rows(), p.cols(), "grad_check analytic gradient");
    for (Eigen::Index idx = 0; idx < p.size(); ++idx) {
      Real& x = p.data()[idx];
      const Real saved = x;
      x = saved + epsilon;
      const double up = loss();
      x = saved - epsilon;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2 * epsilon);
      const double an = a.data()[idx];
      const double abs_err = std::abs(an - numeric);
      const double rel = abs_err / std::max(floor, std::abs(an) + std::abs(numeric));
      ++r.checked;
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_tensor = params[k].name;
        r.worst_index = idx;
      }
    }
  }
  return r;
}

}  // namespace noov::nn
