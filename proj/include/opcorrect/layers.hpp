// Copyright 2026 The opcorrect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OPCORRECT_LAYERS_HPP_
#define OPCORRECT_LAYERS_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "opcorrect/autodiff.hpp"

namespace opcorrect {

// Parameter bundles for the standard transformer building blocks.  Each
// bundle registers its tensors in a ParameterStore under a dotted prefix and
// offers two forward paths over the same math: a tape path used in training
// and a plain-matrix eval path used in inference.  Eval helpers only ever
// combine the rows they are given, so results do not depend on what else is
// in flight.

template <typename S>
void init_normal(Parameter<S>& p, Rng& rng, double stddev) {
  for (int i = 0; i < p.value.rows(); ++i) {
    for (int j = 0; j < p.value.cols(); ++j) {
      p.value(i, j) = static_cast<S>(stddev * rng.normal());
    }
  }
}

// ---- Plain-matrix building blocks (eval path) ----

template <typename S>
void eval_layer_norm_inplace(Mat<S>& x, const Mat<S>& gamma, const Mat<S>& beta,
                             S eps = S(1e-5)) {
  const int n = static_cast<int>(x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    S mean = x.row(i).mean();
    S var = (x.row(i).array() - mean).square().sum() / S(n);
    S istd = S(1) / std::sqrt(var + eps);
    x.row(i) = ((x.row(i).array() - mean) * istd) * gamma.row(0).array();
    x.row(i) += beta.row(0);
  }
}

template <typename S>
Mat<S> eval_gelu(const Mat<S>& x) {
  Mat<S> out(x.rows(), x.cols());
  const S inv_sqrt2 = S(1) / std::sqrt(S(2));
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) {
      out(i, j) = S(0.5) * x(i, j) * (S(1) + std::erf(x(i, j) * inv_sqrt2));
    }
  }
  return out;
}

template <typename S>
void eval_softmax_rows_inplace(Mat<S>& x) {
  for (int i = 0; i < x.rows(); ++i) {
    S mx = x.row(i).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e = (x.row(i).array() - mx).exp();
    x.row(i) = (e / e.sum()).matrix();
  }
}

// ---- Linear ----

template <typename S>
struct LinearP {
  Parameter<S>* w = nullptr;
  Parameter<S>* b = nullptr;

  void create(ParameterStore<S>& store, const std::string& prefix, int in,
              int out, Rng& rng, double stddev = 0.02) {
    w = &store.create(prefix + ".w", in, out);
    b = &store.create(prefix + ".b", 1, out);
    init_normal(*w, rng, stddev);
  }

  typename Tape<S>::Var apply(Tape<S>& t, typename Tape<S>::Var x) const {
    return t.add_rowvec(t.matmul(x, t.param(*w)), t.param(*b));
  }

  Mat<S> apply(const Mat<S>& x) const {
    Mat<S> out = x * w->value;
    out.rowwise() += b->value.row(0);
    return out;
  }
};

// ---- LayerNorm ----

template <typename S>
struct LayerNormP {
  Parameter<S>* g = nullptr;
  Parameter<S>* b = nullptr;

  void create(ParameterStore<S>& store, const std::string& prefix, int dim) {
    g = &store.create(prefix + ".g", 1, dim);
    b = &store.create(prefix + ".b", 1, dim);
    g->value.setOnes();
  }

  typename Tape<S>::Var apply(Tape<S>& t, typename Tape<S>::Var x) const {
    return t.layer_norm(x, t.param(*g), t.param(*b));
  }

  void apply_inplace(Mat<S>& x) const {
    eval_layer_norm_inplace(x, g->value, b->value);
  }
};

// ---- Multi-head attention block (projections around the fused core) ----

template <typename S>
struct AttentionBlockP {
  LinearP<S> q, k, v, o;
  int num_heads = 1;

  void create(ParameterStore<S>& store, const std::string& prefix, int dim,
              int heads, Rng& rng) {
    num_heads = heads;
    q.create(store, prefix + ".q", dim, dim, rng);
    k.create(store, prefix + ".k", dim, dim, rng);
    v.create(store, prefix + ".v", dim, dim, rng);
    o.create(store, prefix + ".o", dim, dim, rng);
  }

  typename Tape<S>::Var apply(Tape<S>& t, typename Tape<S>::Var q_in,
                              typename Tape<S>::Var kv_in,
                              const AttentionSpans& spans, bool causal) const {
    typename Tape<S>::Var qs = q.apply(t, q_in);
    typename Tape<S>::Var ks = k.apply(t, kv_in);
    typename Tape<S>::Var vs = v.apply(t, kv_in);
    return o.apply(t, t.attention(qs, ks, vs, spans, num_heads, causal));
  }

  // Single-group eval: queries over one key/value matrix, optional causal
  // mask.  Key/value projections may be precomputed once per utterance and
  // passed back in to avoid recomputation across decode steps.
  Mat<S> project_k(const Mat<S>& kv) const { return k.apply(kv); }
  Mat<S> project_v(const Mat<S>& kv) const { return v.apply(kv); }

  Mat<S> apply_projected(const Mat<S>& q_in, const Mat<S>& kp, const Mat<S>& vp,
                         bool causal) const {
    const int d = static_cast<int>(q_in.cols());
    const int dh = d / num_heads;
    const S inv_scale = S(1) / std::sqrt(S(dh));
    Mat<S> qs = q.apply(q_in);
    Mat<S> ctx(q_in.rows(), d);
    for (int h = 0; h < num_heads; ++h) {
      auto qh = qs.middleCols(h * dh, dh);
      auto kh = kp.middleCols(h * dh, dh);
      auto vh = vp.middleCols(h * dh, dh);
      Mat<S> scores = (qh * kh.transpose()) * inv_scale;
      for (int i = 0; i < scores.rows(); ++i) {
        int limit = causal ? i + 1 : static_cast<int>(scores.cols());
        auto row = scores.row(i).head(limit);
        S mx = row.maxCoeff();
        Eigen::Array<S, 1, Eigen::Dynamic> e = (row.array() - mx).exp();
        Eigen::Matrix<S, 1, Eigen::Dynamic> p = (e / e.sum()).matrix();
        ctx.row(i).segment(h * dh, dh) = p * vh.topRows(limit);
      }
    }
    return o.apply(ctx);
  }

  Mat<S> apply(const Mat<S>& q_in, const Mat<S>& kv, bool causal) const {
    return apply_projected(q_in, project_k(kv), project_v(kv), causal);
  }
};

// ---- Feed-forward block ----

template <typename S>
struct FfnP {
  LinearP<S> in, out;

  void create(ParameterStore<S>& store, const std::string& prefix, int dim,
              int hidden, Rng& rng) {
    in.create(store, prefix + ".in", dim, hidden, rng);
    out.create(store, prefix + ".out", hidden, dim, rng);
  }

  typename Tape<S>::Var apply(Tape<S>& t, typename Tape<S>::Var x) const {
    return out.apply(t, t.gelu(in.apply(t, x)));
  }

  Mat<S> apply(const Mat<S>& x) const { return out.apply(eval_gelu(in.apply(x))); }
};

// ---- Post-norm encoder layer ----

template <typename S>
struct EncoderLayerP {
  AttentionBlockP<S> attn;
  LayerNormP<S> ln1;
  FfnP<S> ffn;
  LayerNormP<S> ln2;

  void create(ParameterStore<S>& store, const std::string& prefix, int dim,
              int heads, int ffn_dim, Rng& rng) {
    attn.create(store, prefix + ".attn", dim, heads, rng);
    ln1.create(store, prefix + ".ln1", dim);
    ffn.create(store, prefix + ".ffn", dim, ffn_dim, rng);
    ln2.create(store, prefix + ".ln2", dim);
  }

  typename Tape<S>::Var apply(Tape<S>& t, typename Tape<S>::Var h,
                              const AttentionSpans& spans, S dropout_rate,
                              Rng* dropout_rng) const {
    typename Tape<S>::Var a = attn.apply(t, h, h, spans, false);
    if (dropout_rng != nullptr) a = t.dropout(a, dropout_rate, *dropout_rng);
    h = ln1.apply(t, t.add(h, a));
    typename Tape<S>::Var f = ffn.apply(t, h);
    if (dropout_rng != nullptr) f = t.dropout(f, dropout_rate, *dropout_rng);
    return ln2.apply(t, t.add(h, f));
  }

  void apply_inplace(Mat<S>& h) const {
    Mat<S> a = attn.apply(h, h, false);
    h += a;
    ln1.apply_inplace(h);
    Mat<S> f = ffn.apply(h);
    h += f;
    ln2.apply_inplace(h);
  }
};

// ---- Post-norm decoder layer: causal self-attention, cross-attention over
// the encoded input, then feed-forward ----

template <typename S>
struct DecoderLayerP {
  AttentionBlockP<S> self;
  LayerNormP<S> ln1;
  AttentionBlockP<S> cross;
  LayerNormP<S> ln2;
  FfnP<S> ffn;
  LayerNormP<S> ln3;

  void create(ParameterStore<S>& store, const std::string& prefix, int dim,
              int heads, int ffn_dim, Rng& rng) {
    self.create(store, prefix + ".self", dim, heads, rng);
    ln1.create(store, prefix + ".ln1", dim);
    cross.create(store, prefix + ".cross", dim, heads, rng);
    ln2.create(store, prefix + ".ln2", dim);
    ffn.create(store, prefix + ".ffn", dim, ffn_dim, rng);
    ln3.create(store, prefix + ".ln3", dim);
  }

  typename Tape<S>::Var apply(Tape<S>& t, typename Tape<S>::Var h,
                              typename Tape<S>::Var enc,
                              const AttentionSpans& self_spans,
                              const AttentionSpans& cross_spans, S dropout_rate,
                              Rng* dropout_rng) const {
    typename Tape<S>::Var a = self.apply(t, h, h, self_spans, true);
    if (dropout_rng != nullptr) a = t.dropout(a, dropout_rate, *dropout_rng);
    h = ln1.apply(t, t.add(h, a));
    typename Tape<S>::Var c = cross.apply(t, h, enc, cross_spans, false);
    if (dropout_rng != nullptr) c = t.dropout(c, dropout_rate, *dropout_rng);
    h = ln2.apply(t, t.add(h, c));
    typename Tape<S>::Var f = ffn.apply(t, h);
    if (dropout_rng != nullptr) f = t.dropout(f, dropout_rate, *dropout_rng);
    return ln3.apply(t, t.add(h, f));
  }

  // Eval over one span: h holds the span's decoder rows; cross-attention
  // keys/values are precomputed projections of the utterance encoding.
  void apply_inplace(Mat<S>& h, const Mat<S>& cross_kp,
                     const Mat<S>& cross_vp) const {
    Mat<S> a = self.apply(h, h, true);
    h += a;
    ln1.apply_inplace(h);
    Mat<S> c = cross.apply_projected(h, cross_kp, cross_vp, false);
    h += c;
    ln2.apply_inplace(h);
    Mat<S> f = ffn.apply(h);
    h += f;
    ln3.apply_inplace(h);
  }
};

// ---- Additive attention (used by the recurrent decoder) ----

template <typename S>
struct AdditiveAttentionP {
  Parameter<S>* wq = nullptr;
  Parameter<S>* wk = nullptr;
  Parameter<S>* v = nullptr;

  void create(ParameterStore<S>& store, const std::string& prefix, int dim,
              Rng& rng) {
    wq = &store.create(prefix + ".wq", dim, dim);
    wk = &store.create(prefix + ".wk", dim, dim);
    v = &store.create(prefix + ".v", 1, dim);
    init_normal(*wq, rng, 0.02);
    init_normal(*wk, rng, 0.02);
    init_normal(*v, rng, 0.02);
  }

  Mat<S> project_keys(const Mat<S>& enc) const { return enc * wk->value; }

  // One query row against precomputed key projections; returns the context
  // row (weighted sum of enc rows).
  Mat<S> context_row(const Mat<S>& query, const Mat<S>& kp,
                     const Mat<S>& enc) const {
    Mat<S> qp = query * wq->value;  // 1 x d
    Mat<S> T = (kp.rowwise() + qp.row(0)).array().tanh().matrix();
    Mat<S> scores = T * v->value.transpose();  // n x 1
    S mx = scores.maxCoeff();
    Eigen::Array<S, Eigen::Dynamic, 1> e = (scores.array() - mx).exp();
    Mat<S> alpha = (e / e.sum()).matrix();
    return alpha.transpose() * enc;
  }
};

// ---- LSTM cell (gate order: input, forget, cell, output) ----

template <typename S>
struct LstmP {
  Parameter<S>* w_ih = nullptr;
  Parameter<S>* w_hh = nullptr;
  Parameter<S>* b = nullptr;
  int dim = 0;

  void create(ParameterStore<S>& store, const std::string& prefix, int d,
              Rng& rng) {
    dim = d;
    w_ih = &store.create(prefix + ".w_ih", d, 4 * d);
    w_hh = &store.create(prefix + ".w_hh", d, 4 * d);
    b = &store.create(prefix + ".b", 1, 4 * d);
    init_normal(*w_ih, rng, 0.02);
    init_normal(*w_hh, rng, 0.02);
    // Positive forget-gate bias keeps early training from flushing state.
    b->value.row(0).segment(d, d).setOnes();
  }

  // Tape step over a batch of rows: x, h, c are R x d.  Returns (h', c').
  std::pair<typename Tape<S>::Var, typename Tape<S>::Var> step(
      Tape<S>& t, typename Tape<S>::Var x, typename Tape<S>::Var h,
      typename Tape<S>::Var c) const {
    using Var = typename Tape<S>::Var;
    Var gates = t.add_rowvec(
        t.add(t.matmul(x, t.param(*w_ih)), t.matmul(h, t.param(*w_hh))),
        t.param(*b));
    Var i = t.sigmoid(t.cols_range(gates, 0, dim));
    Var f = t.sigmoid(t.cols_range(gates, dim, dim));
    Var g = t.tanh_op(t.cols_range(gates, 2 * dim, dim));
    Var o = t.sigmoid(t.cols_range(gates, 3 * dim, dim));
    Var c_new = t.add(t.mul(f, c), t.mul(i, g));
    Var h_new = t.mul(o, t.tanh_op(c_new));
    return {h_new, c_new};
  }

  // Eval step over one row.
  void step_inplace(const Mat<S>& x, Mat<S>& h, Mat<S>& c) const {
    Mat<S> gates = x * w_ih->value + h * w_hh->value;
    gates.rowwise() += b->value.row(0);
    auto sig = [](S z) { return S(1) / (S(1) + std::exp(-z)); };
    for (int j = 0; j < dim; ++j) {
      S i = sig(gates(0, j));
      S f = sig(gates(0, dim + j));
      S g = std::tanh(gates(0, 2 * dim + j));
      S o = sig(gates(0, 3 * dim + j));
      c(0, j) = f * c(0, j) + i * g;
      h(0, j) = o * std::tanh(c(0, j));
    }
  }
};

}  // namespace opcorrect

#endif  // OPCORRECT_LAYERS_HPP_
