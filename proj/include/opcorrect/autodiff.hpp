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

#ifndef OPCORRECT_AUTODIFF_HPP_
#define OPCORRECT_AUTODIFF_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "opcorrect/common.hpp"
#include "opcorrect/rng.hpp"

namespace opcorrect {

// Row-major throughout: a matrix row is one token/position/example.
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A named trainable tensor.  Gradients accumulate across backward passes
// until the optimizer consumes and clears them.
template <typename S>
struct Parameter {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
};

// Owns every parameter of a model in a fixed registration order (which also
// fixes checkpoint layout and optimizer state slots).
template <typename S>
class ParameterStore {
 public:
  Parameter<S>& create(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw ContractError("duplicate parameter: " + name);
    auto p = std::make_unique<Parameter<S>>();
    p->name = name;
    p->value = Mat<S>::Zero(rows, cols);
    p->grad = Mat<S>::Zero(rows, cols);
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<S>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return *params_[it->second];
  }
  const Parameter<S>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return *params_[it->second];
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  size_t size() const { return params_.size(); }
  Parameter<S>& at(size_t i) { return *params_[i]; }
  const Parameter<S>& at(size_t i) const { return *params_[i]; }

  void zero_grads() {
    for (auto& p : params_) p->grad.setZero();
  }

  // True when every parameter value is finite.
  bool all_finite() const {
    for (const auto& p : params_) {
      if (!p->value.allFinite()) return false;
    }
    return true;
  }

 private:
  std::vector<std::unique_ptr<Parameter<S>>> params_;
  std::map<std::string, size_t> index_;
};

// Attention routing: group g reads queries from rows
// [q_begin[g], q_begin[g]+q_len[g]) of the query matrix and keys/values from
// rows [kv_begin[g], kv_begin[g]+kv_len[g]) of the key/value matrix.  Rows
// outside every group (e.g. padding) receive zero output and zero gradient.
// Restricting kv ranges is how padded positions are excluded: they are never
// readable as keys, so no other position's output can depend on them.
struct AttentionSpans {
  std::vector<int> q_begin, q_len, kv_begin, kv_len;

  void add(int qb, int ql, int kb, int kl) {
    q_begin.push_back(qb);
    q_len.push_back(ql);
    kv_begin.push_back(kb);
    kv_len.push_back(kl);
  }
  size_t groups() const { return q_begin.size(); }
};

// Reverse-mode tape over dense matrices.  Build a forward expression with the
// op methods, then call backward(loss) once; parameter leaves flush their
// gradients into their Parameter.  Nodes are identified by integer handles so
// the underlying storage may reallocate freely.
template <typename S>
class Tape {
 public:
  using Var = int;

  void clear() {
    nodes_.clear();
    param_leaves_.clear();
  }

  const Mat<S>& val(Var v) const { return nodes_[static_cast<size_t>(v)].value; }
  Mat<S>& grad(Var v) { return nodes_[static_cast<size_t>(v)].grad; }

  // ---- Leaves ----

  Var input(Mat<S> value) { return make_node(std::move(value)); }

  // One leaf per Parameter per tape; repeated requests share the leaf so
  // every use contributes to the same gradient.
  Var param(Parameter<S>& p) {
    auto it = param_leaves_.find(&p);
    if (it != param_leaves_.end()) return it->second;
    Var v = make_node(p.value);
    Parameter<S>* pp = &p;
    nodes_[static_cast<size_t>(v)].backward = [this, v, pp] {
      pp->grad += grad(v);
    };
    param_leaves_[&p] = v;
    return v;
  }

  // ---- Structural ops ----

  // out.row(r) = src.row(rows[r]); duplicate indices accumulate gradient.
  Var gather_rows(Var src, std::vector<int> rows) {
    const Mat<S>& x = val(src);
    Mat<S> out(static_cast<int>(rows.size()), x.cols());
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || rows[r] >= x.rows()) {
        throw ContractError("gather_rows: index out of range");
      }
      out.row(static_cast<int>(r)) = x.row(rows[r]);
    }
    Var v = make_node(std::move(out));
    nodes_[static_cast<size_t>(v)].backward = [this, v, src,
                                               rows = std::move(rows)] {
      Mat<S>& gx = grad(src);
      const Mat<S>& go = grad(v);
      for (size_t r = 0; r < rows.size(); ++r) {
        gx.row(rows[r]) += go.row(static_cast<int>(r));
      }
    };
    return v;
  }

  Var rows_range(Var src, int begin, int count) {
    Var v = make_node(val(src).middleRows(begin, count));
    nodes_[static_cast<size_t>(v)].backward = [this, v, src, begin, count] {
      grad(src).middleRows(begin, count) += grad(v);
    };
    return v;
  }

  Var cols_range(Var src, int begin, int count) {
    Var v = make_node(val(src).middleCols(begin, count));
    nodes_[static_cast<size_t>(v)].backward = [this, v, src, begin, count] {
      grad(src).middleCols(begin, count) += grad(v);
    };
    return v;
  }

  Var concat_cols(Var a, Var b) {
    const Mat<S>& xa = val(a);
    const Mat<S>& xb = val(b);
    if (xa.rows() != xb.rows()) throw ContractError("concat_cols: row mismatch");
    Mat<S> out(xa.rows(), xa.cols() + xb.cols());
    out.leftCols(xa.cols()) = xa;
    out.rightCols(xb.cols()) = xb;
    int ca = static_cast<int>(xa.cols());
    int cb = static_cast<int>(xb.cols());
    Var v = make_node(std::move(out));
    nodes_[static_cast<size_t>(v)].backward = [this, v, a, b, ca, cb] {
      grad(a) += grad(v).leftCols(ca);
      grad(b) += grad(v).rightCols(cb);
    };
    return v;
  }

  // ---- Arithmetic ----

  Var matmul(Var a, Var b) {
    Var v = make_node(val(a) * val(b));
    nodes_[static_cast<size_t>(v)].backward = [this, v, a, b] {
      grad(a) += grad(v) * val(b).transpose();
      grad(b) += val(a).transpose() * grad(v);
    };
    return v;
  }

  Var add(Var a, Var b) {
    Var v = make_node(val(a) + val(b));
    nodes_[static_cast<size_t>(v)].backward = [this, v, a, b] {
      grad(a) += grad(v);
      grad(b) += grad(v);
    };
    return v;
  }

  // Adds a 1-row bias to every row of a.
  Var add_rowvec(Var a, Var row) {
    if (val(row).rows() != 1) throw ContractError("add_rowvec: bias must be 1 row");
    Var v = make_node(val(a).rowwise() + val(row).row(0));
    nodes_[static_cast<size_t>(v)].backward = [this, v, a, row] {
      grad(a) += grad(v);
      grad(row).row(0) += grad(v).colwise().sum();
    };
    return v;
  }

  Var mul(Var a, Var b) {
    Var v = make_node(val(a).cwiseProduct(val(b)));
    nodes_[static_cast<size_t>(v)].backward = [this, v, a, b] {
      grad(a) += grad(v).cwiseProduct(val(b));
      grad(b) += grad(v).cwiseProduct(val(a));
    };
    return v;
  }

  Var scale(Var a, S c) {
    Var v = make_node(val(a) * c);
    nodes_[static_cast<size_t>(v)].backward = [this, v, a, c] {
      grad(a) += grad(v) * c;
    };
    return v;
  }

  Var sum(const std::vector<Var>& scalars) {
    Mat<S> total = Mat<S>::Zero(1, 1);
    for (Var s : scalars) total(0, 0) += val(s)(0, 0);
    Var v = make_node(std::move(total));
    nodes_[static_cast<size_t>(v)].backward = [this, v, scalars] {
      for (Var s : scalars) grad(s) += grad(v);
    };
    return v;
  }

  // ---- Elementwise nonlinearities ----

  Var tanh_op(Var a) {
    Var v = make_node(val(a).array().tanh().matrix());
    nodes_[static_cast<size_t>(v)].backward = [this, v, a] {
      grad(a).array() += grad(v).array() * (S(1) - val(v).array().square());
    };
    return v;
  }

  Var sigmoid(Var a) {
    Var v = make_node(
        (S(1) / (S(1) + (-val(a).array()).exp())).matrix());
    nodes_[static_cast<size_t>(v)].backward = [this, v, a] {
      grad(a).array() +=
          grad(v).array() * val(v).array() * (S(1) - val(v).array());
    };
    return v;
  }

  // Exact gaussian-error-function form.
  Var gelu(Var a) {
    const Mat<S>& x = val(a);
    Mat<S> out(x.rows(), x.cols());
    const S inv_sqrt2 = S(1) / std::sqrt(S(2));
    for (int i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < x.cols(); ++j) {
        out(i, j) = S(0.5) * x(i, j) * (S(1) + std::erf(x(i, j) * inv_sqrt2));
      }
    }
    Var v = make_node(std::move(out));
    nodes_[static_cast<size_t>(v)].backward = [this, v, a, inv_sqrt2] {
      const Mat<S>& x = val(a);
      Mat<S>& ga = grad(a);
      const Mat<S>& go = grad(v);
      const S inv_sqrt2pi = S(1) / std::sqrt(S(2) * std::numbers::pi_v<S>);
      for (int i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < x.cols(); ++j) {
          S cdf = S(0.5) * (S(1) + std::erf(x(i, j) * inv_sqrt2));
          S pdf = inv_sqrt2pi * std::exp(S(-0.5) * x(i, j) * x(i, j));
          ga(i, j) += go(i, j) * (cdf + x(i, j) * pdf);
        }
      }
    };
    return v;
  }

  // Per-row normalization with learned gain/bias (1-row parameters).
  Var layer_norm(Var a, Var gamma, Var beta, S eps = S(1e-5)) {
    const Mat<S>& x = val(a);
    const int n = static_cast<int>(x.cols());
    Mat<S> xhat(x.rows(), n);
    Mat<S> inv_std(x.rows(), 1);
    for (int i = 0; i < x.rows(); ++i) {
      S mean = x.row(i).mean();
      S var = (x.row(i).array() - mean).square().sum() / S(n);
      S istd = S(1) / std::sqrt(var + eps);
      inv_std(i, 0) = istd;
      xhat.row(i) = (x.row(i).array() - mean) * istd;
    }
    Mat<S> out = xhat * val(gamma).row(0).asDiagonal();
    out.rowwise() += val(beta).row(0);
    Var v = make_node(std::move(out));
    nodes_[static_cast<size_t>(v)].backward = [this, v, a, gamma, beta,
                                               xhat = std::move(xhat),
                                               inv_std = std::move(inv_std), n] {
      const Mat<S>& go = grad(v);
      grad(beta).row(0) += go.colwise().sum();
      grad(gamma).row(0) += (go.array() * xhat.array()).colwise().sum().matrix();
      Mat<S>& ga = grad(a);
      const auto& g = val(gamma);
      for (int i = 0; i < go.rows(); ++i) {
        Eigen::Array<S, 1, Eigen::Dynamic> dxhat =
            go.row(i).array() * g.row(0).array();
        S m1 = dxhat.sum() / S(n);
        S m2 = (dxhat * xhat.row(i).array()).sum() / S(n);
        ga.row(i).array() +=
            inv_std(i, 0) * (dxhat - m1 - xhat.row(i).array() * m2);
      }
    };
    return v;
  }

  // Inverted dropout; identity when rate is zero.
  Var dropout(Var a, S rate, Rng& rng) {
    if (rate <= S(0)) return a;
    const Mat<S>& x = val(a);
    Mat<S> mask(x.rows(), x.cols());
    const S keep = S(1) - rate;
    for (int i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < x.cols(); ++j) {
        mask(i, j) = rng.bernoulli(static_cast<double>(rate)) ? S(0) : S(1) / keep;
      }
    }
    Var v = make_node(x.cwiseProduct(mask));
    nodes_[static_cast<size_t>(v)].backward = [this, v, a, mask = std::move(mask)] {
      grad(a) += grad(v).cwiseProduct(mask);
    };
    return v;
  }

  // ---- Fused attention ----

  // Scaled dot-product attention over heads laid out as column blocks of
  // q/k/v.  Routing per AttentionSpans; with causal set, a query at local
  // offset t reads keys at local offsets <= t (q_len must equal kv_len).
  Var attention(Var q, Var k, Var v_in, const AttentionSpans& spans,
                int num_heads, bool causal) {
    const Mat<S>& Q = val(q);
    const Mat<S>& K = val(k);
    const Mat<S>& V = val(v_in);
    const int d = static_cast<int>(Q.cols());
    if (d % num_heads != 0) throw ContractError("attention: heads do not divide width");
    const int dh = d / num_heads;
    const S inv_scale = S(1) / std::sqrt(S(dh));

    Mat<S> out = Mat<S>::Zero(Q.rows(), d);
    // Saved softmax weights, one matrix per (group, head).
    std::vector<Mat<S>> probs(spans.groups() * static_cast<size_t>(num_heads));
    for (size_t g = 0; g < spans.groups(); ++g) {
      const int qb = spans.q_begin[g], ql = spans.q_len[g];
      const int kb = spans.kv_begin[g], kl = spans.kv_len[g];
      if (causal && ql != kl) throw ContractError("attention: causal group shape");
      if (ql > 0 && kl <= 0) throw ContractError("attention: empty key range");
      for (int h = 0; h < num_heads; ++h) {
        auto Qg = Q.block(qb, h * dh, ql, dh);
        auto Kg = K.block(kb, h * dh, kl, dh);
        auto Vg = V.block(kb, h * dh, kl, dh);
        Mat<S> scores = (Qg * Kg.transpose()) * inv_scale;
        Mat<S>& P = probs[g * static_cast<size_t>(num_heads) + static_cast<size_t>(h)];
        P.resize(ql, kl);
        for (int i = 0; i < ql; ++i) {
          int limit = causal ? i + 1 : kl;
          auto row = scores.row(i).head(limit);
          S mx = row.maxCoeff();
          Eigen::Array<S, 1, Eigen::Dynamic> e = (row.array() - mx).exp();
          S z = e.sum();
          P.row(i).head(limit) = (e / z).matrix();
          if (limit < kl) P.row(i).tail(kl - limit).setZero();
        }
        out.block(qb, h * dh, ql, dh) = P * Vg;
      }
    }
    Var node = make_node(std::move(out));
    nodes_[static_cast<size_t>(node)].backward =
        [this, node, q, k, v_in, spans, num_heads, dh, inv_scale,
         probs = std::move(probs)] {
          const Mat<S>& Q = val(q);
          const Mat<S>& K = val(k);
          const Mat<S>& V = val(v_in);
          const Mat<S>& GO = grad(node);
          Mat<S>& GQ = grad(q);
          Mat<S>& GK = grad(k);
          Mat<S>& GV = grad(v_in);
          for (size_t g = 0; g < spans.groups(); ++g) {
            const int qb = spans.q_begin[g], ql = spans.q_len[g];
            const int kb = spans.kv_begin[g], kl = spans.kv_len[g];
            for (int h = 0; h < num_heads; ++h) {
              const Mat<S>& P =
                  probs[g * static_cast<size_t>(num_heads) + static_cast<size_t>(h)];
              auto dOut = GO.block(qb, h * dh, ql, dh);
              auto Qg = Q.block(qb, h * dh, ql, dh);
              auto Kg = K.block(kb, h * dh, kl, dh);
              auto Vg = V.block(kb, h * dh, kl, dh);
              GV.block(kb, h * dh, kl, dh) += P.transpose() * dOut;
              Mat<S> dP = dOut * Vg.transpose();
              // Softmax backward per row; masked entries have P == 0 so they
              // contribute nothing.
              Mat<S> dS(ql, kl);
              for (int i = 0; i < ql; ++i) {
                S dot = (dP.row(i).array() * P.row(i).array()).sum();
                dS.row(i) =
                    ((dP.row(i).array() - dot) * P.row(i).array()).matrix() *
                    inv_scale;
              }
              GQ.block(qb, h * dh, ql, dh) += dS * Kg;
              GK.block(kb, h * dh, kl, dh) += dS.transpose() * Qg;
            }
          }
        };
    return node;
  }

  // Single-head additive attention.  qp holds projected queries (one row per
  // query), kp the projected keys, values the raw value rows; query r reads
  // rows [kv_begin[r], kv_begin[r]+kv_len[r]) of kp/values.  The score for
  // key j is dot(v, tanh(qp_r + kp_j)); the output row is the
  // softmax-weighted sum of value rows.
  Var additive_attention(Var qp, Var kp, Var values, Var v_param,
                         std::vector<int> kv_begin, std::vector<int> kv_len) {
    const Mat<S>& QP = val(qp);
    const Mat<S>& KP = val(kp);
    const Mat<S>& VA = val(values);
    const Mat<S>& v = val(v_param);
    if (v.rows() != 1) throw ContractError("additive_attention: v must be 1 row");
    if (kv_begin.size() != static_cast<size_t>(QP.rows()) ||
        kv_len.size() != static_cast<size_t>(QP.rows())) {
      throw ContractError("additive_attention: range count mismatch");
    }
    const int R = static_cast<int>(QP.rows());
    Mat<S> out = Mat<S>::Zero(R, VA.cols());
    std::vector<Mat<S>> saved_tanh(static_cast<size_t>(R));
    std::vector<Mat<S>> saved_alpha(static_cast<size_t>(R));
    for (int r = 0; r < R; ++r) {
      const int kb = kv_begin[static_cast<size_t>(r)];
      const int kl = kv_len[static_cast<size_t>(r)];
      if (kl <= 0) throw ContractError("additive_attention: empty key range");
      Mat<S>& T = saved_tanh[static_cast<size_t>(r)];
      T = (KP.middleRows(kb, kl).rowwise() + QP.row(r)).array().tanh().matrix();
      Mat<S> scores = T * v.transpose();  // kl x 1
      S mx = scores.maxCoeff();
      Eigen::Array<S, Eigen::Dynamic, 1> e = (scores.array() - mx).exp();
      S z = e.sum();
      Mat<S>& alpha = saved_alpha[static_cast<size_t>(r)];
      alpha = (e / z).matrix();
      out.row(r) = alpha.transpose() * VA.middleRows(kb, kl);
    }
    Var node = make_node(std::move(out));
    nodes_[static_cast<size_t>(node)].backward =
        [this, node, qp, kp, values, v_param, kv_begin = std::move(kv_begin),
         kv_len = std::move(kv_len), saved_tanh = std::move(saved_tanh),
         saved_alpha = std::move(saved_alpha), R] {
          const Mat<S>& VA = val(values);
          const Mat<S>& v = val(v_param);
          const Mat<S>& GO = grad(node);
          Mat<S>& gqp = grad(qp);
          Mat<S>& gkp = grad(kp);
          Mat<S>& gva = grad(values);
          Mat<S>& gv = grad(v_param);
          for (int r = 0; r < R; ++r) {
            const int kb = kv_begin[static_cast<size_t>(r)];
            const int kl = kv_len[static_cast<size_t>(r)];
            const Mat<S>& T = saved_tanh[static_cast<size_t>(r)];
            const Mat<S>& alpha = saved_alpha[static_cast<size_t>(r)];
            // d(out_r) -> d(alpha), d(values)
            Mat<S> dalpha = VA.middleRows(kb, kl) * GO.row(r).transpose();
            gva.middleRows(kb, kl) += alpha * GO.row(r);
            // Softmax backward to scores.
            S dot = (dalpha.array() * alpha.array()).sum();
            Mat<S> dscore = ((dalpha.array() - dot) * alpha.array()).matrix();
            // scores = T v^T
            gv.row(0) += (T.transpose() * dscore).transpose();
            Mat<S> dT = dscore * v;  // kl x d
            Mat<S> dpre = (dT.array() * (S(1) - T.array().square())).matrix();
            gqp.row(r) += dpre.colwise().sum();
            gkp.middleRows(kb, kl) += dpre;
          }
        };
    return node;
  }

  // ---- Losses ----

  // Weighted negative log-likelihood of per-row labels under row softmax.
  // Returns a 1x1 scalar: sum_r weight_r * (logsumexp(row_r) - row_r[label]).
  Var nll_from_logits(Var logits, std::vector<int> labels, std::vector<S> weights) {
    const Mat<S>& X = val(logits);
    const int R = static_cast<int>(X.rows());
    if (static_cast<int>(labels.size()) != R ||
        static_cast<int>(weights.size()) != R) {
      throw ContractError("nll_from_logits: label/weight count mismatch");
    }
    Mat<S> probs(X.rows(), X.cols());
    S total = S(0);
    for (int r = 0; r < R; ++r) {
      S mx = X.row(r).maxCoeff();
      Eigen::Array<S, 1, Eigen::Dynamic> e = (X.row(r).array() - mx).exp();
      S z = e.sum();
      probs.row(r) = (e / z).matrix();
      if (weights[static_cast<size_t>(r)] != S(0)) {
        S logp = X(r, labels[static_cast<size_t>(r)]) - mx - std::log(z);
        total -= weights[static_cast<size_t>(r)] * logp;
      }
    }
    Mat<S> scalar(1, 1);
    scalar(0, 0) = total;
    Var node = make_node(std::move(scalar));
    nodes_[static_cast<size_t>(node)].backward =
        [this, node, logits, labels = std::move(labels),
         weights = std::move(weights), probs = std::move(probs), R] {
          S go = grad(node)(0, 0);
          Mat<S>& gx = grad(logits);
          for (int r = 0; r < R; ++r) {
            S w = weights[static_cast<size_t>(r)];
            if (w == S(0)) continue;
            gx.row(r) += probs.row(r) * (go * w);
            gx(r, labels[static_cast<size_t>(r)]) -= go * w;
          }
        };
    return node;
  }

  // ---- Backward ----

  void backward(Var loss) {
    Node& last = nodes_[static_cast<size_t>(loss)];
    if (last.value.rows() != 1 || last.value.cols() != 1) {
      throw ContractError("backward: loss must be a scalar node");
    }
    last.grad(0, 0) = S(1);
    for (size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].backward) nodes_[i].backward();
    }
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    std::function<void()> backward;
  };

  Var make_node(Mat<S> value) {
    Node n;
    n.grad = Mat<S>::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  // Deque keeps val()/grad() references stable while new nodes are appended.
  std::deque<Node> nodes_;
  std::map<Parameter<S>*, Var> param_leaves_;
};

}  // namespace opcorrect

#endif  // OPCORRECT_AUTODIFF_HPP_
