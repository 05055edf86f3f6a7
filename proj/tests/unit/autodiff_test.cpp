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

#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "opcorrect/autodiff.hpp"
#include "opcorrect/rng.hpp"

using namespace opcorrect;

namespace {

using DTape = Tape<double>;
using DMat = Mat<double>;

void randomize(Parameter<double>& p, Rng& rng, double scale = 0.5) {
  for (int i = 0; i < p.value.rows(); ++i) {
    for (int j = 0; j < p.value.cols(); ++j) {
      p.value(i, j) = scale * rng.normal();
    }
  }
}

// Reduces any matrix to a scalar with fixed random weights, so every output
// entry influences the loss.
DTape::Var weighted_sum(DTape& t, DTape::Var x, Rng& rng) {
  const int rows = static_cast<int>(t.val(x).rows());
  const int cols = static_cast<int>(t.val(x).cols());
  DMat w(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) w(i, j) = rng.normal();
  }
  DTape::Var weighted = t.mul(x, t.input(w));
  DTape::Var ones_row = t.input(DMat::Ones(1, rows));
  DTape::Var ones_col = t.input(DMat::Ones(cols, 1));
  return t.matmul(t.matmul(ones_row, weighted), ones_col);
}

// Central-difference comparison of every parameter gradient against the
// tape's backward pass.
void check_gradients(ParameterStore<double>& store,
                     const std::function<DTape::Var(DTape&)>& build,
                     double eps = 1e-5, double tol = 1e-5) {
  auto eval = [&] {
    DTape t;
    return t.val(build(t))(0, 0);
  };
  store.zero_grads();
  {
    DTape t;
    t.backward(build(t));
  }
  for (size_t pi = 0; pi < store.size(); ++pi) {
    Parameter<double>& p = store.at(pi);
    for (int i = 0; i < p.value.rows(); ++i) {
      for (int j = 0; j < p.value.cols(); ++j) {
        double save = p.value(i, j);
        p.value(i, j) = save + eps;
        double lp = eval();
        p.value(i, j) = save - eps;
        double lm = eval();
        p.value(i, j) = save;
        double fd = (lp - lm) / (2 * eps);
        double an = p.grad(i, j);
        double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        INFO("param ", p.name, " entry (", i, ",", j, ") fd=", fd, " an=", an);
        REQUIRE(std::abs(fd - an) <= tol * denom);
      }
    }
  }
}

}  // namespace

TEST_CASE("gradients: matmul chain with bias and elementwise ops") {
  ParameterStore<double> store;
  Rng rng(1);
  auto& a = store.create("a", 3, 4);
  auto& b = store.create("b", 4, 5);
  auto& bias = store.create("bias", 1, 5);
  auto& c = store.create("c", 3, 5);
  for (auto* p : {&a, &b, &bias, &c}) randomize(*p, rng);

  check_gradients(store, [&](DTape& t) {
    Rng wrng(77);
    DTape::Var y = t.add_rowvec(t.matmul(t.param(a), t.param(b)), t.param(bias));
    y = t.mul(y, t.param(c));
    y = t.add(y, t.scale(t.param(c), 0.5));
    return weighted_sum(t, y, wrng);
  });
}

TEST_CASE("gradients: tanh, sigmoid, gelu") {
  ParameterStore<double> store;
  Rng rng(2);
  auto& x = store.create("x", 4, 6);
  randomize(x, rng, 1.0);

  check_gradients(store, [&](DTape& t) {
    Rng wrng(78);
    DTape::Var h = t.tanh_op(t.param(x));
    h = t.add(h, t.sigmoid(t.param(x)));
    h = t.add(h, t.gelu(t.param(x)));
    return weighted_sum(t, h, wrng);
  });
}

TEST_CASE("gradients: layer_norm") {
  ParameterStore<double> store;
  Rng rng(3);
  auto& x = store.create("x", 5, 8);
  auto& gamma = store.create("gamma", 1, 8);
  auto& beta = store.create("beta", 1, 8);
  randomize(x, rng, 1.0);
  randomize(gamma, rng, 0.3);
  gamma.value.array() += 1.0;
  randomize(beta, rng, 0.3);

  check_gradients(store, [&](DTape& t) {
    Rng wrng(79);
    return weighted_sum(t, t.layer_norm(t.param(x), t.param(gamma), t.param(beta)),
                        wrng);
  });
}

TEST_CASE("layer_norm normalizes rows") {
  ParameterStore<double> store;
  auto& x = store.create("x", 1, 4);
  auto& gamma = store.create("gamma", 1, 4);
  auto& beta = store.create("beta", 1, 4);
  x.value << 1.0, 2.0, 3.0, 4.0;
  gamma.value.setOnes();
  beta.value.setZero();
  DTape t;
  const DMat& out = t.val(t.layer_norm(t.param(x), t.param(gamma), t.param(beta)));
  CHECK(std::abs(out.row(0).mean()) < 1e-12);
  CHECK(std::abs(out.row(0).array().square().mean() - 1.0) < 1e-4);
}

TEST_CASE("gradients: gather, slicing, concatenation") {
  ParameterStore<double> store;
  Rng rng(4);
  auto& table = store.create("table", 6, 5);
  auto& other = store.create("other", 4, 3);
  randomize(table, rng);
  randomize(other, rng);

  check_gradients(store, [&](DTape& t) {
    Rng wrng(80);
    // Duplicate indices exercise gradient accumulation.
    DTape::Var g = t.gather_rows(t.param(table), {0, 2, 2, 5});
    DTape::Var left = t.cols_range(g, 1, 3);
    DTape::Var joined = t.concat_cols(left, t.param(other));
    DTape::Var top = t.rows_range(joined, 0, 3);
    return weighted_sum(t, top, wrng);
  });
}

TEST_CASE("gradients: scaled dot-product attention, two groups two heads") {
  ParameterStore<double> store;
  Rng rng(5);
  auto& q = store.create("q", 7, 4);
  auto& k = store.create("k", 6, 4);
  auto& v = store.create("v", 6, 4);
  randomize(q, rng);
  randomize(k, rng);
  randomize(v, rng);
  AttentionSpans spans;
  spans.add(0, 3, 0, 2);
  spans.add(3, 4, 2, 4);

  check_gradients(store, [&](DTape& t) {
    Rng wrng(81);
    DTape::Var out =
        t.attention(t.param(q), t.param(k), t.param(v), spans, 2, false);
    return weighted_sum(t, out, wrng);
  });
}

TEST_CASE("gradients: causal self-attention shares one input") {
  ParameterStore<double> store;
  Rng rng(6);
  auto& x = store.create("x", 5, 6);
  randomize(x, rng);
  AttentionSpans spans;
  spans.add(0, 5, 0, 5);

  check_gradients(store, [&](DTape& t) {
    Rng wrng(82);
    DTape::Var xv = t.param(x);
    DTape::Var out = t.attention(xv, xv, xv, spans, 3, true);
    return weighted_sum(t, out, wrng);
  });
}

TEST_CASE("causal attention ignores later rows") {
  // Changing a later row must not alter an earlier row's output.
  ParameterStore<double> store;
  Rng rng(7);
  auto& x = store.create("x", 4, 4);
  randomize(x, rng);
  AttentionSpans spans;
  spans.add(0, 4, 0, 4);
  DMat before, after;
  {
    DTape t;
    DTape::Var xv = t.param(x);
    before = t.val(t.attention(xv, xv, xv, spans, 2, true));
  }
  x.value.row(3).array() += 10.0;
  {
    DTape t;
    DTape::Var xv = t.param(x);
    after = t.val(t.attention(xv, xv, xv, spans, 2, true));
  }
  CHECK((before.topRows(3) - after.topRows(3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((before.row(3) - after.row(3)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("attention over a single key returns that value row") {
  ParameterStore<double> store;
  Rng rng(8);
  auto& q = store.create("q", 2, 4);
  auto& k = store.create("k", 1, 4);
  auto& v = store.create("v", 1, 4);
  randomize(q, rng);
  randomize(k, rng);
  randomize(v, rng);
  AttentionSpans spans;
  spans.add(0, 2, 0, 1);
  DTape t;
  const DMat& out = t.val(t.attention(t.param(q), t.param(k), t.param(v), spans,
                                      2, false));
  CHECK((out.row(0) - v.value.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((out.row(1) - v.value.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradients: additive attention") {
  ParameterStore<double> store;
  Rng rng(9);
  auto& qp = store.create("qp", 4, 5);
  auto& kp = store.create("kp", 9, 5);
  auto& values = store.create("values", 9, 5);
  auto& v = store.create("v", 1, 5);
  randomize(qp, rng);
  randomize(kp, rng);
  randomize(values, rng);
  randomize(v, rng);
  std::vector<int> kv_begin = {0, 0, 5, 5};
  std::vector<int> kv_len = {5, 5, 4, 4};

  check_gradients(store, [&](DTape& t) {
    Rng wrng(83);
    DTape::Var out = t.additive_attention(t.param(qp), t.param(kp),
                                          t.param(values), t.param(v), kv_begin,
                                          kv_len);
    return weighted_sum(t, out, wrng);
  });
}

TEST_CASE("additive attention over one key returns its value row") {
  ParameterStore<double> store;
  Rng rng(10);
  auto& qp = store.create("qp", 1, 3);
  auto& kp = store.create("kp", 1, 3);
  auto& values = store.create("values", 1, 3);
  auto& v = store.create("v", 1, 3);
  randomize(qp, rng);
  randomize(kp, rng);
  randomize(values, rng);
  randomize(v, rng);
  DTape t;
  const DMat& out = t.val(t.additive_attention(t.param(qp), t.param(kp),
                                               t.param(values), t.param(v), {0},
                                               {1}));
  CHECK((out.row(0) - values.value.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradients: negative log-likelihood with weights") {
  ParameterStore<double> store;
  Rng rng(11);
  auto& logits = store.create("logits", 5, 7);
  randomize(logits, rng, 1.5);
  std::vector<int> labels = {0, 3, 6, 2, 1};
  std::vector<double> weights = {1.0, 0.0, 2.0, 1.0, 1.0};

  check_gradients(store, [&](DTape& t) {
    return t.nll_from_logits(t.param(logits), labels, weights);
  });
}

TEST_CASE("nll of uniform logits is weighted log of class count") {
  ParameterStore<double> store;
  auto& logits = store.create("logits", 3, 4);
  logits.value.setZero();
  DTape t;
  double loss =
      t.val(t.nll_from_logits(t.param(logits), {0, 1, 2}, {1.0, 1.0, 0.5}))(0, 0);
  CHECK(loss == doctest::Approx(2.5 * std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("gradients: scalar sum combiner") {
  ParameterStore<double> store;
  Rng rng(12);
  auto& a = store.create("a", 2, 3);
  auto& b = store.create("b", 3, 2);
  randomize(a, rng);
  randomize(b, rng);

  check_gradients(store, [&](DTape& t) {
    Rng wrng(84);
    DTape::Var s1 = weighted_sum(t, t.tanh_op(t.param(a)), wrng);
    DTape::Var s2 = weighted_sum(t, t.sigmoid(t.param(b)), wrng);
    DTape::Var s3 = t.scale(s1, 3.0);
    return t.sum({s1, s2, s3});
  });
}

TEST_CASE("dropout at rate zero is the identity") {
  ParameterStore<double> store;
  Rng rng(13);
  auto& x = store.create("x", 3, 3);
  randomize(x, rng);
  DTape t;
  Rng drng(99);
  DTape::Var xv = t.param(x);
  CHECK(t.dropout(xv, 0.0, drng) == xv);
}

TEST_CASE("dropout scales kept entries and zeroes dropped ones") {
  ParameterStore<double> store;
  auto& x = store.create("x", 20, 20);
  x.value.setOnes();
  DTape t;
  Rng drng(100);
  const DMat& out = t.val(t.dropout(t.param(x), 0.5, drng));
  int zeros = 0, scaled = 0;
  for (int i = 0; i < out.rows(); ++i) {
    for (int j = 0; j < out.cols(); ++j) {
      if (out(i, j) == 0.0) {
        ++zeros;
      } else {
        CHECK(out(i, j) == doctest::Approx(2.0));
        ++scaled;
      }
    }
  }
  CHECK(zeros + scaled == 400);
  CHECK(zeros > 120);  // rate 0.5 over 400 draws
  CHECK(zeros < 280);
}

TEST_CASE("parameter store rejects duplicates and reports finiteness") {
  ParameterStore<double> store;
  store.create("w", 2, 2);
  CHECK_THROWS_AS(store.create("w", 1, 1), ContractError);
  CHECK(store.all_finite());
  store.get("w").value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(store.all_finite());
}

TEST_CASE("parameter gradients accumulate across two backward passes") {
  ParameterStore<double> store;
  auto& x = store.create("x", 1, 1);
  x.value(0, 0) = 2.0;
  store.zero_grads();
  for (int rep = 0; rep < 2; ++rep) {
    DTape t;
    DTape::Var v = t.param(x);
    t.backward(t.mul(v, v));  // d/dx x^2 = 2x = 4
  }
  CHECK(x.grad(0, 0) == doctest::Approx(8.0));
}
