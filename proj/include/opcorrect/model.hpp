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

#ifndef OPCORRECT_MODEL_HPP_
#define OPCORRECT_MODEL_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "opcorrect/alignment.hpp"
#include "opcorrect/autodiff.hpp"
#include "opcorrect/layers.hpp"
#include "opcorrect/vocab.hpp"

namespace opcorrect {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ModelConfig {
  int vocab_size = 0;
  int hidden_dim = 64;
  int encoder_layers = 2;
  int encoder_heads = 4;
  int feedforward_dim = 256;
  int max_positions = 128;
  std::string decoder_kind = "lstm";  // "lstm" or "transformer"
  int decoder_layers = 1;
  int max_decode_len = 10;
  double alpha = 3.0;
  double dropout = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// Batches (flattened row layout shared by training forward passes)
// ---------------------------------------------------------------------------

// All sequences of a batch are stacked into one row block: sequence s owns
// rows [seq_begin[s], seq_begin[s] + seq_len[s]); rows past seq_valid[s] are
// PAD.  CHANGE spans carry their teacher-forcing targets (EOS-terminated,
// truncated to max_decode_len).
struct Batch {
  std::vector<int> ids;
  std::vector<int> positions;
  std::vector<int> seq_begin;
  std::vector<int> seq_len;
  std::vector<int> seq_valid;
  std::vector<int> tags;           // per row, gold operation as int
  std::vector<uint8_t> tag_mask;   // per row, 1 where supervised
  struct Span {
    int seq = 0;
    int enc_row = 0;               // flattened row of the CHANGE position
    std::vector<int> target;
  };
  std::vector<Span> spans;

  int num_rows() const { return static_cast<int>(ids.size()); }
  int num_sequences() const { return static_cast<int>(seq_begin.size()); }
};

// Source rows as in Batch; target prefixes are stacked ragged (no padding),
// one row per decoder input token, with the next-token label alongside.
struct Seq2SeqBatch {
  std::vector<int> src_ids;
  std::vector<int> src_positions;
  std::vector<int> src_begin;
  std::vector<int> src_len;
  std::vector<int> src_valid;
  std::vector<int> tgt_ids;        // [BOS, y_0, ..., y_{m-2}] per sequence
  std::vector<int> tgt_positions;
  std::vector<int> tgt_begin;
  std::vector<int> tgt_len;
  std::vector<int> tgt_labels;     // [y_0, ..., y_{m-1}=EOS]

  int num_src_rows() const { return static_cast<int>(src_ids.size()); }
  int num_sequences() const { return static_cast<int>(src_begin.size()); }
};

// Stacks labeled examples into one padded batch.  Targets are truncated to
// max_decode_len tokens (dropping EOS when a gap is longer than the decode
// budget; generation is capped at the same budget).
Batch batch_from_examples(std::span<const LabeledExample> examples,
                          int max_decode_len);

// Stacks (source tokens, target tokens) pairs for the sequence-to-sequence
// baseline; the decoder side learns [BOS, t...] -> [t..., EOS].
Seq2SeqBatch seq2seq_batch_from_pairs(
    std::span<const std::pair<std::vector<int>, std::vector<int>>> pairs);

// ---------------------------------------------------------------------------
// Forward-pass results
// ---------------------------------------------------------------------------

template <typename S>
struct ForwardResult {
  typename Tape<S>::Var loss = -1;  // total training loss (scalar node)
  S oper_value = S(0);              // operation-head loss (sum over positions)
  S dec_value = S(0);               // decoder loss (sum over spans/steps)
  S total_value = S(0);
  int tag_count = 0, tag_correct = 0;
  int tok_count = 0, tok_correct = 0;
};

// ---------------------------------------------------------------------------
// Encoded input and decode state (eval path)
// ---------------------------------------------------------------------------

// One utterance's encoder output plus projection caches reused across decode
// steps.  Eval sequences carry no padding, so every row is a valid key.
template <typename S>
struct EncodedSequence {
  Mat<S> vectors;                   // n x d
  Mat<S> additive_kp;               // n x d (recurrent decoder key projections)
  std::vector<Mat<S>> cross_kp;     // per decoder layer (transformer decoder)
  std::vector<Mat<S>> cross_vp;

  int length() const { return static_cast<int>(vectors.rows()); }
};

template <typename S>
struct DecodeState {
  Mat<S> h, c;                      // recurrent decoder state, 1 x d
  std::vector<int> prefix;          // transformer decoder prefix (starts BOS)
  int k_row = -1;                   // operation position this span regenerates
  bool initialized = false;
};

// ---------------------------------------------------------------------------
// Shared encoder stack
// ---------------------------------------------------------------------------

template <typename S>
struct EncoderStack {
  Parameter<S>* we = nullptr;
  Parameter<S>* pe = nullptr;
  LayerNormP<S> emb_ln;
  std::vector<EncoderLayerP<S>> layers;
  int dim = 0;

  void create(ParameterStore<S>& store, const ModelConfig& cfg, Rng& rng) {
    dim = cfg.hidden_dim;
    we = &store.create("we", cfg.vocab_size, dim);
    pe = &store.create("pe", cfg.max_positions, dim);
    init_normal(*we, rng, 0.02);
    init_normal(*pe, rng, 0.02);
    emb_ln.create(store, "emb_ln", dim);
    layers.resize(static_cast<size_t>(cfg.encoder_layers));
    for (int i = 0; i < cfg.encoder_layers; ++i) {
      layers[static_cast<size_t>(i)].create(store, "enc" + std::to_string(i),
                                            dim, cfg.encoder_heads,
                                            cfg.feedforward_dim, rng);
    }
  }

  typename Tape<S>::Var apply(Tape<S>& t, const std::vector<int>& ids,
                              const std::vector<int>& positions,
                              const AttentionSpans& spans, S dropout_rate,
                              Rng* dropout_rng) const {
    typename Tape<S>::Var h =
        t.add(t.gather_rows(t.param(*we), ids),
              t.gather_rows(t.param(*pe), positions));
    h = emb_ln.apply(t, h);
    for (const auto& layer : layers) {
      h = layer.apply(t, h, spans, dropout_rate, dropout_rng);
    }
    return h;
  }

  Mat<S> apply(const std::vector<int>& ids) const {
    const int n = static_cast<int>(ids.size());
    Mat<S> h(n, dim);
    for (int i = 0; i < n; ++i) {
      h.row(i) = we->value.row(ids[static_cast<size_t>(i)]) + pe->value.row(i);
    }
    emb_ln.apply_inplace(h);
    for (const auto& layer : layers) layer.apply_inplace(h);
    return h;
  }
};

// ---------------------------------------------------------------------------
// Free loss helpers
// ---------------------------------------------------------------------------

// Negative log-likelihood of gold operations under predicted distributions,
// summed over unmasked positions (mean over them when mean is set).
template <typename S>
S operation_loss(const Mat<S>& dists, std::span<const OperationTag> gold,
                 std::span<const uint8_t> mask, bool mean = false) {
  if (static_cast<size_t>(dists.rows()) != gold.size() ||
      gold.size() != mask.size()) {
    throw ContractError("operation_loss: length mismatch");
  }
  S total = S(0);
  int counted = 0;
  for (int i = 0; i < dists.rows(); ++i) {
    if (!mask[static_cast<size_t>(i)]) continue;
    ++counted;
    total -= std::log(dists(i, static_cast<int>(gold[static_cast<size_t>(i)])));
  }
  if (mean && counted > 0) total /= S(counted);
  return total;
}

// Negative log-likelihood of a token sequence under per-step distributions.
template <typename S>
S sequence_nll(const std::vector<Mat<S>>& step_dists,
               const std::vector<int>& target) {
  if (step_dists.size() != target.size()) {
    throw ContractError("sequence_nll: length mismatch");
  }
  S total = S(0);
  for (size_t t = 0; t < target.size(); ++t) {
    total -= std::log(step_dists[t](0, target[t]));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Edit model: encoder + operation head + constrained decoder
// ---------------------------------------------------------------------------

template <typename S>
class EditModel {
 public:
  EditModel(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    encoder_.create(store_, cfg_, rng);
    op_head_.create(store_, "op", cfg_.hidden_dim, 3, rng);
    const int d = cfg_.hidden_dim;
    if (cfg_.decoder_kind == "lstm") {
      lstm_.create(store_, "dec.lstm", d, rng);
      attn_.create(store_, "dec.attn", d, rng);
      head_.create(store_, "dec.head", 2 * d, cfg_.vocab_size, rng);
    } else {
      fuse_ = &store_.create("dec.fuse.w", 2 * d, d);
      init_normal(*fuse_, rng, 0.02);
      dec_layers_.resize(static_cast<size_t>(cfg_.decoder_layers));
      for (int i = 0; i < cfg_.decoder_layers; ++i) {
        dec_layers_[static_cast<size_t>(i)].create(
            store_, "dec" + std::to_string(i), d, cfg_.encoder_heads,
            cfg_.feedforward_dim, rng);
      }
      head_.create(store_, "dec.head", d, cfg_.vocab_size, rng);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<S>& params() { return store_; }
  const ParameterStore<S>& params() const { return store_; }

  // ---- Training forward pass ----

  // Builds the combined training loss alpha * loss_oper + loss_dec on the
  // tape.  tag_class_weights, when given, reweights the operation loss per
  // gold class (K, D, C order); default is uniform weight 1.
  ForwardResult<S> forward_loss(
      Tape<S>& t, const Batch& b, Rng* dropout_rng,
      const std::array<S, 3>* tag_class_weights = nullptr) const {
    using Var = typename Tape<S>::Var;
    if (b.num_sequences() == 0) throw ContractError("forward_loss: empty batch");
    const S drop = static_cast<S>(cfg_.dropout);

    AttentionSpans enc_spans;
    for (int s = 0; s < b.num_sequences(); ++s) {
      enc_spans.add(b.seq_begin[static_cast<size_t>(s)],
                    b.seq_valid[static_cast<size_t>(s)],
                    b.seq_begin[static_cast<size_t>(s)],
                    b.seq_valid[static_cast<size_t>(s)]);
    }
    Var enc = encoder_.apply(t, b.ids, b.positions, enc_spans, drop, dropout_rng);

    ForwardResult<S> out;
    Var tag_logits = op_head_.apply(t, enc);
    std::vector<S> tag_w(static_cast<size_t>(b.num_rows()), S(0));
    for (int r = 0; r < b.num_rows(); ++r) {
      if (!b.tag_mask[static_cast<size_t>(r)]) continue;
      S w = S(1);
      if (tag_class_weights != nullptr) {
        w = (*tag_class_weights)[static_cast<size_t>(
            b.tags[static_cast<size_t>(r)])];
      }
      tag_w[static_cast<size_t>(r)] = w;
    }
    Var l_op = t.nll_from_logits(tag_logits, b.tags, tag_w);
    tally_argmax(t.val(tag_logits), b.tags, b.tag_mask, &out.tag_correct,
                 &out.tag_count);

    Var l_dec = -1;
    if (!b.spans.empty()) {
      l_dec = cfg_.decoder_kind == "lstm"
                  ? lstm_decoder_loss_tape(t, enc, b, &out)
                  : transformer_decoder_loss_tape(t, enc, b, drop, dropout_rng,
                                                  &out);
    }

    Var total = t.scale(l_op, static_cast<S>(cfg_.alpha));
    if (l_dec >= 0) total = t.add(total, l_dec);
    out.loss = total;
    out.oper_value = t.val(l_op)(0, 0);
    out.dec_value = l_dec >= 0 ? t.val(l_dec)(0, 0) : S(0);
    out.total_value = t.val(total)(0, 0);
    return out;
  }

  // ---- Eval path ----

  // Encodes one (dummy-slotted) token sequence and precomputes the decoder's
  // key/value projections so later steps only do per-row work.
  EncodedSequence<S> encode(const TokenSequence& x) const {
    return encode_ids(x.ids);
  }

  EncodedSequence<S> encode_ids(const std::vector<int>& ids) const {
    if (static_cast<int>(ids.size()) > cfg_.max_positions) {
      throw DataError("encode: sequence length " + std::to_string(ids.size()) +
                      " exceeds max_positions " +
                      std::to_string(cfg_.max_positions));
    }
    EncodedSequence<S> enc;
    enc.vectors = encoder_.apply(ids);
    if (cfg_.decoder_kind == "lstm") {
      enc.additive_kp = attn_.project_keys(enc.vectors);
    } else {
      enc.cross_kp.reserve(dec_layers_.size());
      enc.cross_vp.reserve(dec_layers_.size());
      for (const auto& layer : dec_layers_) {
        enc.cross_kp.push_back(layer.cross.project_k(enc.vectors));
        enc.cross_vp.push_back(layer.cross.project_v(enc.vectors));
      }
    }
    return enc;
  }

  // Per-position distributions over {K, D, C}.
  Mat<S> predict_operations(const EncodedSequence<S>& enc) const {
    Mat<S> logits = op_head_.apply(enc.vectors);
    eval_softmax_rows_inplace(logits);
    return logits;
  }

  // Starts a span decode at operation position k_row: recurrent state is
  // seeded with the position's encoding; the transformer prefix starts BOS.
  DecodeState<S> decode_begin(const EncodedSequence<S>& enc, int k_row) const {
    if (k_row < 0 || k_row >= enc.length()) {
      throw ContractError("decode_begin: position out of range");
    }
    DecodeState<S> st;
    st.k_row = k_row;
    st.initialized = true;
    if (cfg_.decoder_kind == "lstm") {
      st.h = enc.vectors.row(k_row);
      st.c = Mat<S>::Zero(1, cfg_.hidden_dim);
    } else {
      st.prefix = {Vocabulary::kBosId};
    }
    return st;
  }

  // One recurrent decoder step: advance the state with the previous token,
  // attend over the encoded input, and return the next-token distribution.
  Mat<S> lstm_decode_step(DecodeState<S>& state, int prev_token,
                          const EncodedSequence<S>& enc) const {
    if (!state.initialized) throw ContractError("lstm_decode_step: state not initialized");
    Mat<S> x = encoder_.we->value.row(prev_token);
    lstm_.step_inplace(x, state.h, state.c);
    Mat<S> ctx = attn_.context_row(state.h, enc.additive_kp, enc.vectors);
    Mat<S> joint(1, 2 * cfg_.hidden_dim);
    joint.leftCols(cfg_.hidden_dim) = ctx;
    joint.rightCols(cfg_.hidden_dim) = state.h;
    Mat<S> logits = head_.apply(joint);
    eval_softmax_rows_inplace(logits);
    return logits;
  }

  // Next-token distribution for the transformer decoder given the state's
  // prefix; recomputes the whole prefix each call (lengths are bounded by
  // max_decode_len, so there is nothing worth caching).
  Mat<S> transformer_decode_step(const DecodeState<S>& state,
                                 const EncodedSequence<S>& enc) const {
    if (!state.initialized) {
      throw ContractError("transformer_decode_step: state not initialized");
    }
    if (static_cast<int>(state.prefix.size()) > cfg_.max_decode_len) {
      throw DataError("transformer_decode_step: prefix exceeds max_decode_len");
    }
    Mat<S> h = fused_prefix_rows(state.prefix, enc.vectors.row(state.k_row));
    for (size_t l = 0; l < dec_layers_.size(); ++l) {
      dec_layers_[l].apply_inplace(h, enc.cross_kp[l], enc.cross_vp[l]);
    }
    Mat<S> logits = head_.apply(h.bottomRows(1));
    eval_softmax_rows_inplace(logits);
    return logits;
  }

  // Teacher-forced decoder loss over all CHANGE spans of one example
  // (token-level negative log-likelihood summed across spans and steps,
  // including the EOS step); zero when the example has no CHANGE positions.
  S decoder_loss(const LabeledExample& labeled,
                 const EncodedSequence<S>& enc) const {
    S total = S(0);
    for (const auto& [pos, target] : labeled.targets) {
      DecodeState<S> st = decode_begin(enc, pos);
      int prev = Vocabulary::kBosId;
      for (size_t t = 0; t < target.ids.size(); ++t) {
        Mat<S> dist;
        if (cfg_.decoder_kind == "lstm") {
          dist = lstm_decode_step(st, prev, enc);
        } else {
          dist = transformer_decode_step(st, enc);
          st.prefix.push_back(target.ids[t]);
        }
        total -= std::log(dist(0, target.ids[t]));
        prev = target.ids[t];
      }
    }
    return total;
  }

  // Combined eval-mode loss: alpha * operation_loss + decoder_loss.
  S total_loss(const LabeledExample& labeled,
               const EncodedSequence<S>& enc) const {
    Mat<S> dists = predict_operations(enc);
    std::vector<uint8_t> mask(labeled.tags.size(), 1);
    S l_op = operation_loss<S>(dists, labeled.tags, mask);
    return static_cast<S>(cfg_.alpha) * l_op + decoder_loss(labeled, enc);
  }

 private:
  // W_p [(WE + PE) concat e_k] for every prefix token.
  Mat<S> fused_prefix_rows(const std::vector<int>& prefix,
                           const Eigen::Ref<const Mat<S>>& ek) const {
    const int m = static_cast<int>(prefix.size());
    const int d = cfg_.hidden_dim;
    Mat<S> joint(m, 2 * d);
    for (int i = 0; i < m; ++i) {
      joint.row(i).head(d) = encoder_.we->value.row(prefix[static_cast<size_t>(i)]) +
                             encoder_.pe->value.row(i);
      joint.row(i).tail(d) = ek.row(0);
    }
    return joint * fuse_->value;
  }

  static void tally_argmax(const Mat<S>& logits, const std::vector<int>& gold,
                           const std::vector<uint8_t>& mask, int* correct,
                           int* count) {
    for (int r = 0; r < logits.rows(); ++r) {
      if (!mask.empty() && !mask[static_cast<size_t>(r)]) continue;
      int best = 0;
      for (int c = 1; c < logits.cols(); ++c) {
        if (logits(r, c) > logits(r, best)) best = c;
      }
      ++*count;
      if (best == gold[static_cast<size_t>(r)]) ++*correct;
    }
  }

  typename Tape<S>::Var lstm_decoder_loss_tape(Tape<S>& t,
                                               typename Tape<S>::Var enc,
                                               const Batch& b,
                                               ForwardResult<S>* out) const {
    using Var = typename Tape<S>::Var;
    const int R = static_cast<int>(b.spans.size());
    const int d = cfg_.hidden_dim;
    std::vector<int> enc_rows(static_cast<size_t>(R));
    std::vector<int> kv_b(static_cast<size_t>(R)), kv_l(static_cast<size_t>(R));
    int steps = 0;
    for (int r = 0; r < R; ++r) {
      const auto& sp = b.spans[static_cast<size_t>(r)];
      enc_rows[static_cast<size_t>(r)] = sp.enc_row;
      kv_b[static_cast<size_t>(r)] = b.seq_begin[static_cast<size_t>(sp.seq)];
      kv_l[static_cast<size_t>(r)] = b.seq_valid[static_cast<size_t>(sp.seq)];
      steps = std::max(steps, static_cast<int>(sp.target.size()));
    }
    Var h = t.gather_rows(enc, enc_rows);
    Var c = t.input(Mat<S>::Zero(R, d));
    Var kp = t.matmul(enc, t.param(*attn_.wk));
    std::vector<Var> step_losses;
    step_losses.reserve(static_cast<size_t>(steps));
    for (int step = 0; step < steps; ++step) {
      std::vector<int> prev(static_cast<size_t>(R));
      std::vector<int> label(static_cast<size_t>(R));
      std::vector<S> w(static_cast<size_t>(R));
      std::vector<uint8_t> live(static_cast<size_t>(R));
      for (int r = 0; r < R; ++r) {
        const auto& tgt = b.spans[static_cast<size_t>(r)].target;
        bool active = step < static_cast<int>(tgt.size());
        prev[static_cast<size_t>(r)] =
            step == 0 ? Vocabulary::kBosId
                      : (active ? tgt[static_cast<size_t>(step - 1)]
                                : Vocabulary::kPadId);
        label[static_cast<size_t>(r)] =
            active ? tgt[static_cast<size_t>(step)] : Vocabulary::kPadId;
        w[static_cast<size_t>(r)] = active ? S(1) : S(0);
        live[static_cast<size_t>(r)] = active ? 1 : 0;
      }
      Var x = t.gather_rows(t.param(*encoder_.we), prev);
      auto [h2, c2] = lstm_.step(t, x, h, c);
      h = h2;
      c = c2;
      Var qp = t.matmul(h, t.param(*attn_.wq));
      Var ctx = t.additive_attention(qp, kp, enc, t.param(*attn_.v), kv_b, kv_l);
      Var logits = head_.apply(t, t.concat_cols(ctx, h));
      step_losses.push_back(t.nll_from_logits(logits, label, w));
      tally_argmax(t.val(logits), label, live, &out->tok_correct,
                   &out->tok_count);
    }
    return t.sum(step_losses);
  }

  typename Tape<S>::Var transformer_decoder_loss_tape(
      Tape<S>& t, typename Tape<S>::Var enc, const Batch& b, S drop,
      Rng* dropout_rng, ForwardResult<S>* out) const {
    using Var = typename Tape<S>::Var;
    std::vector<int> in_ids, in_pos, ek_rows, labels;
    AttentionSpans self_spans, cross_spans;
    for (const auto& sp : b.spans) {
      const int m = static_cast<int>(sp.target.size());
      const int begin = static_cast<int>(in_ids.size());
      for (int i = 0; i < m; ++i) {
        in_ids.push_back(i == 0 ? Vocabulary::kBosId
                                : sp.target[static_cast<size_t>(i - 1)]);
        in_pos.push_back(i);
        ek_rows.push_back(sp.enc_row);
        labels.push_back(sp.target[static_cast<size_t>(i)]);
      }
      self_spans.add(begin, m, begin, m);
      cross_spans.add(begin, m, b.seq_begin[static_cast<size_t>(sp.seq)],
                      b.seq_valid[static_cast<size_t>(sp.seq)]);
    }
    Var e = t.add(t.gather_rows(t.param(*encoder_.we), in_ids),
                  t.gather_rows(t.param(*encoder_.pe), in_pos));
    Var ek = t.gather_rows(enc, ek_rows);
    Var h = t.matmul(t.concat_cols(e, ek), t.param(*fuse_));
    for (const auto& layer : dec_layers_) {
      h = layer.apply(t, h, enc, self_spans, cross_spans, drop, dropout_rng);
    }
    Var logits = head_.apply(t, h);
    std::vector<S> w(labels.size(), S(1));
    Var l = t.nll_from_logits(logits, labels, w);
    tally_argmax(t.val(logits), labels, {}, &out->tok_correct, &out->tok_count);
    return l;
  }

  ModelConfig cfg_;
  ParameterStore<S> store_;
  EncoderStack<S> encoder_;
  LinearP<S> op_head_;
  // Recurrent decoder.
  LstmP<S> lstm_;
  AdditiveAttentionP<S> attn_;
  // Transformer decoder.
  Parameter<S>* fuse_ = nullptr;
  std::vector<DecoderLayerP<S>> dec_layers_;
  // Output head (input width 2d for the recurrent variant, d otherwise).
  LinearP<S> head_;
};

// ---------------------------------------------------------------------------
// Sequence-to-sequence baseline: same encoder, standard transformer decoder
// that regenerates the full output text token by token
// ---------------------------------------------------------------------------

template <typename S>
class BaselineModel {
 public:
  BaselineModel(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    encoder_.create(store_, cfg_, rng);
    dec_layers_.resize(static_cast<size_t>(cfg_.decoder_layers));
    for (int i = 0; i < cfg_.decoder_layers; ++i) {
      dec_layers_[static_cast<size_t>(i)].create(
          store_, "dec" + std::to_string(i), cfg_.hidden_dim,
          cfg_.encoder_heads, cfg_.feedforward_dim, rng);
    }
    head_.create(store_, "dec.head", cfg_.hidden_dim, cfg_.vocab_size, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<S>& params() { return store_; }
  const ParameterStore<S>& params() const { return store_; }

  ForwardResult<S> forward_loss(Tape<S>& t, const Seq2SeqBatch& b,
                                Rng* dropout_rng) const {
    using Var = typename Tape<S>::Var;
    if (b.num_sequences() == 0) throw ContractError("forward_loss: empty batch");
    const S drop = static_cast<S>(cfg_.dropout);

    AttentionSpans enc_spans;
    for (int s = 0; s < b.num_sequences(); ++s) {
      enc_spans.add(b.src_begin[static_cast<size_t>(s)],
                    b.src_valid[static_cast<size_t>(s)],
                    b.src_begin[static_cast<size_t>(s)],
                    b.src_valid[static_cast<size_t>(s)]);
    }
    Var enc = encoder_.apply(t, b.src_ids, b.src_positions, enc_spans, drop,
                             dropout_rng);

    AttentionSpans self_spans, cross_spans;
    for (int s = 0; s < b.num_sequences(); ++s) {
      const int tb = b.tgt_begin[static_cast<size_t>(s)];
      const int tl = b.tgt_len[static_cast<size_t>(s)];
      self_spans.add(tb, tl, tb, tl);
      cross_spans.add(tb, tl, b.src_begin[static_cast<size_t>(s)],
                      b.src_valid[static_cast<size_t>(s)]);
    }
    Var h = t.add(t.gather_rows(t.param(*encoder_.we), b.tgt_ids),
                  t.gather_rows(t.param(*encoder_.pe), b.tgt_positions));
    for (const auto& layer : dec_layers_) {
      h = layer.apply(t, h, enc, self_spans, cross_spans, drop, dropout_rng);
    }
    Var logits = head_.apply(t, h);
    std::vector<S> w(b.tgt_labels.size(), S(1));
    Var l = t.nll_from_logits(logits, b.tgt_labels, w);

    ForwardResult<S> out;
    out.loss = l;
    out.dec_value = t.val(l)(0, 0);
    out.total_value = out.dec_value;
    tally_argmax(t.val(logits), b.tgt_labels, &out.tok_correct, &out.tok_count);
    return out;
  }

  EncodedSequence<S> encode_ids(const std::vector<int>& ids) const {
    if (static_cast<int>(ids.size()) > cfg_.max_positions) {
      throw DataError("encode: sequence length exceeds max_positions");
    }
    EncodedSequence<S> enc;
    enc.vectors = encoder_.apply(ids);
    enc.cross_kp.reserve(dec_layers_.size());
    enc.cross_vp.reserve(dec_layers_.size());
    for (const auto& layer : dec_layers_) {
      enc.cross_kp.push_back(layer.cross.project_k(enc.vectors));
      enc.cross_vp.push_back(layer.cross.project_v(enc.vectors));
    }
    return enc;
  }

  // Next-token distribution given the current output prefix ([BOS, ...]).
  Mat<S> decode_step(const std::vector<int>& prefix,
                     const EncodedSequence<S>& enc) const {
    if (static_cast<int>(prefix.size()) > cfg_.max_positions) {
      throw DataError("decode_step: prefix exceeds max_positions");
    }
    const int m = static_cast<int>(prefix.size());
    Mat<S> h(m, cfg_.hidden_dim);
    for (int i = 0; i < m; ++i) {
      h.row(i) = encoder_.we->value.row(prefix[static_cast<size_t>(i)]) +
                 encoder_.pe->value.row(i);
    }
    for (size_t l = 0; l < dec_layers_.size(); ++l) {
      dec_layers_[l].apply_inplace(h, enc.cross_kp[l], enc.cross_vp[l]);
    }
    Mat<S> logits = head_.apply(h.bottomRows(1));
    eval_softmax_rows_inplace(logits);
    return logits;
  }

 private:
  static void tally_argmax(const Mat<S>& logits, const std::vector<int>& gold,
                           int* correct, int* count) {
    for (int r = 0; r < logits.rows(); ++r) {
      int best = 0;
      for (int c = 1; c < logits.cols(); ++c) {
        if (logits(r, c) > logits(r, best)) best = c;
      }
      ++*count;
      if (best == gold[static_cast<size_t>(r)]) ++*correct;
    }
  }

  ModelConfig cfg_;
  ParameterStore<S> store_;
  EncoderStack<S> encoder_;
  std::vector<DecoderLayerP<S>> dec_layers_;
  LinearP<S> head_;
};

// ---------------------------------------------------------------------------
// Checkpoints: self-describing container with config, vocabulary hash, and
// named tensors as little-endian 32-bit floats
// ---------------------------------------------------------------------------

struct CheckpointInfo {
  std::string kind;  // "edit" or "baseline"
  ModelConfig config;
  std::string vocab_hash;
};

namespace detail {

inline void put_u64_le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline uint64_t get_u64_le(const std::string& s, size_t at) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(s[at + static_cast<size_t>(i)]))
         << (8 * i);
  }
  return v;
}

inline void put_f32_le(std::string& out, float f) {
  uint32_t u;
  static_assert(sizeof(u) == sizeof(f));
  std::memcpy(&u, &f, sizeof(u));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

inline float get_f32_le(const std::string& s, size_t at) {
  uint32_t u = 0;
  for (int i = 0; i < 4; ++i) {
    u |= static_cast<uint32_t>(static_cast<unsigned char>(s[at + static_cast<size_t>(i)]))
         << (8 * i);
  }
  float f;
  std::memcpy(&f, &u, sizeof(f));
  return f;
}

inline constexpr char kCheckpointMagic[8] = {'O', 'P', 'C', 'K',
                                             'P', 'T', '0', '1'};

// Parses the container and returns (header json, payload offset).
std::pair<nlohmann::json, size_t> parse_checkpoint(const std::string& blob,
                                                   const std::string& path);

}  // namespace detail

CheckpointInfo read_checkpoint_info(const std::string& path);

template <typename S>
void write_checkpoint(const std::string& path, const std::string& kind,
                      const ModelConfig& cfg, const std::string& vocab_hash,
                      const ParameterStore<S>& store) {
  nlohmann::json tensors = nlohmann::json::array();
  for (size_t i = 0; i < store.size(); ++i) {
    const auto& p = store.at(i);
    tensors.push_back({p.name, p.value.rows(), p.value.cols()});
  }
  nlohmann::json header = {{"kind", kind},
                           {"config", cfg.to_json()},
                           {"vocab_hash", vocab_hash},
                           {"tensors", tensors}};
  std::string head = header.dump();
  std::string out;
  out.append(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  detail::put_u64_le(out, head.size());
  out += head;
  for (size_t i = 0; i < store.size(); ++i) {
    const auto& v = store.at(i).value;
    for (int r = 0; r < v.rows(); ++r) {
      for (int c = 0; c < v.cols(); ++c) {
        detail::put_f32_le(out, static_cast<float>(v(r, c)));
      }
    }
  }
  write_file(path, out);
}

// Fills an already-constructed model's parameters from a checkpoint, checking
// that the file carries exactly the expected tensors with matching shapes.
template <typename S>
void read_checkpoint_tensors(const std::string& path, ParameterStore<S>& store) {
  std::string blob = read_file(path);
  auto [header, at] = detail::parse_checkpoint(blob, path);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != store.size()) {
    throw DataError("checkpoint " + path + ": tensor count " +
                    std::to_string(tensors.size()) + " != expected " +
                    std::to_string(store.size()));
  }
  for (const auto& entry : tensors) {
    const std::string name = entry.at(0).get<std::string>();
    const int rows = entry.at(1).get<int>();
    const int cols = entry.at(2).get<int>();
    if (!store.has(name)) {
      throw DataError("checkpoint " + path + ": unexpected tensor " + name);
    }
    Parameter<S>& p = store.get(name);
    if (p.value.rows() != rows || p.value.cols() != cols) {
      throw DataError("checkpoint " + path + ": shape mismatch for " + name);
    }
    const size_t need = static_cast<size_t>(rows) * static_cast<size_t>(cols) * 4;
    if (at + need > blob.size()) {
      throw DataError("checkpoint " + path + ": truncated payload");
    }
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        p.value(r, c) = static_cast<S>(detail::get_f32_le(blob, at));
        at += 4;
      }
    }
  }
  if (at != blob.size()) {
    throw DataError("checkpoint " + path + ": trailing bytes after payload");
  }
}

}  // namespace opcorrect

#endif  // OPCORRECT_MODEL_HPP_
