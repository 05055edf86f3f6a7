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

#include "opcorrect/model.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"

namespace opcorrect {
namespace {

using DMat = Mat<double>;

// Small corpus shared by the model fixtures; labels come from the real
// tokenize + align pipeline so every example satisfies its invariants.
Vocabulary fixture_vocab() {
  std::vector<std::string> corpus = {
      "show me the cheapest airfare to boston",
      "list flights from denver to atlanta",
      "what is the fare to san francisco",
      "i need a ticket for tomorrow morning",
  };
  return build_vocab(corpus, 120, 1);
}

std::vector<LabeledExample> fixture_examples(const Vocabulary& vocab) {
  std::vector<std::pair<std::string, std::string>> pairs = {
      {"show me the cheaper stair to boston", "show me the cheapest airfare to boston"},
      {"list flights denver to atlanta", "list flights from denver to atlanta"},
      {"what is the fare to san francisco", "what is the fare to san francisco"},
      {"i need ticket for morning", "i need a ticket for tomorrow morning"},
  };
  std::vector<LabeledExample> out;
  for (const auto& [asr, ref] : pairs) {
    out.push_back(make_labels(tokenize(asr, vocab), tokenize(ref, vocab)));
    out.back().validate();
  }
  return out;
}

ModelConfig small_config(const Vocabulary& vocab, const std::string& kind) {
  ModelConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.hidden_dim = 16;
  cfg.encoder_layers = 2;
  cfg.encoder_heads = 2;
  cfg.feedforward_dim = 24;
  cfg.max_positions = 64;
  cfg.decoder_kind = kind;
  cfg.decoder_layers = 1;
  cfg.max_decode_len = 10;
  cfg.alpha = 3.0;
  cfg.dropout = 0.0;
  return cfg;
}

// Central finite differences over every parameter entry against the analytic
// gradient of the batch loss.
template <typename Model, typename Forward>
void check_model_gradients(Model& model, Forward forward, double eps = 1e-5,
                           double tol = 1e-3) {
  Tape<double> tape;
  auto result = forward(tape);
  model.params().zero_grads();
  tape.backward(result.loss);

  auto loss_value = [&]() {
    Tape<double> t2;
    return static_cast<double>(forward(t2).total_value);
  };

  for (size_t pi = 0; pi < model.params().size(); ++pi) {
    auto& p = model.params().at(pi);
    for (int r = 0; r < p.value.rows(); ++r) {
      for (int c = 0; c < p.value.cols(); ++c) {
        const double saved = p.value(r, c);
        p.value(r, c) = saved + eps;
        const double up = loss_value();
        p.value(r, c) = saved - eps;
        const double down = loss_value();
        p.value(r, c) = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double an = p.grad(r, c);
        const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-4});
        INFO(p.name, "(", r, ",", c, ") fd=", fd, " an=", an);
        REQUIRE(std::fabs(fd - an) <= tol * denom);
      }
    }
  }
}

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

TEST_CASE("model config validates field ranges") {
  Vocabulary vocab = fixture_vocab();
  ModelConfig good = small_config(vocab, "lstm");
  CHECK_NOTHROW(good.validate());

  ModelConfig bad = good;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.hidden_dim = 30;  // not divisible by 4 heads below
  bad.encoder_heads = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.decoder_kind = "gru";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.vocab_size = Vocabulary::kNumReserved;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.max_decode_len = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("model config json round trip") {
  Vocabulary vocab = fixture_vocab();
  ModelConfig cfg = small_config(vocab, "transformer");
  cfg.dropout = 0.25;
  ModelConfig back = ModelConfig::from_json(cfg.to_json());
  CHECK(back.vocab_size == cfg.vocab_size);
  CHECK(back.hidden_dim == cfg.hidden_dim);
  CHECK(back.decoder_kind == cfg.decoder_kind);
  CHECK(back.max_decode_len == cfg.max_decode_len);
  CHECK(back.alpha == cfg.alpha);
  CHECK(back.dropout == cfg.dropout);

  nlohmann::json j = cfg.to_json();
  j.erase("hidden_dim");
  CHECK_THROWS_AS(ModelConfig::from_json(j), ConfigError);
}

TEST_CASE("parameter layout matches configuration") {
  Vocabulary vocab = fixture_vocab();
  ModelConfig cfg = small_config(vocab, "lstm");
  EditModel<float> model(cfg, 7);
  auto& ps = model.params();
  CHECK(ps.get("we").value.rows() == cfg.vocab_size);
  CHECK(ps.get("we").value.cols() == cfg.hidden_dim);
  CHECK(ps.get("pe").value.rows() == cfg.max_positions);
  CHECK(ps.get("op.w").value.rows() == cfg.hidden_dim);
  CHECK(ps.get("op.w").value.cols() == 3);
  CHECK(ps.get("dec.lstm.w_ih").value.cols() == 4 * cfg.hidden_dim);
  CHECK(ps.get("dec.head.w").value.rows() == 2 * cfg.hidden_dim);
  CHECK(ps.get("dec.head.w").value.cols() == cfg.vocab_size);
  // Forget-gate bias starts at one.
  const auto& b = ps.get("dec.lstm.b").value;
  for (int j = 0; j < cfg.hidden_dim; ++j) {
    CHECK(b(0, cfg.hidden_dim + j) == 1.0f);
    CHECK(b(0, j) == 0.0f);
  }

  EditModel<float> tmodel(small_config(vocab, "transformer"), 7);
  auto& tps = tmodel.params();
  CHECK(tps.get("dec.fuse.w").value.rows() == 2 * cfg.hidden_dim);
  CHECK(tps.get("dec.fuse.w").value.cols() == cfg.hidden_dim);
  CHECK(tps.get("dec.head.w").value.rows() == cfg.hidden_dim);
  CHECK(tps.has("dec0.self.q.w"));
  CHECK(tps.has("dec0.cross.o.b"));
}

TEST_CASE("encode produces one vector per token and is deterministic") {
  Vocabulary vocab = fixture_vocab();
  EditModel<float> model(small_config(vocab, "lstm"), 11);
  TokenSequence x = insert_dummies(tokenize("show me the fare", vocab));
  EncodedSequence<float> a = model.encode(x);
  EncodedSequence<float> b = model.encode(x);
  CHECK(a.vectors.rows() == static_cast<int>(x.size()));
  CHECK(a.vectors.cols() == 16);
  CHECK(a.vectors == b.vectors);  // bitwise: eval mode is deterministic

  std::vector<int> too_long(200, Vocabulary::kUnkId);
  CHECK_THROWS_AS(model.encode_ids(too_long), DataError);
}

TEST_CASE("operation distributions normalize, flatten at zero, and shift-invariate") {
  Vocabulary vocab = fixture_vocab();
  EditModel<double> model(small_config(vocab, "lstm"), 3);
  TokenSequence x = insert_dummies(tokenize("list flights from denver", vocab));
  EncodedSequence<double> enc = model.encode(x);
  DMat dists = model.predict_operations(enc);
  CHECK(dists.rows() == static_cast<int>(x.size()));
  for (int i = 0; i < dists.rows(); ++i) {
    CHECK(dists.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
    for (int c = 0; c < 3; ++c) CHECK(dists(i, c) >= 0.0);
  }

  // Zero head -> exactly uniform thirds.
  model.params().get("op.w").value.setZero();
  model.params().get("op.b").value.setZero();
  DMat flat = model.predict_operations(enc);
  for (int i = 0; i < flat.rows(); ++i) {
    for (int c = 0; c < 3; ++c) CHECK(flat(i, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  // Adding one constant to every logit leaves the distribution unchanged.
  model.params().get("op.b").value.setConstant(4.2);
  DMat shifted = model.predict_operations(enc);
  for (int i = 0; i < shifted.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      CHECK(shifted(i, c) == doctest::Approx(flat(i, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("operation loss sums gold negative log-likelihoods over the mask") {
  // Hand-built distributions: position 0 puts e^-0.5 on its gold tag,
  // position 1 is masked out, position 2 is uniform.
  DMat dists(3, 3);
  dists.row(0) << std::exp(-0.5), 1.0 - std::exp(-0.5) - 0.01, 0.01;
  dists.row(1) << 0.2, 0.5, 0.3;
  dists.row(2) << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  std::vector<OperationTag> gold = {OperationTag::kKeep, OperationTag::kChange,
                                    OperationTag::kDelete};
  std::vector<uint8_t> mask = {1, 0, 1};
  double loss = operation_loss<double>(dists, gold, mask);
  CHECK(loss == doctest::Approx(0.5 + std::log(3.0)).epsilon(1e-12));
  double mean = operation_loss<double>(dists, gold, mask, true);
  CHECK(mean == doctest::Approx((0.5 + std::log(3.0)) / 2.0).epsilon(1e-12));

  // Perfect one-hot predictions cost nothing.
  DMat perfect = DMat::Zero(2, 3);
  perfect(0, 0) = 1.0;
  perfect(1, 2) = 1.0;
  std::vector<OperationTag> g2 = {OperationTag::kKeep, OperationTag::kChange};
  std::vector<uint8_t> m2 = {1, 1};
  CHECK(operation_loss<double>(perfect, g2, m2) == 0.0);
}

TEST_CASE("sequence nll is zero for perfect predictions") {
  std::vector<DMat> steps;
  DMat one_hot = DMat::Zero(1, 7);
  one_hot(0, 4) = 1.0;
  steps.push_back(one_hot);
  one_hot.setZero();
  one_hot(0, 3) = 1.0;
  steps.push_back(one_hot);
  CHECK(sequence_nll<double>(steps, {4, 3}) == 0.0);
}

TEST_CASE("decode steps return distributions and guard state") {
  Vocabulary vocab = fixture_vocab();
  TokenSequence x = insert_dummies(tokenize("what is the fare", vocab));

  for (const char* kind : {"lstm", "transformer"}) {
    CAPTURE(kind);
    EditModel<double> model(small_config(vocab, kind), 23);
    EncodedSequence<double> enc = model.encode(x);
    DecodeState<double> st = model.decode_begin(enc, 3);
    DMat dist = std::string(kind) == "lstm"
                    ? model.lstm_decode_step(st, Vocabulary::kBosId, enc)
                    : model.transformer_decode_step(st, enc);
    CHECK(dist.rows() == 1);
    CHECK(dist.cols() == vocab.size());
    CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-6));
    for (int c = 0; c < dist.cols(); ++c) CHECK(dist(0, c) >= 0.0);

    DecodeState<double> raw;
    if (std::string(kind) == "lstm") {
      CHECK_THROWS_AS(model.lstm_decode_step(raw, 0, enc), ContractError);
    } else {
      CHECK_THROWS_AS(model.transformer_decode_step(raw, enc), ContractError);
    }
  }

  // Recurrent initial state: hidden seeded with the operation position's
  // encoding, cell state zero.
  EditModel<double> model(small_config(vocab, "lstm"), 23);
  EncodedSequence<double> enc = model.encode(x);
  DecodeState<double> st = model.decode_begin(enc, 5);
  CHECK(st.h == DMat(enc.vectors.row(5)));
  CHECK(st.c.isZero(0.0));
  CHECK_THROWS_AS(model.decode_begin(enc, enc.length()), ContractError);
}

TEST_CASE("decode step is pure given frozen state") {
  Vocabulary vocab = fixture_vocab();
  TokenSequence x = insert_dummies(tokenize("i need a ticket", vocab));
  EditModel<double> model(small_config(vocab, "lstm"), 31);
  EncodedSequence<double> enc = model.encode(x);
  DecodeState<double> a = model.decode_begin(enc, 1);
  DecodeState<double> b = model.decode_begin(enc, 1);
  DMat da = model.lstm_decode_step(a, Vocabulary::kBosId, enc);
  DMat db = model.lstm_decode_step(b, Vocabulary::kBosId, enc);
  CHECK(da == db);
  CHECK(a.h == b.h);
  CHECK(a.c == b.c);
}

TEST_CASE("additive attention over a single key returns that value row") {
  ParameterStore<double> store;
  Rng rng(5);
  AdditiveAttentionP<double> attn;
  attn.create(store, "attn", 6, rng);
  DMat enc(1, 6);
  enc << 0.3, -1.2, 0.8, 0.1, -0.4, 2.0;
  DMat query(1, 6);
  query << 1.0, 0.5, -0.5, 0.2, 0.0, -1.0;
  DMat ctx = attn.context_row(query, attn.project_keys(enc), enc);
  CHECK(ctx == enc);  // softmax over one key is exactly 1
}

TEST_CASE("causal self-attention leaves earlier rows untouched when the prefix grows") {
  ParameterStore<double> store;
  Rng rng(9);
  DecoderLayerP<double> layer;
  layer.create(store, "dec0", 8, 2, 16, rng);

  Rng data(77);
  DMat h5(5, 8), src(4, 8);
  for (int i = 0; i < h5.rows(); ++i) {
    for (int j = 0; j < 8; ++j) h5(i, j) = data.normal();
  }
  for (int i = 0; i < src.rows(); ++i) {
    for (int j = 0; j < 8; ++j) src(i, j) = data.normal();
  }
  DMat kp = layer.cross.project_k(src);
  DMat vp = layer.cross.project_v(src);

  DMat h4 = h5.topRows(4);
  DMat full = h5;
  layer.apply_inplace(full, kp, vp);
  layer.apply_inplace(h4, kp, vp);
  // Appending a row changes nothing about the rows before it.
  CHECK(full.topRows(4) == h4);
}

TEST_CASE("transformer prefix length is bounded by the decode budget") {
  Vocabulary vocab = fixture_vocab();
  ModelConfig cfg = small_config(vocab, "transformer");
  cfg.max_decode_len = 3;
  EditModel<double> model(cfg, 13);
  TokenSequence x = insert_dummies(tokenize("show me", vocab));
  EncodedSequence<double> enc = model.encode(x);
  DecodeState<double> st = model.decode_begin(enc, 0);
  st.prefix = {Vocabulary::kBosId, 6, 7, 8};
  CHECK_THROWS_AS(model.transformer_decode_step(st, enc), DataError);
}

TEST_CASE("decoder loss is zero without change positions and total loss composes") {
  Vocabulary vocab = fixture_vocab();
  std::string same = "what is the fare to san francisco";
  LabeledExample identity = make_labels(tokenize(same, vocab), tokenize(same, vocab));

  for (const char* kind : {"lstm", "transformer"}) {
    CAPTURE(kind);
    EditModel<double> model(small_config(vocab, kind), 41);
    EncodedSequence<double> enc = model.encode(identity.x);
    CHECK(model.decoder_loss(identity, enc) == 0.0);

    LabeledExample edited = make_labels(
        tokenize("what is fare to sen francisco", vocab),
        tokenize(same, vocab));
    EncodedSequence<double> enc2 = model.encode(edited.x);
    double dec = model.decoder_loss(edited, enc2);
    CHECK(dec > 0.0);
    DMat dists = model.predict_operations(enc2);
    std::vector<uint8_t> mask(edited.tags.size(), 1);
    double oper = operation_loss<double>(dists, edited.tags, mask);
    CHECK(model.total_loss(edited, enc2) ==
          doctest::Approx(3.0 * oper + dec).epsilon(1e-12));
  }
}

TEST_CASE("batch builder pads, masks, and truncates targets") {
  Vocabulary vocab = fixture_vocab();
  std::vector<LabeledExample> exs = fixture_examples(vocab);
  Batch b = batch_from_examples(exs, 10);

  CHECK(b.num_sequences() == static_cast<int>(exs.size()));
  int max_len = 0;
  for (const auto& ex : exs) max_len = std::max(max_len, static_cast<int>(ex.x.size()));
  CHECK(b.num_rows() == max_len * b.num_sequences());
  size_t total_spans = 0;
  for (size_t i = 0; i < exs.size(); ++i) {
    const auto& ex = exs[i];
    const int begin = b.seq_begin[i];
    CHECK(b.seq_len[i] == max_len);
    CHECK(b.seq_valid[i] == static_cast<int>(ex.x.size()));
    for (int r = 0; r < max_len; ++r) {
      const bool valid = r < static_cast<int>(ex.x.size());
      CHECK(b.tag_mask[static_cast<size_t>(begin + r)] == (valid ? 1 : 0));
      if (valid) {
        CHECK(b.ids[static_cast<size_t>(begin + r)] == ex.x.ids[static_cast<size_t>(r)]);
        CHECK(b.tags[static_cast<size_t>(begin + r)] ==
              static_cast<int>(ex.tags[static_cast<size_t>(r)]));
      } else {
        CHECK(b.ids[static_cast<size_t>(begin + r)] == Vocabulary::kPadId);
      }
    }
    total_spans += ex.targets.size();
  }
  CHECK(b.spans.size() == total_spans);
  for (const auto& sp : b.spans) {
    CHECK(!sp.target.empty());
    CHECK(static_cast<int>(sp.target.size()) <= 10);
  }

  // A tiny decode budget truncates span targets.
  Batch tight = batch_from_examples(exs, 1);
  for (const auto& sp : tight.spans) CHECK(sp.target.size() == 1);
}

TEST_CASE("padding rows never influence the loss") {
  Vocabulary vocab = fixture_vocab();
  std::vector<LabeledExample> exs = fixture_examples(vocab);
  for (const char* kind : {"lstm", "transformer"}) {
    CAPTURE(kind);
    EditModel<double> model(small_config(vocab, kind), 47);
    Batch b = batch_from_examples(exs, 10);
    Tape<double> t1;
    auto r1 = model.forward_loss(t1, b, nullptr);

    // Rewrite every padding row's token id; losses must be bitwise equal.
    Batch mutated = b;
    for (int r = 0; r < b.num_rows(); ++r) {
      if (!b.tag_mask[static_cast<size_t>(r)]) {
        mutated.ids[static_cast<size_t>(r)] = Vocabulary::kUnkId;
      }
    }
    Tape<double> t2;
    auto r2 = model.forward_loss(t2, mutated, nullptr);
    CHECK(r1.total_value == r2.total_value);
    CHECK(r1.oper_value == r2.oper_value);
    CHECK(r1.dec_value == r2.dec_value);
  }
}

TEST_CASE("training forward agrees with the eval path") {
  Vocabulary vocab = fixture_vocab();
  std::vector<LabeledExample> exs = fixture_examples(vocab);
  for (const char* kind : {"lstm", "transformer"}) {
    CAPTURE(kind);
    EditModel<double> model(small_config(vocab, kind), 53);
    Batch b = batch_from_examples(exs, 10);
    Tape<double> t;
    auto result = model.forward_loss(t, b, nullptr);

    double oper = 0.0, dec = 0.0;
    for (const auto& ex : exs) {
      EncodedSequence<double> enc = model.encode(ex.x);
      DMat dists = model.predict_operations(enc);
      std::vector<uint8_t> mask(ex.tags.size(), 1);
      oper += operation_loss<double>(dists, ex.tags, mask);
      dec += model.decoder_loss(ex, enc);
    }
    CHECK(result.oper_value == doctest::Approx(oper).epsilon(1e-9));
    CHECK(result.dec_value == doctest::Approx(dec).epsilon(1e-9));
    CHECK(result.total_value ==
          doctest::Approx(3.0 * oper + dec).epsilon(1e-9));
    CHECK(result.tag_count > 0);
    CHECK(result.tok_count > 0);
  }
}

TEST_CASE("analytic gradients of the batch loss match finite differences") {
  Vocabulary vocab = fixture_vocab();
  std::vector<LabeledExample> exs = fixture_examples(vocab);
  // Keep only two short examples so the sweep stays quick but still covers
  // both supervised heads.
  std::vector<LabeledExample> subset = {exs[0], exs[3]};

  for (const char* kind : {"lstm", "transformer"}) {
    CAPTURE(kind);
    ModelConfig cfg = small_config(vocab, kind);
    cfg.hidden_dim = 8;
    cfg.encoder_layers = 1;
    cfg.encoder_heads = 2;
    cfg.feedforward_dim = 12;
    cfg.max_decode_len = 6;
    EditModel<double> model(cfg, 61);
    Batch b = batch_from_examples(subset, cfg.max_decode_len);
    REQUIRE(!b.spans.empty());
    check_model_gradients(model, [&](Tape<double>& t) {
      return model.forward_loss(t, b, nullptr);
    });
  }
}

TEST_CASE("tag class weights scale the operation loss") {
  Vocabulary vocab = fixture_vocab();
  std::vector<LabeledExample> exs = fixture_examples(vocab);
  EditModel<double> model(small_config(vocab, "lstm"), 67);
  Batch b = batch_from_examples(exs, 10);
  Tape<double> t1;
  auto base = model.forward_loss(t1, b, nullptr);
  std::array<double, 3> twice = {2.0, 2.0, 2.0};
  Tape<double> t2;
  auto scaled = model.forward_loss(t2, b, nullptr, &twice);
  CHECK(scaled.oper_value == doctest::Approx(2.0 * base.oper_value).epsilon(1e-12));
  CHECK(scaled.dec_value == doctest::Approx(base.dec_value).epsilon(1e-12));
}

TEST_CASE("baseline model trains on full regeneration and decodes greedily") {
  Vocabulary vocab = fixture_vocab();
  ModelConfig cfg = small_config(vocab, "transformer");
  BaselineModel<double> model(cfg, 71);

  std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs;
  pairs.push_back({tokenize("show me the cheaper stair", vocab).ids,
                   tokenize("show me the cheapest airfare", vocab).ids});
  pairs.push_back({tokenize("list flights denver", vocab).ids,
                   tokenize("list flights from denver", vocab).ids});
  Seq2SeqBatch b = seq2seq_batch_from_pairs(pairs);

  // Target rows: one per prefix token, labels end with EOS.
  CHECK(b.tgt_len[0] == static_cast<int>(pairs[0].second.size()) + 1);
  CHECK(b.tgt_ids[static_cast<size_t>(b.tgt_begin[0])] == Vocabulary::kBosId);
  CHECK(b.tgt_labels[static_cast<size_t>(b.tgt_begin[1] + b.tgt_len[1] - 1)] ==
        Vocabulary::kEosId);

  Tape<double> t;
  auto result = model.forward_loss(t, b, nullptr);
  CHECK(std::isfinite(result.total_value));
  CHECK(result.total_value > 0.0);

  EncodedSequence<double> enc = model.encode_ids(pairs[0].first);
  DMat dist = model.decode_step({Vocabulary::kBosId}, enc);
  CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("baseline gradients match finite differences") {
  Vocabulary vocab = fixture_vocab();
  ModelConfig cfg = small_config(vocab, "transformer");
  cfg.hidden_dim = 8;
  cfg.encoder_layers = 1;
  cfg.encoder_heads = 2;
  cfg.feedforward_dim = 12;
  BaselineModel<double> model(cfg, 73);
  std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs;
  pairs.push_back({tokenize("what is fare", vocab).ids,
                   tokenize("what is the fare", vocab).ids});
  Seq2SeqBatch b = seq2seq_batch_from_pairs(pairs);
  check_model_gradients(model, [&](Tape<double>& t) {
    return model.forward_loss(t, b, nullptr);
  });
}

TEST_CASE("checkpoints round-trip parameters and metadata") {
  Vocabulary vocab = fixture_vocab();
  const std::string vh = hex64(vocab.content_hash());
  for (const char* kind : {"lstm", "transformer"}) {
    CAPTURE(kind);
    ModelConfig cfg = small_config(vocab, kind);
    EditModel<float> model(cfg, 83);
    const std::string path = temp_path(std::string("opcorrect_ckpt_") + kind + ".bin");
    write_checkpoint(path, "edit", cfg, vh, model.params());

    CheckpointInfo info = read_checkpoint_info(path);
    CHECK(info.kind == "edit");
    CHECK(info.vocab_hash == vh);
    CHECK(info.config.decoder_kind == cfg.decoder_kind);
    CHECK(info.config.vocab_size == cfg.vocab_size);

    EditModel<float> restored(info.config, 999);  // different init, then overwritten
    read_checkpoint_tensors(path, restored.params());
    for (size_t i = 0; i < model.params().size(); ++i) {
      const auto& a = model.params().at(i);
      const auto& b = restored.params().at(i);
      REQUIRE(a.name == b.name);
      CHECK(a.value == b.value);
    }
    std::remove(path.c_str());
  }
}

TEST_CASE("checkpoint loading rejects malformed files") {
  Vocabulary vocab = fixture_vocab();
  ModelConfig cfg = small_config(vocab, "lstm");
  EditModel<float> model(cfg, 89);
  const std::string path = temp_path("opcorrect_ckpt_bad.bin");
  write_checkpoint(path, "edit", cfg, "deadbeef", model.params());

  std::string blob = read_file(path);
  write_file(path, "JUNK" + blob.substr(4));
  CHECK_THROWS_AS(read_checkpoint_info(path), DataError);

  write_file(path, blob.substr(0, blob.size() - 3));  // truncated payload
  EditModel<float> other(cfg, 1);
  CHECK_THROWS_AS(read_checkpoint_tensors(path, other.params()), DataError);

  write_file(path, blob + "xx");  // trailing bytes
  CHECK_THROWS_AS(read_checkpoint_tensors(path, other.params()), DataError);

  // A model with a different shape inventory cannot absorb the file.
  write_file(path, blob);
  ModelConfig bigger = cfg;
  bigger.hidden_dim = 32;
  EditModel<float> wrong(bigger, 2);
  CHECK_THROWS_AS(read_checkpoint_tensors(path, wrong.params()), DataError);
  std::remove(path.c_str());
}

}  // namespace
}  // namespace opcorrect
