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

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "opcorrect/alignment.hpp"
#include "opcorrect/common.hpp"
#include "opcorrect/infer.hpp"
#include "opcorrect/inject.hpp"
#include "opcorrect/model.hpp"
#include "opcorrect/train.hpp"
#include "opcorrect/vocab.hpp"

namespace opcorrect {
namespace {

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

ModelConfig small_config(const std::string& decoder_kind) {
  ModelConfig cfg;
  cfg.hidden_dim = 16;
  cfg.encoder_layers = 1;
  cfg.encoder_heads = 2;
  cfg.feedforward_dim = 32;
  cfg.max_positions = 96;
  cfg.decoder_kind = decoder_kind;
  return cfg;
}

// Test sentences plus a vocabulary that covers them.
struct TextFixture {
  std::vector<std::string> texts;
  Vocabulary vocab;
};

const TextFixture& texts() {
  static const TextFixture f = [] {
    std::vector<std::string> refs = generate_references(60, 404);
    Vocabulary vocab = build_vocab(refs, 2000, 1);
    return TextFixture{std::move(refs), std::move(vocab)};
  }();
  return f;
}

// Untrained models predict deterministic but arbitrary tags and spans, which
// is all the structural contracts below need.
EditModel<double> untrained_edit(const std::string& decoder_kind,
                                 uint64_t seed) {
  ModelConfig cfg = small_config(decoder_kind);
  cfg.vocab_size = texts().vocab.size();
  return EditModel<double>(cfg, seed);
}

BaselineModel<double> untrained_baseline(uint64_t seed) {
  ModelConfig cfg = small_config("transformer");
  cfg.vocab_size = texts().vocab.size();
  return BaselineModel<double>(cfg, seed);
}

// Pins the operation head's argmax to one tag for every position.
void force_tag(EditModel<double>& model, OperationTag tag) {
  Parameter<double>& b = model.params().get("op.b");
  b.value.setZero();
  b.value(0, static_cast<int>(tag)) = 1e9;
}

// Pins the span decoder's EOS logit far up or down.
void force_eos(EditModel<double>& model, double logit) {
  model.params().get("dec.head.b").value(0, Vocabulary::kEosId) = logit;
}

void force_baseline_eos(BaselineModel<double>& model, double logit) {
  model.params().get("dec.head.b").value(0, Vocabulary::kEosId) = logit;
}

int count_tags(const std::vector<OperationTag>& tags, OperationTag t) {
  return static_cast<int>(std::count(tags.begin(), tags.end(), t));
}

// First `words` words of a generated sentence: guaranteed in-vocabulary, so
// token counts equal word counts.
std::string vocab_sentence(size_t words) {
  auto all = split_whitespace(texts().texts[0]);
  REQUIRE(all.size() >= words);
  return join_words({all.begin(), all.begin() + static_cast<long>(words)});
}

bool same_correction(const CorrectionResult& a, const CorrectionResult& b) {
  return a.output_text == b.output_text && a.tags == b.tags &&
         a.spans == b.spans && a.decoder_steps == b.decoder_steps &&
         a.tokens_in == b.tokens_in && a.tokens_out == b.tokens_out;
}

TEST_CASE("assembly reproduces the reference from gold tags and spans") {
  const Vocabulary& vocab = texts().vocab;
  ErrorProfile profile;
  profile.grammatical = 0.08;
  profile.similar_sound = 0.06;
  profile.entity = 0.03;
  profile.insertion = 0.04;
  profile.deletion = 0.04;
  auto pairs = inject_errors(texts().texts, profile, 11);
  int changed = 0;
  for (const auto& pair : pairs) {
    TokenSequence x = tokenize(pair.asr_text, vocab);
    TokenSequence t = tokenize(pair.ref_text, vocab);
    LabeledExample ex = make_labels(x, t);
    std::map<int, std::vector<int>> spans;
    for (const auto& [pos, target] : ex.targets) {
      std::vector<int> ids = target.ids;
      REQUIRE(!ids.empty());
      REQUIRE(ids.back() == Vocabulary::kEosId);
      ids.pop_back();
      spans.emplace(pos, std::move(ids));
    }
    TokenSequence out = assemble_output(ex.x, ex.tags, spans, vocab);
    CHECK(out.ids == ex.t.ids);
    CHECK(detokenize(out, vocab) == pair.ref_text);
    if (pair.asr_text != pair.ref_text) ++changed;
  }
  CHECK(changed > 20);  // the corruption profile actually exercised CHANGEs
}

TEST_CASE("assembly rejects malformed inputs") {
  const Vocabulary& vocab = texts().vocab;
  TokenSequence x = insert_dummies(tokenize("flight to boston", vocab));
  std::vector<OperationTag> tags(x.size(), OperationTag::kKeep);
  CHECK_THROWS_AS(
      assemble_output(x, std::vector<OperationTag>(3, OperationTag::kKeep), {},
                      vocab),
      ContractError);
  tags[1] = OperationTag::kChange;  // no span supplied for position 1
  CHECK_THROWS_AS(assemble_output(x, tags, {}, vocab), ContractError);
}

TEST_CASE("all-KEEP predictions return the input unchanged with zero steps") {
  EditModel<double> model = untrained_edit("lstm", 21);
  force_tag(model, OperationTag::kKeep);
  const std::string text = texts().texts[5];
  CorrectionResult res = correct(text, model, texts().vocab);
  CHECK(res.output_text == text);
  CHECK(res.decoder_steps == 0);
  CHECK(res.spans.empty());
  CHECK(res.tokens_out == res.tokens_in);
  CHECK(count_tags(res.tags, OperationTag::kKeep) ==
        static_cast<int>(res.tags.size()));
}

TEST_CASE("all-DELETE predictions erase the utterance") {
  EditModel<double> model = untrained_edit("lstm", 21);
  force_tag(model, OperationTag::kDelete);
  CorrectionResult res = correct(texts().texts[5], model, texts().vocab);
  CHECK(res.output_text.empty());
  CHECK(res.tokens_out == 0);
  CHECK(res.decoder_steps == 0);
  CHECK(res.spans.empty());
}

TEST_CASE("step counting: lockstep counts time steps, sequential sums spans") {
  for (const char* kind : {"lstm", "transformer"}) {
    CAPTURE(kind);
    EditModel<double> model = untrained_edit(kind, 33);
    force_tag(model, OperationTag::kChange);
    const std::string text = vocab_sentence(4);
    const int positions = 2 * 4 + 1;  // every slotted position decodes a span

    // Immediate EOS: one lockstep time step finishes every span at once;
    // sequential decoding pays one step per span.
    force_eos(model, 1e9);
    CorrectionResult par = correct(text, model, texts().vocab);
    CHECK(par.decoder_steps == 1);
    CHECK(par.output_text.empty());  // all spans empty, every position CHANGE
    CHECK(static_cast<int>(par.spans.size()) == positions);
    InferOptions seq_opts;
    seq_opts.sequential_spans = true;
    CorrectionResult seq = correct(text, model, texts().vocab, seq_opts);
    CHECK(seq.decoder_steps == positions);
    CHECK(seq.output_text == par.output_text);

    // EOS suppressed: every span runs to the decode budget.
    force_eos(model, -1e9);
    const int budget = model.config().max_decode_len;
    par = correct(text, model, texts().vocab);
    CHECK(par.decoder_steps == budget);
    seq = correct(text, model, texts().vocab, seq_opts);
    CHECK(seq.decoder_steps == positions * budget);
    CHECK(seq.output_text == par.output_text);
    for (const auto& [pos, pieces] : par.spans) {
      CHECK(static_cast<int>(pieces.size()) == budget);
    }
  }
}

TEST_CASE("lockstep and sequential span decoding agree token for token") {
  for (const char* kind : {"lstm", "transformer"}) {
    CAPTURE(kind);
    EditModel<double> model = untrained_edit(kind, 7);
    InferOptions seq_opts;
    seq_opts.sequential_spans = true;
    int spans_seen = 0;
    for (const std::string& text : texts().texts) {
      CorrectionResult par = correct(text, model, texts().vocab);
      CorrectionResult seq = correct(text, model, texts().vocab, seq_opts);
      REQUIRE(par.output_text == seq.output_text);
      REQUIRE(par.tags == seq.tags);
      REQUIRE(par.spans == seq.spans);
      // Lockstep shares time steps across spans, so it can only need fewer.
      CHECK(par.decoder_steps <= seq.decoder_steps);
      int n_change = count_tags(par.tags, OperationTag::kChange);
      if (n_change == 0) {
        CHECK(par.decoder_steps == 0);
      } else {
        CHECK(par.decoder_steps <= model.config().max_decode_len);
      }
      CHECK(seq.decoder_steps <=
            model.config().max_decode_len * std::max(n_change, 1));
      spans_seen += n_change;
    }
    CHECK(spans_seen > 0);  // untrained tags must actually exercise spans
  }
}

TEST_CASE("correction is pure: repeated calls agree exactly") {
  EditModel<double> model = untrained_edit("transformer", 15);
  const std::string text = texts().texts[0];
  CorrectionResult a = correct(text, model, texts().vocab);
  CorrectionResult b = correct(text, model, texts().vocab);
  CHECK(same_correction(a, b));
  CHECK(a.wall_time > 0.0);
  CHECK(a.model_time > 0.0);
  CHECK(a.wall_time >= a.model_time);
}

TEST_CASE("empty input corrects to an empty result") {
  EditModel<double> model = untrained_edit("lstm", 15);
  for (const std::string text : {"", "   "}) {
    CorrectionResult res = correct(text, model, texts().vocab);
    CHECK(res.output_text.empty());
    CHECK(res.tokens_in == 0);
    CHECK(res.tokens_out == 0);
    CHECK(res.decoder_steps == 0);
    CHECK(res.tags.empty());
  }
}

TEST_CASE("batch correction matches single calls in any order") {
  EditModel<double> model = untrained_edit("lstm", 19);
  std::vector<std::string> batch(texts().texts.begin(),
                                 texts().texts.begin() + 6);
  auto results = correct_batch(batch, model, texts().vocab);
  REQUIRE(results.size() == batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    CHECK(same_correction(results[i], correct(batch[i], model, texts().vocab)));
  }
  std::vector<std::string> reversed(batch.rbegin(), batch.rend());
  auto flipped = correct_batch(reversed, model, texts().vocab);
  for (size_t i = 0; i < batch.size(); ++i) {
    CHECK(same_correction(flipped[i], results[batch.size() - 1 - i]));
  }
  CHECK(correct_batch({}, model, texts().vocab).empty());
}

TEST_CASE("baseline generation respects the length cap") {
  const Vocabulary& vocab = texts().vocab;
  const std::string text = vocab_sentence(3);  // 3 tokens -> cap 6

  BaselineModel<double> never_eos = untrained_baseline(27);
  force_baseline_eos(never_eos, -1e9);
  CorrectionResult res = baseline_correct(text, never_eos, vocab);
  CHECK(res.decoder_steps == 6);
  CHECK(res.tokens_out == 6);
  CHECK(res.tags.empty());

  BaselineModel<double> instant_eos = untrained_baseline(27);
  force_baseline_eos(instant_eos, 1e9);
  res = baseline_correct(text, instant_eos, vocab);
  CHECK(res.decoder_steps == 1);  // the EOS-emitting step is still a step
  CHECK(res.tokens_out == 0);
  CHECK(res.output_text.empty());

  BaselineModel<double> plain = untrained_baseline(27);
  res = baseline_correct(text, plain, vocab);
  CHECK(res.decoder_steps <= 6);
  // Either the cap ended generation or the final step emitted EOS.
  bool capped = res.tokens_out == 6 && res.decoder_steps == 6;
  CHECK((capped || res.tokens_out == res.decoder_steps - 1));

  res = baseline_correct("", plain, vocab);
  CHECK(res.tokens_in == 0);
  CHECK(res.decoder_steps == 0);
  CHECK(res.output_text.empty());
}

TEST_CASE("baseline cap also honours the position table") {
  BaselineModel<double> model = untrained_baseline(29);
  force_baseline_eos(model, -1e9);
  // 50 words fit the 96-row position table, but BOS + 100 outputs would not:
  // the cap falls back to max_positions - 1.
  std::vector<std::string> words(50, split_whitespace(texts().texts[0])[0]);
  CorrectionResult res =
      baseline_correct(join_words(words), model, texts().vocab);
  CHECK(res.tokens_in == 50);
  CHECK(res.decoder_steps == model.config().max_positions - 1);
  CHECK(res.tokens_out == model.config().max_positions - 1);
}

TEST_CASE("baseline generation is pure") {
  BaselineModel<double> model = untrained_baseline(31);
  const std::string text = texts().texts[1];
  CorrectionResult a = baseline_correct(text, model, texts().vocab);
  CorrectionResult b = baseline_correct(text, model, texts().vocab);
  CHECK(same_correction(a, b));
  CHECK(a.wall_time >= a.model_time);
}

TEST_CASE("edit checkpoints round-trip through the loader") {
  const Vocabulary& vocab = texts().vocab;
  for (const char* kind : {"lstm", "transformer"}) {
    CAPTURE(kind);
    EditModel<double> model = untrained_edit(kind, 41);
    const std::string path =
        temp_path(std::string("opcorrect_infer_edit_") + kind + ".ckpt");
    write_checkpoint(path, "edit", model.config(),
                     hex64(vocab.content_hash()), model.params());
    EditModel<double> loaded = load_edit_model(path, vocab);
    CHECK(loaded.config().decoder_kind == kind);
    for (int i = 0; i < 4; ++i) {
      CorrectionResult a = correct(texts().texts[i], model, vocab);
      CorrectionResult b = correct(texts().texts[i], loaded, vocab);
      // Checkpoints store float32, so tags/spans may only differ where two
      // logits sit within float rounding of each other; they never do here.
      CHECK(same_correction(a, b));
    }
  }
}

TEST_CASE("baseline checkpoints round-trip through the loader") {
  const Vocabulary& vocab = texts().vocab;
  BaselineModel<double> model = untrained_baseline(43);
  const std::string path = temp_path("opcorrect_infer_baseline.ckpt");
  write_checkpoint(path, "baseline", model.config(),
                   hex64(vocab.content_hash()), model.params());
  BaselineModel<double> loaded = load_baseline_model(path, vocab);
  for (int i = 0; i < 4; ++i) {
    CorrectionResult a = baseline_correct(texts().texts[i], model, vocab);
    CorrectionResult b = baseline_correct(texts().texts[i], loaded, vocab);
    CHECK(same_correction(a, b));
  }
}

TEST_CASE("loaders reject mismatched kind and vocabulary") {
  const Vocabulary& vocab = texts().vocab;
  BaselineModel<double> baseline = untrained_baseline(47);
  const std::string base_path = temp_path("opcorrect_infer_kind.ckpt");
  write_checkpoint(base_path, "baseline", baseline.config(),
                   hex64(vocab.content_hash()), baseline.params());
  CHECK_THROWS_WITH_AS(load_edit_model(base_path, vocab),
                       doctest::Contains("does not match expected kind"),
                       DataError);

  EditModel<double> edit = untrained_edit("lstm", 47);
  const std::string edit_path = temp_path("opcorrect_infer_vocab.ckpt");
  write_checkpoint(edit_path, "edit", edit.config(),
                   hex64(vocab.content_hash()), edit.params());
  Vocabulary other = build_vocab({"completely different words here"}, 100, 1);
  CHECK_THROWS_WITH_AS(load_edit_model(edit_path, other),
                       doctest::Contains("different vocabulary"), DataError);
}

TEST_CASE("a model trained on clean text leaves clean text alone") {
  const Vocabulary& vocab = texts().vocab;
  std::vector<CorpusPair> pairs;
  for (const std::string& ref : generate_references(400, 505)) {
    pairs.push_back({ref, ref, std::nullopt});
  }
  ModelConfig mcfg = small_config("lstm");
  TrainConfig tcfg;
  tcfg.epochs = 3;
  tcfg.batch_size = 16;
  tcfg.learning_rate = 3e-3;
  tcfg.seed = 9;
  tcfg.checkpoint_path = temp_path("opcorrect_infer_identity.ckpt");
  train_edit(pairs, vocab, mcfg, tcfg);

  EditModel<double> model = load_edit_model(tcfg.checkpoint_path, vocab);
  int unchanged = 0;
  int total_steps = 0;
  for (int i = 0; i < 20; ++i) {
    CorrectionResult res = correct(texts().texts[i], model, vocab);
    if (res.output_text == texts().texts[i]) ++unchanged;
    total_steps += res.decoder_steps;
    CHECK(count_tags(res.tags, OperationTag::kChange) == 0);
  }
  CHECK(unchanged == 20);
  CHECK(total_steps == 0);
}

}  // namespace
}  // namespace opcorrect
