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

#include "opcorrect/infer.hpp"

#include <algorithm>
#include <chrono>

#include "opcorrect/alignment.hpp"
#include "opcorrect/common.hpp"

namespace opcorrect {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int argmax_row(const Mat<double>& dist) {
  int best = 0;
  for (int c = 1; c < dist.cols(); ++c) {
    if (dist(0, c) > dist(0, best)) best = c;
  }
  return best;
}

// Scanning K, D, C in order and keeping strict improvements realizes the
// K > D > C tie preference.
std::vector<OperationTag> argmax_tags(const Mat<double>& dists) {
  std::vector<OperationTag> tags(static_cast<size_t>(dists.rows()));
  for (int r = 0; r < dists.rows(); ++r) {
    tags[static_cast<size_t>(r)] =
        static_cast<OperationTag>(argmax_row(dists.row(r)));
  }
  return tags;
}

// One in-flight CHANGE span during lockstep decoding.
struct ActiveSpan {
  int pos = 0;
  DecodeState<double> state;
  int prev = Vocabulary::kBosId;
  std::vector<int> tokens;
};

// Advances one span a single time step; returns false once the span is done
// (EOS emitted).
bool advance_span(const EditModel<double>& model,
                  const EncodedSequence<double>& enc, ActiveSpan& span) {
  Mat<double> dist;
  if (model.config().decoder_kind == "lstm") {
    dist = model.lstm_decode_step(span.state, span.prev, enc);
  } else {
    dist = model.transformer_decode_step(span.state, enc);
  }
  int next = argmax_row(dist);
  if (next == Vocabulary::kEosId) return false;
  span.tokens.push_back(next);
  span.prev = next;
  if (model.config().decoder_kind != "lstm") {
    span.state.prefix.push_back(next);
  }
  return true;
}

std::vector<ActiveSpan> begin_spans(const EditModel<double>& model,
                                    const EncodedSequence<double>& enc,
                                    const std::vector<OperationTag>& tags) {
  if (static_cast<int>(tags.size()) != enc.length()) {
    throw ContractError("span decode: tags/encoding length mismatch");
  }
  std::vector<ActiveSpan> spans;
  for (size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] != OperationTag::kChange) continue;
    ActiveSpan s;
    s.pos = static_cast<int>(i);
    s.state = model.decode_begin(enc, s.pos);
    spans.push_back(std::move(s));
  }
  return spans;
}

void finish_spans(std::vector<ActiveSpan>& spans, SpanDecodeResult& out) {
  for (auto& s : spans) out.spans.emplace(s.pos, std::move(s.tokens));
}

}  // namespace

TokenSequence assemble_output(const TokenSequence& x,
                              const std::vector<OperationTag>& tags,
                              const std::map<int, std::vector<int>>& spans,
                              const Vocabulary& vocab) {
  if (tags.size() != x.size()) {
    throw ContractError("assemble: tags/sequence length mismatch");
  }
  TokenSequence out;
  for (size_t i = 0; i < x.size(); ++i) {
    switch (tags[i]) {
      case OperationTag::kKeep:
        // Dummies never surface, whatever their tag.
        if (!x.is_dummy[i]) out.push_back(x.ids[i], x.surfaces[i]);
        break;
      case OperationTag::kDelete:
        break;
      case OperationTag::kChange: {
        auto it = spans.find(static_cast<int>(i));
        if (it == spans.end()) {
          throw ContractError("assemble: no span for CHANGE position " +
                              std::to_string(i));
        }
        for (int id : it->second) out.push_back(id, vocab.token(id));
        break;
      }
    }
  }
  return out;
}

SpanDecodeResult decode_spans_lockstep(const EditModel<double>& model,
                                       const EncodedSequence<double>& enc,
                                       const std::vector<OperationTag>& tags) {
  SpanDecodeResult out;
  std::vector<ActiveSpan> spans = begin_spans(model, enc, tags);
  std::vector<uint8_t> active(spans.size(), 1);
  size_t remaining = spans.size();
  const int budget = model.config().max_decode_len;
  for (int step = 0; step < budget && remaining > 0; ++step) {
    ++out.steps;
    for (size_t i = 0; i < spans.size(); ++i) {
      if (!active[i]) continue;
      if (!advance_span(model, enc, spans[i])) {
        active[i] = 0;
        --remaining;
      }
    }
  }
  finish_spans(spans, out);
  return out;
}

SpanDecodeResult decode_spans_sequential(const EditModel<double>& model,
                                         const EncodedSequence<double>& enc,
                                         const std::vector<OperationTag>& tags) {
  SpanDecodeResult out;
  std::vector<ActiveSpan> spans = begin_spans(model, enc, tags);
  const int budget = model.config().max_decode_len;
  for (auto& span : spans) {
    for (int step = 0; step < budget; ++step) {
      ++out.steps;
      if (!advance_span(model, enc, span)) break;
    }
  }
  finish_spans(spans, out);
  return out;
}

CorrectionResult correct(const std::string& text,
                         const EditModel<double>& model,
                         const Vocabulary& vocab,
                         const InferOptions& options) {
  auto wall_start = Clock::now();
  CorrectionResult res;
  TokenSequence x_raw = tokenize(text, vocab);
  res.tokens_in = static_cast<int>(x_raw.size());
  if (x_raw.size() == 0) {
    res.wall_time = seconds_since(wall_start);
    return res;
  }
  TokenSequence x = insert_dummies(x_raw);

  auto model_start = Clock::now();
  EncodedSequence<double> enc = model.encode(x);
  res.tags = argmax_tags(model.predict_operations(enc));
  SpanDecodeResult decoded =
      options.sequential_spans ? decode_spans_sequential(model, enc, res.tags)
                               : decode_spans_lockstep(model, enc, res.tags);
  res.decoder_steps = decoded.steps;
  res.model_time = seconds_since(model_start);

  TokenSequence out_tokens = assemble_output(x, res.tags, decoded.spans, vocab);
  for (const auto& [pos, ids] : decoded.spans) {
    std::vector<std::string> pieces;
    pieces.reserve(ids.size());
    for (int id : ids) pieces.push_back(vocab.token(id));
    res.spans.emplace(pos, std::move(pieces));
  }
  res.output_text = detokenize(out_tokens, vocab);
  res.tokens_out = static_cast<int>(out_tokens.size());
  res.wall_time = seconds_since(wall_start);
  return res;
}

CorrectionResult baseline_correct(const std::string& text,
                                  const BaselineModel<double>& model,
                                  const Vocabulary& vocab) {
  auto wall_start = Clock::now();
  CorrectionResult res;
  TokenSequence src = tokenize(text, vocab);
  res.tokens_in = static_cast<int>(src.size());
  if (src.size() == 0) {
    res.wall_time = seconds_since(wall_start);
    return res;
  }

  auto model_start = Clock::now();
  EncodedSequence<double> enc = model.encode_ids(src.ids);
  // Output capped at twice the input length; the prefix (BOS + output) must
  // also fit the position table.
  const int cap = std::min(2 * res.tokens_in, model.config().max_positions - 1);
  std::vector<int> prefix = {Vocabulary::kBosId};
  TokenSequence out_tokens;
  while (static_cast<int>(out_tokens.size()) < cap) {
    Mat<double> dist = model.decode_step(prefix, enc);
    ++res.decoder_steps;
    int next = argmax_row(dist);
    if (next == Vocabulary::kEosId) break;
    out_tokens.push_back(next, vocab.token(next));
    prefix.push_back(next);
  }
  res.model_time = seconds_since(model_start);

  res.output_text = detokenize(out_tokens, vocab);
  res.tokens_out = static_cast<int>(out_tokens.size());
  res.wall_time = seconds_since(wall_start);
  return res;
}

std::vector<CorrectionResult> correct_batch(const std::vector<std::string>& texts,
                                            const EditModel<double>& model,
                                            const Vocabulary& vocab,
                                            const InferOptions& options) {
  std::vector<CorrectionResult> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    out.push_back(correct(text, model, vocab, options));
  }
  return out;
}

namespace {

ModelConfig verified_config(const CheckpointInfo& info, const std::string& path,
                            const std::string& want_kind,
                            const Vocabulary& vocab) {
  if (info.kind != want_kind) {
    throw DataError(path + ": checkpoint kind '" + info.kind +
                    "' does not match expected kind '" + want_kind + "'");
  }
  if (info.vocab_hash != hex64(vocab.content_hash())) {
    throw DataError(path + ": checkpoint was trained with a different vocabulary");
  }
  if (info.config.vocab_size != vocab.size()) {
    throw DataError(path + ": checkpoint vocab size mismatch");
  }
  return info.config;
}

}  // namespace

EditModel<double> load_edit_model(const std::string& path,
                                  const Vocabulary& vocab) {
  CheckpointInfo info = read_checkpoint_info(path);
  EditModel<double> model(verified_config(info, path, "edit", vocab), 0);
  read_checkpoint_tensors(path, model.params());
  return model;
}

BaselineModel<double> load_baseline_model(const std::string& path,
                                          const Vocabulary& vocab) {
  CheckpointInfo info = read_checkpoint_info(path);
  BaselineModel<double> model(verified_config(info, path, "baseline", vocab), 0);
  read_checkpoint_tensors(path, model.params());
  return model;
}

}  // namespace opcorrect
