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

#ifndef OPCORRECT_INFER_HPP_
#define OPCORRECT_INFER_HPP_

#include <map>
#include <string>
#include <vector>

#include "opcorrect/model.hpp"

namespace opcorrect {

// One corrected utterance plus everything the reports need: the predicted
// operations, the decoded replacement spans, and the work/time counters.
struct CorrectionResult {
  std::string output_text;
  std::vector<OperationTag> tags;  // one per slotted position (empty: baseline)
  std::map<int, std::vector<std::string>> spans;  // position -> decoded pieces
  int decoder_steps = 0;   // decoder invocations: lockstep time steps for the
                           // constrained path, generated tokens for the baseline
  double wall_time = 0.0;   // seconds, tokenize through detokenize
  double model_time = 0.0;  // seconds, encode/tag/decode only
  int tokens_in = 0;
  int tokens_out = 0;
};

struct InferOptions {
  // Decode spans one at a time instead of in lockstep.  Outputs are
  // token-identical either way (the equivalence the tests pin down); the
  // sequential path exists as the oracle and for step accounting comparisons.
  bool sequential_spans = false;
};

// Decoded CHANGE spans of one utterance: position -> replacement token ids
// (EOS stripped), plus the number of decoder time steps executed.
struct SpanDecodeResult {
  std::map<int, std::vector<int>> spans;
  int steps = 0;
};

// Advances every CHANGE position's span together, one time step per decoder
// call, masking out spans that have emitted EOS; greedy argmax, at most
// max_decode_len steps per span.
SpanDecodeResult decode_spans_lockstep(const EditModel<double>& model,
                                       const EncodedSequence<double>& enc,
                                       const std::vector<OperationTag>& tags);

// Oracle path: decodes each span to completion independently.  steps is the
// per-span total rather than the lockstep iteration count.
SpanDecodeResult decode_spans_sequential(const EditModel<double>& model,
                                         const EncodedSequence<double>& enc,
                                         const std::vector<OperationTag>& tags);

// Output assembly: KEEP on a real token emits it, KEEP on a dummy and DELETE
// emit nothing, CHANGE emits its span's tokens.  Fed gold tags and gold
// targets this reproduces the reference (the same contract as apply_edits).
TokenSequence assemble_output(const TokenSequence& x,
                              const std::vector<OperationTag>& tags,
                              const std::map<int, std::vector<int>>& spans,
                              const Vocabulary& vocab);

// Full correction pipeline: tokenize -> slot dummies -> encode -> predict
// operations (argmax, ties K > D > C) -> decode CHANGE spans -> assemble
// -> detokenize.
CorrectionResult correct(const std::string& text,
                         const EditModel<double>& model,
                         const Vocabulary& vocab,
                         const InferOptions& options = {});

// Plain autoregressive correction with the seq2seq baseline: greedy decoding
// from BOS until EOS or twice the input length.
CorrectionResult baseline_correct(const std::string& text,
                                  const BaselineModel<double>& model,
                                  const Vocabulary& vocab);

// Element-wise correct() over many utterances with per-utterance timing.
std::vector<CorrectionResult> correct_batch(const std::vector<std::string>& texts,
                                            const EditModel<double>& model,
                                            const Vocabulary& vocab,
                                            const InferOptions& options = {});

// Checkpoint loading with kind/vocabulary verification.  The stored config
// decides the architecture; mismatched kind or vocabulary hash is an error.
EditModel<double> load_edit_model(const std::string& path,
                                  const Vocabulary& vocab);
BaselineModel<double> load_baseline_model(const std::string& path,
                                          const Vocabulary& vocab);

}  // namespace opcorrect

#endif  // OPCORRECT_INFER_HPP_
