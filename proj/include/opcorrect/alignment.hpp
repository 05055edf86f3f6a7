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

#ifndef OPCORRECT_ALIGNMENT_HPP_
#define OPCORRECT_ALIGNMENT_HPP_

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "opcorrect/vocab.hpp"

namespace opcorrect {

// Per-position edit operation.  Serialized as "K"/"D"/"C".
enum class OperationTag : uint8_t { kKeep = 0, kDelete = 1, kChange = 2 };

char tag_to_char(OperationTag tag);
OperationTag tag_from_char(char c);

// A supervised example: the slotted input x, one tag per x position, and for
// every CHANGE position the replacement span (terminated by EOS) that the
// decoder must produce there.  t is the plain reference the edits reconstruct.
struct LabeledExample {
  TokenSequence x;
  std::vector<OperationTag> tags;
  std::map<int, TokenSequence> targets;
  TokenSequence t;

  // Throws DataError when any structural invariant is violated: length
  // mismatch, CHANGE/target key disagreement, a span missing its EOS or
  // containing PAD/BOS/DUMMY, or a slot position tagged KEEP.
  void validate() const;
};

// Interleaves empty slots with the input: [G, w1, G, w2, ..., G, wn, G].
// Real token i of x lands at position 2i+1; slots make insertions at any
// boundary expressible as a CHANGE.  Requires x to be slot-free.
TokenSequence insert_dummies(const TokenSequence& x);

// Longest-common-subsequence alignment on raw id arrays.  Fills `pairs` with
// (index-in-a, index-in-b) matches, strictly increasing in both coordinates,
// preferring the leftmost positions in a.  `dp` is scratch space reused
// across calls.  Returns the LCS length (== pairs.size()).
int lcs_align_ids(std::span<const int> a, std::span<const int> b,
                  std::vector<int>& dp, std::vector<std::pair<int, int>>& pairs);

// Convenience wrapper over token sequences.
std::vector<std::pair<int, int>> lcs_align(const TokenSequence& a,
                                           const TokenSequence& b);

// Builds supervision from a raw (unslotted) hypothesis and its reference:
// aligned tokens are kept; each unaligned gap is resolved by the rule that
// its first hypothesis token (or, when the gap holds none, the slot at the
// gap) becomes a CHANGE carrying the whole reference gap plus EOS, and every
// other token in the gap is deleted.  Unused slots are deleted.
LabeledExample make_labels(const TokenSequence& x_raw, const TokenSequence& t);

// Exact inverse of make_labels: emits kept tokens and CHANGE spans (minus
// EOS) left to right.  The result equals labeled.t; used as the correctness
// oracle for label construction and for output assembly.
TokenSequence apply_edits(const LabeledExample& labeled);

// Line-record serialization: fields x_tokens, tags, targets, t_tokens.
nlohmann::json labeled_to_json(const LabeledExample& labeled);
LabeledExample labeled_from_json(const nlohmann::json& record,
                                 const Vocabulary& vocab);

}  // namespace opcorrect

#endif  // OPCORRECT_ALIGNMENT_HPP_
