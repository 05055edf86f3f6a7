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

#ifndef OPCORRECT_INJECT_HPP_
#define OPCORRECT_INJECT_HPP_

#include <map>
#include <string>
#include <vector>

#include "opcorrect/data.hpp"
#include "opcorrect/rng.hpp"

namespace opcorrect {

// Per-token corruption rates by error type.  A token draws one uniform
// variate; consecutive bins of width rate_of(type) decide which corruption
// (if any) applies, so each type's realized rate matches its configured rate
// and the overall corruption rate is the sum.
struct ErrorProfile {
  double grammatical = 0.0;
  double similar_sound = 0.0;
  double entity = 0.0;
  double insertion = 0.0;
  double deletion = 0.0;

  double rate_of(ErrorType t) const;
  double total() const;
  void validate() const;  // each rate in [0,1], total <= 1
};

// Word -> phonetically plausible replacements.  Lookups miss for words
// outside the table; the injector then falls back to character-level edits.
struct ConfusionTable {
  std::map<std::string, std::vector<std::string>> entries;

  const std::vector<std::string>* find(const std::string& word) const;
  // Small built-in homophone/near-spelling list covering the reference
  // generator's vocabulary.
  static ConfusionTable builtin();
  // One entry per line: word<TAB>alt1,alt2,...
  static ConfusionTable load(const std::string& path);
};

// Deterministically corrupts each reference sentence with the configured
// mix, recording which error types were applied to each pair.
std::vector<CorpusPair> inject_errors(const std::vector<std::string>& refs,
                                      const ErrorProfile& profile,
                                      uint64_t seed,
                                      const ConfusionTable* table = nullptr);

// Generates synthetic reference sentences from a small flight-information
// template grammar (bounded vocabulary, 6-12 words per sentence).
std::vector<std::string> generate_references(int count, uint64_t seed);

}  // namespace opcorrect

#endif  // OPCORRECT_INJECT_HPP_
