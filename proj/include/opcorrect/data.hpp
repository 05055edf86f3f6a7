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

#ifndef OPCORRECT_DATA_HPP_
#define OPCORRECT_DATA_HPP_

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "opcorrect/common.hpp"

namespace opcorrect {

// The error taxonomy used by the synthetic injector and the per-type
// correction report.
enum class ErrorType : uint8_t {
  kGrammatical = 0,
  kSimilarSound,
  kEntity,
  kInsertion,
  kDelete,
};

inline constexpr int kNumErrorTypes = 5;

std::string_view error_type_name(ErrorType t);
std::optional<ErrorType> error_type_from_name(std::string_view name);

// One (ASR output, reference) pair.  error_types is present when the pair
// came from the injector and records which corruption types were applied
// (possibly none).
struct CorpusPair {
  std::string asr_text;
  std::string ref_text;
  std::optional<std::set<ErrorType>> error_types;
};

// Reads a paired corpus.  format is "jsonl" (objects with `asr`, `ref`, and
// optionally `error_types`) or "tsv" (asr TAB ref, optional third column of
// comma-separated type names).  Malformed records fail fast with their line
// number; an empty file yields an empty list with a warning.
std::vector<CorpusPair> load_corpus(const std::string& path,
                                    const std::string& format);

// Infers "jsonl" or "tsv" from the file extension (.jsonl/.json -> jsonl,
// .tsv/.txt -> tsv); anything else is a usage error.
std::string corpus_format_for_path(const std::string& path);

void save_corpus(const std::string& path, const std::vector<CorpusPair>& pairs,
                 const std::string& format);

}  // namespace opcorrect

#endif  // OPCORRECT_DATA_HPP_
