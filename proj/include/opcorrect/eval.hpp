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

#ifndef OPCORRECT_EVAL_HPP_
#define OPCORRECT_EVAL_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "opcorrect/data.hpp"
#include "opcorrect/infer.hpp"

namespace opcorrect {

// ---------------------------------------------------------------------------
// Word error rate
// ---------------------------------------------------------------------------

struct UtteranceWer {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_tokens = 0;
  int distance() const { return substitutions + deletions + insertions; }
};

struct WerReport {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t ref_tokens = 0;
  double wer = 0.0;  // (S + D + I) / N over the whole corpus
  std::vector<UtteranceWer> per_utterance;
};

// Normalization applied before comparison everywhere in this module:
// ASCII lowercasing, then whitespace word splitting.
std::vector<std::string> normalize_words(std::string_view text);

// Unit-cost word-level Levenshtein alignment of one hypothesis/reference
// pair, with the op breakdown from a deterministic backtrace.
UtteranceWer word_edit_counts(const std::vector<std::string>& hyp,
                              const std::vector<std::string>& ref);

// Corpus WER via dynamic programming per utterance.
WerReport wer(const std::vector<std::string>& hyps,
              const std::vector<std::string>& refs);

// ---------------------------------------------------------------------------
// Latency benchmarking
// ---------------------------------------------------------------------------

struct BenchSystem {
  std::string name;
  std::function<CorrectionResult(const std::string&)> run;
};

struct SystemTiming {
  std::string name;
  // Per utterance: median across the timed repetitions.
  std::vector<double> wall_ms;
  std::vector<double> model_ms;
  double median_wall_ms = 0.0;
  double mean_wall_ms = 0.0;
  double p95_wall_ms = 0.0;
  double median_model_ms = 0.0;
  int64_t decoder_steps = 0;  // total over the corpus (identical across reps)
};

struct LatencyReport {
  std::vector<SystemTiming> systems;
  // name -> baseline_median / system_median, where "baseline" is the system
  // with that name when present, otherwise the first system.
  std::map<std::string, double> speedup;
  std::string reference_system;
};

// Runs every system over the same corpus in the same order: `warmup`
// unrecorded passes, then `reps` timed passes.  decoder_steps must not vary
// between repetitions (determinism check); only wall times may.
LatencyReport bench_latency(const std::vector<BenchSystem>& systems,
                            const std::vector<std::string>& corpus, int warmup,
                            int reps);

// ---------------------------------------------------------------------------
// Correction ratios by injected error type
// ---------------------------------------------------------------------------

struct CorrectionRatioReport {
  std::array<int64_t, kNumErrorTypes> total{};      // pairs carrying the type
  std::array<int64_t, kNumErrorTypes> corrected{};  // ... whose output == ref
  int64_t included = 0;
  int64_t excluded = 0;  // pairs lacking error_types
  int64_t exact_matches = 0;

  double ratio(ErrorType t) const {
    auto i = static_cast<size_t>(t);
    return total[i] > 0 ? static_cast<double>(corrected[i]) /
                              static_cast<double>(total[i])
                        : 0.0;
  }
  double sentence_accuracy() const {
    return included > 0
               ? static_cast<double>(exact_matches) / static_cast<double>(included)
               : 0.0;
  }
};

// A pair counts as corrected for every type it carries when the corrected
// text equals the reference after normalization (sentence exact match).
CorrectionRatioReport correction_ratio_by_type(
    const std::vector<std::pair<CorpusPair, std::string>>& results);

}  // namespace opcorrect

#endif  // OPCORRECT_EVAL_HPP_
