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

#include "opcorrect/eval.hpp"

#include <algorithm>
#include <cmath>

#include "opcorrect/common.hpp"

namespace opcorrect {

std::vector<std::string> normalize_words(std::string_view text) {
  return split_whitespace(lowercase_ascii(text));
}

UtteranceWer word_edit_counts(const std::vector<std::string>& hyp,
                              const std::vector<std::string>& ref) {
  const size_t n = hyp.size(), m = ref.size();
  // dp[i][j]: edit distance between hyp[0..i) and ref[0..j).
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) dp[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) dp[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      int sub = dp[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      int ins = dp[i - 1][j] + 1;  // hyp word absent from ref
      int del = dp[i][j - 1] + 1;  // ref word missing from hyp
      dp[i][j] = std::min({sub, ins, del});
    }
  }
  // Deterministic backtrace: prefer match/substitution, then insertion,
  // then deletion.  Any minimal split sums to the same distance.
  UtteranceWer out;
  out.ref_tokens = static_cast<int>(m);
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        dp[i][j] == dp[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1)) {
      if (hyp[i - 1] != ref[j - 1]) ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
      ++out.insertions;
      --i;
    } else {
      ++out.deletions;
      --j;
    }
  }
  return out;
}

WerReport wer(const std::vector<std::string>& hyps,
              const std::vector<std::string>& refs) {
  if (hyps.size() != refs.size()) {
    throw UsageError("wer: hypothesis/reference counts differ (" +
                     std::to_string(hyps.size()) + " vs " +
                     std::to_string(refs.size()) + ")");
  }
  if (refs.empty()) throw UsageError("wer: no reference utterances");
  WerReport report;
  report.per_utterance.reserve(refs.size());
  for (size_t k = 0; k < refs.size(); ++k) {
    UtteranceWer u =
        word_edit_counts(normalize_words(hyps[k]), normalize_words(refs[k]));
    report.substitutions += u.substitutions;
    report.deletions += u.deletions;
    report.insertions += u.insertions;
    report.ref_tokens += u.ref_tokens;
    report.per_utterance.push_back(u);
  }
  if (report.ref_tokens == 0) {
    throw DataError("wer: references contain no words");
  }
  report.wer = static_cast<double>(report.substitutions + report.deletions +
                                   report.insertions) /
               static_cast<double>(report.ref_tokens);
  return report;
}

namespace {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  // Nearest-rank with linear interpolation between adjacent order statistics.
  double rank = q * static_cast<double>(values.size() - 1);
  size_t lo = static_cast<size_t>(rank);
  size_t hi = std::min(values.size() - 1, lo + 1);
  double frac = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

double median(const std::vector<double>& values) {
  return percentile(values, 0.5);
}

}  // namespace

LatencyReport bench_latency(const std::vector<BenchSystem>& systems,
                            const std::vector<std::string>& corpus, int warmup,
                            int reps) {
  if (systems.empty()) throw UsageError("bench: no systems given");
  if (corpus.empty()) throw UsageError("bench: empty corpus");
  if (warmup < 0 || reps < 1) {
    throw UsageError("bench: need warmup >= 0 and reps >= 1");
  }
  LatencyReport report;
  for (const BenchSystem& system : systems) {
    for (int w = 0; w < warmup; ++w) {
      for (const std::string& text : corpus) system.run(text);
    }
    // wall[u][r]: end-to-end seconds for utterance u in repetition r.
    std::vector<std::vector<double>> wall(corpus.size());
    std::vector<std::vector<double>> model(corpus.size());
    std::vector<int64_t> steps_by_rep(static_cast<size_t>(reps), 0);
    for (int r = 0; r < reps; ++r) {
      for (size_t u = 0; u < corpus.size(); ++u) {
        CorrectionResult cr = system.run(corpus[u]);
        wall[u].push_back(cr.wall_time * 1e3);
        model[u].push_back(cr.model_time * 1e3);
        steps_by_rep[static_cast<size_t>(r)] += cr.decoder_steps;
      }
    }
    for (int64_t s : steps_by_rep) {
      if (s != steps_by_rep[0]) {
        throw ContractError("bench: decoder_steps varied between repetitions");
      }
    }
    SystemTiming timing;
    timing.name = system.name;
    timing.decoder_steps = steps_by_rep[0];
    for (size_t u = 0; u < corpus.size(); ++u) {
      timing.wall_ms.push_back(median(wall[u]));
      timing.model_ms.push_back(median(model[u]));
    }
    timing.median_wall_ms = median(timing.wall_ms);
    timing.mean_wall_ms = 0.0;
    for (double v : timing.wall_ms) timing.mean_wall_ms += v;
    timing.mean_wall_ms /= static_cast<double>(timing.wall_ms.size());
    timing.p95_wall_ms = percentile(timing.wall_ms, 0.95);
    timing.median_model_ms = median(timing.model_ms);
    report.systems.push_back(std::move(timing));
  }

  size_t ref_index = 0;
  for (size_t i = 0; i < report.systems.size(); ++i) {
    if (report.systems[i].name == "baseline") ref_index = i;
  }
  report.reference_system = report.systems[ref_index].name;
  const double ref_median = report.systems[ref_index].median_wall_ms;
  for (const SystemTiming& t : report.systems) {
    report.speedup[t.name] =
        t.median_wall_ms > 0.0 ? ref_median / t.median_wall_ms : 0.0;
  }
  return report;
}

CorrectionRatioReport correction_ratio_by_type(
    const std::vector<std::pair<CorpusPair, std::string>>& results) {
  CorrectionRatioReport report;
  for (const auto& [pair, corrected_text] : results) {
    if (!pair.error_types.has_value()) {
      ++report.excluded;
      continue;
    }
    ++report.included;
    const bool fixed =
        normalize_words(corrected_text) == normalize_words(pair.ref_text);
    if (fixed) ++report.exact_matches;
    for (ErrorType t : *pair.error_types) {
      auto i = static_cast<size_t>(t);
      ++report.total[i];
      if (fixed) ++report.corrected[i];
    }
  }
  if (report.excluded > 0) {
    log_warn("correction ratios: excluded ", report.excluded,
             " pairs without error type records");
  }
  return report;
}

}  // namespace opcorrect
