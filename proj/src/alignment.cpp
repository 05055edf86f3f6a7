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

#include "opcorrect/alignment.hpp"

#include "opcorrect/common.hpp"

namespace opcorrect {

char tag_to_char(OperationTag tag) {
  switch (tag) {
    case OperationTag::kKeep: return 'K';
    case OperationTag::kDelete: return 'D';
    case OperationTag::kChange: return 'C';
  }
  throw ContractError("unknown operation tag");
}

OperationTag tag_from_char(char c) {
  switch (c) {
    case 'K': return OperationTag::kKeep;
    case 'D': return OperationTag::kDelete;
    case 'C': return OperationTag::kChange;
  }
  throw DataError(std::string("unknown operation tag character: ") + c);
}

void LabeledExample::validate() const {
  if (tags.size() != x.size()) {
    throw DataError("labeled example: tag count differs from token count");
  }
  for (size_t i = 0; i < tags.size(); ++i) {
    bool dummy = x.is_dummy[i];
    if (dummy && tags[i] == OperationTag::kKeep) {
      throw DataError("labeled example: slot position tagged KEEP");
    }
    bool has_target = targets.find(static_cast<int>(i)) != targets.end();
    if ((tags[i] == OperationTag::kChange) != has_target) {
      throw DataError(
          "labeled example: CHANGE tags and target keys disagree at position " +
          std::to_string(i));
    }
  }
  for (const auto& [pos, span] : targets) {
    if (pos < 0 || static_cast<size_t>(pos) >= x.size()) {
      throw DataError("labeled example: target position out of range");
    }
    if (span.empty() || span.ids.back() != Vocabulary::kEosId) {
      throw DataError("labeled example: target span does not end with EOS");
    }
    for (size_t i = 0; i + 1 < span.size(); ++i) {
      int id = span.ids[i];
      if (id == Vocabulary::kPadId || id == Vocabulary::kBosId ||
          id == Vocabulary::kDummyId || id == Vocabulary::kEosId) {
        throw DataError("labeled example: reserved token inside a target span");
      }
    }
  }
}

TokenSequence insert_dummies(const TokenSequence& x) {
  for (bool dummy : x.is_dummy) {
    if (dummy) throw ContractError("insert_dummies: input already has slots");
  }
  TokenSequence out;
  out.ids.reserve(2 * x.size() + 1);
  const std::string& dummy_surface =
      Vocabulary::reserved_tokens()[Vocabulary::kDummyId];
  for (size_t i = 0; i < x.size(); ++i) {
    out.push_back(Vocabulary::kDummyId, dummy_surface, true);
    out.push_back(x.ids[i], x.surfaces[i], false);
  }
  out.push_back(Vocabulary::kDummyId, dummy_surface, true);
  return out;
}

int lcs_align_ids(std::span<const int> a, std::span<const int> b,
                  std::vector<int>& dp, std::vector<std::pair<int, int>>& pairs) {
  const size_t n = a.size();
  const size_t m = b.size();
  // L[i][j] = LCS length of the suffixes a[i:], b[j:], so the walk below can
  // move forward through both sequences.
  dp.assign((n + 1) * (m + 1), 0);
  const size_t stride = m + 1;
  for (size_t i = n; i-- > 0;) {
    const int* next_row = dp.data() + (i + 1) * stride;
    int* row = dp.data() + i * stride;
    const int ai = a[i];
    for (size_t j = m; j-- > 0;) {
      row[j] = (ai == b[j]) ? next_row[j + 1] + 1
                            : std::max(next_row[j], row[j + 1]);
    }
  }
  pairs.clear();
  size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j]) {
      pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      ++i;
      ++j;
    } else if (dp[i * stride + j + 1] == dp[i * stride + j]) {
      // Skipping b[j] costs nothing; keeping a[i] in play makes the match
      // land as early in a as possible.
      ++j;
    } else {
      ++i;
    }
  }
  return dp.empty() ? 0 : dp[0];
}

std::vector<std::pair<int, int>> lcs_align(const TokenSequence& a,
                                           const TokenSequence& b) {
  std::vector<int> dp;
  std::vector<std::pair<int, int>> pairs;
  lcs_align_ids(a.ids, b.ids, dp, pairs);
  return pairs;
}

LabeledExample make_labels(const TokenSequence& x_raw, const TokenSequence& t) {
  LabeledExample out;
  out.x = insert_dummies(x_raw);
  out.t = t;
  out.tags.assign(out.x.size(), OperationTag::kDelete);

  std::vector<int> dp;
  std::vector<std::pair<int, int>> pairs;
  lcs_align_ids(x_raw.ids, t.ids, dp, pairs);

  auto target_span = [&](int t_begin, int t_end) {
    TokenSequence span;
    for (int j = t_begin; j < t_end; ++j) {
      span.push_back(t.ids[static_cast<size_t>(j)],
                     t.surfaces[static_cast<size_t>(j)], false);
    }
    span.push_back(Vocabulary::kEosId,
                   Vocabulary::reserved_tokens()[Vocabulary::kEosId], false);
    return span;
  };

  // Walk the gaps between consecutive matches (sentinels at both ends).  A
  // gap holding reference tokens puts them all on one CHANGE: the first
  // hypothesis token in the gap if there is one, otherwise the slot at the
  // gap boundary.
  int prev_a = -1, prev_b = -1;
  for (size_t p = 0; p <= pairs.size(); ++p) {
    int next_a = p < pairs.size() ? pairs[p].first : static_cast<int>(x_raw.size());
    int next_b = p < pairs.size() ? pairs[p].second : static_cast<int>(t.size());
    bool has_x_gap = next_a > prev_a + 1;
    bool has_t_gap = next_b > prev_b + 1;
    if (has_t_gap) {
      if (has_x_gap) {
        int pos = 2 * (prev_a + 1) + 1;  // first unmatched real token
        out.tags[static_cast<size_t>(pos)] = OperationTag::kChange;
        out.targets.emplace(pos, target_span(prev_b + 1, next_b));
      } else {
        int pos = 2 * next_a;  // the slot just before the next match (or the end)
        out.tags[static_cast<size_t>(pos)] = OperationTag::kChange;
        out.targets.emplace(pos, target_span(prev_b + 1, next_b));
      }
    }
    if (p < pairs.size()) {
      out.tags[static_cast<size_t>(2 * next_a + 1)] = OperationTag::kKeep;
      prev_a = next_a;
      prev_b = next_b;
    }
  }
  return out;
}

TokenSequence apply_edits(const LabeledExample& labeled) {
  if (labeled.tags.size() != labeled.x.size()) {
    throw DataError("apply_edits: tag count differs from token count");
  }
  TokenSequence out;
  for (size_t i = 0; i < labeled.x.size(); ++i) {
    switch (labeled.tags[i]) {
      case OperationTag::kKeep:
        if (!labeled.x.is_dummy[i]) {
          out.push_back(labeled.x.ids[i], labeled.x.surfaces[i], false);
        }
        break;
      case OperationTag::kDelete:
        break;
      case OperationTag::kChange: {
        auto it = labeled.targets.find(static_cast<int>(i));
        if (it == labeled.targets.end()) {
          throw DataError("apply_edits: CHANGE position " + std::to_string(i) +
                          " has no target span");
        }
        const TokenSequence& span = it->second;
        for (size_t j = 0; j < span.size(); ++j) {
          if (span.ids[j] == Vocabulary::kEosId) break;
          out.push_back(span.ids[j], span.surfaces[j], false);
        }
        break;
      }
    }
  }
  return out;
}

nlohmann::json labeled_to_json(const LabeledExample& labeled) {
  nlohmann::json record;
  record["x_tokens"] = labeled.x.surfaces;
  std::string tag_string;
  for (OperationTag tag : labeled.tags) tag_string += tag_to_char(tag);
  record["tags"] = tag_string;
  nlohmann::json targets = nlohmann::json::object();
  for (const auto& [pos, span] : labeled.targets) {
    targets[std::to_string(pos)] = span.surfaces;
  }
  record["targets"] = targets;
  record["t_tokens"] = labeled.t.surfaces;
  return record;
}

namespace {

TokenSequence sequence_from_surfaces(const std::vector<std::string>& surfaces,
                                     const Vocabulary& vocab) {
  TokenSequence seq;
  for (const std::string& surface : surfaces) {
    int id = vocab.id_or_unk(surface);
    seq.push_back(id, surface, id == Vocabulary::kDummyId);
  }
  return seq;
}

}  // namespace

LabeledExample labeled_from_json(const nlohmann::json& record,
                                 const Vocabulary& vocab) {
  if (!record.contains("x_tokens") || !record.contains("tags") ||
      !record.contains("targets") || !record.contains("t_tokens")) {
    throw DataError("labeled record missing a required field");
  }
  LabeledExample out;
  out.x = sequence_from_surfaces(record["x_tokens"].get<std::vector<std::string>>(),
                                 vocab);
  std::string tag_string = record["tags"].get<std::string>();
  for (char c : tag_string) out.tags.push_back(tag_from_char(c));
  for (const auto& [key, value] : record["targets"].items()) {
    int pos = 0;
    try {
      pos = std::stoi(key);
    } catch (const std::exception&) {
      throw DataError("labeled record has non-numeric target position '" + key +
                      "'");
    }
    out.targets.emplace(
        pos, sequence_from_surfaces(value.get<std::vector<std::string>>(), vocab));
  }
  out.t = sequence_from_surfaces(record["t_tokens"].get<std::vector<std::string>>(),
                                 vocab);
  out.validate();
  return out;
}

}  // namespace opcorrect
