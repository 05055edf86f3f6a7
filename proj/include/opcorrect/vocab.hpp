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

#ifndef OPCORRECT_VOCAB_HPP_
#define OPCORRECT_VOCAB_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace opcorrect {

// Subword vocabulary with five reserved tokens at fixed ids.  Word-internal
// pieces carry the "##" continuation prefix.  Immutable after construction.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kBosId = 2;
  static constexpr int kEosId = 3;
  static constexpr int kDummyId = 4;
  static constexpr int kNumReserved = 5;
  static constexpr std::string_view kContinuation = "##";

  // Takes the full id-ordered token list, reserved tokens included.
  // Validates the reserved layout and token well-formedness.
  explicit Vocabulary(std::vector<std::string> tokens);

  // The reserved surface forms, in id order 0-4.
  static const std::vector<std::string>& reserved_tokens();

  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  bool contains(std::string_view token) const {
    return token_to_id_.find(token) != token_to_id_.end();
  }
  // Returns the id for a known token, or kUnkId for an unknown one.
  int id_or_unk(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  // Content fingerprint, stable across platforms; stored in checkpoints so a
  // model is never run against the wrong vocabulary.
  uint64_t content_hash() const { return hash_; }

 private:
  struct StringHash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int, StringHash, std::equal_to<>> token_to_id_;
  uint64_t hash_ = 0;
};

// A tokenized utterance: parallel ids, surface pieces, and dummy flags.
// Dummy flags are all false until slot insertion (see alignment.hpp).
struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::string> surfaces;
  std::vector<bool> is_dummy;

  size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  void push_back(int id, std::string surface, bool dummy = false) {
    ids.push_back(id);
    surfaces.push_back(std::move(surface));
    is_dummy.push_back(dummy);
  }
  bool operator==(const TokenSequence&) const = default;

  // Builds a sequence from bare ids, surfaces looked up in the vocabulary.
  static TokenSequence from_ids(const std::vector<int>& ids, const Vocabulary& vocab);
};

// Trains a small vocabulary from a corpus: all characters ever seen (in both
// word-initial and continuation form) are always included so tokenization can
// never fail, then substring pieces of two or more characters are admitted by
// descending frequency (ties broken lexicographically) while they meet
// min_freq and the total stays within max_size.
Vocabulary build_vocab(const std::vector<std::string>& corpus_lines, int max_size,
                       int min_freq);

// Lowercases, splits on whitespace, and segments each word by greedy
// longest-match against the vocabulary.  Characters with no vocabulary entry
// become single UNK tokens; tokenize is total over arbitrary UTF-8 input.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);

// Inverse of tokenize for in-vocabulary text: merges continuation pieces into
// their preceding word and joins words with single spaces.  Reserved tokens
// other than UNK produce no output.
std::string detokenize(const TokenSequence& tokens, const Vocabulary& vocab);

}  // namespace opcorrect

#endif  // OPCORRECT_VOCAB_HPP_
