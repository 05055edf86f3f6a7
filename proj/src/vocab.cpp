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

#include "opcorrect/vocab.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "opcorrect/common.hpp"

namespace opcorrect {

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> kReserved = {"<pad>", "<unk>", "<bos>",
                                                     "<eos>", "<dummy>"};
  return kReserved;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : id_to_token_(std::move(tokens)) {
  const auto& reserved = reserved_tokens();
  if (id_to_token_.size() < reserved.size()) {
    throw DataError("vocabulary smaller than the reserved token set");
  }
  for (size_t i = 0; i < reserved.size(); ++i) {
    if (id_to_token_[i] != reserved[i]) {
      throw DataError("vocabulary id " + std::to_string(i) + " must be '" +
                      reserved[i] + "', found '" + id_to_token_[i] + "'");
    }
  }
  uint64_t h = fnv1a64("", 0);
  for (size_t i = 0; i < id_to_token_.size(); ++i) {
    const std::string& tok = id_to_token_[i];
    if (tok.empty()) {
      throw DataError("vocabulary id " + std::to_string(i) + " is empty");
    }
    auto [it, inserted] = token_to_id_.emplace(tok, static_cast<int>(i));
    if (!inserted) {
      throw DataError("duplicate vocabulary token '" + tok + "'");
    }
    h = fnv1a64(tok.data(), tok.size(), h);
    h = fnv1a64("\n", 1, h);
  }
  hash_ = h;
}

Vocabulary Vocabulary::load(const std::string& path) {
  return Vocabulary(read_lines(path));
}

void Vocabulary::save(const std::string& path) const {
  std::string out;
  for (const std::string& tok : id_to_token_) {
    out += tok;
    out += '\n';
  }
  write_file(path, out);
}

int Vocabulary::id_or_unk(std::string_view token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw ContractError("vocabulary id out of range: " + std::to_string(id));
  }
  return id_to_token_[static_cast<size_t>(id)];
}

TokenSequence TokenSequence::from_ids(const std::vector<int>& ids,
                                      const Vocabulary& vocab) {
  TokenSequence seq;
  for (int id : ids) {
    seq.push_back(id, vocab.token(id), id == Vocabulary::kDummyId);
  }
  return seq;
}

namespace {

// Byte offsets of character starts in a UTF-8 string, plus the end offset.
std::vector<size_t> char_boundaries(std::string_view word) {
  std::vector<size_t> bounds;
  size_t i = 0;
  while (i < word.size()) {
    bounds.push_back(i);
    i += u8_seq_len(static_cast<unsigned char>(word[i]));
    if (i > word.size()) i = word.size();
  }
  bounds.push_back(word.size());
  return bounds;
}

std::string piece_form(std::string_view sub, bool continuation) {
  std::string piece;
  if (continuation) piece = std::string(Vocabulary::kContinuation);
  piece += sub;
  return piece;
}

}  // namespace

Vocabulary build_vocab(const std::vector<std::string>& corpus_lines, int max_size,
                       int min_freq) {
  if (max_size <= Vocabulary::kNumReserved) {
    throw ConfigError("vocabulary max size must exceed the reserved token count");
  }
  if (min_freq < 1) throw ConfigError("vocabulary min frequency must be >= 1");

  std::map<std::string, int64_t> word_freq;
  for (const std::string& line : corpus_lines) {
    for (const std::string& word : split_whitespace(lowercase_ascii(line))) {
      ++word_freq[word];
    }
  }
  if (word_freq.empty()) throw ConfigError("vocabulary corpus has no tokens");

  // Character pieces are unconditional; substring pieces compete on frequency.
  std::set<std::string> char_pieces;
  std::map<std::string, int64_t> piece_freq;
  for (const auto& [word, freq] : word_freq) {
    std::vector<size_t> bounds = char_boundaries(word);
    size_t n = bounds.size() - 1;  // character count
    for (size_t s = 0; s < n; ++s) {
      std::string_view one_char =
          std::string_view(word).substr(bounds[s], bounds[s + 1] - bounds[s]);
      char_pieces.insert(piece_form(one_char, false));
      char_pieces.insert(piece_form(one_char, true));
      for (size_t e = s + 2; e <= n; ++e) {
        std::string_view sub =
            std::string_view(word).substr(bounds[s], bounds[e] - bounds[s]);
        piece_freq[piece_form(sub, s > 0)] += freq;
      }
    }
  }

  std::vector<std::string> tokens = Vocabulary::reserved_tokens();
  tokens.insert(tokens.end(), char_pieces.begin(), char_pieces.end());

  std::vector<std::pair<int64_t, std::string>> ranked;
  for (const auto& [piece, freq] : piece_freq) {
    if (freq >= min_freq && char_pieces.find(piece) == char_pieces.end()) {
      ranked.emplace_back(freq, piece);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (const auto& [freq, piece] : ranked) {
    if (static_cast<int>(tokens.size()) >= max_size) break;
    tokens.push_back(piece);
  }
  return Vocabulary(std::move(tokens));
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  std::string lowered = lowercase_ascii(text);
  for (const std::string& word : split_whitespace(lowered)) {
    std::vector<size_t> bounds = char_boundaries(word);
    size_t n = bounds.size() - 1;
    size_t s = 0;
    while (s < n) {
      bool continuation = s > 0;
      size_t matched = 0;
      std::string matched_piece;
      for (size_t e = n; e > s; --e) {
        std::string piece = piece_form(
            std::string_view(word).substr(bounds[s], bounds[e] - bounds[s]),
            continuation);
        if (vocab.contains(piece)) {
          matched = e;
          matched_piece = std::move(piece);
          break;
        }
      }
      if (matched == 0) {
        // No entry even for the single character: emit UNK and move on by
        // one character so tokenize stays total.
        seq.push_back(Vocabulary::kUnkId, vocab.token(Vocabulary::kUnkId));
        s += 1;
      } else {
        int id = vocab.id_or_unk(matched_piece);
        seq.push_back(id, std::move(matched_piece));
        s = matched;
      }
    }
  }
  return seq;
}

std::string detokenize(const TokenSequence& tokens, const Vocabulary& vocab) {
  (void)vocab;
  std::string out;
  bool in_word = false;
  for (size_t i = 0; i < tokens.size(); ++i) {
    int id = tokens.ids[i];
    if (id == Vocabulary::kPadId || id == Vocabulary::kBosId ||
        id == Vocabulary::kEosId || id == Vocabulary::kDummyId ||
        tokens.is_dummy[i]) {
      continue;
    }
    std::string_view surface = tokens.surfaces[i];
    bool continuation = surface.substr(0, 2) == Vocabulary::kContinuation;
    if (continuation && in_word) {
      out += surface.substr(2);
    } else {
      if (in_word) out += ' ';
      out += continuation ? surface.substr(2) : surface;
      in_word = true;
    }
  }
  return out;
}

}  // namespace opcorrect
