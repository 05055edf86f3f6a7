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

#include "opcorrect/model.hpp"

namespace opcorrect {

void ModelConfig::validate() const {
  if (vocab_size <= Vocabulary::kNumReserved) {
    throw ConfigError("vocab_size must exceed the reserved token count");
  }
  if (hidden_dim <= 0) throw ConfigError("hidden_dim must be positive");
  if (encoder_heads <= 0) throw ConfigError("encoder_heads must be positive");
  if (hidden_dim % encoder_heads != 0) {
    throw ConfigError("hidden_dim must be divisible by encoder_heads");
  }
  if (encoder_layers < 1) throw ConfigError("encoder_layers must be >= 1");
  if (feedforward_dim <= 0) throw ConfigError("feedforward_dim must be positive");
  if (max_positions < 3) throw ConfigError("max_positions must be >= 3");
  if (decoder_kind != "lstm" && decoder_kind != "transformer") {
    throw ConfigError("decoder_kind must be lstm or transformer");
  }
  if (decoder_layers < 1) throw ConfigError("decoder_layers must be >= 1");
  if (max_decode_len < 1) throw ConfigError("max_decode_len must be >= 1");
  if (alpha <= 0.0) throw ConfigError("alpha must be > 0");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("dropout must be in [0, 1)");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size},
          {"hidden_dim", hidden_dim},
          {"encoder_layers", encoder_layers},
          {"encoder_heads", encoder_heads},
          {"feedforward_dim", feedforward_dim},
          {"max_positions", max_positions},
          {"decoder_kind", decoder_kind},
          {"decoder_layers", decoder_layers},
          {"max_decode_len", max_decode_len},
          {"alpha", alpha},
          {"dropout", dropout}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.encoder_layers = j.at("encoder_layers").get<int>();
    cfg.encoder_heads = j.at("encoder_heads").get<int>();
    cfg.feedforward_dim = j.at("feedforward_dim").get<int>();
    cfg.max_positions = j.at("max_positions").get<int>();
    cfg.decoder_kind = j.at("decoder_kind").get<std::string>();
    cfg.decoder_layers = j.at("decoder_layers").get<int>();
    cfg.max_decode_len = j.at("max_decode_len").get<int>();
    cfg.alpha = j.at("alpha").get<double>();
    cfg.dropout = j.at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Batch batch_from_examples(std::span<const LabeledExample> examples,
                          int max_decode_len) {
  Batch b;
  int max_len = 0;
  for (const auto& ex : examples) {
    max_len = std::max(max_len, static_cast<int>(ex.x.ids.size()));
  }
  for (const auto& ex : examples) {
    const int s = b.num_sequences();
    const int begin = b.num_rows();
    const int n = static_cast<int>(ex.x.ids.size());
    b.seq_begin.push_back(begin);
    b.seq_len.push_back(max_len);
    b.seq_valid.push_back(n);
    for (int i = 0; i < max_len; ++i) {
      const bool valid = i < n;
      b.ids.push_back(valid ? ex.x.ids[static_cast<size_t>(i)]
                            : Vocabulary::kPadId);
      b.positions.push_back(i);
      b.tags.push_back(
          valid ? static_cast<int>(ex.tags[static_cast<size_t>(i)]) : 0);
      b.tag_mask.push_back(valid ? 1 : 0);
    }
    for (const auto& [pos, target] : ex.targets) {
      Batch::Span sp;
      sp.seq = s;
      sp.enc_row = begin + pos;
      sp.target = target.ids;
      if (static_cast<int>(sp.target.size()) > max_decode_len) {
        sp.target.resize(static_cast<size_t>(max_decode_len));
      }
      b.spans.push_back(std::move(sp));
    }
  }
  return b;
}

Seq2SeqBatch seq2seq_batch_from_pairs(
    std::span<const std::pair<std::vector<int>, std::vector<int>>> pairs) {
  Seq2SeqBatch b;
  int max_src = 0;
  for (const auto& [src, tgt] : pairs) {
    max_src = std::max(max_src, static_cast<int>(src.size()));
  }
  for (const auto& [src, tgt] : pairs) {
    const int begin = b.num_src_rows();
    const int n = static_cast<int>(src.size());
    b.src_begin.push_back(begin);
    b.src_len.push_back(max_src);
    b.src_valid.push_back(n);
    for (int i = 0; i < max_src; ++i) {
      b.src_ids.push_back(i < n ? src[static_cast<size_t>(i)]
                               : Vocabulary::kPadId);
      b.src_positions.push_back(i);
    }
    const int m = static_cast<int>(tgt.size()) + 1;  // room for EOS
    b.tgt_begin.push_back(static_cast<int>(b.tgt_ids.size()));
    b.tgt_len.push_back(m);
    for (int i = 0; i < m; ++i) {
      b.tgt_ids.push_back(i == 0 ? Vocabulary::kBosId
                                 : tgt[static_cast<size_t>(i - 1)]);
      b.tgt_positions.push_back(i);
      b.tgt_labels.push_back(i < m - 1 ? tgt[static_cast<size_t>(i)]
                                       : Vocabulary::kEosId);
    }
  }
  return b;
}

namespace detail {

std::pair<nlohmann::json, size_t> parse_checkpoint(const std::string& blob,
                                                   const std::string& path) {
  constexpr size_t kPrefix = sizeof(kCheckpointMagic) + 8;
  if (blob.size() < kPrefix ||
      blob.compare(0, sizeof(kCheckpointMagic), kCheckpointMagic,
                   sizeof(kCheckpointMagic)) != 0) {
    throw DataError("not a checkpoint file: " + path);
  }
  const uint64_t head_len = get_u64_le(blob, sizeof(kCheckpointMagic));
  if (kPrefix + head_len > blob.size()) {
    throw DataError("checkpoint " + path + ": truncated header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(kPrefix, head_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": bad header: " + e.what());
  }
  return {std::move(header), kPrefix + head_len};
}

}  // namespace detail

CheckpointInfo read_checkpoint_info(const std::string& path) {
  std::string blob = read_file(path);
  auto [header, at] = detail::parse_checkpoint(blob, path);
  (void)at;
  CheckpointInfo info;
  try {
    info.kind = header.at("kind").get<std::string>();
    info.vocab_hash = header.at("vocab_hash").get<std::string>();
    info.config = ModelConfig::from_json(header.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": bad header: " + e.what());
  }
  if (info.kind != "edit" && info.kind != "baseline") {
    throw DataError("checkpoint " + path + ": unknown kind " + info.kind);
  }
  return info;
}

}  // namespace opcorrect
