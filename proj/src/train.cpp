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

#include "opcorrect/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <utility>

#include "json.hpp"
#include "opcorrect/alignment.hpp"
#include "opcorrect/common.hpp"

namespace opcorrect {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (optimizer != "adam" && optimizer != "adamw") {
    throw ConfigError("optimizer must be 'adam' or 'adamw'");
  }
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("beta1 must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("val_fraction must be in [0, 1)");
  }
  if (tag_class_weights) {
    for (double w : *tag_class_weights) {
      if (!(w > 0.0)) throw ConfigError("tag_class_weights must be > 0");
    }
  }
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"epochs", epochs},
                      {"batch_size", batch_size},
                      {"learning_rate", learning_rate},
                      {"optimizer", optimizer},
                      {"weight_decay", weight_decay},
                      {"beta1", beta1},
                      {"beta2", beta2},
                      {"adam_eps", adam_eps},
                      {"alpha", alpha},
                      {"seed", seed},
                      {"clip_norm", clip_norm},
                      {"checkpoint_path", checkpoint_path},
                      {"log_path", log_path},
                      {"val_fraction", val_fraction}};
  if (tag_class_weights) j["tag_class_weights"] = *tag_class_weights;
  return j;
}

std::vector<std::vector<int>> plan_batches(const std::vector<int>& lengths,
                                           int batch_size, Rng& rng) {
  if (batch_size < 1) throw ContractError("plan_batches: batch_size must be >= 1");
  std::vector<int> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return lengths[static_cast<size_t>(a)] < lengths[static_cast<size_t>(b)];
  });
  std::vector<std::vector<int>> groups;
  for (size_t i = 0; i < order.size(); i += static_cast<size_t>(batch_size)) {
    size_t end = std::min(order.size(), i + static_cast<size_t>(batch_size));
    groups.emplace_back(order.begin() + static_cast<ptrdiff_t>(i),
                        order.begin() + static_cast<ptrdiff_t>(end));
  }
  rng.shuffle(groups);
  return groups;
}

LabeledCorpus label_pairs(const std::vector<CorpusPair>& pairs,
                          const Vocabulary& vocab, int max_positions) {
  LabeledCorpus out;
  out.examples.reserve(pairs.size());
  for (const CorpusPair& p : pairs) {
    TokenSequence x_raw = tokenize(p.asr_text, vocab);
    TokenSequence t = tokenize(p.ref_text, vocab);
    // The encoder consumes the slotted form [G, w1, G, ..., wn, G].
    int slotted = 2 * static_cast<int>(x_raw.size()) + 1;
    if (slotted > max_positions) {
      ++out.skipped;
      continue;
    }
    LabeledExample ex = make_labels(x_raw, t);
    ex.validate();
    out.examples.push_back(std::move(ex));
  }
  if (out.skipped > 0) {
    log_warn("skipped ", out.skipped, " of ", pairs.size(),
             " pairs longer than ", max_positions, " slotted positions");
  }
  return out;
}

Seq2SeqCorpus seq2seq_pairs(const std::vector<CorpusPair>& pairs,
                            const Vocabulary& vocab, int max_positions) {
  Seq2SeqCorpus out;
  out.pairs.reserve(pairs.size());
  for (const CorpusPair& p : pairs) {
    TokenSequence src = tokenize(p.asr_text, vocab);
    TokenSequence tgt = tokenize(p.ref_text, vocab);
    // The decoder prefix [BOS, t...] needs one extra position.
    if (static_cast<int>(src.size()) > max_positions ||
        static_cast<int>(tgt.size()) + 1 > max_positions) {
      ++out.skipped;
      continue;
    }
    out.pairs.emplace_back(std::move(src.ids), std::move(tgt.ids));
  }
  if (out.skipped > 0) {
    log_warn("skipped ", out.skipped, " of ", pairs.size(),
             " pairs longer than ", max_positions, " positions");
  }
  return out;
}

std::vector<Batch> make_batches(const std::vector<LabeledExample>& examples,
                                int batch_size, int max_decode_len,
                                int max_positions, Rng& rng, int* skipped) {
  std::vector<const LabeledExample*> kept;
  kept.reserve(examples.size());
  int dropped = 0;
  for (const LabeledExample& ex : examples) {
    if (static_cast<int>(ex.x.size()) > max_positions) {
      ++dropped;
      continue;
    }
    kept.push_back(&ex);
  }
  if (skipped != nullptr) *skipped = dropped;
  std::vector<int> lengths(kept.size());
  for (size_t i = 0; i < kept.size(); ++i) {
    lengths[i] = static_cast<int>(kept[i]->x.size());
  }
  std::vector<Batch> batches;
  std::vector<LabeledExample> scratch;
  for (const std::vector<int>& group : plan_batches(lengths, batch_size, rng)) {
    scratch.clear();
    for (int i : group) scratch.push_back(*kept[static_cast<size_t>(i)]);
    batches.push_back(batch_from_examples(scratch, max_decode_len));
  }
  return batches;
}

namespace {

void append_epoch_log(const std::string& path, const EpochStats& st) {
  if (path.empty()) return;
  nlohmann::json j = {{"epoch", st.epoch},         {"split", st.split},
                      {"loss_oper", st.loss_oper}, {"loss_dec", st.loss_dec},
                      {"total", st.total},         {"tag_acc", st.tag_acc},
                      {"token_acc", st.token_acc}};
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot open log file: " + path);
  out << j.dump() << "\n";
}

// Running sums for one pass over a split.
struct PassTotals {
  double oper = 0.0, dec = 0.0, total = 0.0;
  int64_t tag_n = 0, tag_c = 0, tok_n = 0, tok_c = 0;
  int examples = 0;

  void add(const ForwardResult<double>& fr, int batch_examples) {
    oper += fr.oper_value;
    dec += fr.dec_value;
    total += fr.total_value;
    tag_n += fr.tag_count;
    tag_c += fr.tag_correct;
    tok_n += fr.tok_count;
    tok_c += fr.tok_correct;
    examples += batch_examples;
  }

  EpochStats stats(int epoch, std::string split) const {
    EpochStats st;
    st.epoch = epoch;
    st.split = std::move(split);
    double n = examples > 0 ? static_cast<double>(examples) : 1.0;
    st.loss_oper = oper / n;
    st.loss_dec = dec / n;
    st.total = total / n;
    st.tag_acc = tag_n > 0 ? static_cast<double>(tag_c) /
                                 static_cast<double>(tag_n)
                           : 0.0;
    st.token_acc = tok_n > 0 ? static_cast<double>(tok_c) /
                                   static_cast<double>(tok_n)
                             : 0.0;
    return st;
  }
};

// Shared optimization loop.  The example type, batch materialization, and
// forward pass differ between the edit model and the baseline; everything
// else (split, bucketing, clipping, logging, checkpoint policy) is common.
template <typename Example, typename LenFn, typename MakeBatchFn,
          typename ForwardFn, typename CheckFn>
TrainResult run_training(std::vector<Example> examples, int skipped,
                         ParameterStore<double>& store, const std::string& kind,
                         const ModelConfig& model_cfg,
                         const std::string& vocab_hash,
                         const TrainConfig& cfg, LenFn length_of,
                         MakeBatchFn make_batch, ForwardFn forward,
                         CheckFn check_example) {
  if (examples.empty()) {
    throw DataError("no trainable examples after length filtering");
  }
  if (!cfg.log_path.empty()) {
    std::ofstream truncate(cfg.log_path, std::ios::trunc);
    if (!truncate) throw DataError("cannot open log file: " + cfg.log_path);
  }

  Rng root(cfg.seed);
  std::vector<int> idx(examples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng split_rng = root.fork(1);
  split_rng.shuffle(idx);
  const int val_count = static_cast<int>(
      static_cast<double>(examples.size()) * cfg.val_fraction);
  std::vector<int> val_idx(idx.begin(), idx.begin() + val_count);
  std::vector<int> train_idx(idx.begin() + val_count, idx.end());
  if (train_idx.empty()) throw DataError("validation split left no training data");

  AdamW<double> opt(store, cfg);
  TrainResult res;
  res.skipped_examples = skipped;

  std::vector<int> train_lengths(train_idx.size());
  for (size_t i = 0; i < train_idx.size(); ++i) {
    train_lengths[i] = length_of(examples[static_cast<size_t>(train_idx[i])]);
  }

  std::vector<int> global;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng order_rng = root.fork(1000 + static_cast<uint64_t>(epoch));
    Rng dropout_rng = root.fork(2000 + static_cast<uint64_t>(epoch));
    Rng* dropout = model_cfg.dropout > 0.0 ? &dropout_rng : nullptr;

    PassTotals train_totals;
    auto plan = plan_batches(train_lengths, cfg.batch_size, order_rng);
    // Guard against label corruption: re-check one sampled example per epoch.
    check_example(examples[static_cast<size_t>(
        train_idx[static_cast<size_t>(order_rng.below(train_idx.size()))])]);
    int batch_index = 0;
    for (const std::vector<int>& group : plan) {
      global.clear();
      for (int i : group) global.push_back(train_idx[static_cast<size_t>(i)]);
      auto batch = make_batch(examples, global);
      Tape<double> tape;
      ForwardResult<double> fr = forward(tape, batch, dropout);
      if (!std::isfinite(fr.total_value)) {
        throw DataError("non-finite loss at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(batch_index) +
                        "; try a lower learning rate");
      }
      auto scaled =
          tape.scale(fr.loss, 1.0 / static_cast<double>(global.size()));
      store.zero_grads();
      tape.backward(scaled);
      clip_gradients(store, cfg.clip_norm);
      opt.step();
      train_totals.add(fr, static_cast<int>(global.size()));
      ++batch_index;
    }
    EpochStats train_stats = train_totals.stats(epoch, "train");
    res.history.push_back(train_stats);
    append_epoch_log(cfg.log_path, train_stats);

    if (!val_idx.empty()) {
      PassTotals val_totals;
      for (size_t i = 0; i < val_idx.size();
           i += static_cast<size_t>(cfg.batch_size)) {
        size_t end = std::min(val_idx.size(),
                              i + static_cast<size_t>(cfg.batch_size));
        global.assign(val_idx.begin() + static_cast<ptrdiff_t>(i),
                      val_idx.begin() + static_cast<ptrdiff_t>(end));
        auto batch = make_batch(examples, global);
        Tape<double> tape;
        ForwardResult<double> fr = forward(tape, batch, nullptr);
        val_totals.add(fr, static_cast<int>(global.size()));
      }
      EpochStats val_stats = val_totals.stats(epoch, "val");
      res.history.push_back(val_stats);
      append_epoch_log(cfg.log_path, val_stats);
      log_info(kind, " epoch ", epoch, ": train total ", train_stats.total,
               ", val total ", val_stats.total, ", val tag acc ",
               val_stats.tag_acc);
      if (val_stats.total < res.best_val) {
        res.best_val = val_stats.total;
        res.best_epoch = epoch;
        if (!cfg.checkpoint_path.empty()) {
          write_checkpoint(cfg.checkpoint_path, kind, model_cfg, vocab_hash,
                           store);
        }
      }
    } else {
      // Without a validation split the final epoch's parameters are kept.
      res.best_val = train_stats.total;
      res.best_epoch = epoch;
      log_info(kind, " epoch ", epoch, ": train total ", train_stats.total,
               ", tag acc ", train_stats.tag_acc);
    }
  }
  if (val_idx.empty() && !cfg.checkpoint_path.empty()) {
    write_checkpoint(cfg.checkpoint_path, kind, model_cfg, vocab_hash, store);
  }
  return res;
}

}  // namespace

TrainResult train_edit(const std::vector<CorpusPair>& pairs,
                       const Vocabulary& vocab, ModelConfig model_cfg,
                       const TrainConfig& train_cfg) {
  train_cfg.validate();
  model_cfg.vocab_size = vocab.size();
  model_cfg.alpha = train_cfg.alpha;
  model_cfg.validate();
  LabeledCorpus corpus = label_pairs(pairs, vocab, model_cfg.max_positions);

  EditModel<double> model(model_cfg, train_cfg.seed);
  std::array<double, 3> weights{};
  const std::array<double, 3>* weights_ptr = nullptr;
  if (train_cfg.tag_class_weights) {
    weights = *train_cfg.tag_class_weights;
    weights_ptr = &weights;
  }

  std::vector<LabeledExample> scratch;
  auto length_of = [](const LabeledExample& ex) {
    return static_cast<int>(ex.x.size());
  };
  auto make_batch = [&](const std::vector<LabeledExample>& all,
                        const std::vector<int>& indices) {
    scratch.clear();
    for (int i : indices) scratch.push_back(all[static_cast<size_t>(i)]);
    return batch_from_examples(scratch, model_cfg.max_decode_len);
  };
  auto forward = [&](Tape<double>& tape, const Batch& batch, Rng* dropout) {
    return model.forward_loss(tape, batch, dropout, weights_ptr);
  };
  auto check = [](const LabeledExample& ex) {
    ex.validate();
    if (apply_edits(ex).ids != ex.t.ids) {
      throw ContractError("labeled example no longer reconstructs its reference");
    }
  };
  return run_training(std::move(corpus.examples), corpus.skipped,
                      model.params(), "edit", model_cfg,
                      hex64(vocab.content_hash()), train_cfg, length_of,
                      make_batch, forward, check);
}

TrainResult train_baseline(const std::vector<CorpusPair>& pairs,
                           const Vocabulary& vocab, ModelConfig model_cfg,
                           const TrainConfig& train_cfg) {
  train_cfg.validate();
  model_cfg.vocab_size = vocab.size();
  model_cfg.alpha = train_cfg.alpha;
  model_cfg.validate();
  Seq2SeqCorpus corpus = seq2seq_pairs(pairs, vocab, model_cfg.max_positions);

  BaselineModel<double> model(model_cfg, train_cfg.seed);
  using IdPair = std::pair<std::vector<int>, std::vector<int>>;
  std::vector<IdPair> scratch;
  auto length_of = [](const IdPair& p) {
    return static_cast<int>(p.first.size());
  };
  auto make_batch = [&](const std::vector<IdPair>& all,
                        const std::vector<int>& indices) {
    scratch.clear();
    for (int i : indices) scratch.push_back(all[static_cast<size_t>(i)]);
    return seq2seq_batch_from_pairs(scratch);
  };
  auto forward = [&](Tape<double>& tape, const Seq2SeqBatch& batch,
                     Rng* dropout) {
    return model.forward_loss(tape, batch, dropout);
  };
  return run_training(std::move(corpus.pairs), corpus.skipped, model.params(),
                      "baseline", model_cfg, hex64(vocab.content_hash()),
                      train_cfg, length_of, make_batch, forward,
                      [](const IdPair&) {});
}

}  // namespace opcorrect
