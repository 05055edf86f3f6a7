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

#ifndef OPCORRECT_TRAIN_HPP_
#define OPCORRECT_TRAIN_HPP_

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "opcorrect/data.hpp"
#include "opcorrect/model.hpp"

namespace opcorrect {

struct TrainConfig {
  int epochs = 20;                 // matches the reference setup
  int batch_size = 32;
  double learning_rate = 3e-4;     // from-scratch desk default; 5e-5 suits
                                   // large pretrained encoders
  std::string optimizer = "adamw";  // "adamw" or "adam" (ignores weight_decay)
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double alpha = 3.0;              // operation-loss weight in the total loss
  uint64_t seed = 1;
  double clip_norm = 1.0;          // global gradient-norm cap; 0 disables
  std::string checkpoint_path;     // empty = do not write
  std::string log_path;            // per-epoch jsonl records; empty = off
  double val_fraction = 0.1;       // held-out share; 0 = keep final epoch
  std::optional<std::array<double, 3>> tag_class_weights;  // K, D, C

  void validate() const;
  nlohmann::json to_json() const;
};

// Adaptive-moment optimizer with decoupled weight decay; weight_decay 0
// makes it plain Adam.  One state slot pair per parameter, in store order.
template <typename S>
class AdamW {
 public:
  AdamW(ParameterStore<S>& store, const TrainConfig& cfg)
      : store_(&store),
        lr_(cfg.learning_rate),
        b1_(cfg.beta1),
        b2_(cfg.beta2),
        eps_(cfg.adam_eps),
        wd_(cfg.optimizer == "adam" ? 0.0 : cfg.weight_decay) {
    m_.reserve(store.size());
    v_.reserve(store.size());
    for (size_t i = 0; i < store.size(); ++i) {
      const auto& p = store.at(i);
      m_.push_back(Mat<S>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Mat<S>::Zero(p.value.rows(), p.value.cols()));
    }
  }

  // Applies one update from the accumulated gradients (which the caller
  // zeroes between steps).
  void step() {
    ++t_;
    const S bc1 = S(1) - static_cast<S>(std::pow(b1_, t_));
    const S bc2 = S(1) - static_cast<S>(std::pow(b2_, t_));
    for (size_t i = 0; i < store_->size(); ++i) {
      auto& p = store_->at(i);
      auto& m = m_[i];
      auto& v = v_[i];
      m = static_cast<S>(b1_) * m + (S(1) - static_cast<S>(b1_)) * p.grad;
      v.array() = static_cast<S>(b2_) * v.array() +
                  (S(1) - static_cast<S>(b2_)) * p.grad.array().square();
      auto m_hat = m.array() / bc1;
      auto v_hat = v.array() / bc2;
      p.value.array() -=
          static_cast<S>(lr_) *
          (m_hat / (v_hat.sqrt() + static_cast<S>(eps_)) +
           static_cast<S>(wd_) * p.value.array());
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  ParameterStore<S>* store_;
  double lr_, b1_, b2_, eps_, wd_;
  int64_t t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

// Scales all gradients so their global norm is at most max_norm (no-op when
// max_norm <= 0 or the norm is already below).  Returns the pre-clip norm.
template <typename S>
double clip_gradients(ParameterStore<S>& store, double max_norm) {
  double sq = 0.0;
  for (size_t i = 0; i < store.size(); ++i) {
    sq += static_cast<double>(
        store.at(i).grad.template cast<double>().squaredNorm());
  }
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (size_t i = 0; i < store.size(); ++i) store.at(i).grad *= scale;
  }
  return norm;
}

// Bucket-by-length batch planning: indices are ordered by length (ties by
// index), cut into consecutive groups of batch_size, and the group order is
// shuffled with the given generator.
std::vector<std::vector<int>> plan_batches(const std::vector<int>& lengths,
                                           int batch_size, Rng& rng);

// Tokenizes and labels corpus pairs; pairs whose slotted input exceeds
// max_positions are skipped with a warning.
struct LabeledCorpus {
  std::vector<LabeledExample> examples;
  int skipped = 0;
};
LabeledCorpus label_pairs(const std::vector<CorpusPair>& pairs,
                          const Vocabulary& vocab, int max_positions);

// Token-id pairs for the baseline; skips pairs whose source or target
// prefix would not fit max_positions.
struct Seq2SeqCorpus {
  std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs;
  int skipped = 0;
};
Seq2SeqCorpus seq2seq_pairs(const std::vector<CorpusPair>& pairs,
                            const Vocabulary& vocab, int max_positions);

// Convenience wrapper: filter, bucket, shuffle, and materialize padded
// batches in one call.
std::vector<Batch> make_batches(const std::vector<LabeledExample>& examples,
                                int batch_size, int max_decode_len,
                                int max_positions, Rng& rng,
                                int* skipped = nullptr);

struct EpochStats {
  int epoch = 0;
  std::string split;     // "train" or "val"
  double loss_oper = 0.0;
  double loss_dec = 0.0;
  double total = 0.0;    // mean per example
  double tag_acc = 0.0;
  double token_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
  int skipped_examples = 0;
};

// Full training runs: label/prepare the corpus, optimize with gradient
// clipping, log per-epoch stats, and write the best-by-validation
// checkpoint (final epoch when there is no validation split).
TrainResult train_edit(const std::vector<CorpusPair>& pairs,
                       const Vocabulary& vocab, ModelConfig model_cfg,
                       const TrainConfig& train_cfg);
TrainResult train_baseline(const std::vector<CorpusPair>& pairs,
                           const Vocabulary& vocab, ModelConfig model_cfg,
                           const TrainConfig& train_cfg);

}  // namespace opcorrect

#endif  // OPCORRECT_TRAIN_HPP_
