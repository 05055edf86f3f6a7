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

#ifndef OPCORRECT_CLI_HPP_
#define OPCORRECT_CLI_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "opcorrect/eval.hpp"
#include "opcorrect/model.hpp"
#include "opcorrect/train.hpp"

namespace opcorrect {

// Record of one tool invocation, written next to the run's outputs so the
// run can be replayed (deterministic stages reproduce their outputs).
struct RunManifest {
  std::string subcommand;
  nlohmann::json config;  // resolved option values
  uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string code_version = kVersion;
  std::string started_at;
  std::string finished_at;

  nlohmann::json to_json() const;
};

std::string iso8601_utc_now();
void write_manifest(const RunManifest& manifest, const std::string& path);

// ---------------------------------------------------------------------------
// End-to-end demo: generate -> inject -> vocab -> train all three models ->
// score WER -> bench latency -> correction ratios, all under one seed.
// ---------------------------------------------------------------------------

struct DemoOptions {
  std::string out_dir;
  uint64_t seed = 1;
  int train_pairs = 2000;
  int test_pairs = 300;
  int bench_utterances = 200;
  int bench_warmup = 1;
  int bench_reps = 3;
  ModelConfig model;       // vocab_size filled in after vocab construction
  TrainConfig train;       // per-model seed/paths filled in per stage
};

struct DemoReport {
  // Deterministic numbers only (WER, decoder steps, ratios): byte-identical
  // across runs with the same seed.
  nlohmann::json report;
  // Wall-clock timings; varies run to run.
  nlohmann::json latency;
};

DemoReport run_demo(const DemoOptions& options);

}  // namespace opcorrect

#endif  // OPCORRECT_CLI_HPP_
