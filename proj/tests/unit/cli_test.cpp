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

#include <cstdint>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "opcorrect/cli.hpp"
#include "opcorrect/common.hpp"

namespace opcorrect {
namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("opcorrect_cli_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

DemoOptions tiny_demo(const std::string& out_dir, uint64_t seed) {
  DemoOptions o;
  o.out_dir = out_dir;
  o.seed = seed;
  o.train_pairs = 120;
  o.test_pairs = 40;
  o.bench_utterances = 30;
  o.bench_reps = 2;
  o.model.hidden_dim = 16;
  o.model.encoder_layers = 1;
  o.model.encoder_heads = 2;
  o.model.feedforward_dim = 32;
  o.train.epochs = 2;
  o.train.batch_size = 16;
  o.train.learning_rate = 2e-3;
  return o;
}

TEST_CASE("run manifest serializes every field") {
  RunManifest m;
  m.subcommand = "train";
  m.config = {{"epochs", 3}};
  m.seed = 42;
  m.inputs = {"a.jsonl", "v.txt"};
  m.outputs = {"m.ckpt"};
  m.started_at = "2026-01-02T03:04:05Z";
  m.finished_at = "2026-01-02T03:04:09Z";
  nlohmann::json j = m.to_json();
  CHECK(j.at("subcommand") == "train");
  CHECK(j.at("config").at("epochs") == 3);
  CHECK(j.at("seed") == 42);
  CHECK(j.at("inputs") == nlohmann::json({"a.jsonl", "v.txt"}));
  CHECK(j.at("outputs") == nlohmann::json({"m.ckpt"}));
  CHECK(j.at("code_version") == kVersion);
  CHECK(j.at("started_at") == "2026-01-02T03:04:05Z");
  CHECK(j.at("finished_at") == "2026-01-02T03:04:09Z");

  auto dir = temp_dir("manifest");
  std::filesystem::create_directories(dir);
  std::string path = (dir / "run.manifest.json").string();
  write_manifest(m, path);
  nlohmann::json back = nlohmann::json::parse(read_file(path));
  CHECK(back == j);
  std::filesystem::remove_all(dir);
}

TEST_CASE("utc timestamps are iso8601 shaped") {
  std::string t = iso8601_utc_now();
  REQUIRE(t.size() == 20);
  CHECK(t[4] == '-');
  CHECK(t[7] == '-');
  CHECK(t[10] == 'T');
  CHECK(t[13] == ':');
  CHECK(t[16] == ':');
  CHECK(t[19] == 'Z');
  CHECK(t.substr(0, 2) == "20");
}

TEST_CASE("demo validates its arguments") {
  DemoOptions o = tiny_demo("", 1);
  CHECK_THROWS_AS(run_demo(o), UsageError);
  o = tiny_demo("/tmp/opcorrect_cli_unused", 1);
  o.train_pairs = 0;
  CHECK_THROWS_AS(run_demo(o), UsageError);
  o = tiny_demo("/tmp/opcorrect_cli_unused", 1);
  o.test_pairs = -1;
  CHECK_THROWS_AS(run_demo(o), UsageError);
}

TEST_CASE("demo produces a complete, reproducible report") {
  auto dir_a = temp_dir("demo_a");
  auto dir_b = temp_dir("demo_b");
  DemoReport a = run_demo(tiny_demo(dir_a.string(), 77));
  DemoReport b = run_demo(tiny_demo(dir_b.string(), 77));

  // Scores, step counts, and corpus stats land in the deterministic report;
  // only wall-clock timings live in the latency report.
  CHECK(a.report == b.report);
  CHECK(a.report.dump(2) == b.report.dump(2));

  for (const char* name : {"train.jsonl", "test.jsonl", "vocab.txt",
                           "lstm.ckpt", "transformer.ckpt", "baseline.ckpt",
                           "demo_report.json", "latency_report.json"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(dir_a / name));
  }
  nlohmann::json on_disk =
      nlohmann::json::parse(read_file((dir_a / "demo_report.json").string()));
  CHECK(on_disk == a.report);

  CHECK(a.report.at("seed") == 77);
  CHECK(a.report.at("corpus").at("train_pairs") == 120);
  CHECK(a.report.at("corpus").at("test_pairs") == 40);
  CHECK(a.report.at("corpus").at("vocab_size").get<int>() > 10);
  for (const char* sys : {"original", "baseline", "constrained_lstm",
                          "constrained_trans"}) {
    CAPTURE(sys);
    double w = a.report.at("wer").at(sys).at("wer").get<double>();
    CHECK(w >= 0.0);
    CHECK(w < 2.0);
  }
  for (const char* sys : {"baseline", "constrained_lstm", "constrained_trans"}) {
    CAPTURE(sys);
    CHECK(a.report.at("decoder_steps").at(sys).get<int64_t>() >= 0);
    CHECK(a.latency.at("systems").at(sys).at("median_wall_ms").get<double>() >
          0.0);
    CHECK(a.latency.at("speedup").at(sys).get<double>() > 0.0);
  }
  CHECK(a.report.at("correction_ratios").contains("sentence_accuracy"));
  CHECK(a.latency.at("reference_system") == "baseline");
  CHECK(a.latency.at("utterances") == 30);

  // A different seed reshuffles the corpus and the scores.
  auto dir_c = temp_dir("demo_c");
  DemoReport c = run_demo(tiny_demo(dir_c.string(), 78));
  CHECK(c.report != a.report);

  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
  std::filesystem::remove_all(dir_c);
}

}  // namespace
}  // namespace opcorrect
