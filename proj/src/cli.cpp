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

#include "opcorrect/cli.hpp"

#include <ctime>
#include <filesystem>
#include <utility>

#include "opcorrect/data.hpp"
#include "opcorrect/infer.hpp"
#include "opcorrect/inject.hpp"
#include "opcorrect/vocab.hpp"

namespace opcorrect {

nlohmann::json RunManifest::to_json() const {
  return {{"subcommand", subcommand}, {"config", config},
          {"seed", seed},             {"inputs", inputs},
          {"outputs", outputs},       {"code_version", code_version},
          {"started_at", started_at}, {"finished_at", finished_at}};
}

std::string iso8601_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  write_file(path, manifest.to_json().dump(2) + "\n");
}

namespace {

// Stage failures keep their type but gain the stage name.
template <typename Fn>
auto demo_stage(const std::string& name, Fn&& fn) {
  auto tag = [&name](const char* what) {
    return "demo stage '" + name + "': " + what;
  };
  try {
    return fn();
  } catch (const UsageError& e) {
    throw UsageError(tag(e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e.what()));
  } catch (const DataError& e) {
    throw DataError(tag(e.what()));
  } catch (const ContractError& e) {
    throw ContractError(tag(e.what()));
  } catch (const std::exception& e) {
    throw std::runtime_error(tag(e.what()));
  }
}

nlohmann::json wer_json(const WerReport& report) {
  return {{"wer", report.wer},
          {"substitutions", report.substitutions},
          {"deletions", report.deletions},
          {"insertions", report.insertions},
          {"ref_tokens", report.ref_tokens}};
}

std::vector<std::string> asr_side(const std::vector<CorpusPair>& pairs) {
  std::vector<std::string> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.asr_text);
  return out;
}

std::vector<std::string> ref_side(const std::vector<CorpusPair>& pairs) {
  std::vector<std::string> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.ref_text);
  return out;
}

}  // namespace

DemoReport run_demo(const DemoOptions& options) {
  if (options.out_dir.empty()) throw UsageError("demo: output directory required");
  if (options.train_pairs < 1 || options.test_pairs < 1) {
    throw UsageError("demo: need at least one training and one test pair");
  }
  namespace fs = std::filesystem;
  const fs::path dir(options.out_dir);
  fs::create_directories(dir);
  auto in_dir = [&dir](const std::string& name) {
    return (dir / name).string();
  };

  // Corpus: synthetic references with injected recognition errors.  The
  // profile leans on substitution-style noise, trailed by insertions and
  // deletions.
  ErrorProfile profile;
  profile.grammatical = 0.05;
  profile.similar_sound = 0.04;
  profile.entity = 0.02;
  profile.insertion = 0.02;
  profile.deletion = 0.02;
  auto [train_set, test_set] = demo_stage("inject", [&] {
    auto train_refs =
        generate_references(options.train_pairs, options.seed);
    auto test_refs =
        generate_references(options.test_pairs, options.seed + 1);
    auto train_set = inject_errors(train_refs, profile, options.seed + 10);
    auto test_set = inject_errors(test_refs, profile, options.seed + 11);
    save_corpus(in_dir("train.jsonl"), train_set, "jsonl");
    save_corpus(in_dir("test.jsonl"), test_set, "jsonl");
    return std::pair(std::move(train_set), std::move(test_set));
  });

  Vocabulary vocab = demo_stage("vocab", [&] {
    std::vector<std::string> lines = ref_side(train_set);
    for (std::string& s : asr_side(train_set)) lines.push_back(std::move(s));
    Vocabulary v = build_vocab(lines, 2000, 1);
    v.save(in_dir("vocab.txt"));
    return v;
  });

  struct Variant {
    std::string name;        // bench/report system name
    std::string decoder;     // "lstm", "transformer", or "baseline"
    std::string checkpoint;
  };
  const std::vector<Variant> variants = {
      {"constrained_lstm", "lstm", in_dir("lstm.ckpt")},
      {"constrained_trans", "transformer", in_dir("transformer.ckpt")},
      {"baseline", "baseline", in_dir("baseline.ckpt")},
  };
  for (size_t i = 0; i < variants.size(); ++i) {
    const Variant& variant = variants[i];
    demo_stage("train " + variant.name, [&] {
      ModelConfig mcfg = options.model;
      TrainConfig tcfg = options.train;
      tcfg.seed = options.seed + 20 + i;
      tcfg.checkpoint_path = variant.checkpoint;
      tcfg.log_path = in_dir(variant.name + "_train_log.jsonl");
      if (variant.decoder == "baseline") {
        train_baseline(train_set, vocab, mcfg, tcfg);
      } else {
        mcfg.decoder_kind = variant.decoder;
        train_edit(train_set, vocab, mcfg, tcfg);
      }
      return 0;
    });
  }

  // Score every system on the held-out pairs.
  const std::vector<std::string> test_asr = asr_side(test_set);
  const std::vector<std::string> test_ref = ref_side(test_set);
  EditModel<double> lstm = load_edit_model(variants[0].checkpoint, vocab);
  EditModel<double> trans = load_edit_model(variants[1].checkpoint, vocab);
  BaselineModel<double> baseline =
      load_baseline_model(variants[2].checkpoint, vocab);

  nlohmann::json report;
  report["seed"] = options.seed;
  report["corpus"] = {{"train_pairs", train_set.size()},
                      {"test_pairs", test_set.size()},
                      {"vocab_size", vocab.size()}};
  nlohmann::json steps_json;
  std::vector<std::string> trans_outputs;
  demo_stage("evaluate", [&] {
    report["wer"]["original"] = wer_json(wer(test_asr, test_ref));
    int64_t lstm_steps = 0, trans_steps = 0, base_steps = 0;
    std::vector<std::string> out_lstm, out_base;
    for (const std::string& text : test_asr) {
      CorrectionResult a = correct(text, lstm, vocab);
      out_lstm.push_back(a.output_text);
      lstm_steps += a.decoder_steps;
      CorrectionResult b = correct(text, trans, vocab);
      trans_outputs.push_back(b.output_text);
      trans_steps += b.decoder_steps;
      CorrectionResult c = baseline_correct(text, baseline, vocab);
      out_base.push_back(c.output_text);
      base_steps += c.decoder_steps;
    }
    report["wer"]["constrained_lstm"] = wer_json(wer(out_lstm, test_ref));
    report["wer"]["constrained_trans"] = wer_json(wer(trans_outputs, test_ref));
    report["wer"]["baseline"] = wer_json(wer(out_base, test_ref));
    steps_json = {{"constrained_lstm", lstm_steps},
                  {"constrained_trans", trans_steps},
                  {"baseline", base_steps}};
    report["decoder_steps"] = steps_json;
    return 0;
  });

  demo_stage("ratios", [&] {
    std::vector<std::pair<CorpusPair, std::string>> results;
    for (size_t i = 0; i < test_set.size(); ++i) {
      results.push_back({test_set[i], trans_outputs[i]});
    }
    CorrectionRatioReport ratios = correction_ratio_by_type(results);
    nlohmann::json by_type;
    for (int t = 0; t < kNumErrorTypes; ++t) {
      auto type = static_cast<ErrorType>(t);
      by_type[std::string(error_type_name(type))] = {
          {"total", ratios.total[static_cast<size_t>(t)]},
          {"corrected", ratios.corrected[static_cast<size_t>(t)]},
          {"ratio", ratios.ratio(type)}};
    }
    report["correction_ratios"] = {
        {"by_type", by_type},
        {"sentence_accuracy", ratios.sentence_accuracy()},
        {"included", ratios.included},
        {"excluded", ratios.excluded}};
    return 0;
  });

  nlohmann::json latency;
  demo_stage("bench", [&] {
    size_t n = std::min(test_asr.size(),
                        static_cast<size_t>(options.bench_utterances));
    std::vector<std::string> bench_corpus(test_asr.begin(),
                                          test_asr.begin() +
                                              static_cast<ptrdiff_t>(n));
    std::vector<BenchSystem> systems = {
        {"baseline",
         [&](const std::string& t) { return baseline_correct(t, baseline, vocab); }},
        {"constrained_lstm",
         [&](const std::string& t) { return correct(t, lstm, vocab); }},
        {"constrained_trans",
         [&](const std::string& t) { return correct(t, trans, vocab); }},
    };
    LatencyReport bench = bench_latency(systems, bench_corpus,
                                        options.bench_warmup,
                                        options.bench_reps);
    latency["utterances"] = n;
    latency["reference_system"] = bench.reference_system;
    for (const SystemTiming& t : bench.systems) {
      latency["systems"][t.name] = {{"median_wall_ms", t.median_wall_ms},
                                    {"mean_wall_ms", t.mean_wall_ms},
                                    {"p95_wall_ms", t.p95_wall_ms},
                                    {"median_model_ms", t.median_model_ms},
                                    {"decoder_steps", t.decoder_steps}};
      latency["speedup"][t.name] = bench.speedup.at(t.name);
    }
    return 0;
  });

  write_file(in_dir("demo_report.json"), report.dump(2) + "\n");
  write_file(in_dir("latency_report.json"), latency.dump(2) + "\n");
  log_info("demo: wrote ", in_dir("demo_report.json"));
  return DemoReport{std::move(report), std::move(latency)};
}

}  // namespace opcorrect
