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

// Command-line entry point: one binary, one subcommand per pipeline stage.
// Exit codes: 0 success, 1 usage error, 2 data/config error, 3 other failure.

#include <cstdint>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "opcorrect/alignment.hpp"
#include "opcorrect/cli.hpp"
#include "opcorrect/common.hpp"
#include "opcorrect/data.hpp"
#include "opcorrect/eval.hpp"
#include "opcorrect/infer.hpp"
#include "opcorrect/inject.hpp"
#include "opcorrect/model.hpp"
#include "opcorrect/train.hpp"
#include "opcorrect/vocab.hpp"

namespace opcorrect {
namespace {

std::vector<std::string> read_input_lines(const std::string& path) {
  if (path != "-") return read_lines(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(std::cin, line)) lines.push_back(line);
  return lines;
}

void write_output_lines(const std::string& path,
                        const std::vector<std::string>& lines) {
  std::string blob;
  for (const std::string& line : lines) {
    blob += line;
    blob += '\n';
  }
  if (path == "-") {
    std::cout << blob;
  } else {
    write_file(path, blob);
  }
}

RunManifest start_manifest(const std::string& subcommand, uint64_t seed) {
  RunManifest m;
  m.subcommand = subcommand;
  m.seed = seed;
  m.started_at = iso8601_utc_now();
  return m;
}

void finish_manifest(RunManifest& m, const std::string& next_to) {
  m.finished_at = iso8601_utc_now();
  write_manifest(m, next_to + ".manifest.json");
}

std::string tags_to_string(const std::vector<OperationTag>& tags) {
  std::string s;
  s.reserve(tags.size());
  for (OperationTag t : tags) s.push_back(tag_to_char(t));
  return s;
}

// ---------------------------------------------------------------------------
// build-vocab
// ---------------------------------------------------------------------------

struct BuildVocabOptions {
  std::vector<std::string> pair_files;
  std::vector<std::string> line_files;
  std::string out;
  int max_size = 2000;
  int min_freq = 1;
};

void cmd_build_vocab(const BuildVocabOptions& o) {
  if (o.pair_files.empty() && o.line_files.empty()) {
    throw UsageError("build-vocab: give at least one --pairs or --lines file");
  }
  std::vector<std::string> lines;
  for (const std::string& f : o.line_files) {
    for (std::string& s : read_lines(f)) lines.push_back(std::move(s));
  }
  for (const std::string& f : o.pair_files) {
    for (const CorpusPair& p : load_corpus(f, corpus_format_for_path(f))) {
      lines.push_back(p.asr_text);
      lines.push_back(p.ref_text);
    }
  }
  RunManifest m = start_manifest("build-vocab", 0);
  Vocabulary vocab = build_vocab(lines, o.max_size, o.min_freq);
  vocab.save(o.out);
  log_info("build-vocab: ", vocab.size(), " tokens -> ", o.out);
  m.config = {{"max_size", o.max_size}, {"min_freq", o.min_freq}};
  m.inputs = o.line_files;
  m.inputs.insert(m.inputs.end(), o.pair_files.begin(), o.pair_files.end());
  m.outputs = {o.out};
  finish_manifest(m, o.out);
}

// ---------------------------------------------------------------------------
// inject-errors
// ---------------------------------------------------------------------------

struct InjectOptions {
  std::string refs_file;
  int generate = 0;
  std::string out;
  uint64_t seed = 1;
  ErrorProfile profile{0.05, 0.04, 0.02, 0.02, 0.02};
  std::string confusion_file;
};

void cmd_inject(const InjectOptions& o) {
  if ((o.generate > 0) == !o.refs_file.empty()) {
    throw UsageError("inject-errors: give exactly one of --refs or --generate");
  }
  RunManifest m = start_manifest("inject-errors", o.seed);
  std::vector<std::string> refs;
  if (o.generate > 0) {
    refs = generate_references(o.generate, o.seed);
  } else {
    refs = read_lines(o.refs_file);
    m.inputs.push_back(o.refs_file);
  }
  ConfusionTable table;
  const ConfusionTable* table_ptr = nullptr;
  if (!o.confusion_file.empty()) {
    table = ConfusionTable::load(o.confusion_file);
    table_ptr = &table;
    m.inputs.push_back(o.confusion_file);
  }
  // The corruption stream is seeded apart from reference generation so the
  // two stages draw independently under one --seed.
  auto pairs = inject_errors(refs, o.profile, o.seed + 1, table_ptr);
  save_corpus(o.out, pairs, corpus_format_for_path(o.out));
  int changed = 0;
  for (const auto& p : pairs) changed += p.asr_text != p.ref_text;
  log_info("inject-errors: ", pairs.size(), " pairs (", changed,
           " corrupted) -> ", o.out);
  m.config = {{"generate", o.generate},
              {"rates",
               {{"grammatical", o.profile.grammatical},
                {"similar_sound", o.profile.similar_sound},
                {"entity", o.profile.entity},
                {"insertion", o.profile.insertion},
                {"delete", o.profile.deletion}}}};
  m.outputs = {o.out};
  finish_manifest(m, o.out);
}

// ---------------------------------------------------------------------------
// make-labels
// ---------------------------------------------------------------------------

struct MakeLabelsOptions {
  std::string asr_file;
  std::string ref_file;
  std::string pairs_file;
  std::string vocab_file;
  std::string out;
};

void cmd_make_labels(const MakeLabelsOptions& o) {
  const bool split_files = !o.asr_file.empty() || !o.ref_file.empty();
  if (split_files == !o.pairs_file.empty()) {
    throw UsageError("make-labels: give either --asr with --ref, or --pairs");
  }
  if (split_files && (o.asr_file.empty() || o.ref_file.empty())) {
    throw UsageError("make-labels: --asr and --ref go together");
  }
  RunManifest m = start_manifest("make-labels", 0);
  Vocabulary vocab = Vocabulary::load(o.vocab_file);
  std::vector<CorpusPair> pairs;
  if (split_files) {
    auto asr = read_lines(o.asr_file);
    auto ref = read_lines(o.ref_file);
    if (asr.size() != ref.size()) {
      throw DataError("make-labels: " + o.asr_file + " has " +
                      std::to_string(asr.size()) + " lines but " + o.ref_file +
                      " has " + std::to_string(ref.size()));
    }
    for (size_t i = 0; i < asr.size(); ++i) {
      pairs.push_back({asr[i], ref[i], std::nullopt});
    }
    m.inputs = {o.asr_file, o.ref_file, o.vocab_file};
  } else {
    pairs = load_corpus(o.pairs_file, corpus_format_for_path(o.pairs_file));
    m.inputs = {o.pairs_file, o.vocab_file};
  }
  std::string blob;
  for (const CorpusPair& p : pairs) {
    LabeledExample ex =
        make_labels(tokenize(p.asr_text, vocab), tokenize(p.ref_text, vocab));
    ex.validate();
    if (apply_edits(ex).ids != ex.t.ids) {
      throw ContractError("make-labels: labels do not reconstruct: " +
                          p.ref_text);
    }
    blob += labeled_to_json(ex).dump();
    blob += '\n';
  }
  write_file(o.out, blob);
  log_info("make-labels: ", pairs.size(), " examples -> ", o.out);
  m.outputs = {o.out};
  finish_manifest(m, o.out);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string pairs_file;
  std::string vocab_file;
  std::string out;
  std::string config_file;
  std::string decoder = "lstm";  // lstm | transformer | baseline
  ModelConfig model;
  TrainConfig train;
};

// key=value config support for train.  A key is applied only when its flag
// was not given on the command line, so flags always win.  (CLI11's own
// set_config only fires on the top-level app, not on subcommands.)
void apply_train_config(const CLI::App& cmd, TrainOptions& o) {
  if (o.config_file.empty()) return;
  using Setter = std::function<void(const std::string&)>;
  auto to_int = [](int& slot) {
    return [&slot](const std::string& v) { slot = std::stoi(v); };
  };
  auto to_double = [](double& slot) {
    return [&slot](const std::string& v) { slot = std::stod(v); };
  };
  const std::map<std::string, Setter> setters = {
      {"decoder", [&o](const std::string& v) { o.decoder = v; }},
      {"epochs", to_int(o.train.epochs)},
      {"batch-size", to_int(o.train.batch_size)},
      {"lr", to_double(o.train.learning_rate)},
      {"optimizer", [&o](const std::string& v) { o.train.optimizer = v; }},
      {"weight-decay", to_double(o.train.weight_decay)},
      {"alpha", to_double(o.train.alpha)},
      {"seed",
       [&o](const std::string& v) { o.train.seed = std::stoull(v); }},
      {"clip-norm", to_double(o.train.clip_norm)},
      {"val-fraction", to_double(o.train.val_fraction)},
      {"hidden-dim", to_int(o.model.hidden_dim)},
      {"encoder-layers", to_int(o.model.encoder_layers)},
      {"heads", to_int(o.model.encoder_heads)},
      {"ffn-dim", to_int(o.model.feedforward_dim)},
      {"max-positions", to_int(o.model.max_positions)},
      {"decoder-layers", to_int(o.model.decoder_layers)},
      {"max-decode-len", to_int(o.model.max_decode_len)},
      {"dropout", to_double(o.model.dropout)},
  };
  int line_no = 0;
  for (const std::string& raw : read_lines(o.config_file)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find_first_of("#;"));
    size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    size_t last = line.find_last_not_of(" \t");
    line = line.substr(first, last - first + 1);
    size_t eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(o.config_file + ":" + std::to_string(line_no) +
                        ": expected key=value, got '" + line + "'");
    }
    std::string key = line.substr(0, line.find_last_not_of(" \t", eq - 1) + 1);
    size_t value_at = line.find_first_not_of(" \t", eq + 1);
    std::string value =
        value_at == std::string::npos ? "" : line.substr(value_at);
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError(o.config_file + ":" + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
    if (cmd.count("--" + key) > 0) continue;  // flag wins
    try {
      it->second(value);
    } catch (const std::exception&) {
      throw ConfigError(o.config_file + ":" + std::to_string(line_no) +
                        ": bad value '" + value + "' for " + key);
    }
  }
}

void cmd_train(const TrainOptions& o) {
  if (o.decoder != "lstm" && o.decoder != "transformer" &&
      o.decoder != "baseline") {
    throw UsageError("train: --decoder must be lstm, transformer, or baseline");
  }
  RunManifest m = start_manifest("train", o.train.seed);
  Vocabulary vocab = Vocabulary::load(o.vocab_file);
  auto pairs = load_corpus(o.pairs_file, corpus_format_for_path(o.pairs_file));
  ModelConfig mcfg = o.model;
  TrainConfig tcfg = o.train;
  tcfg.checkpoint_path = o.out;
  TrainResult result;
  if (o.decoder == "baseline") {
    result = train_baseline(pairs, vocab, mcfg, tcfg);
  } else {
    mcfg.decoder_kind = o.decoder;
    result = train_edit(pairs, vocab, mcfg, tcfg);
  }
  if (result.best_epoch > 0) {
    log_info("train: best epoch ", result.best_epoch, " (val loss ",
             result.best_val, ") -> ", o.out);
  } else {
    log_info("train: final epoch kept -> ", o.out);
  }
  mcfg.vocab_size = vocab.size();
  m.config = {{"decoder", o.decoder},
              {"model", mcfg.to_json()},
              {"train", tcfg.to_json()}};
  m.inputs = {o.pairs_file, o.vocab_file};
  m.outputs = {o.out};
  if (!tcfg.log_path.empty()) m.outputs.push_back(tcfg.log_path);
  finish_manifest(m, o.out);
}

// ---------------------------------------------------------------------------
// correct
// ---------------------------------------------------------------------------

struct CorrectOptions {
  std::string model_file;
  std::string vocab_file;
  std::string input = "-";
  std::string out = "-";
  bool emit_tags = false;
  bool sequential = false;
};

void cmd_correct(const CorrectOptions& o) {
  Vocabulary vocab = Vocabulary::load(o.vocab_file);
  CheckpointInfo info = read_checkpoint_info(o.model_file);
  if (info.kind == "baseline" && o.sequential) {
    throw UsageError("correct: --sequential needs an edit-model checkpoint");
  }
  std::vector<std::string> lines = read_input_lines(o.input);
  std::vector<CorrectionResult> results;
  results.reserve(lines.size());
  if (info.kind == "baseline") {
    BaselineModel<double> model = load_baseline_model(o.model_file, vocab);
    for (const std::string& line : lines) {
      results.push_back(baseline_correct(line, model, vocab));
    }
  } else {
    EditModel<double> model = load_edit_model(o.model_file, vocab);
    InferOptions opts;
    opts.sequential_spans = o.sequential;
    for (const std::string& line : lines) {
      results.push_back(correct(line, model, vocab, opts));
    }
  }
  std::vector<std::string> out_lines;
  out_lines.reserve(results.size());
  for (size_t i = 0; i < results.size(); ++i) {
    const CorrectionResult& r = results[i];
    if (!o.emit_tags) {
      out_lines.push_back(r.output_text);
      continue;
    }
    nlohmann::json spans = nlohmann::json::object();
    for (const auto& [pos, pieces] : r.spans) {
      spans[std::to_string(pos)] = pieces;
    }
    nlohmann::json record = {{"input", lines[i]},
                             {"output", r.output_text},
                             {"tags", tags_to_string(r.tags)},
                             {"spans", spans},
                             {"decoder_steps", r.decoder_steps},
                             {"wall_time", r.wall_time},
                             {"tokens_in", r.tokens_in},
                             {"tokens_out", r.tokens_out}};
    out_lines.push_back(record.dump());
  }
  write_output_lines(o.out, out_lines);
  if (o.out != "-") {
    RunManifest m = start_manifest("correct", 0);
    m.config = {{"model", o.model_file},
                {"emit_tags", o.emit_tags},
                {"sequential", o.sequential}};
    m.inputs = {o.model_file, o.vocab_file};
    if (o.input != "-") m.inputs.push_back(o.input);
    m.outputs = {o.out};
    finish_manifest(m, o.out);
  }
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
  std::string pairs_file;
  std::string model_file;
  std::string vocab_file;
  std::string report;
  int limit = 0;
};

void print_wer_row(std::ostream& os, const std::string& name,
                   const WerReport& r) {
  os << std::left << std::setw(12) << name << std::right << std::fixed
     << std::setprecision(4) << std::setw(8) << r.wer << std::setw(7)
     << r.substitutions << std::setw(7) << r.deletions << std::setw(7)
     << r.insertions << std::setw(8) << r.ref_tokens << "\n";
}

void cmd_evaluate(const EvaluateOptions& o) {
  RunManifest m = start_manifest("evaluate", 0);
  Vocabulary vocab = Vocabulary::load(o.vocab_file);
  auto pairs = load_corpus(o.pairs_file, corpus_format_for_path(o.pairs_file));
  if (o.limit > 0 && static_cast<int>(pairs.size()) > o.limit) {
    pairs.resize(static_cast<size_t>(o.limit));
  }
  if (pairs.empty()) throw DataError("evaluate: empty corpus " + o.pairs_file);

  std::vector<std::string> asr, ref, hyp;
  for (const auto& p : pairs) {
    asr.push_back(p.asr_text);
    ref.push_back(p.ref_text);
  }
  int64_t steps = 0;
  CheckpointInfo info = read_checkpoint_info(o.model_file);
  if (info.kind == "baseline") {
    BaselineModel<double> model = load_baseline_model(o.model_file, vocab);
    for (const std::string& line : asr) {
      CorrectionResult r = baseline_correct(line, model, vocab);
      hyp.push_back(r.output_text);
      steps += r.decoder_steps;
    }
  } else {
    EditModel<double> model = load_edit_model(o.model_file, vocab);
    for (const std::string& line : asr) {
      CorrectionResult r = correct(line, model, vocab);
      hyp.push_back(r.output_text);
      steps += r.decoder_steps;
    }
  }
  WerReport original = wer(asr, ref);
  WerReport corrected = wer(hyp, ref);

  std::ostringstream table;
  table << std::left << std::setw(12) << "system" << std::right << std::setw(8)
        << "WER" << std::setw(7) << "S" << std::setw(7) << "D" << std::setw(7)
        << "I" << std::setw(8) << "ref" << "\n";
  print_wer_row(table, "original", original);
  print_wer_row(table, "corrected", corrected);

  nlohmann::json report = {{"pairs", pairs.size()},
                           {"original", {{"wer", original.wer},
                                         {"substitutions", original.substitutions},
                                         {"deletions", original.deletions},
                                         {"insertions", original.insertions},
                                         {"ref_tokens", original.ref_tokens}}},
                           {"corrected", {{"wer", corrected.wer},
                                          {"substitutions", corrected.substitutions},
                                          {"deletions", corrected.deletions},
                                          {"insertions", corrected.insertions},
                                          {"ref_tokens", corrected.ref_tokens}}},
                           {"decoder_steps", steps}};

  bool any_types = false;
  for (const auto& p : pairs) any_types = any_types || p.error_types.has_value();
  if (any_types) {
    std::vector<std::pair<CorpusPair, std::string>> results;
    for (size_t i = 0; i < pairs.size(); ++i) {
      results.push_back({pairs[i], hyp[i]});
    }
    CorrectionRatioReport ratios = correction_ratio_by_type(results);
    table << "\ncorrection ratio by error type\n";
    nlohmann::json by_type;
    for (int t = 0; t < kNumErrorTypes; ++t) {
      auto type = static_cast<ErrorType>(t);
      auto idx = static_cast<size_t>(t);
      table << std::left << std::setw(14) << error_type_name(type)
            << std::right << std::fixed << std::setprecision(4) << std::setw(8)
            << ratios.ratio(type) << "  (" << ratios.corrected[idx] << "/"
            << ratios.total[idx] << ")\n";
      by_type[std::string(error_type_name(type))] = {
          {"total", ratios.total[idx]},
          {"corrected", ratios.corrected[idx]},
          {"ratio", ratios.ratio(type)}};
    }
    report["correction_ratios"] = {
        {"by_type", by_type},
        {"sentence_accuracy", ratios.sentence_accuracy()},
        {"included", ratios.included},
        {"excluded", ratios.excluded}};
  }

  std::cout << table.str();
  write_file(o.report, report.dump(2) + "\n");
  m.config = {{"model", o.model_file}, {"limit", o.limit}};
  m.inputs = {o.pairs_file, o.model_file, o.vocab_file};
  m.outputs = {o.report};
  finish_manifest(m, o.report);
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchCliOptions {
  std::string corpus_file;
  std::string vocab_file;
  std::string lstm_file;
  std::string trans_file;
  std::string baseline_file;
  std::string systems = "constrained_lstm,constrained_trans,baseline";
  int warmup = 1;
  int reps = 3;
  int limit = 0;
  std::string report;
};

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void cmd_bench(const BenchCliOptions& o) {
  RunManifest m = start_manifest("bench", 0);
  Vocabulary vocab = Vocabulary::load(o.vocab_file);
  auto pairs =
      load_corpus(o.corpus_file, corpus_format_for_path(o.corpus_file));
  std::vector<std::string> corpus;
  for (const auto& p : pairs) corpus.push_back(p.asr_text);
  if (o.limit > 0 && static_cast<int>(corpus.size()) > o.limit) {
    corpus.resize(static_cast<size_t>(o.limit));
  }

  // Loaded lazily so only requested checkpoints are required.
  std::optional<EditModel<double>> lstm, trans;
  std::optional<BaselineModel<double>> baseline;
  std::vector<BenchSystem> systems;
  for (const std::string& name : split_csv(o.systems)) {
    if (name == "constrained_lstm") {
      if (o.lstm_file.empty()) {
        throw UsageError("bench: system constrained_lstm needs --lstm");
      }
      lstm = load_edit_model(o.lstm_file, vocab);
      if (lstm->config().decoder_kind != "lstm") {
        throw UsageError("bench: --lstm checkpoint has decoder kind '" +
                         lstm->config().decoder_kind + "'");
      }
      systems.push_back({name, [&model = *lstm, &vocab](const std::string& t) {
                           return correct(t, model, vocab);
                         }});
      m.inputs.push_back(o.lstm_file);
    } else if (name == "constrained_trans") {
      if (o.trans_file.empty()) {
        throw UsageError("bench: system constrained_trans needs --transformer");
      }
      trans = load_edit_model(o.trans_file, vocab);
      if (trans->config().decoder_kind != "transformer") {
        throw UsageError("bench: --transformer checkpoint has decoder kind '" +
                         trans->config().decoder_kind + "'");
      }
      systems.push_back({name, [&model = *trans, &vocab](const std::string& t) {
                           return correct(t, model, vocab);
                         }});
      m.inputs.push_back(o.trans_file);
    } else if (name == "baseline") {
      if (o.baseline_file.empty()) {
        throw UsageError("bench: system baseline needs --baseline");
      }
      baseline = load_baseline_model(o.baseline_file, vocab);
      systems.push_back(
          {name, [&model = *baseline, &vocab](const std::string& t) {
             return baseline_correct(t, model, vocab);
           }});
      m.inputs.push_back(o.baseline_file);
    } else {
      throw UsageError("bench: unknown system '" + name + "'");
    }
  }

  LatencyReport bench = bench_latency(systems, corpus, o.warmup, o.reps);

  std::cout << std::left << std::setw(18) << "system" << std::right
            << std::setw(12) << "median ms" << std::setw(12) << "mean ms"
            << std::setw(12) << "p95 ms" << std::setw(12) << "steps"
            << std::setw(10) << "speedup" << "\n";
  nlohmann::json report = {{"utterances", corpus.size()},
                           {"warmup", o.warmup},
                           {"reps", o.reps},
                           {"reference_system", bench.reference_system}};
  for (const SystemTiming& t : bench.systems) {
    std::cout << std::left << std::setw(18) << t.name << std::right
              << std::fixed << std::setprecision(3) << std::setw(12)
              << t.median_wall_ms << std::setw(12) << t.mean_wall_ms
              << std::setw(12) << t.p95_wall_ms << std::setw(12)
              << t.decoder_steps << std::setprecision(2) << std::setw(10)
              << bench.speedup.at(t.name) << "\n";
    report["systems"][t.name] = {{"median_wall_ms", t.median_wall_ms},
                                 {"mean_wall_ms", t.mean_wall_ms},
                                 {"p95_wall_ms", t.p95_wall_ms},
                                 {"median_model_ms", t.median_model_ms},
                                 {"decoder_steps", t.decoder_steps}};
    report["speedup"][t.name] = bench.speedup.at(t.name);
  }
  write_file(o.report, report.dump(2) + "\n");
  m.config = {{"systems", o.systems},
              {"warmup", o.warmup},
              {"reps", o.reps},
              {"limit", o.limit}};
  m.inputs.push_back(o.corpus_file);
  m.inputs.push_back(o.vocab_file);
  m.outputs = {o.report};
  finish_manifest(m, o.report);
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

void cmd_demo(const DemoOptions& o) {
  RunManifest m = start_manifest("demo", o.seed);
  DemoReport result = run_demo(o);

  const nlohmann::json& wer = result.report.at("wer");
  std::cout << std::left << std::setw(18) << "system" << std::right
            << std::setw(9) << "WER" << std::setw(12) << "steps"
            << std::setw(14) << "median ms" << std::setw(10) << "speedup"
            << "\n";
  for (const std::string& name :
       {std::string("original"), std::string("baseline"),
        std::string("constrained_lstm"), std::string("constrained_trans")}) {
    std::cout << std::left << std::setw(18) << name << std::right << std::fixed
              << std::setprecision(4) << std::setw(9)
              << wer.at(name).at("wer").get<double>();
    if (name == "original") {
      std::cout << "\n";
      continue;
    }
    std::cout << std::setw(12)
              << result.report.at("decoder_steps").at(name).get<int64_t>()
              << std::setprecision(3) << std::setw(14)
              << result.latency.at("systems").at(name).at("median_wall_ms")
                     .get<double>()
              << std::setprecision(2) << std::setw(10)
              << result.latency.at("speedup").at(name).get<double>() << "\n";
  }
  std::cout << "sentence accuracy "
            << result.report.at("correction_ratios").at("sentence_accuracy")
                   .get<double>()
            << "\n";

  m.config = {{"train_pairs", o.train_pairs},
              {"test_pairs", o.test_pairs},
              {"bench_utterances", o.bench_utterances},
              {"bench_warmup", o.bench_warmup},
              {"bench_reps", o.bench_reps},
              {"model", o.model.to_json()},
              {"train", o.train.to_json()}};
  m.outputs = {o.out_dir};
  m.finished_at = iso8601_utc_now();
  write_manifest(m, (std::filesystem::path(o.out_dir) / "manifest.json").string());
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

void add_model_flags(CLI::App* cmd, ModelConfig& m) {
  cmd->add_option("--hidden-dim", m.hidden_dim, "Model width");
  cmd->add_option("--encoder-layers", m.encoder_layers, "Encoder depth");
  cmd->add_option("--heads", m.encoder_heads, "Attention heads");
  cmd->add_option("--ffn-dim", m.feedforward_dim, "Feed-forward width");
  cmd->add_option("--max-positions", m.max_positions, "Position table size");
  cmd->add_option("--decoder-layers", m.decoder_layers, "Decoder depth");
  cmd->add_option("--max-decode-len", m.max_decode_len,
                  "Span generation budget");
  cmd->add_option("--dropout", m.dropout, "Dropout rate");
}

void add_train_flags(CLI::App* cmd, TrainConfig& t) {
  cmd->add_option("--epochs", t.epochs, "Training epochs");
  cmd->add_option("--batch-size", t.batch_size, "Examples per batch");
  cmd->add_option("--lr", t.learning_rate, "Learning rate");
  cmd->add_option("--optimizer", t.optimizer, "adamw or adam");
  cmd->add_option("--weight-decay", t.weight_decay, "Decoupled weight decay");
  cmd->add_option("--alpha", t.alpha, "Operation-loss weight");
  cmd->add_option("--seed", t.seed, "Random seed");
  cmd->add_option("--clip-norm", t.clip_norm,
                  "Global gradient-norm cap (0 disables)");
  cmd->add_option("--val-fraction", t.val_fraction,
                  "Held-out fraction for best-checkpoint selection");
}

int run(int argc, char** argv) {
  CLI::App app{"ASR error correction: tag-and-span editing models"};
  app.require_subcommand(1);

  BuildVocabOptions vocab_opts;
  CLI::App* vocab_cmd =
      app.add_subcommand("build-vocab", "Build a subword vocabulary");
  vocab_cmd->add_option("--pairs", vocab_opts.pair_files,
                        "Paired corpus file(s) (both sides used)");
  vocab_cmd->add_option("--lines", vocab_opts.line_files,
                        "Plain text file(s), one utterance per line");
  vocab_cmd->add_option("--out", vocab_opts.out, "Vocabulary output path")
      ->required();
  vocab_cmd->add_option("--max-size", vocab_opts.max_size, "Vocabulary cap");
  vocab_cmd->add_option("--min-freq", vocab_opts.min_freq,
                        "Minimum word frequency");

  InjectOptions inject_opts;
  CLI::App* inject_cmd = app.add_subcommand(
      "inject-errors", "Corrupt reference text into (asr, ref) pairs");
  inject_cmd->add_option("--refs", inject_opts.refs_file,
                         "Reference sentences, one per line");
  inject_cmd->add_option("--generate", inject_opts.generate,
                         "Generate N synthetic references instead");
  inject_cmd->add_option("--out", inject_opts.out, "Corpus output (.jsonl/.tsv)")
      ->required();
  inject_cmd->add_option("--seed", inject_opts.seed, "Random seed");
  inject_cmd->add_option("--rate-grammatical", inject_opts.profile.grammatical,
                         "Grammatical substitution rate");
  inject_cmd->add_option("--rate-similar-sound",
                         inject_opts.profile.similar_sound,
                         "Similar-sound substitution rate");
  inject_cmd->add_option("--rate-entity", inject_opts.profile.entity,
                         "Entity mangling rate");
  inject_cmd->add_option("--rate-insertion", inject_opts.profile.insertion,
                         "Spurious word insertion rate");
  inject_cmd->add_option("--rate-delete", inject_opts.profile.deletion,
                         "Word deletion rate");
  inject_cmd->add_option("--confusion", inject_opts.confusion_file,
                         "Word confusion table file");

  MakeLabelsOptions labels_opts;
  CLI::App* labels_cmd = app.add_subcommand(
      "make-labels", "Derive KEEP/DELETE/CHANGE training labels");
  labels_cmd->add_option("--asr", labels_opts.asr_file,
                         "ASR-side lines (with --ref)");
  labels_cmd->add_option("--ref", labels_opts.ref_file,
                         "Reference-side lines (with --asr)");
  labels_cmd->add_option("--pairs", labels_opts.pairs_file,
                         "Paired corpus file");
  labels_cmd->add_option("--vocab", labels_opts.vocab_file, "Vocabulary path")
      ->required();
  labels_cmd->add_option("--out", labels_opts.out, "Labeled records output")
      ->required();

  TrainOptions train_opts;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a correction model");
  train_cmd->add_option("--config", train_opts.config_file,
                        "Config file (key=value); flags override it");
  train_cmd->add_option("--pairs", train_opts.pairs_file, "Training corpus")
      ->required();
  train_cmd->add_option("--vocab", train_opts.vocab_file, "Vocabulary path")
      ->required();
  train_cmd->add_option("--out", train_opts.out, "Checkpoint output path")
      ->required();
  train_cmd->add_option("--decoder", train_opts.decoder,
                        "lstm, transformer, or baseline");
  train_cmd->add_option("--log", train_opts.train.log_path,
                        "Per-epoch record file");
  add_model_flags(train_cmd, train_opts.model);
  add_train_flags(train_cmd, train_opts.train);

  CorrectOptions correct_opts;
  CLI::App* correct_cmd =
      app.add_subcommand("correct", "Correct utterances with a trained model");
  correct_cmd->add_option("--model", correct_opts.model_file, "Checkpoint path")
      ->required();
  correct_cmd->add_option("--vocab", correct_opts.vocab_file, "Vocabulary path")
      ->required();
  correct_cmd->add_option("--input", correct_opts.input,
                          "Input lines file, or - for stdin");
  correct_cmd->add_option("--out", correct_opts.out,
                          "Output file, or - for stdout");
  correct_cmd->add_flag("--emit-tags", correct_opts.emit_tags,
                        "Emit one record per line with tags, spans, steps, "
                        "and wall time");
  correct_cmd->add_flag("--sequential", correct_opts.sequential,
                        "Decode spans one at a time instead of in lockstep");

  EvaluateOptions eval_opts;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Score a model against references");
  eval_cmd->add_option("--pairs", eval_opts.pairs_file, "Paired test corpus")
      ->required();
  eval_cmd->add_option("--model", eval_opts.model_file, "Checkpoint path")
      ->required();
  eval_cmd->add_option("--vocab", eval_opts.vocab_file, "Vocabulary path")
      ->required();
  eval_cmd->add_option("--report", eval_opts.report, "Report output path")
      ->required();
  eval_cmd->add_option("--limit", eval_opts.limit,
                       "Evaluate only the first N pairs (0 = all)");

  BenchCliOptions bench_opts;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Measure correction latency");
  bench_cmd->add_option("--corpus", bench_opts.corpus_file,
                        "Paired corpus (ASR side is benched)")
      ->required();
  bench_cmd->add_option("--vocab", bench_opts.vocab_file, "Vocabulary path")
      ->required();
  bench_cmd->add_option("--lstm", bench_opts.lstm_file,
                        "Edit checkpoint with the lstm decoder");
  bench_cmd->add_option("--transformer", bench_opts.trans_file,
                        "Edit checkpoint with the transformer decoder");
  bench_cmd->add_option("--baseline", bench_opts.baseline_file,
                        "Baseline seq2seq checkpoint");
  bench_cmd->add_option("--systems", bench_opts.systems,
                        "Comma list: constrained_lstm,constrained_trans,"
                        "baseline");
  bench_cmd->add_option("--warmup", bench_opts.warmup, "Unrecorded passes");
  bench_cmd->add_option("--reps", bench_opts.reps, "Timed repetitions");
  bench_cmd->add_option("--limit", bench_opts.limit,
                        "Bench only the first N utterances (0 = all)");
  bench_cmd->add_option("--report", bench_opts.report, "Report output path")
      ->required();

  DemoOptions demo_opts;
  demo_opts.train.epochs = 10;
  demo_opts.train.learning_rate = 1e-3;
  CLI::App* demo_cmd = app.add_subcommand(
      "demo", "End-to-end pipeline on a generated corpus");
  demo_cmd->add_option("--out", demo_opts.out_dir, "Output directory")
      ->required();
  demo_cmd->add_option("--seed", demo_opts.seed, "Random seed");
  demo_cmd->add_option("--train-pairs", demo_opts.train_pairs,
                       "Training corpus size");
  demo_cmd->add_option("--test-pairs", demo_opts.test_pairs,
                       "Held-out corpus size");
  demo_cmd->add_option("--bench-utterances", demo_opts.bench_utterances,
                       "Utterances in the latency pass");
  demo_cmd->add_option("--reps", demo_opts.bench_reps, "Bench repetitions");
  demo_cmd->add_option("--warmup", demo_opts.bench_warmup, "Bench warmup");
  demo_cmd->add_option("--epochs", demo_opts.train.epochs, "Training epochs");
  demo_cmd->add_option("--hidden-dim", demo_opts.model.hidden_dim,
                       "Model width");

  vocab_cmd->callback([&] { cmd_build_vocab(vocab_opts); });
  inject_cmd->callback([&] { cmd_inject(inject_opts); });
  labels_cmd->callback([&] { cmd_make_labels(labels_opts); });
  train_cmd->callback([&] {
    apply_train_config(*train_cmd, train_opts);
    cmd_train(train_opts);
  });
  correct_cmd->callback([&] { cmd_correct(correct_opts); });
  eval_cmd->callback([&] { cmd_evaluate(eval_opts); });
  bench_cmd->callback([&] { cmd_bench(bench_opts); });
  demo_cmd->callback([&] { cmd_demo(demo_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace
}  // namespace opcorrect

int main(int argc, char** argv) { return opcorrect::run(argc, argv); }
