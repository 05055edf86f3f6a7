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

#include "opcorrect/data.hpp"

#include <array>
#include <sstream>

#include "json.hpp"

namespace opcorrect {

namespace {

constexpr std::array<std::string_view, kNumErrorTypes> kTypeNames = {
    "grammatical", "similar_sound", "entity", "insertion", "delete"};

std::string location(const std::string& path, size_t line) {
  return path + ":" + std::to_string(line);
}

std::set<ErrorType> parse_type_list(const std::string& joined,
                                    const std::string& where) {
  std::set<ErrorType> out;
  std::istringstream ss(joined);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto t = error_type_from_name(item);
    if (!t) throw DataError(where + ": unknown error type '" + item + "'");
    out.insert(*t);
  }
  return out;
}

CorpusPair pair_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw DataError(where + ": record is not an object");
  CorpusPair p;
  if (!j.contains("asr") || !j.at("asr").is_string()) {
    throw DataError(where + ": missing string field 'asr'");
  }
  if (!j.contains("ref") || !j.at("ref").is_string()) {
    throw DataError(where + ": missing string field 'ref'");
  }
  p.asr_text = j.at("asr").get<std::string>();
  p.ref_text = j.at("ref").get<std::string>();
  if (p.ref_text.empty()) throw DataError(where + ": empty 'ref'");
  if (j.contains("error_types")) {
    const auto& arr = j.at("error_types");
    if (!arr.is_array()) throw DataError(where + ": 'error_types' must be an array");
    std::set<ErrorType> types;
    for (const auto& e : arr) {
      if (!e.is_string()) throw DataError(where + ": 'error_types' entries must be strings");
      auto t = error_type_from_name(e.get<std::string>());
      if (!t) {
        throw DataError(where + ": unknown error type '" + e.get<std::string>() + "'");
      }
      types.insert(*t);
    }
    p.error_types = std::move(types);
  }
  return p;
}

}  // namespace

std::string_view error_type_name(ErrorType t) {
  return kTypeNames[static_cast<size_t>(t)];
}

std::optional<ErrorType> error_type_from_name(std::string_view name) {
  for (size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<ErrorType>(i);
  }
  return std::nullopt;
}

std::vector<CorpusPair> load_corpus(const std::string& path,
                                    const std::string& format) {
  if (format != "jsonl" && format != "tsv") {
    throw UsageError("unknown corpus format '" + format + "' (want jsonl or tsv)");
  }
  std::vector<std::string> lines = read_lines(path);
  std::vector<CorpusPair> out;
  out.reserve(lines.size());
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    const std::string where = location(path, i + 1);
    if (format == "jsonl") {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": bad json: " + e.what());
      }
      out.push_back(pair_from_json(j, where));
    } else {
      size_t tab1 = line.find('\t');
      if (tab1 == std::string::npos) {
        throw DataError(where + ": expected asr<TAB>ref");
      }
      size_t tab2 = line.find('\t', tab1 + 1);
      CorpusPair p;
      p.asr_text = line.substr(0, tab1);
      if (tab2 == std::string::npos) {
        p.ref_text = line.substr(tab1 + 1);
      } else {
        p.ref_text = line.substr(tab1 + 1, tab2 - tab1 - 1);
        p.error_types = parse_type_list(line.substr(tab2 + 1), where);
      }
      if (p.ref_text.empty()) throw DataError(where + ": empty 'ref'");
      out.push_back(std::move(p));
    }
  }
  if (out.empty()) log_warn("corpus ", path, " contains no records");
  return out;
}

std::string corpus_format_for_path(const std::string& path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".jsonl") || ends_with(".json")) return "jsonl";
  if (ends_with(".tsv") || ends_with(".txt")) return "tsv";
  throw UsageError("cannot infer corpus format from path '" + path +
                   "' (use .jsonl/.json or .tsv/.txt, or pass --format)");
}

void save_corpus(const std::string& path, const std::vector<CorpusPair>& pairs,
                 const std::string& format) {
  if (format != "jsonl" && format != "tsv") {
    throw UsageError("unknown corpus format '" + format + "' (want jsonl or tsv)");
  }
  std::string out;
  for (const auto& p : pairs) {
    if (format == "jsonl") {
      nlohmann::json j = {{"asr", p.asr_text}, {"ref", p.ref_text}};
      if (p.error_types) {
        nlohmann::json types = nlohmann::json::array();
        for (ErrorType t : *p.error_types) types.push_back(error_type_name(t));
        j["error_types"] = types;
      }
      out += j.dump();
    } else {
      out += p.asr_text;
      out += '\t';
      out += p.ref_text;
      if (p.error_types) {
        out += '\t';
        bool first = true;
        for (ErrorType t : *p.error_types) {
          if (!first) out += ',';
          out += error_type_name(t);
          first = false;
        }
      }
    }
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace opcorrect
