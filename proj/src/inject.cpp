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

#include "opcorrect/inject.hpp"

#include <array>
#include <cstddef>

#include "opcorrect/common.hpp"

namespace opcorrect {

double ErrorProfile::rate_of(ErrorType t) const {
  switch (t) {
    case ErrorType::kGrammatical: return grammatical;
    case ErrorType::kSimilarSound: return similar_sound;
    case ErrorType::kEntity: return entity;
    case ErrorType::kInsertion: return insertion;
    case ErrorType::kDelete: return deletion;
  }
  throw ContractError("unknown error type");
}

double ErrorProfile::total() const {
  return grammatical + similar_sound + entity + insertion + deletion;
}

void ErrorProfile::validate() const {
  for (int i = 0; i < kNumErrorTypes; ++i) {
    double r = rate_of(static_cast<ErrorType>(i));
    if (r < 0.0 || r > 1.0) {
      throw ConfigError(std::string("rate for ") +
                        std::string(error_type_name(static_cast<ErrorType>(i))) +
                        " must be in [0,1]");
    }
  }
  if (total() > 1.0) throw ConfigError("error rates must sum to at most 1");
}

const std::vector<std::string>* ConfusionTable::find(const std::string& word) const {
  auto it = entries.find(word);
  return it == entries.end() ? nullptr : &it->second;
}

ConfusionTable ConfusionTable::builtin() {
  ConfusionTable t;
  t.entries = {
      {"flight", {"fright", "blight"}},
      {"flights", {"frights", "fights"}},
      {"fare", {"fair", "far"}},
      {"fares", {"fairs", "phares"}},
      {"airfare", {"air fair", "heir fare"}},
      {"to", {"too", "two"}},
      {"for", {"four", "fore"}},
      {"there", {"their"}},
      {"seat", {"seed", "suite"}},
      {"seats", {"suites", "seeds"}},
      {"week", {"weak"}},
      {"morning", {"mourning"}},
      {"the", {"thee", "de"}},
      {"in", {"inn"}},
      {"me", {"mi"}},
      {"boston", {"bostin", "bosten"}},
      {"denver", {"denvur", "denvor"}},
      {"atlanta", {"atlanna", "atlenta"}},
      {"dallas", {"dalles", "dollis"}},
      {"seattle", {"seatle", "cattle"}},
      {"chicago", {"chicaco", "shicago"}},
      {"phoenix", {"fenix", "phenix"}},
      {"portland", {"portlend"}},
      {"houston", {"huston", "hueston"}},
      {"memphis", {"memfis"}},
      {"ticket", {"tickit", "thicket"}},
      {"tickets", {"tickits"}},
      {"monday", {"munday"}},
      {"friday", {"fryday"}},
      {"sunday", {"sundae"}},
      {"evening", {"evenning", "eavening"}},
      {"noon", {"nune"}},
      {"book", {"buck"}},
      {"depart", {"dupart"}},
      {"arrive", {"a rive"}},
  };
  return t;
}

ConfusionTable ConfusionTable::load(const std::string& path) {
  ConfusionTable t;
  std::vector<std::string> lines = read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw DataError(path + ":" + std::to_string(i + 1) +
                      ": expected word<TAB>alt1,alt2,...");
    }
    std::string word = line.substr(0, tab);
    std::vector<std::string> alts;
    std::string rest = line.substr(tab + 1);
    size_t at = 0;
    while (at <= rest.size()) {
      size_t comma = rest.find(',', at);
      if (comma == std::string::npos) comma = rest.size();
      if (comma > at) alts.push_back(rest.substr(at, comma - at));
      at = comma + 1;
    }
    if (alts.empty()) {
      throw DataError(path + ":" + std::to_string(i + 1) + ": no alternatives");
    }
    t.entries[std::move(word)] = std::move(alts);
  }
  return t;
}

namespace {

constexpr std::string_view kVowels = "aeiou";

bool is_vowel(char c) { return kVowels.find(c) != std::string_view::npos; }

// Replaces one vowel with a different vowel; words without vowels get their
// last character doubled.  Always returns a string different from the input.
std::string vowel_swap(const std::string& w, Rng& rng) {
  std::vector<size_t> spots;
  for (size_t i = 0; i < w.size(); ++i) {
    if (is_vowel(w[i])) spots.push_back(i);
  }
  if (spots.empty()) return w + w.back();
  size_t at = spots[static_cast<size_t>(rng.below(spots.size()))];
  std::string out = w;
  char cur = out[at];
  char pick = cur;
  while (pick == cur) {
    pick = kVowels[static_cast<size_t>(rng.below(kVowels.size()))];
  }
  out[at] = pick;
  return out;
}

// Word-form perturbation: strip or add an inflection-like suffix.
std::string grammatical_corrupt(const std::string& w, Rng& rng) {
  auto ends_with = [&](std::string_view s) {
    return w.size() > s.size() + 1 &&
           w.compare(w.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with("ing")) return w.substr(0, w.size() - 3);
  if (ends_with("est")) return w.substr(0, w.size() - 3) + "er";
  if (ends_with("ed")) return w.substr(0, w.size() - 2);
  if (ends_with("s")) return w.substr(0, w.size() - 1);
  constexpr std::array<std::string_view, 3> kSuffixes = {"s", "ing", "ed"};
  return w + std::string(kSuffixes[static_cast<size_t>(rng.below(3))]);
}

std::string similar_sound_corrupt(const std::string& w, Rng& rng,
                                  const ConfusionTable& table) {
  if (const auto* alts = table.find(w)) {
    return (*alts)[static_cast<size_t>(rng.below(alts->size()))];
  }
  return vowel_swap(w, rng);
}

// Entity-style breakage: split a long word in two or truncate its tail;
// short words degrade to a sound-alike edit.
std::string entity_corrupt(const std::string& w, Rng& rng) {
  if (w.size() < 4) return vowel_swap(w, rng);
  if (rng.bernoulli(0.5)) {
    size_t cut = w.size() / 2;
    return w.substr(0, cut) + " " + w.substr(cut);
  }
  size_t drop = 1 + w.size() / 3;
  return w.substr(0, w.size() - drop);
}

constexpr std::array<std::string_view, 8> kFillers = {
    "uh", "um", "ah", "the", "a", "you", "know", "like"};

}  // namespace

std::vector<CorpusPair> inject_errors(const std::vector<std::string>& refs,
                                      const ErrorProfile& profile,
                                      uint64_t seed,
                                      const ConfusionTable* table) {
  profile.validate();
  ConfusionTable builtin;
  if (table == nullptr) {
    builtin = ConfusionTable::builtin();
    table = &builtin;
  }
  Rng rng(seed);
  // Cumulative bin edges in fixed type order.
  std::array<double, kNumErrorTypes> edges{};
  double cum = 0.0;
  for (int i = 0; i < kNumErrorTypes; ++i) {
    cum += profile.rate_of(static_cast<ErrorType>(i));
    edges[static_cast<size_t>(i)] = cum;
  }

  std::vector<CorpusPair> out;
  out.reserve(refs.size());
  for (const std::string& ref : refs) {
    std::vector<std::string> words = split_whitespace(ref);
    std::vector<std::string> corrupted;
    corrupted.reserve(words.size() + 2);
    std::set<ErrorType> applied;
    for (const std::string& w : words) {
      double u = rng.uniform();
      int chosen = -1;
      for (int i = 0; i < kNumErrorTypes; ++i) {
        if (u < edges[static_cast<size_t>(i)]) {
          chosen = i;
          break;
        }
      }
      switch (chosen) {
        case -1:
          corrupted.push_back(w);
          break;
        case static_cast<int>(ErrorType::kGrammatical):
          corrupted.push_back(grammatical_corrupt(w, rng));
          applied.insert(ErrorType::kGrammatical);
          break;
        case static_cast<int>(ErrorType::kSimilarSound):
          corrupted.push_back(similar_sound_corrupt(w, rng, *table));
          applied.insert(ErrorType::kSimilarSound);
          break;
        case static_cast<int>(ErrorType::kEntity): {
          std::string broken = entity_corrupt(w, rng);
          for (auto& piece : split_whitespace(broken)) {
            corrupted.push_back(std::move(piece));
          }
          applied.insert(ErrorType::kEntity);
          break;
        }
        case static_cast<int>(ErrorType::kInsertion):
          corrupted.push_back(w);
          corrupted.push_back(std::string(
              kFillers[static_cast<size_t>(rng.below(kFillers.size()))]));
          applied.insert(ErrorType::kInsertion);
          break;
        case static_cast<int>(ErrorType::kDelete):
          applied.insert(ErrorType::kDelete);
          break;
        default:
          throw ContractError("unreachable corruption bin");
      }
    }
    CorpusPair p;
    p.asr_text = join_words(corrupted);
    p.ref_text = ref;
    p.error_types = std::move(applied);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

constexpr std::array<std::string_view, 10> kCities = {
    "denver",  "boston",   "atlanta", "dallas",  "seattle",
    "chicago", "phoenix",  "portland", "houston", "memphis"};
constexpr std::array<std::string_view, 6> kDays = {
    "monday", "tuesday", "friday", "saturday", "sunday", "tomorrow"};
constexpr std::array<std::string_view, 4> kTimes = {"morning", "afternoon",
                                                    "evening", "noon"};
constexpr std::array<std::string_view, 5> kAdjectives = {
    "cheapest", "earliest", "latest", "shortest", "fastest"};
constexpr std::array<std::string_view, 5> kNouns = {"flight", "fare", "ticket",
                                                    "seat", "airfare"};
constexpr std::array<std::string_view, 4> kPlurals = {"flights", "fares",
                                                      "tickets", "seats"};

template <size_t N>
std::string_view pick(const std::array<std::string_view, N>& pool, Rng& rng) {
  return pool[static_cast<size_t>(rng.below(N))];
}

}  // namespace

std::vector<std::string> generate_references(int count, uint64_t seed) {
  if (count < 0) throw ConfigError("reference count must be non-negative");
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::string_view city1 = pick(kCities, rng);
    std::string_view city2 = city1;
    while (city2 == city1) city2 = pick(kCities, rng);
    std::string s;
    switch (rng.below(10)) {
      case 0:
        s = "show me the " + std::string(pick(kAdjectives, rng)) + " " +
            std::string(pick(kNouns, rng)) + " from " + std::string(city1) +
            " to " + std::string(city2);
        break;
      case 1:
        s = "list all " + std::string(pick(kPlurals, rng)) + " from " +
            std::string(city1) + " to " + std::string(city2) + " on " +
            std::string(pick(kDays, rng));
        break;
      case 2:
        s = "i need a " + std::string(pick(kNouns, rng)) + " to " +
            std::string(city1) + " " + std::string(pick(kDays, rng)) + " " +
            std::string(pick(kTimes, rng));
        break;
      case 3:
        s = "what is the " + std::string(pick(kAdjectives, rng)) + " " +
            std::string(pick(kNouns, rng)) + " from " + std::string(city1) +
            " to " + std::string(city2);
        break;
      case 4:
        s = "are there any " + std::string(pick(kPlurals, rng)) +
            " arriving in " + std::string(city1) + " before " +
            std::string(pick(kTimes, rng));
        break;
      case 5:
        s = "find the " + std::string(pick(kAdjectives, rng)) + " " +
            std::string(pick(kNouns, rng)) + " leaving " + std::string(city1) +
            " on " + std::string(pick(kDays, rng));
        break;
      case 6:
        s = "how many " + std::string(pick(kPlurals, rng)) + " depart " +
            std::string(city1) + " in the " + std::string(pick(kTimes, rng));
        break;
      case 7:
        s = "give me the " + std::string(pick(kNouns, rng)) +
            " schedule from " + std::string(city1) + " to " +
            std::string(city2);
        break;
      case 8:
        s = "i want to fly from " + std::string(city1) + " to " +
            std::string(city2) + " on " + std::string(pick(kDays, rng));
        break;
      default:
        s = "does the " + std::string(pick(kTimes, rng)) + " " +
            std::string(pick(kNouns, rng)) + " from " + std::string(city1) +
            " stop in " + std::string(city2);
        break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace opcorrect
