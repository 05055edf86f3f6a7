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

#ifndef OPCORRECT_COMMON_HPP_
#define OPCORRECT_COMMON_HPP_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace opcorrect {

inline constexpr const char* kVersion = "0.1.0";

// Bad command line or misuse of an API entry point. CLI exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or malformed input data. CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration values. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated precondition inside the library (a programming error).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

enum class LogLevel { kQuiet = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Resolved once from OPCORRECT_LOG (quiet|warn|info|debug); default info.
LogLevel log_level();
void log_line(LogLevel level, const std::string& msg);

template <class... Ts>
void log_info(const Ts&... parts) {
  if (log_level() < LogLevel::kInfo) return;
  std::ostringstream os;
  (os << ... << parts);
  log_line(LogLevel::kInfo, os.str());
}

template <class... Ts>
void log_warn(const Ts&... parts) {
  if (log_level() < LogLevel::kWarn) return;
  std::ostringstream os;
  (os << ... << parts);
  log_line(LogLevel::kWarn, os.str());
}

template <class... Ts>
void log_debug(const Ts&... parts) {
  if (log_level() < LogLevel::kDebug) return;
  std::ostringstream os;
  (os << ... << parts);
  log_line(LogLevel::kDebug, os.str());
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);
inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), seed);
}
std::string hex64(uint64_t v);

// Byte length of the UTF-8 sequence starting with `lead` (1..4; invalid -> 1,
// so iteration always makes progress).
size_t u8_seq_len(unsigned char lead);

std::vector<std::string> split_whitespace(std::string_view text);
std::string lowercase_ascii(std::string_view text);
std::string join_words(const std::vector<std::string>& words);

// Whole-file helpers. Throw DataError when the path cannot be opened.
std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace opcorrect

#endif  // OPCORRECT_COMMON_HPP_
