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

#ifndef OPCORRECT_RNG_HPP_
#define OPCORRECT_RNG_HPP_

#include <cstdint>
#include <random>
#include <vector>

namespace opcorrect {

// Deterministic random source.  All sampling goes through explicit integer
// draws from mt19937_64 so that results are identical across platforms and
// standard library versions; std::uniform_int_distribution and friends make
// no such guarantee.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n).  Rejection sampling keeps the draw unbiased.
  uint64_t below(uint64_t n);

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform();

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream.  Mixing through splitmix64 keeps forks with
  // nearby stream ids decorrelated.
  Rng fork(uint64_t stream) const;

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace opcorrect

#endif  // OPCORRECT_RNG_HPP_
