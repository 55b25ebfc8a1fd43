// Copyright 2026 The Leadwise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LEADWISE_RNG_H_
#define LEADWISE_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace leadwise {

std::uint64_t splitmix64(std::uint64_t x);

// Integer-seeded generator with platform-independent output. The engine is
// std::mt19937_64, whose sequence is fixed by the standard; the distributions
// below are implemented here because the standard library ones are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  // Independent stream derived from this generator's seed and a stream tag;
  // does not advance *this.
  static Rng stream(std::uint64_t seed, std::uint64_t tag) {
    return Rng(splitmix64(seed) ^ splitmix64(tag * 0x9E3779B97F4A7C15ULL + 1));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer on [0, n), n > 0, via rejection (no modulo bias).
  std::size_t uniform_int(std::size_t n);

  // Inclusive range [lo, hi].
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform_int(static_cast<std::size_t>(hi - lo) + 1));
  }

  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_int(i)]);
    }
  }

  // k distinct indices from [0, n) in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace leadwise

#endif  // LEADWISE_RNG_H_
