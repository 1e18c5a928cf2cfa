// Copyright 2025-present the lpdp project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lpdp {

// Deterministic noise source. mt19937_64 is fully specified by the standard and
// the Gaussian transform is a hand-rolled Box-Muller (std::normal_distribution
// is implementation-defined), so identical seeds give identical streams on
// every platform. One NoiseSource per run; consumers document their draw order.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  // Standard normal via Box-Muller; one spare cached between calls.
  double gaussian();
  void fill_gaussian(double* out, std::size_t n, double sigma);

  // Uniform in [0, bound) without modulo bias (rejection). bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound);

  // Uniform in [0, 1).
  double uniform01();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// k distinct indices from [0, n), sorted ascending. Sorted order makes the
// downstream summation order (and thus the trace bytes) reproducible.
// Uses Floyd's algorithm: exactly k uniform_below draws.
std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k,
                                                      NoiseSource& rng);

}  // namespace lpdp
