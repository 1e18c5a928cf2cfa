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

#include "lpdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lpdp {

double NoiseSource::uniform01() {
  // 53 random bits into [0, 1); every value is exactly representable.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NoiseSource::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller with u1 in (0, 1] so the log is finite.
  const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void NoiseSource::fill_gaussian(double* out, std::size_t n, double sigma) {
  for (std::size_t i = 0; i < n; ++i) out[i] = sigma * gaussian();
}

std::uint64_t NoiseSource::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
  // Reject the partial block at the bottom of the 2^64 range; the survivors
  // are equidistributed over exact multiples of bound.
  const std::uint64_t cutoff = (0 - bound) % bound;  // 2^64 mod bound
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= cutoff) return x % bound;
  }
}

std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k,
                                                      NoiseSource& rng) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k exceeds n");
  // Floyd's algorithm: k draws, no retries, uniform over k-subsets.
  std::vector<std::uint32_t> picked;
  picked.reserve(k);
  for (std::uint32_t j = n - k; j < n; ++j) {
    const auto t = static_cast<std::uint32_t>(rng.uniform_below(j + 1));
    if (std::find(picked.begin(), picked.end(), t) != picked.end()) {
      picked.push_back(j);
    } else {
      picked.push_back(t);
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace lpdp
