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

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lpdp/rng.hpp"

// Per-example clipping and Gaussian privatization of mini-batch gradients.
namespace lpdp {

enum class ClipMode {
  kClip,       // scale by min(1, C / ||g||)
  kNormalize,  // scale to exactly norm C (zero gradients stay zero)
};

struct ClipConfig {
  double threshold = 1.0;  // C > 0
  ClipMode mode = ClipMode::kClip;
  // When non-empty, the gradient is split into consecutive blocks of these
  // sizes (they must sum to the dimension) and each block is clipped to
  // C / sqrt(#blocks), preserving the overall L2 sensitivity C.
  std::vector<std::size_t> block_sizes;
};

// Scale factor the clip applies to a vector of the given norm (single block).
double clip_scale(double norm, double threshold, ClipMode mode);

// Clips one example gradient in place per the config. Throws
// std::invalid_argument on non-positive threshold or block sizes that do not
// sum to dim.
void clip_inplace(double* g, std::size_t dim, const ClipConfig& clip);

// Privatizes a batch: clips each of the batch_size example gradients (rows of
// `examples`, length dim each), averages them, and adds N(0, sigma^2 I) noise
// per coordinate. When sigma == 0 no RNG draws are consumed. `out` has length
// dim.
void privatize(const std::vector<std::vector<double>>& examples, const ClipConfig& clip,
               double sigma, NoiseSource& rng, std::vector<double>& out);

// Classic Gaussian-mechanism noise scale for sensitivity `delta_f`:
//
//   sigma = delta_f * sqrt(2 ln(1/(2 delta))) / epsilon + delta_f / sqrt(2 epsilon)
//
// Valid for delta <= 0.05 (throws std::invalid_argument beyond that, or on
// non-positive epsilon / delta_f).
double sigma_from_gaussian_mechanism(double delta_f, double epsilon, double delta);

struct CalibrationResult {
  double sigma = 0.0;
  // Set when the requested budget is loose enough that clipping-free SGD would
  // already satisfy it (epsilon >= u B^2 T / N^2); calibration still proceeds.
  std::optional<std::string> warning;
};

// Composite budget over T steps with batches of size B from N examples:
//
//   sigma = sqrt(v) * C * sqrt(T ln(1/delta)) / (N epsilon)
//
// v and u are the moments-accountant constants (defaults 2 and 1). Throws
// std::invalid_argument on non-positive C, T, N, epsilon, or delta not in
// (0, 1).
CalibrationResult sigma_from_budget(double threshold, std::size_t steps, std::size_t n_samples,
                                    double epsilon, double delta, double v = 2.0, double u = 1.0,
                                    std::size_t batch = 0);

// Default failure probability for a dataset of N >= 2 examples: N^(-1.1).
double default_delta(std::size_t n_samples);

}  // namespace lpdp
