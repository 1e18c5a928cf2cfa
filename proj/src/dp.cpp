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

#include "lpdp/dp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lpdp/kernels.hpp"

namespace lpdp {

namespace {

constexpr double kNormalizeFloor = 1e-12;

void check_clip_config(const ClipConfig& clip, std::size_t dim) {
  if (!(clip.threshold > 0.0) || !std::isfinite(clip.threshold)) {
    throw std::invalid_argument("clip: threshold must be finite and positive");
  }
  if (!clip.block_sizes.empty()) {
    std::size_t total = 0;
    for (std::size_t s : clip.block_sizes) {
      if (s == 0) throw std::invalid_argument("clip: block sizes must be positive");
      total += s;
    }
    if (total != dim) {
      std::ostringstream msg;
      msg << "clip: block sizes sum to " << total << " but the gradient has " << dim
          << " coordinates";
      throw std::invalid_argument(msg.str());
    }
  }
}

}  // namespace

double clip_scale(double norm, double threshold, ClipMode mode) {
  if (mode == ClipMode::kNormalize) {
    // Zero gradients stay zero: the floored norm keeps the scale finite and
    // 0 * finite = 0.
    return threshold / std::max(norm, kNormalizeFloor);
  }
  return norm > threshold ? threshold / norm : 1.0;
}

void clip_inplace(double* g, std::size_t dim, const ClipConfig& clip) {
  check_clip_config(clip, dim);
  if (clip.block_sizes.empty()) {
    const double norm = std::sqrt(kernels::squared_norm(g, dim));
    const double s = clip_scale(norm, clip.threshold, clip.mode);
    if (s != 1.0) kernels::scale(g, s, dim);
    return;
  }
  const double block_threshold =
      clip.threshold / std::sqrt(static_cast<double>(clip.block_sizes.size()));
  std::size_t offset = 0;
  for (std::size_t size : clip.block_sizes) {
    const double norm = std::sqrt(kernels::squared_norm(g + offset, size));
    const double s = clip_scale(norm, block_threshold, clip.mode);
    if (s != 1.0) kernels::scale(g + offset, s, size);
    offset += size;
  }
}

void privatize(const std::vector<std::vector<double>>& examples, const ClipConfig& clip,
               double sigma, NoiseSource& rng, std::vector<double>& out) {
  if (examples.empty()) throw std::invalid_argument("privatize: batch must be nonempty");
  if (sigma < 0.0) throw std::invalid_argument("privatize: sigma must be nonnegative");
  const std::size_t dim = examples[0].size();
  for (const auto& g : examples) {
    if (g.size() != dim) throw std::invalid_argument("privatize: dimension mismatch in batch");
  }
  check_clip_config(clip, dim);

  out.assign(dim, 0.0);
  const double inv_batch = 1.0 / static_cast<double>(examples.size());
  if (clip.block_sizes.empty()) {
    for (const auto& g : examples) {
      const double norm = std::sqrt(kernels::squared_norm(g.data(), dim));
      const double s = clip_scale(norm, clip.threshold, clip.mode);
      kernels::axpy(s * inv_batch, g.data(), out.data(), dim);
    }
  } else {
    const double block_threshold =
        clip.threshold / std::sqrt(static_cast<double>(clip.block_sizes.size()));
    for (const auto& g : examples) {
      std::size_t offset = 0;
      for (std::size_t size : clip.block_sizes) {
        const double norm = std::sqrt(kernels::squared_norm(g.data() + offset, size));
        const double s = clip_scale(norm, block_threshold, clip.mode);
        kernels::axpy(s * inv_batch, g.data() + offset, out.data() + offset, size);
        offset += size;
      }
    }
  }
  // Noise draws happen in coordinate order, and only when sigma > 0, so runs
  // with sigma == 0 consume no randomness here.
  if (sigma > 0.0) {
    for (std::size_t i = 0; i < dim; ++i) out[i] += sigma * rng.gaussian();
  }
}

double sigma_from_gaussian_mechanism(double delta_f, double epsilon, double delta) {
  if (delta_f < 0.0 || !std::isfinite(delta_f)) {
    throw std::invalid_argument("sigma_from_gaussian_mechanism: sensitivity must be nonnegative");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("sigma_from_gaussian_mechanism: epsilon must be positive");
  }
  if (!(delta > 0.0) || delta > 0.05) {
    throw std::invalid_argument(
        "sigma_from_gaussian_mechanism: delta must lie in (0, 0.05]; larger values are outside "
        "the mechanism's validity range");
  }
  return delta_f * std::sqrt(2.0 * std::log(1.0 / (2.0 * delta))) / epsilon +
         delta_f / std::sqrt(2.0 * epsilon);
}

CalibrationResult sigma_from_budget(double threshold, std::size_t steps, std::size_t n_samples,
                                    double epsilon, double delta, double v, double u,
                                    std::size_t batch) {
  if (!(threshold > 0.0)) throw std::invalid_argument("sigma_from_budget: C must be positive");
  if (steps == 0) throw std::invalid_argument("sigma_from_budget: T must be positive");
  if (n_samples == 0) throw std::invalid_argument("sigma_from_budget: N must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("sigma_from_budget: epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("sigma_from_budget: delta must lie in (0, 1)");
  }
  if (!(v > 0.0)) throw std::invalid_argument("sigma_from_budget: v must be positive");

  CalibrationResult result;
  const double T = static_cast<double>(steps);
  const double N = static_cast<double>(n_samples);
  result.sigma = std::sqrt(v) * threshold * std::sqrt(T * std::log(1.0 / delta)) / (N * epsilon);
  if (batch > 0) {
    const double B = static_cast<double>(batch);
    const double envelope = u * B * B * T / (N * N);
    if (epsilon >= envelope) {
      std::ostringstream msg;
      msg << "epsilon=" << epsilon << " is at or above the validity envelope u*B^2*T/N^2="
          << envelope << "; the calibration constant is not meaningful in this regime";
      result.warning = msg.str();
    }
  }
  return result;
}

double default_delta(std::size_t n_samples) {
  if (n_samples < 2) throw std::invalid_argument("default_delta: dataset must have at least 2 samples");
  return std::pow(static_cast<double>(n_samples), -1.1);
}

}  // namespace lpdp
