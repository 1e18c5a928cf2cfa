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

#include "lpdp/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lpdp/kernels.hpp"

namespace lpdp {

std::vector<double> autocorrelation(const std::vector<std::vector<double>>& series,
                                    std::size_t max_lag) {
  const std::size_t T = series.size();
  if (T == 0) throw std::invalid_argument("autocorrelation: empty series");
  if (max_lag >= T) throw std::invalid_argument("autocorrelation: max_lag must be < series length");
  const std::size_t d = series[0].size();
  for (const auto& s : series) {
    if (s.size() != d) throw std::invalid_argument("autocorrelation: ragged series");
  }
  std::vector<double> phi(max_lag + 1, 0.0);
  for (std::size_t tau = 0; tau <= max_lag; ++tau) {
    double acc = 0.0;
    for (std::size_t t = tau; t < T; ++t) {
      acc += kernels::dot(series[t].data(), series[t - tau].data(), d);
    }
    phi[tau] = acc / static_cast<double>(T - tau);  // unbiased normalization
  }
  return phi;
}

SpectralEstimate psd_from_autocorrelation(const std::vector<double>& phi) {
  if (phi.empty()) throw std::invalid_argument("psd: autocorrelation must be nonempty");
  const std::size_t L = phi.size() - 1;
  const std::size_t n_grid = 2 * L + 1;
  SpectralEstimate est;
  est.phi0 = phi[0];
  est.nu.resize(L + 1);
  est.power.resize(L + 1);
  // Real signal: phi(-tau) = phi(tau), so the transform collapses to a cosine
  // series; the imaginary parts cancel exactly.
  for (std::size_t k = 0; k <= L; ++k) {
    const double nu = static_cast<double>(k) / static_cast<double>(n_grid);
    double p = phi[0];
    for (std::size_t tau = 1; tau <= L; ++tau) {
      p += 2.0 * phi[tau] * std::cos(2.0 * std::numbers::pi * nu * static_cast<double>(tau));
    }
    est.nu[k] = nu;
    est.power[k] = p;
  }
  return est;
}

double parseval_residual(const SpectralEstimate& est) {
  if (est.power.empty()) throw std::invalid_argument("parseval_residual: empty estimate");
  const std::size_t L = est.power.size() - 1;
  // Mean over the full symmetric grid of 2L+1 points: k = 0 once, k >= 1 twice.
  double sum = est.power[0];
  for (std::size_t k = 1; k <= L; ++k) sum += 2.0 * est.power[k];
  return std::abs(sum / static_cast<double>(2 * L + 1) - est.phi0);
}

double expected_noise_psd(std::size_t dim, double sigma_dp, double sigma_sgd, std::size_t batch) {
  if (sigma_dp < 0.0 || sigma_sgd < 0.0) {
    throw std::invalid_argument("expected_noise_psd: noise scales must be nonnegative");
  }
  if (batch == 0 && sigma_sgd > 0.0) {
    throw std::invalid_argument("expected_noise_psd: batch must be positive when sigma_sgd > 0");
  }
  const double dp_part = static_cast<double>(dim) * sigma_dp * sigma_dp;
  const double sgd_part =
      sigma_sgd > 0.0 ? sigma_sgd * sigma_sgd / static_cast<double>(batch) : 0.0;
  return dp_part + sgd_part;
}

SpectralEstimate filtered_noise_psd(const FilterSpec& spec, double level, std::size_t max_lag) {
  const auto report = validate_spec(spec);
  if (!report.stable) {
    throw std::invalid_argument("filtered_noise_psd: filter '" + spec.name +
                                "' has a pole on or outside the unit circle");
  }
  const std::size_t n_grid = 2 * max_lag + 1;
  SpectralEstimate est;
  est.nu.resize(max_lag + 1);
  est.power.resize(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    const double nu = static_cast<double>(k) / static_cast<double>(n_grid);
    est.nu[k] = nu;
    est.power[k] = std::norm(frequency_response(spec, nu)) * level;
  }
  // phi0 consistent with the level: mean of the full symmetric grid.
  double sum = est.power[0];
  for (std::size_t k = 1; k <= max_lag; ++k) sum += 2.0 * est.power[k];
  est.phi0 = sum / static_cast<double>(n_grid);
  return est;
}

}  // namespace lpdp
