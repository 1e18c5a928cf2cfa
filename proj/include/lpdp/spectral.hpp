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
#include <vector>

#include "lpdp/filter.hpp"

// Correlogram spectral analysis of gradient-noise traces.
namespace lpdp {

// Empirical autocovariance of a vector-valued series:
//
//   phi(tau) = (1 / (T - tau)) * sum_{t=tau..T-1} <s_t, s_{t-tau}>,  tau = 0..max_lag
//
// Throws std::invalid_argument when max_lag >= series length or the series is
// empty / ragged.
std::vector<double> autocorrelation(const std::vector<std::vector<double>>& series,
                                    std::size_t max_lag);

struct SpectralEstimate {
  std::vector<double> nu;     // frequencies k / (2L + 1), k = 0..L
  std::vector<double> power;  // correlogram PSD at each nu
  double phi0 = 0.0;          // phi(0), for Parseval checks
};

// Correlogram estimate from phi(0..L):
//
//   P(nu) = phi(0) + 2 sum_{tau=1..L} phi(tau) cos(2 pi nu tau)
//
// on the grid nu_k = k / (2L + 1). The full symmetric grid averages back to
// phi(0) exactly (Parseval); parseval_residual reports that defect.
SpectralEstimate psd_from_autocorrelation(const std::vector<double>& phi);

// | mean over the full symmetric frequency grid of P - phi(0) |, computed from
// the one-sided estimate (k = 0 counted once, k = 1..L twice).
double parseval_residual(const SpectralEstimate& est);

// Flat PSD level of the privatized-gradient noise floor:
//   d sigma_dp^2 + sigma_sgd^2 / B.
double expected_noise_psd(std::size_t dim, double sigma_dp, double sigma_sgd, std::size_t batch);

// PSD of white noise at `level` pushed through the filter: level * |H(nu)|^2 on
// the same grid as psd_from_autocorrelation would use for lag budget L.
SpectralEstimate filtered_noise_psd(const FilterSpec& spec, double level, std::size_t max_lag);

}  // namespace lpdp
