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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpdp/dp.hpp"
#include "lpdp/filter.hpp"
#include "lpdp/problems.hpp"

// Differentially private first-order optimizers with filtered gradients.
namespace lpdp {

enum class Variant {
  kSgd,     // x <- x - eta * mhat
  kAdam,    // x <- x - eta * mhat / max(sqrt(vhat), eps)
  kGalore,  // Adam in a rank-r projected space, periodically refreshed
};

struct OptimizerConfig {
  Variant variant = Variant::kSgd;
  FilterSpec filter;  // filter applied to the privatized gradient stream

  double eta = 0.1;
  std::size_t batch = 1;
  std::size_t steps = 100;

  ClipConfig clip;
  double sigma_dp = 0.0;  // per-coordinate noise scale added to the averaged clipped gradient

  // Adam second-moment accumulator v <- (1 - beta) v + beta g^2.
  double adam_beta = 0.1;
  double adam_eps = 1e-8;

  // GaLore: rank of the projection and refresh period (steps).
  std::size_t galore_rank = 4;
  std::size_t galore_period = 50;
  // Matrix shape dim = rows * cols used to reshape the gradient for the SVD.
  std::size_t galore_rows = 0;
  std::size_t galore_cols = 0;

  bool cosine_schedule = false;  // eta_t = eta * cos-decay after linear warmup
  double warmup_frac = 0.1;

  std::size_t snapshot_stride = 0;  // 0 = no snapshots

  // Optional privacy budget; when both set, sigma_dp is derived via
  // sigma_from_budget at run start and recorded back into the effective config.
  std::optional<double> epsilon;
  std::optional<double> delta;
};

struct TraceRecord {
  std::size_t t = 0;
  double loss = 0.0;        // empirical objective after the update
  double grad_norm = 0.0;   // ||full gradient|| before the update
  double g_norm = 0.0;      // ||privatized batch gradient||
  double bias = 0.0;        // filter bias correction c_{a,t}
};

struct RunTrace {
  std::vector<TraceRecord> records;
  double final_loss = 0.0;
  std::vector<double> x_final;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  double sigma_dp_used = 0.0;

  // Populated when snapshot_stride > 0: privatized gradients and update
  // directions at the snapshot steps, for spectral analysis.
  std::vector<std::size_t> snapshot_steps;
  std::vector<std::vector<double>> g_snapshots;
  std::vector<std::vector<double>> dir_snapshots;

  bool rank_deficient_projection = false;  // a GaLore refresh saw rank < galore_rank
  std::vector<std::string> warnings;
};

// Runs the configured optimizer on the problem with the per-step determinism
// contract: at step t the RNG first draws the batch indices (sorted sample
// without replacement), then the Gaussian noise vector (skipped when
// sigma_dp == 0). Throws std::invalid_argument on malformed configs (batch of
// zero or exceeding n_samples, non-positive eta, invalid filter, GaLore shape
// mismatch).
RunTrace run(const Problem& problem, const OptimizerConfig& cfg, std::uint64_t seed);

// Rank-r orthonormal basis (rows x r, column-major) of the best rank-r
// approximation of the rows x cols matrix `g` (column-major), via SVD. Sets
// *rank_deficient when the matrix has fewer than r nonzero singular values.
std::vector<double> find_projector(const std::vector<double>& g, std::size_t rows,
                                   std::size_t cols, std::size_t rank, bool* rank_deficient);

struct AuditReport {
  double observed = 0.0;  // E_{t~P}[ ||grad F(x_t)||^2 ], P(t) proportional to sum_{tau<=t} c_tau kappa_tau
  double bound = 0.0;     // (F(x_0) - F*) / (eta S_T) + (eta L / (2 SNR)) (d sigma_dp^2 + sigma_sgd^2 / B)
  double s_t = 0.0;       // S_T = sum_{t<T} sum_{tau<=t} c_tau kappa_tau
  double snr = 0.0;       // normalized SNR of the filter under the profile at horizon T
  bool holds = false;     // observed <= bound
};

// Certifies a recorded run against the convergence guarantee: the weight of
// step t is the accumulated signal mass P(t) = (sum_{tau<=t} c_tau kappa_tau) / S_T,
// `observed` is the P-weighted average of the recorded squared gradient norms,
// and `bound` is the right-hand side above. Throws std::invalid_argument when
// the trace has no records (true-gradient norms are required).
AuditReport audit_theory_bound(const RunTrace& trace, const Problem& problem,
                               const OptimizerConfig& cfg, const AutoCorrelationProfile& profile);

}  // namespace lpdp
