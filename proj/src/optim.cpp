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

#include "lpdp/optim.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "lpdp/kernels.hpp"
#include "lpdp/rng.hpp"

namespace lpdp {

namespace {

bool uses_adam(Variant v) { return v == Variant::kAdam || v == Variant::kGalore; }

double schedule_factor(const OptimizerConfig& cfg, std::size_t t) {
  if (!cfg.cosine_schedule) return 1.0;
  const auto T = static_cast<double>(cfg.steps);
  const std::size_t warmup =
      std::max<std::size_t>(1, static_cast<std::size_t>(cfg.warmup_frac * T));
  if (t < warmup) {
    return static_cast<double>(t + 1) / static_cast<double>(warmup);
  }
  const double span = std::max<double>(1.0, T - static_cast<double>(warmup));
  const double progress = static_cast<double>(t - warmup) / span;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void check_finite_or_abort(const std::vector<double>& x, std::size_t t) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("optimizer: non-finite update at step " + std::to_string(t));
    }
  }
}

}  // namespace

std::vector<double> find_projector(const std::vector<double>& g, std::size_t rows,
                                   std::size_t cols, std::size_t rank, bool* rank_deficient) {
  if (rows == 0 || cols == 0 || g.size() != rows * cols) {
    throw std::invalid_argument("find_projector: matrix shape does not match gradient size");
  }
  if (rank == 0 || rank > std::min(rows, cols)) {
    throw std::invalid_argument("find_projector: rank must lie in [1, min(rows, cols)]");
  }
  Eigen::Map<const Eigen::MatrixXd> G(g.data(), static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(cols));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU);
  // Thin U has orthonormal columns even when G is rank deficient, which
  // doubles as the "arbitrary orthonormal complement" padding.
  const auto& sv = svd.singularValues();
  const double tol = std::max(rows, cols) * std::numeric_limits<double>::epsilon() *
                     (sv.size() > 0 ? sv(0) : 0.0);
  std::size_t effective_rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++effective_rank;
  }
  if (rank_deficient != nullptr) *rank_deficient = effective_rank < rank;

  std::vector<double> p(rows * rank);
  for (std::size_t c = 0; c < rank; ++c) {
    for (std::size_t r = 0; r < rows; ++r) {
      p[c * rows + r] = svd.matrixU()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  return p;
}

RunTrace run(const Problem& problem, const OptimizerConfig& cfg, std::uint64_t seed) {
  if (cfg.batch == 0 || cfg.batch > problem.n_samples) {
    throw std::invalid_argument("run: batch size must lie in [1, N]");
  }
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("run: eta must be positive");
  if (uses_adam(cfg.variant)) {
    if (!(cfg.adam_beta > 0.0 && cfg.adam_beta < 1.0)) {
      throw std::invalid_argument("run: adam_beta must lie in (0, 1)");
    }
    if (!(cfg.adam_eps > 0.0)) throw std::invalid_argument("run: adam_eps must be positive");
  }
  if (cfg.sigma_dp < 0.0) throw std::invalid_argument("run: sigma_dp must be nonnegative");
  if (cfg.epsilon.has_value() != cfg.delta.has_value()) {
    throw std::invalid_argument("run: epsilon and delta must be specified together");
  }

  RunTrace trace;
  trace.seed = seed;
  double sigma_dp = cfg.sigma_dp;
  if (cfg.epsilon.has_value()) {
    const CalibrationResult cal =
        sigma_from_budget(cfg.clip.threshold, cfg.steps, problem.n_samples, *cfg.epsilon,
                          *cfg.delta, 2.0, 1.0, cfg.batch);
    sigma_dp = cal.sigma;
    if (cal.warning) trace.warnings.push_back(*cal.warning);
  }
  trace.sigma_dp_used = sigma_dp;

  const std::size_t d = problem.dim;

  // GaLore geometry: parameter viewed as rows x cols, optimizer state lives in
  // the projected space of dimension rank * cols.
  std::size_t rows = 0, cols = 0, rank = 0;
  std::size_t state_dim = d;
  if (cfg.variant == Variant::kGalore) {
    rows = cfg.galore_rows != 0 ? cfg.galore_rows : problem.matrix_rows;
    cols = cfg.galore_cols != 0 ? cfg.galore_cols : problem.matrix_cols;
    if (rows == 0 || cols == 0 || rows * cols != d) {
      throw std::invalid_argument(
          "run: low-rank projection requires a matrix-shaped parameter (rows*cols == dim)");
    }
    rank = cfg.galore_rank;
    if (rank == 0 || rank > std::min(rows, cols)) {
      throw std::invalid_argument("run: galore_rank must lie in [1, min(rows, cols)]");
    }
    if (cfg.galore_period == 0) {
      throw std::invalid_argument("run: galore_period must be positive");
    }
    state_dim = rank * cols;
  }

  std::vector<double> x = problem.x0;
  if (x.size() != d) throw std::invalid_argument("run: problem x0 has wrong dimension");
  FilterState filter(cfg.filter, state_dim);
  std::vector<double> v(uses_adam(cfg.variant) ? state_dim : 0, 0.0);
  std::size_t v_steps = 0;
  std::vector<double> projector;  // rows x rank, column-major

  NoiseSource rng(seed);
  std::vector<std::vector<double>> batch_grads(cfg.batch);
  std::vector<double> g(d), g_state(state_dim), m_hat(state_dim), d_state(state_dim),
      direction(d), full_g(d);

  trace.records.reserve(cfg.steps);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    // Determinism contract: first the batch indices, then (inside privatize)
    // the noise coordinates — nothing else consumes this run's randomness.
    const auto idx = sample_without_replacement(static_cast<std::uint32_t>(problem.n_samples),
                                                static_cast<std::uint32_t>(cfg.batch), rng);
    for (std::size_t i = 0; i < cfg.batch; ++i) {
      problem.sample_grad(x, idx[i], batch_grads[i]);
    }
    privatize(batch_grads, cfg.clip, sigma_dp, rng, g);

    problem.full_grad(x, full_g);
    const double grad_norm = std::sqrt(kernels::squared_norm(full_g.data(), d));
    const double g_norm = std::sqrt(kernels::squared_norm(g.data(), d));

    // Projection (refresh first when due), second moment, filter, Adam
    // normalization, back-projection, parameter update — in that order.
    const double* g_for_state = g.data();
    if (cfg.variant == Variant::kGalore) {
      if (t % cfg.galore_period == 0) {
        bool deficient = false;
        projector = find_projector(g, rows, cols, rank, &deficient);
        if (deficient && !trace.rank_deficient_projection) {
          trace.rank_deficient_projection = true;
          trace.warnings.push_back("projector refresh at step " + std::to_string(t) +
                                   " saw rank below the configured value; padded orthonormally");
        }
        // The projected coordinates change meaning with the basis, so every
        // accumulator living in that space restarts: the second moment and
        // the filter memory. Stale momentum over a fresh (tiny) second moment
        // would otherwise blow up the normalized direction.
        std::fill(v.begin(), v.end(), 0.0);
        v_steps = 0;
        filter.reset();
      }
      // g_state = P^T G, shape rank x cols (column-major).
      for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t i = 0; i < rank; ++i) {
          g_state[c * rank + i] =
              kernels::dot(projector.data() + i * rows, g.data() + c * rows, rows);
        }
      }
      g_for_state = g_state.data();
    }

    if (uses_adam(cfg.variant)) {
      kernels::ema_square(v.data(), g_for_state, cfg.adam_beta, state_dim);
      ++v_steps;
    }

    filter.step(std::span<const double>(g_for_state, state_dim), std::span<double>(m_hat));

    const double* d_ptr = m_hat.data();
    if (uses_adam(cfg.variant)) {
      const double accumulated_weight =
          1.0 - std::pow(1.0 - cfg.adam_beta, static_cast<double>(v_steps));
      kernels::adam_direction(d_state.data(), m_hat.data(), v.data(), 1.0 / accumulated_weight,
                              cfg.adam_eps, state_dim);
      d_ptr = d_state.data();
    }

    if (cfg.variant == Variant::kGalore) {
      // direction = P * d_state, back to the dense parameter space.
      std::fill(direction.begin(), direction.end(), 0.0);
      for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t i = 0; i < rank; ++i) {
          kernels::axpy(d_ptr[c * rank + i], projector.data() + i * rows,
                        direction.data() + c * rows, rows);
        }
      }
      d_ptr = direction.data();
    }

    if (cfg.snapshot_stride > 0 && t % cfg.snapshot_stride == 0) {
      trace.snapshot_steps.push_back(t);
      trace.g_snapshots.push_back(g);
      trace.dir_snapshots.emplace_back(d_ptr, d_ptr + d);
    }

    const double eta_t = cfg.eta * schedule_factor(cfg, t);
    kernels::axpy(-eta_t, d_ptr, x.data(), d);
    check_finite_or_abort(x, t);

    TraceRecord rec;
    rec.t = t;
    rec.loss = problem.loss(x);
    rec.grad_norm = grad_norm;
    rec.g_norm = g_norm;
    rec.bias = filter.last_bias();
    trace.records.push_back(rec);
  }

  trace.x_final = std::move(x);
  trace.final_loss = trace.records.empty() ? problem.loss(trace.x_final) : trace.records.back().loss;
  return trace;
}

AuditReport audit_theory_bound(const RunTrace& trace, const Problem& problem,
                               const OptimizerConfig& cfg,
                               const AutoCorrelationProfile& profile) {
  const std::size_t T = trace.records.size();
  if (T == 0) {
    throw std::invalid_argument("audit_theory_bound: trace has no records with gradient norms");
  }
  const std::vector<double> kappa = impulse_response(cfg.filter, T);

  AuditReport report;
  double prefix = 0.0;        // sum_{tau<=t} c_tau kappa_tau
  double weighted_sq = 0.0;   // sum_t prefix_t * ||grad F(x_t)||^2
  double s_total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    prefix += profile.at(t) * kappa[t];
    s_total += prefix;
    const double gn = trace.records[t].grad_norm;
    weighted_sq += prefix * gn * gn;
  }
  if (!(s_total > 0.0)) {
    throw std::invalid_argument("audit_theory_bound: accumulated signal mass S_T is not positive");
  }
  report.s_t = s_total;
  report.observed = weighted_sq / s_total;
  report.snr = normalized_snr(kappa, profile, T);

  const double f0 = problem.loss(problem.x0);
  const double noise_level =
      static_cast<double>(problem.dim) * trace.sigma_dp_used * trace.sigma_dp_used +
      (cfg.batch > 0 ? problem.sigma_sgd * problem.sigma_sgd / static_cast<double>(cfg.batch)
                     : 0.0);
  report.bound = (f0 - problem.f_star) / (cfg.eta * s_total) +
                 cfg.eta * problem.lipschitz / (2.0 * report.snr) * noise_level;
  report.holds = report.observed <= report.bound;
  return report;
}

}  // namespace lpdp
