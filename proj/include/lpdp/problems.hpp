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
#include <functional>
#include <string>
#include <vector>

// Synthetic ERM benchmark problems. A Problem is a bag of callables plus the
// constants an optimizer or auditor needs; all state is captured inside the
// closures, so Problem is cheap to copy and safe to share read-only across
// threads.
namespace lpdp {

struct Problem {
  std::string kind;           // "quadratic", "logistic", "csv"
  std::size_t dim = 0;        // optimization-variable dimension
  std::size_t n_samples = 0;  // number of examples

  double lipschitz = 0.0;          // smoothness constant L
  double strong_convexity = 0.0;   // mu (0 when unknown / not strongly convex)
  double f_star = 0.0;             // minimum of the empirical objective
  double grad_bound = 0.0;         // G with ||per-example gradient|| <= G on the relevant domain
  double sigma_sgd = 0.0;          // per-example gradient noise scale at the optimum
  std::uint64_t content_hash = 0;  // hash of the generated data, for run provenance

  // Matrix shape of the parameter (rows * cols == dim) for low-rank projected
  // optimizers; 0 when the parameter has no natural matrix layout.
  std::size_t matrix_rows = 0;
  std::size_t matrix_cols = 0;

  std::vector<double> x0;  // canonical starting point

  // Empirical objective and its full gradient at x.
  std::function<double(const std::vector<double>&)> loss;
  std::function<void(const std::vector<double>&, std::vector<double>&)> full_grad;
  // Per-example loss/gradient (index < n_samples).
  std::function<double(const std::vector<double>&, std::size_t)> sample_loss;
  std::function<void(const std::vector<double>&, std::size_t, std::vector<double>&)> sample_grad;
};

// Diagonal quadratic f_i(x) = 1/2 x' D x - b_i' x with the spectrum of D
// log-spaced on [mu, L] and b_i = bbar + zeta_i, E||zeta||^2 = sigma_sgd^2.
// f_star and x* are computed from the empirical mean of the b_i, so the
// reported optimum is exact for the sampled data.
Problem make_quadratic(std::size_t dim, double lipschitz, double mu, double sigma_sgd,
                       std::size_t n_samples, std::uint64_t seed);

// Multinomial logistic regression on k Gaussian blobs in dim dimensions whose
// centers are `separation` apart; the variable is the dim x k coefficient
// matrix (flattened column-major). grad_bound = sqrt(2) * max feature norm.
Problem make_logistic(std::size_t dim, std::size_t n_classes, std::size_t n_samples,
                      double separation, std::uint64_t seed);

// Loads a numeric CSV (header row required) as a logistic problem with the
// named column as integer class labels; features are standardized to zero mean
// and unit variance. Throws std::runtime_error naming the offending row/column
// on parse errors, and refuses files with more than max_cells numeric cells.
Problem load_csv(const std::string& path, const std::string& label_column,
                 std::size_t max_cells = 1000000);

}  // namespace lpdp
