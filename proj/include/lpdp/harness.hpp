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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lpdp/optim.hpp"
#include "lpdp/problems.hpp"

// Experiment driver behind the CLI. Configs are flat JSON objects with dotted
// keys ("opt.eta": 0.1); the config hash is FNV-1a over the sorted
// canonicalized entries, excluding the run-local keys "seeds", "out" and
// "workers" so the same experiment hashes identically regardless of where it
// writes or how it is parallelized.
namespace lpdp::harness {

// Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// Maps to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // Problem axis.
  std::string problem_kind = "quadratic";  // quadratic | logistic | csv
  std::size_t problem_dim = 16;
  double problem_lipschitz = 1.0;
  double problem_mu = 0.1;
  double problem_sigma_sgd = 1.0;
  std::size_t problem_n = 1000;
  std::size_t problem_classes = 3;
  double problem_separation = 3.0;
  std::uint64_t problem_seed = 12345;
  std::string csv_path;
  std::string csv_label;
  std::size_t csv_max_cells = 1000000;

  OptimizerConfig opt;        // includes filter, clip, noise, schedule
  std::size_t opt_epochs = 0;  // when set, steps = epochs * ceil(N / B)
  std::string filter_source;  // preset name, or "custom" when a/b given inline

  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = ".";
  std::size_t workers = 1;
  bool allow_nonunit_gain = false;

  // Sweep axes (empty => not swept).
  std::vector<double> sweep_eta;
  std::vector<std::size_t> sweep_batch;
  std::vector<std::size_t> sweep_steps;
  std::vector<std::string> sweep_filter;

  // Per-arm comparison overrides (non-privacy keys only).
  std::map<std::string, std::string> baseline_overrides;
  std::map<std::string, std::string> candidate_overrides;

  // Dotted key -> canonical JSON literal, for hashing and provenance.
  std::map<std::string, std::string> flat;
};

// Parses the flat dotted-key JSON text. Unknown keys, nested objects, type
// mismatches, unresolvable presets and invalid values throw ConfigError with
// the offending key in the message.
ExperimentConfig parse_config(const std::string& json_text);

std::uint64_t config_hash(const ExperimentConfig& cfg);

Problem make_problem(const ExperimentConfig& cfg);

// Validates the filter (stability always; unit gain unless allow_nonunit_gain),
// converts opt.epochs into steps against the problem size and fills projection
// shape defaults, returning the optimizer config one run actually uses.
OptimizerConfig effective_optimizer_config(const ExperimentConfig& cfg, const Problem& problem);

struct RunOutputs {
  std::vector<std::string> trace_files;
  std::vector<std::string> snapshot_files;  // present when opt.snapshot_stride > 0
  std::string meta_file;
  double sigma_dp = 0.0;
};
// One trace CSV per seed plus a metadata JSON (resolved sigma/delta, config
// hash, artifact version, warnings).
RunOutputs cmd_run(const ExperimentConfig& cfg);

struct SweepCell {
  double eta = 0.0;
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::string filter;
  double mean_final_loss = 0.0;
  double mean_tail_grad_norm = 0.0;  // mean ||grad F|| over the last 10% of steps
  bool failed = false;
  std::string error;
  bool best = false;
};
// Cross-product over the sweep axes (seeds averaged per cell); failures are
// recorded and the sweep continues. Best cell = lowest mean final loss, ties
// broken by smaller eta. Writes sweep.csv under out_dir. Throws NumericalError
// only if every cell failed.
std::vector<SweepCell> cmd_sweep(const ExperimentConfig& cfg);

struct SpectrumOutputs {
  std::string phi_file;  // tau, phi_raw, phi_filtered
  std::string psd_file;  // nu, power_raw, power_filtered, reference
};
// Correlogram analysis of a snapshot file produced by cmd_run. Refuses files
// whose embedded config hash differs from cfg's; errors when the file has no
// snapshots or max_lag >= snapshot count.
SpectrumOutputs cmd_spectrum(const ExperimentConfig& cfg, const std::string& snapshot_file,
                             std::size_t max_lag);

struct FilterDesignOutputs {
  FilterSpec spec;
  std::string spec_file;      // JSON
  std::string response_file;  // nu, |H|^2 over a 64-point grid
  ValidationReport report;
};
// Fits the matched FIR to a profile. Exactly one source: a profile JSON file
// {"c": [...]} or a snapshot file (profile estimated from the g snapshots with
// the config's sigma_dp).
FilterDesignOutputs cmd_filter_design(const ExperimentConfig& cfg, const std::string& profile_file,
                                      const std::string& snapshot_file, std::size_t order);

struct ComparisonReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> baseline_losses;
  std::vector<double> candidate_losses;
  double mean_difference = 0.0;  // mean(candidate - baseline); negative favors the candidate
  double sign_test_p = 1.0;      // two-sided exact binomial over non-tied pairs
  std::size_t candidate_wins = 0;
  std::size_t ties = 0;
  // Matched privacy attestation: both arms ran with exactly these values.
  double sigma_dp = 0.0;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::uint64_t hash = 0;
};
// Paired runs (shared seeds and privacy parameters) of two filters; requires
// >= 10 seeds; refuses per-arm overrides of privacy keys. Writes compare.json
// under out_dir.
ComparisonReport cmd_compare(const ExperimentConfig& cfg, const std::string& baseline,
                             const std::string& candidate);

struct CalibrationOutput {
  double sigma = 0.0;
  double delta = 0.0;
  std::optional<std::string> warning;
};
// Wraps the budget calibrator using clip.threshold, opt.steps/batch, problem.n
// and noise.epsilon (noise.delta defaults to default_delta(n)).
CalibrationOutput cmd_calibrate(const ExperimentConfig& cfg);

// Two-sided exact binomial sign test: probability under fair coin flips of a
// split at least as lopsided as wins/losses (ties excluded by the caller).
double sign_test_p(std::size_t wins, std::size_t losses);

}  // namespace lpdp::harness
