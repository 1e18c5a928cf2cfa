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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lpdp/harness.hpp"
#include "lpdp/trace_io.hpp"

namespace {

using lpdp::harness::ConfigError;
using lpdp::harness::ExperimentConfig;

// Flags shared by the experiment subcommands.
struct CommonArgs {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::size_t workers = 0;
  bool allow_nonunit_gain = false;
};

void add_common(CLI::App* cmd, CommonArgs* args, bool config_required) {
  auto* config =
      cmd->add_option("--config", args->config_path, "experiment config (flat dotted-key JSON)");
  if (config_required) config->required();
  cmd->add_option("--seed", args->seeds, "run seed; repeat the flag to run several seeds");
  cmd->add_option("--out", args->out_dir, "output directory (default: from config, else .)");
  cmd->add_option("--workers", args->workers, "worker threads for independent runs");
  cmd->add_flag("--allow-nonunit-gain", args->allow_nonunit_gain,
                "run filters whose coefficients do not pass constant inputs through unchanged");
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    std::string text;
    try {
      text = lpdp::read_text_file(args.config_path);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("cannot read config file: ") + e.what());
    }
    cfg = lpdp::harness::parse_config(text);
  }
  if (!args.seeds.empty()) cfg.seeds = args.seeds;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.workers > 0) cfg.workers = args.workers;
  if (args.allow_nonunit_gain) cfg.allow_nonunit_gain = true;
  return cfg;
}

int run_command(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const auto out = lpdp::harness::cmd_run(cfg);
  std::printf("wrote %zu trace file(s) to %s\n", out.trace_files.size(), cfg.out_dir.c_str());
  if (!out.snapshot_files.empty()) {
    std::printf("wrote %zu snapshot file(s)\n", out.snapshot_files.size());
  }
  std::printf("sigma_dp = %s\n", lpdp::format_double(out.sigma_dp).c_str());
  std::printf("meta: %s\n", out.meta_file.c_str());
  return 0;
}

int sweep_command(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const auto cells = lpdp::harness::cmd_sweep(cfg);
  std::size_t failed = 0;
  for (const auto& cell : cells) {
    if (cell.failed) ++failed;
    if (cell.best) {
      std::printf("best cell: eta=%s batch=%zu steps=%zu filter=%s mean_final_loss=%s\n",
                  lpdp::format_double(cell.eta).c_str(), cell.batch, cell.steps,
                  cell.filter.c_str(), lpdp::format_double(cell.mean_final_loss).c_str());
    }
  }
  std::printf("%zu cell(s), %zu failed; wrote sweep.csv to %s\n", cells.size(), failed,
              cfg.out_dir.c_str());
  return 0;
}

int spectrum_command(const CommonArgs& args, const std::string& snapshots, std::size_t max_lag) {
  const ExperimentConfig cfg = load_config(args);
  const auto out = lpdp::harness::cmd_spectrum(cfg, snapshots, max_lag);
  std::printf("wrote %s\n", out.phi_file.c_str());
  std::printf("wrote %s\n", out.psd_file.c_str());
  return 0;
}

int filter_design_command(const CommonArgs& args, const std::string& profile,
                          const std::string& trace, std::size_t order) {
  const ExperimentConfig cfg = load_config(args);
  const auto out = lpdp::harness::cmd_filter_design(cfg, profile, trace, order);
  std::printf("designed %s with %zu taps\n", out.spec.name.c_str(), out.spec.b.size());
  for (std::size_t i = 0; i < out.spec.b.size(); ++i) {
    std::printf("  b[%zu] = %s\n", i, lpdp::format_double(out.spec.b[i]).c_str());
  }
  std::printf("unit_gain_error = %s\n", lpdp::format_double(out.report.unit_gain_error).c_str());
  std::printf("wrote %s\n", out.spec_file.c_str());
  std::printf("wrote %s\n", out.response_file.c_str());
  return 0;
}

int compare_command(const CommonArgs& args, const std::string& baseline,
                    const std::string& candidate) {
  const ExperimentConfig cfg = load_config(args);
  const auto report = lpdp::harness::cmd_compare(cfg, baseline, candidate);
  std::printf("candidate (%s) vs baseline (%s) over %zu paired seeds\n", candidate.c_str(),
              baseline.c_str(), report.seeds.size());
  std::printf("candidate wins: %zu  ties: %zu\n", report.candidate_wins, report.ties);
  std::printf("mean final-loss difference (candidate - baseline) = %s\n",
              lpdp::format_double(report.mean_difference).c_str());
  std::printf("sign test p = %s\n", lpdp::format_double(report.sign_test_p).c_str());
  std::printf("shared sigma_dp = %s\n", lpdp::format_double(report.sigma_dp).c_str());
  return 0;
}

int calibrate_command(const CommonArgs& args, const std::optional<std::size_t>& n,
                      const std::optional<std::size_t>& batch,
                      const std::optional<std::size_t>& steps,
                      const std::optional<double>& epsilon, const std::optional<double>& delta,
                      const std::optional<double>& clip) {
  ExperimentConfig cfg = load_config(args);
  if (n) cfg.problem_n = *n;
  if (batch) cfg.opt.batch = *batch;
  if (steps) cfg.opt.steps = *steps;
  if (epsilon) cfg.opt.epsilon = *epsilon;
  if (delta) cfg.opt.delta = *delta;
  if (clip) cfg.opt.clip.threshold = *clip;
  const auto out = lpdp::harness::cmd_calibrate(cfg);
  std::printf("sigma = %s\n", lpdp::format_double(out.sigma).c_str());
  std::printf("delta = %s\n", lpdp::format_double(out.delta).c_str());
  if (out.warning) std::printf("warning: %s\n", out.warning->c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lpdp: low-pass filtered differentially private optimization"};
  app.require_subcommand(1);

  CommonArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "run the configured experiment and write traces");
  add_common(run_cmd, &run_args, /*config_required=*/true);

  CommonArgs sweep_args;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "cross-product sweep over sweep.* axes, writing sweep.csv");
  add_common(sweep_cmd, &sweep_args, /*config_required=*/true);

  CommonArgs spectrum_args;
  std::string spectrum_snapshots;
  std::size_t spectrum_max_lag = 32;
  auto* spectrum_cmd = app.add_subcommand(
      "spectrum", "correlogram power spectrum of recorded gradient/direction snapshots");
  add_common(spectrum_cmd, &spectrum_args, /*config_required=*/true);
  spectrum_cmd->add_option("--snapshots", spectrum_snapshots, "snapshot CSV written by `run`")
      ->required();
  spectrum_cmd->add_option("--max-lag", spectrum_max_lag, "largest autocorrelation lag");

  CommonArgs design_args;
  std::string design_profile;
  std::string design_trace;
  std::size_t design_order = 8;
  auto* design_cmd = app.add_subcommand(
      "filter-design", "fit the matched FIR numerator to a gradient autocorrelation profile");
  add_common(design_cmd, &design_args, /*config_required=*/true);
  design_cmd->add_option("--profile", design_profile,
                         "JSON file {\"c\": [...]} giving the autocorrelation profile");
  design_cmd->add_option("--trace", design_trace,
                         "snapshot CSV written by `run`; the profile is estimated from it");
  design_cmd->add_option("--order", design_order,
                         "FIR order when estimating from a trace (profile files are used as given)");

  CommonArgs compare_args;
  std::string compare_baseline;
  std::string compare_candidate;
  auto* compare_cmd = app.add_subcommand(
      "compare", "paired comparison of two filters under identical privacy budgets");
  add_common(compare_cmd, &compare_args, /*config_required=*/true);
  compare_cmd->add_option("--baseline", compare_baseline, "baseline filter preset")->required();
  compare_cmd->add_option("--candidate", compare_candidate, "candidate filter preset")->required();

  CommonArgs calibrate_args;
  std::optional<std::size_t> cal_n, cal_batch, cal_steps;
  std::optional<double> cal_epsilon, cal_delta, cal_clip;
  auto* calibrate_cmd =
      app.add_subcommand("calibrate", "noise scale for a privacy budget over a whole run");
  add_common(calibrate_cmd, &calibrate_args, /*config_required=*/false);
  calibrate_cmd->add_option("--N", cal_n, "dataset size");
  calibrate_cmd->add_option("--B", cal_batch, "batch size");
  calibrate_cmd->add_option("--T", cal_steps, "number of steps");
  calibrate_cmd->add_option("--epsilon", cal_epsilon, "privacy budget epsilon");
  calibrate_cmd->add_option("--delta", cal_delta, "privacy budget delta (default n^-1.1)");
  calibrate_cmd->add_option("--C", cal_clip, "clip threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run_cmd->parsed()) return run_command(run_args);
    if (sweep_cmd->parsed()) return sweep_command(sweep_args);
    if (spectrum_cmd->parsed()) {
      return spectrum_command(spectrum_args, spectrum_snapshots, spectrum_max_lag);
    }
    if (design_cmd->parsed()) {
      return filter_design_command(design_args, design_profile, design_trace, design_order);
    }
    if (compare_cmd->parsed()) {
      return compare_command(compare_args, compare_baseline, compare_candidate);
    }
    if (calibrate_cmd->parsed()) {
      return calibrate_command(calibrate_args, cal_n, cal_batch, cal_steps, cal_epsilon, cal_delta,
                               cal_clip);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const lpdp::harness::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
