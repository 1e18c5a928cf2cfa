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

#include "lpdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "lpdp/dp.hpp"
#include "lpdp/spectral.hpp"
#include "lpdp/trace_io.hpp"

namespace lpdp::harness {

namespace {

using nlohmann::json;

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

std::size_t as_size(const std::string& key, const json& v) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("config key '" + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::uint64_t as_u64(const std::string& key, const json& v) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError("config key '" + key + "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
  return v.get<bool>();
}

template <typename T, typename Fn>
std::vector<T> as_array(const std::string& key, const json& v, Fn elem) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError("config key '" + key + "' must be a nonempty array");
  }
  std::vector<T> out;
  for (const auto& e : v) out.push_back(elem(key, e));
  return out;
}

// Applies one dotted key to the config; `filter_preset`/`filter_custom` track
// which filter sources have been seen so conflicts can be reported.
struct ParseState {
  bool filter_preset = false;
  bool filter_custom = false;
  bool has_steps = false;
  bool has_epochs = false;
};

void apply_key(ExperimentConfig& cfg, ParseState& st, const std::string& key, const json& v) {
  if (v.is_object()) {
    throw ConfigError("config key '" + key +
                      "': nested objects are not allowed; use flat dotted keys");
  }
  if (key == "problem.kind") {
    cfg.problem_kind = as_string(key, v);
    if (cfg.problem_kind != "quadratic" && cfg.problem_kind != "logistic" &&
        cfg.problem_kind != "csv") {
      throw ConfigError("config key 'problem.kind' must be quadratic, logistic or csv");
    }
  } else if (key == "problem.dim") {
    cfg.problem_dim = as_size(key, v);
  } else if (key == "problem.lipschitz") {
    cfg.problem_lipschitz = as_double(key, v);
  } else if (key == "problem.mu") {
    cfg.problem_mu = as_double(key, v);
  } else if (key == "problem.sigma_sgd") {
    cfg.problem_sigma_sgd = as_double(key, v);
  } else if (key == "problem.n") {
    cfg.problem_n = as_size(key, v);
  } else if (key == "problem.classes") {
    cfg.problem_classes = as_size(key, v);
  } else if (key == "problem.separation") {
    cfg.problem_separation = as_double(key, v);
  } else if (key == "problem.seed") {
    cfg.problem_seed = as_u64(key, v);
  } else if (key == "problem.csv_path") {
    cfg.csv_path = as_string(key, v);
  } else if (key == "problem.label") {
    cfg.csv_label = as_string(key, v);
  } else if (key == "problem.max_cells") {
    cfg.csv_max_cells = as_size(key, v);
  } else if (key == "opt.variant") {
    const std::string name = as_string(key, v);
    if (name == "sgd") {
      cfg.opt.variant = Variant::kSgd;
    } else if (name == "adam") {
      cfg.opt.variant = Variant::kAdam;
    } else if (name == "galore") {
      cfg.opt.variant = Variant::kGalore;
    } else {
      throw ConfigError("config key 'opt.variant' must be sgd, adam or galore");
    }
  } else if (key == "opt.eta") {
    cfg.opt.eta = as_double(key, v);
  } else if (key == "opt.batch") {
    cfg.opt.batch = as_size(key, v);
  } else if (key == "opt.steps") {
    cfg.opt.steps = as_size(key, v);
    st.has_steps = true;
  } else if (key == "opt.epochs") {
    cfg.opt_epochs = as_size(key, v);
    st.has_epochs = true;
  } else if (key == "opt.adam_beta") {
    cfg.opt.adam_beta = as_double(key, v);
  } else if (key == "opt.adam_eps") {
    cfg.opt.adam_eps = as_double(key, v);
  } else if (key == "opt.galore_rank") {
    cfg.opt.galore_rank = as_size(key, v);
  } else if (key == "opt.galore_period") {
    cfg.opt.galore_period = as_size(key, v);
  } else if (key == "opt.galore_rows") {
    cfg.opt.galore_rows = as_size(key, v);
  } else if (key == "opt.galore_cols") {
    cfg.opt.galore_cols = as_size(key, v);
  } else if (key == "opt.cosine_schedule") {
    cfg.opt.cosine_schedule = as_bool(key, v);
  } else if (key == "opt.warmup_frac") {
    cfg.opt.warmup_frac = as_double(key, v);
  } else if (key == "opt.snapshot_stride") {
    cfg.opt.snapshot_stride = as_size(key, v);
  } else if (key == "clip.threshold") {
    cfg.opt.clip.threshold = as_double(key, v);
  } else if (key == "clip.mode") {
    const std::string name = as_string(key, v);
    if (name == "clip") {
      cfg.opt.clip.mode = ClipMode::kClip;
    } else if (name == "normalize") {
      cfg.opt.clip.mode = ClipMode::kNormalize;
    } else {
      throw ConfigError("config key 'clip.mode' must be clip or normalize");
    }
  } else if (key == "clip.blocks") {
    cfg.opt.clip.block_sizes = as_array<std::size_t>(key, v, as_size);
  } else if (key == "noise.sigma_dp") {
    cfg.opt.sigma_dp = as_double(key, v);
  } else if (key == "noise.epsilon") {
    cfg.opt.epsilon = as_double(key, v);
  } else if (key == "noise.delta") {
    cfg.opt.delta = as_double(key, v);
  } else if (key == "filter.preset") {
    try {
      cfg.opt.filter = preset(as_string(key, v));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    cfg.filter_source = cfg.opt.filter.name;
    st.filter_preset = true;
  } else if (key == "filter.a") {
    cfg.opt.filter.a = as_array<double>(key, v, as_double);
    st.filter_custom = true;
  } else if (key == "filter.b") {
    cfg.opt.filter.b = as_array<double>(key, v, as_double);
    st.filter_custom = true;
  } else if (key == "filter.name") {
    cfg.opt.filter.name = as_string(key, v);
    st.filter_custom = true;
  } else if (key == "seeds") {
    cfg.seeds = as_array<std::uint64_t>(key, v, as_u64);
  } else if (key == "out") {
    cfg.out_dir = as_string(key, v);
  } else if (key == "workers") {
    cfg.workers = std::max<std::size_t>(1, as_size(key, v));
  } else if (key == "allow_nonunit_gain") {
    cfg.allow_nonunit_gain = as_bool(key, v);
  } else if (key == "sweep.eta") {
    cfg.sweep_eta = as_array<double>(key, v, as_double);
  } else if (key == "sweep.batch") {
    cfg.sweep_batch = as_array<std::size_t>(key, v, as_size);
  } else if (key == "sweep.steps") {
    cfg.sweep_steps = as_array<std::size_t>(key, v, as_size);
  } else if (key == "sweep.filter") {
    cfg.sweep_filter = as_array<std::string>(key, v, as_string);
  } else if (key.rfind("baseline.", 0) == 0) {
    cfg.baseline_overrides[key.substr(9)] = v.dump();
  } else if (key.rfind("candidate.", 0) == 0) {
    cfg.candidate_overrides[key.substr(10)] = v.dump();
  } else {
    throw ConfigError(
        "unknown config key '" + key +
        "'; see the config reference in README.md for the accepted dotted keys");
  }
}

void finalize(ExperimentConfig& cfg, const ParseState& st) {
  if (st.filter_preset && st.filter_custom) {
    throw ConfigError("config: give either filter.preset or filter.a/filter.b, not both");
  }
  if (st.filter_custom) {
    if (cfg.opt.filter.b.empty()) {
      throw ConfigError("config: custom filters need a nonempty filter.b");
    }
    if (cfg.opt.filter.name.empty()) cfg.opt.filter.name = "custom";
    cfg.filter_source = "custom";
  }
  if (!st.filter_preset && !st.filter_custom) {
    cfg.opt.filter = preset("sgd");
    cfg.filter_source = "sgd";
  }
  if (st.has_steps && st.has_epochs) {
    throw ConfigError("config: give either opt.steps or opt.epochs, not both");
  }
  if (cfg.seeds.empty()) throw ConfigError("config key 'seeds' must be a nonempty array");
  if (cfg.opt.epsilon.has_value() != cfg.opt.delta.has_value()) {
    throw ConfigError("config: noise.epsilon and noise.delta must be given together");
  }
  if (cfg.problem_kind == "csv" && cfg.csv_path.empty()) {
    throw ConfigError("config: problem.kind=csv requires problem.csv_path");
  }
  if (cfg.problem_kind == "csv" && cfg.csv_label.empty()) {
    throw ConfigError("config: problem.kind=csv requires problem.label");
  }
}

// Strips run-local and arm-override keys, swaps in the arm's filter preset,
// applies the arm overrides, and re-parses so all validation runs again.
ExperimentConfig arm_config(const ExperimentConfig& cfg, const std::string& arm_filter,
                            const std::map<std::string, std::string>& overrides) {
  json obj = json::object();
  for (const auto& [key, literal] : cfg.flat) {
    if (key.rfind("baseline.", 0) == 0 || key.rfind("candidate.", 0) == 0 ||
        key.rfind("sweep.", 0) == 0 || key.rfind("filter.", 0) == 0) {
      continue;
    }
    obj[key] = json::parse(literal);
  }
  obj["filter.preset"] = arm_filter;
  for (const auto& [key, literal] : overrides) obj[key] = json::parse(literal);
  ExperimentConfig arm = parse_config(obj.dump());
  arm.out_dir = cfg.out_dir;
  arm.workers = cfg.workers;
  arm.allow_nonunit_gain = cfg.allow_nonunit_gain;
  arm.seeds = cfg.seeds;
  return arm;
}

// Runs fn(0..n-1) on up to `workers` threads; first exception wins and is
// rethrown on the calling thread after all tasks finish or drain.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
}

json filter_to_json(const FilterSpec& spec) {
  return json{{"name", spec.name}, {"a", spec.a}, {"b", spec.b}};
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ConfigError("config must be a JSON object with dotted keys");
  ExperimentConfig cfg;
  ParseState st;
  for (const auto& [key, value] : obj.items()) {
    apply_key(cfg, st, key, value);
    cfg.flat[key] = value.dump();
  }
  finalize(cfg, st);
  return cfg;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::string canonical;
  for (const auto& [key, literal] : cfg.flat) {
    if (key == "seeds" || key == "out" || key == "workers") continue;
    canonical += key;
    canonical += '=';
    canonical += literal;
    canonical += '\n';
  }
  return fnv1a64(canonical);
}

Problem make_problem(const ExperimentConfig& cfg) {
  try {
    if (cfg.problem_kind == "quadratic") {
      return make_quadratic(cfg.problem_dim, cfg.problem_lipschitz, cfg.problem_mu,
                            cfg.problem_sigma_sgd, cfg.problem_n, cfg.problem_seed);
    }
    if (cfg.problem_kind == "logistic") {
      return make_logistic(cfg.problem_dim, cfg.problem_classes, cfg.problem_n,
                           cfg.problem_separation, cfg.problem_seed);
    }
    return load_csv(cfg.csv_path, cfg.csv_label, cfg.csv_max_cells);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

OptimizerConfig effective_optimizer_config(const ExperimentConfig& cfg, const Problem& problem) {
  OptimizerConfig opt = cfg.opt;
  if (opt.filter.b.empty()) opt.filter = preset("sgd");
  ValidationReport report;
  try {
    report = validate_spec(opt.filter);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!report.stable) {
    throw ConfigError("filter '" + opt.filter.name + "' is unstable (max pole magnitude " +
                      format_double(report.max_pole_magnitude) + "); refusing to run it");
  }
  if (!report.unit_gain && !cfg.allow_nonunit_gain) {
    throw ConfigError("filter '" + opt.filter.name + "' is not unit gain (gain error " +
                      format_double(report.unit_gain_error) +
                      "); pass --allow-nonunit-gain to run it anyway");
  }
  if (cfg.opt_epochs > 0) {
    if (opt.batch == 0) throw ConfigError("config: opt.epochs needs a positive opt.batch");
    const std::size_t steps_per_epoch =
        (problem.n_samples + opt.batch - 1) / opt.batch;
    opt.steps = cfg.opt_epochs * steps_per_epoch;
  }
  if (opt.variant == Variant::kGalore && opt.galore_rows == 0) {
    opt.galore_rows = problem.matrix_rows;
    opt.galore_cols = problem.matrix_cols;
  }
  return opt;
}

RunOutputs cmd_run(const ExperimentConfig& cfg) {
  const Problem problem = make_problem(cfg);
  const OptimizerConfig opt = effective_optimizer_config(cfg, problem);
  const std::uint64_t hash = config_hash(cfg);
  ensure_out_dir(cfg);

  RunOutputs outputs;
  json meta;
  meta["artifact_version"] = "1.0.0";
  meta["config_hash"] = hash_hex(hash);
  meta["problem"] = {{"kind", problem.kind},
                     {"dim", problem.dim},
                     {"n_samples", problem.n_samples},
                     {"content_hash", hash_hex(problem.content_hash)}};
  meta["filter"] = filter_to_json(opt.filter);
  meta["seeds"] = cfg.seeds;
  meta["steps"] = opt.steps;
  json warnings = json::array();

  double sigma_used = opt.sigma_dp;
  for (const std::uint64_t seed : cfg.seeds) {
    RunTrace trace;
    try {
      trace = run(problem, opt, seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    } catch (const std::exception& e) {
      throw NumericalError(e.what());
    }
    trace.config_hash = hash;
    sigma_used = trace.sigma_dp_used;
    for (const auto& w : trace.warnings) warnings.push_back(w);

    const std::string trace_path = join_path(cfg.out_dir, "trace_" + std::to_string(seed) + ".csv");
    write_trace_csv(trace_path, trace);
    outputs.trace_files.push_back(trace_path);
    if (opt.snapshot_stride > 0) {
      const std::string snap_path =
          join_path(cfg.out_dir, "snapshots_" + std::to_string(seed) + ".csv");
      write_snapshots_csv(snap_path, trace, trace.sigma_dp_used);
      outputs.snapshot_files.push_back(snap_path);
    }
  }
  outputs.sigma_dp = sigma_used;

  meta["sigma_dp"] = sigma_used;
  if (opt.epsilon) meta["epsilon"] = *opt.epsilon;
  if (opt.delta) meta["delta"] = *opt.delta;
  meta["warnings"] = warnings;
  meta["traces"] = outputs.trace_files;
  outputs.meta_file = join_path(cfg.out_dir, "meta.json");
  write_text_file(outputs.meta_file, meta.dump(2) + "\n");
  return outputs;
}

std::vector<SweepCell> cmd_sweep(const ExperimentConfig& cfg) {
  const Problem problem = make_problem(cfg);
  const std::uint64_t hash = config_hash(cfg);
  ensure_out_dir(cfg);

  const std::vector<double> etas = cfg.sweep_eta.empty() ? std::vector<double>{cfg.opt.eta}
                                                         : cfg.sweep_eta;
  const std::vector<std::size_t> batches =
      cfg.sweep_batch.empty() ? std::vector<std::size_t>{cfg.opt.batch} : cfg.sweep_batch;
  const std::vector<std::size_t> steps_axis =
      cfg.sweep_steps.empty() ? std::vector<std::size_t>{cfg.opt.steps} : cfg.sweep_steps;
  const std::vector<std::string> filters = cfg.sweep_filter.empty()
                                               ? std::vector<std::string>{cfg.filter_source}
                                               : cfg.sweep_filter;

  std::vector<SweepCell> cells;
  for (const double eta : etas) {
    for (const std::size_t batch : batches) {
      for (const std::size_t steps : steps_axis) {
        for (const std::string& filter_name : filters) {
          SweepCell cell;
          cell.eta = eta;
          cell.batch = batch;
          cell.steps = steps;
          cell.filter = filter_name;
          cells.push_back(cell);
        }
      }
    }
  }

  parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
    SweepCell& cell = cells[i];
    try {
      ExperimentConfig cell_cfg = cfg;
      cell_cfg.opt.eta = cell.eta;
      cell_cfg.opt.batch = cell.batch;
      cell_cfg.opt.steps = cell.steps;
      cell_cfg.opt_epochs = 0;
      if (cell.filter != "custom") {
        cell_cfg.opt.filter = preset(cell.filter);
      }
      const OptimizerConfig opt = effective_optimizer_config(cell_cfg, problem);
      double loss_acc = 0.0, tail_acc = 0.0;
      for (const std::uint64_t seed : cfg.seeds) {
        const RunTrace trace = run(problem, opt, seed);
        loss_acc += trace.final_loss;
        const std::size_t T = trace.records.size();
        const std::size_t window = std::max<std::size_t>(1, T / 10);
        double tail = 0.0;
        for (std::size_t t = T - std::min(window, T); t < T; ++t) {
          tail += trace.records[t].grad_norm;
        }
        tail_acc += T == 0 ? 0.0 : tail / static_cast<double>(std::min(window, T));
      }
      cell.mean_final_loss = loss_acc / static_cast<double>(cfg.seeds.size());
      cell.mean_tail_grad_norm = tail_acc / static_cast<double>(cfg.seeds.size());
      if (!std::isfinite(cell.mean_final_loss)) {
        throw std::runtime_error("non-finite mean final loss");
      }
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  });

  // Best cell by mean final loss; exact ties go to the smaller eta.
  std::size_t best = cells.size();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].failed) continue;
    if (best == cells.size() || cells[i].mean_final_loss < cells[best].mean_final_loss ||
        (cells[i].mean_final_loss == cells[best].mean_final_loss &&
         cells[i].eta < cells[best].eta)) {
      best = i;
    }
  }
  if (best == cells.size()) throw NumericalError("sweep: every cell failed");
  cells[best].best = true;

  std::ostringstream out;
  out << "# config_hash=" << hash_hex(hash) << "\n";
  out << "eta,batch,steps,filter,mean_final_loss,mean_tail_grad_norm,failed,error,best\n";
  for (const auto& cell : cells) {
    std::string err = cell.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out << format_double(cell.eta) << ',' << cell.batch << ',' << cell.steps << ',' << cell.filter
        << ',' << format_double(cell.mean_final_loss) << ','
        << format_double(cell.mean_tail_grad_norm) << ',' << (cell.failed ? 1 : 0) << ',' << err
        << ',' << (cell.best ? 1 : 0) << "\n";
  }
  write_text_file(join_path(cfg.out_dir, "sweep.csv"), out.str());
  return cells;
}

SpectrumOutputs cmd_spectrum(const ExperimentConfig& cfg, const std::string& snapshot_file,
                             std::size_t max_lag) {
  const SnapshotFile file = read_snapshots_csv(snapshot_file);
  const std::uint64_t hash = config_hash(cfg);
  if (file.config_hash != hash) {
    throw ConfigError("refusing '" + snapshot_file + "': its config hash " +
                      hash_hex(file.config_hash) + " does not match this config's " +
                      hash_hex(hash));
  }
  if (file.g.empty()) {
    throw ConfigError("'" + snapshot_file +
                      "' has no gradient snapshots; rerun with opt.snapshot_stride > 0");
  }
  if (file.dir.size() != file.g.size()) {
    throw ConfigError("'" + snapshot_file + "' is missing direction snapshots");
  }
  if (max_lag >= file.g.size()) {
    throw ConfigError("max_lag must be smaller than the snapshot count (" +
                      std::to_string(file.g.size()) + ")");
  }
  ensure_out_dir(cfg);

  const std::vector<double> phi_raw = autocorrelation(file.g, max_lag);
  const std::vector<double> phi_filtered = autocorrelation(file.dir, max_lag);
  const SpectralEstimate psd_raw = psd_from_autocorrelation(phi_raw);
  const SpectralEstimate psd_filtered = psd_from_autocorrelation(phi_filtered);
  const double reference = expected_noise_psd(
      file.dim, file.sigma_dp,
      cfg.problem_kind == "quadratic" ? cfg.problem_sigma_sgd : 0.0, cfg.opt.batch);

  SpectrumOutputs outputs;
  {
    std::ostringstream out;
    out << "# config_hash=" << hash_hex(hash) << "\n";
    out << "tau,phi_raw,phi_filtered\n";
    for (std::size_t tau = 0; tau <= max_lag; ++tau) {
      out << tau << ',' << format_double(phi_raw[tau]) << ',' << format_double(phi_filtered[tau])
          << "\n";
    }
    outputs.phi_file = join_path(cfg.out_dir, "spectrum_phi.csv");
    write_text_file(outputs.phi_file, out.str());
  }
  {
    std::ostringstream out;
    out << "# config_hash=" << hash_hex(hash) << "\n";
    out << "nu,power_raw,power_filtered,reference\n";
    for (std::size_t k = 0; k < psd_raw.nu.size(); ++k) {
      out << format_double(psd_raw.nu[k]) << ',' << format_double(psd_raw.power[k]) << ','
          << format_double(psd_filtered.power[k]) << ',' << format_double(reference) << "\n";
    }
    outputs.psd_file = join_path(cfg.out_dir, "spectrum_psd.csv");
    write_text_file(outputs.psd_file, out.str());
  }
  return outputs;
}

FilterDesignOutputs cmd_filter_design(const ExperimentConfig& cfg, const std::string& profile_file,
                                      const std::string& snapshot_file, std::size_t order) {
  if (profile_file.empty() == snapshot_file.empty()) {
    throw ConfigError("filter-design needs exactly one of --profile or --trace");
  }
  ensure_out_dir(cfg);

  AutoCorrelationProfile profile;
  if (!profile_file.empty()) {
    json obj;
    try {
      obj = json::parse(read_text_file(profile_file));
    } catch (const json::exception& e) {
      throw ConfigError("profile file '" + profile_file + "' is not valid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("c") || !obj["c"].is_array() || obj["c"].empty()) {
      throw ConfigError("profile file '" + profile_file +
                        "' must be an object with a nonempty array field \"c\"");
    }
    profile.c = obj["c"].get<std::vector<double>>();
    order = profile.c.size() - 1;  // profile files are taken as given
  } else {
    const SnapshotFile file = read_snapshots_csv(snapshot_file);
    const std::uint64_t hash = config_hash(cfg);
    if (file.config_hash != hash) {
      throw ConfigError("refusing '" + snapshot_file + "': its config hash " +
                        hash_hex(file.config_hash) + " does not match this config's " +
                        hash_hex(hash));
    }
    if (file.g.size() < 2) {
      throw ConfigError("'" + snapshot_file + "' has too few snapshots to estimate a profile");
    }
    const std::size_t max_lag = std::min(order, file.g.size() - 1);
    profile = estimate_autocorrelation(file.g, file.sigma_dp, max_lag);
    order = max_lag;
  }

  FilterDesignOutputs outputs;
  try {
    outputs.spec = design_optimal_fir(profile, order);
    outputs.report = validate_spec(outputs.spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const std::uint64_t hash = config_hash(cfg);
  json spec_json;
  spec_json["config_hash"] = hash_hex(hash);
  spec_json["filter"] = filter_to_json(outputs.spec);
  spec_json["unit_gain_error"] = outputs.report.unit_gain_error;
  spec_json["max_pole_magnitude"] = outputs.report.max_pole_magnitude;
  spec_json["stable"] = outputs.report.stable;
  spec_json["profile_c"] = profile.c;
  outputs.spec_file = join_path(cfg.out_dir, "filter_design.json");
  write_text_file(outputs.spec_file, spec_json.dump(2) + "\n");

  // |H(nu)|^2 over the 64-point grid nu_k = k/127.
  std::ostringstream out;
  out << "# config_hash=" << hash_hex(hash) << "\n";
  out << "nu,response_power\n";
  for (std::size_t k = 0; k < 64; ++k) {
    const double nu = static_cast<double>(k) / 127.0;
    out << format_double(nu) << ',' << format_double(std::norm(frequency_response(outputs.spec, nu)))
        << "\n";
  }
  outputs.response_file = join_path(cfg.out_dir, "filter_response.csv");
  write_text_file(outputs.response_file, out.str());
  return outputs;
}

ComparisonReport cmd_compare(const ExperimentConfig& cfg, const std::string& baseline,
                             const std::string& candidate) {
  if (cfg.seeds.size() < 10) {
    throw ConfigError("compare needs at least 10 seeds for the sign test; got " +
                      std::to_string(cfg.seeds.size()));
  }
  static const std::vector<std::string> kPrivacyKeys = {"noise.sigma_dp", "noise.epsilon",
                                                        "noise.delta", "clip.threshold"};
  for (const auto* overrides : {&cfg.baseline_overrides, &cfg.candidate_overrides}) {
    for (const auto& [key, literal] : *overrides) {
      (void)literal;
      if (std::find(kPrivacyKeys.begin(), kPrivacyKeys.end(), key) != kPrivacyKeys.end()) {
        throw ConfigError("refusing per-arm override of privacy parameter '" + key +
                          "'; both arms must share sigma_dp, epsilon, delta and the clip "
                          "threshold");
      }
    }
  }

  const ExperimentConfig base_cfg = arm_config(cfg, baseline, cfg.baseline_overrides);
  const ExperimentConfig cand_cfg = arm_config(cfg, candidate, cfg.candidate_overrides);
  const Problem problem = make_problem(cfg);
  const OptimizerConfig base_opt = effective_optimizer_config(base_cfg, problem);
  const OptimizerConfig cand_opt = effective_optimizer_config(cand_cfg, problem);
  ensure_out_dir(cfg);

  const std::size_t n = cfg.seeds.size();
  ComparisonReport report;
  report.seeds = cfg.seeds;
  report.baseline_losses.assign(n, 0.0);
  report.candidate_losses.assign(n, 0.0);
  std::vector<double> base_sigma(n, 0.0), cand_sigma(n, 0.0);

  // Paired common random numbers: arm x seed tasks, same seed in both arms.
  parallel_for(2 * n, cfg.workers, [&](std::size_t task) {
    const std::size_t i = task / 2;
    const bool is_candidate = (task % 2) == 1;
    const RunTrace trace =
        run(problem, is_candidate ? cand_opt : base_opt, cfg.seeds[i]);
    if (is_candidate) {
      report.candidate_losses[i] = trace.final_loss;
      cand_sigma[i] = trace.sigma_dp_used;
    } else {
      report.baseline_losses[i] = trace.final_loss;
      base_sigma[i] = trace.sigma_dp_used;
    }
  });

  if (base_sigma[0] != cand_sigma[0]) {
    throw ConfigError("arm-config mismatch on privacy parameters: baseline ran with sigma_dp=" +
                      format_double(base_sigma[0]) + " but candidate with sigma_dp=" +
                      format_double(cand_sigma[0]));
  }
  report.sigma_dp = base_sigma[0];
  report.epsilon = base_opt.epsilon;
  report.delta = base_opt.delta;
  report.hash = config_hash(cfg);

  double diff_acc = 0.0;
  std::size_t wins = 0, ties = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = report.candidate_losses[i] - report.baseline_losses[i];
    diff_acc += diff;
    if (diff < 0.0) {
      ++wins;
    } else if (diff == 0.0) {
      ++ties;
    }
  }
  report.mean_difference = diff_acc / static_cast<double>(n);
  report.candidate_wins = wins;
  report.ties = ties;
  report.sign_test_p = sign_test_p(wins, n - wins - ties);

  json out;
  out["config_hash"] = hash_hex(report.hash);
  out["baseline"] = {{"filter", baseline}, {"final_losses", report.baseline_losses}};
  out["candidate"] = {{"filter", candidate}, {"final_losses", report.candidate_losses}};
  out["seeds"] = report.seeds;
  out["mean_difference"] = report.mean_difference;
  out["candidate_wins"] = report.candidate_wins;
  out["ties"] = report.ties;
  out["sign_test_p"] = report.sign_test_p;
  out["privacy"] = json{{"sigma_dp", report.sigma_dp}};
  if (report.epsilon) out["privacy"]["epsilon"] = *report.epsilon;
  if (report.delta) out["privacy"]["delta"] = *report.delta;
  write_text_file(join_path(cfg.out_dir, "compare.json"), out.dump(2) + "\n");
  return report;
}

CalibrationOutput cmd_calibrate(const ExperimentConfig& cfg) {
  if (!cfg.opt.epsilon.has_value()) {
    throw ConfigError("calibrate needs noise.epsilon (or --epsilon)");
  }
  if (cfg.problem_n == 0) throw ConfigError("calibrate needs problem.n (or --N)");
  if (cfg.opt.steps == 0) throw ConfigError("calibrate needs opt.steps (or --T)");
  CalibrationOutput out;
  out.delta = cfg.opt.delta.has_value() ? *cfg.opt.delta : default_delta(cfg.problem_n);
  try {
    const CalibrationResult res =
        sigma_from_budget(cfg.opt.clip.threshold, cfg.opt.steps, cfg.problem_n, *cfg.opt.epsilon,
                          out.delta, 2.0, 1.0, cfg.opt.batch);
    out.sigma = res.sigma;
    out.warning = res.warning;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return out;
}

double sign_test_p(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  const std::size_t m = std::min(wins, losses);
  // Exact two-sided binomial: 2 * P(X <= m) for X ~ Binomial(n, 1/2).
  double tail = 0.0;
  double binom = 1.0;  // C(n, 0)
  for (std::size_t k = 0; k <= m; ++k) {
    if (k > 0) {
      binom *= static_cast<double>(n - k + 1) / static_cast<double>(k);
    }
    tail += binom;
  }
  const double p = 2.0 * tail * std::pow(0.5, static_cast<double>(n));
  return std::min(1.0, p);
}

}  // namespace lpdp::harness
