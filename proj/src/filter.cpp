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

#include "lpdp/filter.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "lpdp/kernels.hpp"

namespace lpdp {

namespace {

void check_finite(const FilterSpec& spec) {
  if (spec.b.empty()) {
    throw std::invalid_argument("filter spec '" + spec.name + "': b must have at least one tap");
  }
  for (std::size_t i = 0; i < spec.a.size(); ++i) {
    if (!std::isfinite(spec.a[i])) {
      throw std::invalid_argument("filter spec '" + spec.name + "': a[" + std::to_string(i) +
                                  "] is not finite");
    }
  }
  for (std::size_t i = 0; i < spec.b.size(); ++i) {
    if (!std::isfinite(spec.b[i])) {
      throw std::invalid_argument("filter spec '" + spec.name + "': b[" + std::to_string(i) +
                                  "] is not finite");
    }
  }
}

// Roots of z^na + a_1 z^(na-1) + ... + a_na via the companion matrix,
// sorted (real, imag) ascending for reproducible reports.
std::vector<std::complex<double>> characteristic_roots(const std::vector<double>& a) {
  const std::size_t na = a.size();
  if (na == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(na),
                                                    static_cast<Eigen::Index>(na));
  for (std::size_t j = 0; j < na; ++j) {
    companion(0, static_cast<Eigen::Index>(j)) = -a[j];
  }
  for (std::size_t i = 1; i < na; ++i) {
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> roots(na);
  for (std::size_t i = 0; i < na; ++i) {
    roots[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
  }
  std::sort(roots.begin(), roots.end(), [](const auto& x, const auto& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  return roots;
}

const std::vector<FilterSpec>& preset_table() {
  static const std::vector<FilterSpec> table = {
      {{}, {1.0}, "identity"},
      {{}, {1.0}, "sgd"},
      {{-0.9}, {0.1}, "momentum"},
      {{-9.0 / 11.0}, {1.0 / 11.0, 1.0 / 11.0}, "first_v1"},
      {{-9.0 / 11.0}, {3.0 / 11.0, -1.0 / 11.0}, "first_v2"},
      {{-92.0 / 58.0, 38.0 / 58.0}, {1.0 / 58.0, 2.0 / 58.0, 1.0 / 58.0}, "second"},
      {{-0.9}, {0.075, 0.025}, "f1"},
      {{-0.9}, {0.025, 0.075}, "f2"},
      {{-0.8}, {0.1, 0.1}, "f3"},
      {{-0.6}, {0.2, 0.2}, "f4"},
      {{-0.9}, {0.025, 0.05, 0.025}, "f5"},
      {{-1.8, 0.85}, {0.025, 0.025}, "f6"},
  };
  return table;
}

}  // namespace

ValidationReport validate_spec(const FilterSpec& spec) {
  check_finite(spec);
  ValidationReport report;
  double sum_a = 0.0, sum_b = 0.0;
  for (double v : spec.a) sum_a += v;
  for (double v : spec.b) sum_b += v;
  report.unit_gain_error = std::abs(-sum_a + sum_b - 1.0);
  report.unit_gain = report.unit_gain_error <= kUnitGainTolerance;
  report.poles = characteristic_roots(spec.a);
  report.max_pole_magnitude = 0.0;
  for (const auto& p : report.poles) {
    report.max_pole_magnitude = std::max(report.max_pole_magnitude, std::abs(p));
  }
  report.stable = report.max_pole_magnitude < 1.0 - kStabilityMargin;
  return report;
}

const FilterSpec& preset(const std::string& name) {
  for (const auto& spec : preset_table()) {
    if (spec.name == name) return spec;
  }
  std::ostringstream msg;
  msg << "unknown filter preset '" << name << "'; available:";
  for (const auto& known : preset_names()) msg << " " << known;
  throw std::invalid_argument(msg.str());
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& spec : preset_table()) out.push_back(spec.name);
    return out;
  }();
  return names;
}

std::string spec_to_json(const FilterSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["a"] = spec.a;
  j["b"] = spec.b;
  return j.dump();
}

FilterSpec spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("filter spec JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("b") || !j["b"].is_array()) {
    throw std::invalid_argument("filter spec JSON: expected an object with array field \"b\"");
  }
  FilterSpec spec;
  spec.name = j.value("name", std::string("custom"));
  if (j.contains("a")) {
    if (!j["a"].is_array()) throw std::invalid_argument("filter spec JSON: \"a\" must be an array");
    spec.a = j["a"].get<std::vector<double>>();
  }
  spec.b = j["b"].get<std::vector<double>>();
  check_finite(spec);
  return spec;
}

FilterState::FilterState(FilterSpec spec, std::size_t dim) : spec_(std::move(spec)), dim_(dim) {
  check_finite(spec_);
  if (dim_ == 0) throw std::invalid_argument("FilterState: dim must be positive");
  const std::size_t na = spec_.a.size();
  const std::size_t nb = spec_.b.size() - 1;  // taps b_0..b_nb
  m_hist_.assign(na, std::vector<double>(dim_, 0.0));
  g_hist_.assign(nb, std::vector<double>(dim_, 0.0));
  ca_hist_.assign(na, 0.0);
  cb_hist_.assign(nb, 0.0);
  m_scratch_.assign(dim_, 0.0);
}

void FilterState::reset() {
  for (auto& v : m_hist_) std::fill(v.begin(), v.end(), 0.0);
  for (auto& v : g_hist_) std::fill(v.begin(), v.end(), 0.0);
  std::fill(ca_hist_.begin(), ca_hist_.end(), 0.0);
  std::fill(cb_hist_.begin(), cb_hist_.end(), 0.0);
  t_ = 0;
  last_bias_ = 1.0;
}

void FilterState::step(std::span<const double> g, std::span<double> out) {
  if (g.size() != dim_ || out.size() != dim_) {
    throw std::invalid_argument("FilterState::step: dimension mismatch");
  }
  const std::size_t na = spec_.a.size();
  const std::size_t nb = spec_.b.size() - 1;

  // m_t and its constant-input twin c_{a,t}; histories are zero before start,
  // so no boundary branches are needed (c_b history likewise starts at zero).
  std::fill(m_scratch_.begin(), m_scratch_.end(), 0.0);
  double ca = 0.0;
  for (std::size_t tau = 1; tau <= na; ++tau) {
    const double coeff = -spec_.a[tau - 1];
    kernels::axpy(coeff, m_hist_[tau - 1].data(), m_scratch_.data(), dim_);
    ca += coeff * ca_hist_[tau - 1];
  }
  kernels::axpy(spec_.b[0], g.data(), m_scratch_.data(), dim_);
  ca += spec_.b[0] * 1.0;  // c_{b,t} = 1
  for (std::size_t tau = 1; tau <= nb; ++tau) {
    kernels::axpy(spec_.b[tau], g_hist_[tau - 1].data(), m_scratch_.data(), dim_);
    ca += spec_.b[tau] * cb_hist_[tau - 1];
  }
  last_bias_ = ca;

  if (bias_correction_) {
    if (std::abs(ca) <= kBiasFloor) {
      throw DegenerateBiasError("filter '" + spec_.name + "': bias correction c_a(" +
                                std::to_string(t_) + ") = " + std::to_string(ca) +
                                " is numerically zero");
    }
    const double inv = 1.0 / ca;
    for (std::size_t i = 0; i < dim_; ++i) out[i] = m_scratch_[i] * inv;
  } else {
    std::copy(m_scratch_.begin(), m_scratch_.end(), out.begin());
  }

  // Shift histories: slot 0 becomes step t.
  if (na > 0) {
    std::rotate(m_hist_.rbegin(), m_hist_.rbegin() + 1, m_hist_.rend());
    std::swap(m_hist_[0], m_scratch_);
    std::rotate(ca_hist_.rbegin(), ca_hist_.rbegin() + 1, ca_hist_.rend());
    ca_hist_[0] = ca;
    m_scratch_.assign(dim_, 0.0);
  }
  if (nb > 0) {
    std::rotate(g_hist_.rbegin(), g_hist_.rbegin() + 1, g_hist_.rend());
    g_hist_[0].assign(g.begin(), g.end());
    std::rotate(cb_hist_.rbegin(), cb_hist_.rbegin() + 1, cb_hist_.rend());
    cb_hist_[0] = 1.0;
  }
  ++t_;
}

std::vector<double> FilterState::step(std::span<const double> g) {
  std::vector<double> out(dim_);
  step(g, std::span<double>(out));
  return out;
}

std::vector<double> impulse_response(const FilterSpec& spec, std::size_t len) {
  check_finite(spec);
  const std::size_t na = spec.a.size();
  std::vector<double> kappa(len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    double acc = t < spec.b.size() ? spec.b[t] : 0.0;
    for (std::size_t tau = 1; tau <= na && tau <= t; ++tau) {
      acc -= spec.a[tau - 1] * kappa[t - tau];
    }
    kappa[t] = acc;
  }
  return kappa;
}

PoleZeroDecomposition pole_zero_decompose(const FilterSpec& spec) {
  check_finite(spec);
  PoleZeroDecomposition out;
  out.poles = characteristic_roots(spec.a);
  const std::size_t n = out.poles.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(out.poles[i] - out.poles[j]) <= kSimplePoleTolerance) {
        throw RepeatedPoleError(
            "filter '" + spec.name +
            "': repeated or near-repeated poles; partial fractions are ill-conditioned, use the "
            "time-domain recursion path");
      }
    }
  }
  out.residues.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::complex<double> denom = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) denom *= 1.0 - out.poles[i] / out.poles[j];
    }
    out.residues[j] = 1.0 / denom;
  }
  return out;
}

std::vector<double> kappa_closed_form(const FilterSpec& spec, std::size_t len) {
  const auto decomp = pole_zero_decompose(spec);
  const std::size_t npoles = decomp.poles.size();
  if (npoles == 0) {
    // Pure feedforward: kappa_tau = b_tau.
    std::vector<double> kappa(len, 0.0);
    for (std::size_t t = 0; t < len && t < spec.b.size(); ++t) kappa[t] = spec.b[t];
    return kappa;
  }
  // h_s = sum_j z_j p_j^s is the impulse response of the feedback part alone.
  std::vector<double> h(len, 0.0);
  std::vector<std::complex<double>> pw(npoles, 1.0);
  for (std::size_t s = 0; s < len; ++s) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < npoles; ++j) acc += decomp.residues[j] * pw[j];
    if (std::abs(acc.imag()) > kImagTolerance * (1.0 + std::abs(acc.real()))) {
      throw std::runtime_error("kappa_closed_form: residual imaginary part " +
                               std::to_string(acc.imag()) + " at lag " + std::to_string(s));
    }
    h[s] = acc.real();
    for (std::size_t j = 0; j < npoles; ++j) pw[j] *= decomp.poles[j];
  }
  std::vector<double> kappa(len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    double acc = 0.0;
    const std::size_t top = std::min(t, spec.b.size() - 1);
    for (std::size_t tau2 = 0; tau2 <= top; ++tau2) acc += spec.b[tau2] * h[t - tau2];
    kappa[t] = acc;
  }
  return kappa;
}

double normalized_snr(std::span<const double> kappa, const AutoCorrelationProfile& profile,
                      std::size_t T) {
  if (T == 0) throw std::invalid_argument("normalized_snr: T must be positive");
  if (kappa.size() < T) {
    throw std::invalid_argument("normalized_snr: impulse response shorter than horizon T");
  }
  double prefix_signal = 0.0, prefix_noise = 0.0;
  double total_signal = 0.0, total_noise = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    prefix_signal += profile.at(t) * kappa[t];
    prefix_noise += kappa[t] * kappa[t];
    total_signal += prefix_signal;
    total_noise += prefix_noise;
  }
  if (total_noise <= 0.0) {
    throw std::invalid_argument("normalized_snr: impulse response has no energy over the horizon");
  }
  return total_signal / total_noise;
}

FilterSpec design_optimal_fir(const AutoCorrelationProfile& profile, std::size_t order) {
  double sum = 0.0;
  for (std::size_t tau = 0; tau <= order; ++tau) sum += profile.at(tau);
  if (!(sum > 0.0)) {
    throw std::invalid_argument("design_optimal_fir: autocorrelation sum over the window must be "
                                "positive, got " + std::to_string(sum));
  }
  FilterSpec spec;
  spec.name = "fir_designed";
  spec.b.resize(order + 1);
  for (std::size_t tau = 0; tau <= order; ++tau) spec.b[tau] = profile.at(tau) / sum;
  return spec;
}

AutoCorrelationProfile estimate_autocorrelation(const std::vector<std::vector<double>>& window,
                                                double sigma_dp, std::size_t max_lag,
                                                double eps1) {
  const std::size_t W = window.size();
  if (W == 0) throw std::invalid_argument("estimate_autocorrelation: empty window");
  if (max_lag >= W) {
    throw std::invalid_argument("estimate_autocorrelation: max_lag must be < window size");
  }
  const std::size_t d = window[0].size();
  for (const auto& g : window) {
    if (g.size() != d) throw std::invalid_argument("estimate_autocorrelation: ragged window");
  }
  const double noise_floor = static_cast<double>(d) * sigma_dp * sigma_dp;
  std::vector<double> sq(W);
  for (std::size_t t = 0; t < W; ++t) sq[t] = kernels::squared_norm(window[t].data(), d);

  AutoCorrelationProfile profile;
  profile.c.resize(max_lag + 1);
  profile.c_neg = 0.5;
  profile.c[0] = 0.5;  // by definition of the symmetric split of phi(0)
  for (std::size_t tau = 1; tau <= max_lag; ++tau) {
    double num = 0.0, den = 0.0;
    for (std::size_t t = tau; t < W; ++t) {
      const double cross = kernels::dot(window[t].data(), window[t - tau].data(), d);
      num += cross - 0.5 * std::max(sq[t - tau] - noise_floor, 0.0);
      den += std::max(sq[t] - noise_floor, eps1);
    }
    profile.c[tau] = num / den;
  }
  return profile;
}

std::complex<double> frequency_response(const FilterSpec& spec, double nu) {
  const std::complex<double> i2pinu(0.0, -2.0 * std::numbers::pi * nu);
  std::complex<double> num = 0.0, den = 1.0;
  for (std::size_t tau = 0; tau < spec.b.size(); ++tau) {
    num += spec.b[tau] * std::exp(i2pinu * static_cast<double>(tau));
  }
  for (std::size_t tau = 1; tau <= spec.a.size(); ++tau) {
    den += spec.a[tau - 1] * std::exp(i2pinu * static_cast<double>(tau));
  }
  return num / den;
}

}  // namespace lpdp
