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

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Low-pass gradient filtering. A filter is the linear recursion
//
//   m_t = -sum_{tau=1..n_a} a_tau * m_{t-tau} + sum_{tau=0..n_b} b_tau * g_{t-tau}
//
// applied elementwise to vector inputs, with histories zero-initialized. Because
// the zero start biases early outputs toward zero, each step also tracks the
// scalar response to a constant unit input,
//
//   c_{b,t} = 1,   c_{a,t} = -sum a_tau c_{a,t-tau} + sum b_tau c_{b,t-tau},
//
// and emits the corrected output mhat_t = m_t / c_{a,t}, which is exact for
// constant inputs at every t.
namespace lpdp {

inline constexpr double kStabilityMargin = 1e-9;   // stable iff max |pole| < 1 - margin
inline constexpr double kSimplePoleTolerance = 1e-8;
inline constexpr double kBiasFloor = 1e-12;        // |c_a| at or below this is degenerate
inline constexpr double kImagTolerance = 1e-9;     // residual imaginary parts above this are a bug
inline constexpr double kUnitGainTolerance = 1e-9;

struct FilterSpec {
  std::vector<double> a;  // feedback taps a_1..a_na (a_tau multiplies m_{t-tau})
  std::vector<double> b;  // feedforward taps b_0..b_nb
  std::string name;
};

// Thrown by pole_zero_decompose when poles are repeated or closer than
// kSimplePoleTolerance: the partial-fraction residues are ill-defined, use the
// time-domain recursion path instead.
class RepeatedPoleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown by FilterState::step when |c_{a,t}| <= kBiasFloor and the corrected
// output would blow up.
class DegenerateBiasError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidationReport {
  double unit_gain_error = 0.0;  // | -sum(a) + sum(b) - 1 |
  bool unit_gain = false;        // unit_gain_error <= kUnitGainTolerance
  double max_pole_magnitude = 0.0;
  bool stable = false;  // max |pole| < 1 - kStabilityMargin (no feedback => stable)
  std::vector<std::complex<double>> poles;
};

// Checks gain and pole locations. Throws std::invalid_argument when b is empty
// or any coefficient is non-finite (the message names the array and index).
ValidationReport validate_spec(const FilterSpec& spec);

// Built-in filter table. Throws std::invalid_argument for unknown names.
const FilterSpec& preset(const std::string& name);
const std::vector<std::string>& preset_names();

std::string spec_to_json(const FilterSpec& spec);
FilterSpec spec_from_json(const std::string& text);

// Streaming filter over fixed-dimension vectors, with bias correction.
class FilterState {
 public:
  FilterState(FilterSpec spec, std::size_t dim);

  // Consumes g_t, returns mhat_t in `out` (both of size dim()).
  void step(std::span<const double> g, std::span<double> out);
  std::vector<double> step(std::span<const double> g);

  // Zeroes all histories and the step counter.
  void reset();

  std::size_t dim() const { return dim_; }
  std::size_t steps_taken() const { return t_; }
  double last_bias() const { return last_bias_; }  // c_{a,t} of the latest step
  const FilterSpec& spec() const { return spec_; }

  // When false, step() skips the division by c_{a,t} (raw recursion output).
  void set_bias_correction(bool enabled) { bias_correction_ = enabled; }

 private:
  FilterSpec spec_;
  std::size_t dim_;
  std::size_t t_ = 0;
  bool bias_correction_ = true;
  double last_bias_ = 1.0;
  // Ring buffers, most recent first: m_hist_[0] is m_{t-1} once t > 0.
  std::vector<std::vector<double>> m_hist_, g_hist_;
  std::vector<double> ca_hist_, cb_hist_;
  std::vector<double> m_scratch_;
};

// kappa_tau for tau = 0..len-1 via the time-domain recursion on a unit impulse.
std::vector<double> impulse_response(const FilterSpec& spec, std::size_t len);

struct PoleZeroDecomposition {
  std::vector<std::complex<double>> poles;     // roots of z^na + sum a_tau z^(na-tau)
  std::vector<std::complex<double>> residues;  // z_j with sum_j z_j/(1 - p_j x) = 1/A(x)
};

// Requires simple poles (pairwise distance > kSimplePoleTolerance), else throws
// RepeatedPoleError. A specification without feedback decomposes to empty lists.
PoleZeroDecomposition pole_zero_decompose(const FilterSpec& spec);

// kappa_tau = sum_{tau2<=min(nb,tau)} b_tau2 * sum_j z_j p_j^(tau-tau2), evaluated
// from the decomposition. Residual imaginary parts above kImagTolerance raise
// std::runtime_error (internal inconsistency); below that they are dropped.
std::vector<double> kappa_closed_form(const FilterSpec& spec, std::size_t len);

// Gradient autocorrelation profile: c[tau] estimates the forward coefficient
// c_tau; lookups beyond the stored length extend with the last value. The
// backward coefficients are the constant c_neg (1/2 under the symmetric
// approximation used throughout).
struct AutoCorrelationProfile {
  std::vector<double> c;
  double c_neg = 0.5;

  double at(std::size_t tau) const {
    if (c.empty()) throw std::invalid_argument("AutoCorrelationProfile: empty profile");
    return tau < c.size() ? c[tau] : c.back();
  }
};

// Normalized signal-to-noise ratio of a filter with impulse response kappa under
// the profile, over horizon T:
//
//   SNR = (sum_{t<T} sum_{tau<=t} c_tau kappa_tau) / (sum_{t<T} sum_{tau<=t} kappa_tau^2)
//
// Requires kappa.size() >= T and T >= 1. O(T) via prefix sums.
double normalized_snr(std::span<const double> kappa, const AutoCorrelationProfile& profile,
                      std::size_t T);

// FIR matched to the profile: b_tau = c_tau / sum_{tau<=order} c_tau, no feedback.
// Throws std::invalid_argument if the normalizing sum is not positive.
FilterSpec design_optimal_fir(const AutoCorrelationProfile& profile, std::size_t order);

// Estimates c_tau from a window of privatized gradients:
//
//   chat_tau = avg_t[ <g_t, g_{t-tau}> - 1/2 max(||g_{t-tau}||^2 - d sigma_dp^2, 0) ]
//            / avg_t[ max(||g_t||^2 - d sigma_dp^2, eps1) ]
//
// with both averages over the aligned pairs t = tau..W-1, and chat_0 pinned to
// 1/2. Requires max_lag < window size and a nonempty window of equal-dimension
// vectors.
AutoCorrelationProfile estimate_autocorrelation(const std::vector<std::vector<double>>& window,
                                                double sigma_dp, std::size_t max_lag,
                                                double eps1 = 1e-3);

// H(nu) = (sum_tau b_tau e^{-i 2 pi nu tau}) / (1 + sum_tau a_tau e^{-i 2 pi nu tau}).
std::complex<double> frequency_response(const FilterSpec& spec, double nu);

}  // namespace lpdp
