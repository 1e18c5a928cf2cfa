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

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lpdp/rng.hpp"
#include "lpdp/spectral.hpp"

using namespace lpdp;

TEST_CASE("autocorrelation of simple series") {
  SUBCASE("constant series") {
    const std::vector<std::vector<double>> series(8, std::vector<double>{2.0});
    const std::vector<double> phi = autocorrelation(series, 3);
    REQUIRE(phi.size() == 4);
    for (const double p : phi) CHECK(p == doctest::Approx(4.0).epsilon(1e-15));
  }

  SUBCASE("alternating sign flips the odd lags") {
    std::vector<std::vector<double>> series;
    for (int t = 0; t < 10; ++t) series.push_back({t % 2 == 0 ? 1.0 : -1.0});
    const std::vector<double> phi = autocorrelation(series, 2);
    CHECK(phi[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(phi[1] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(phi[2] == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("each lag is averaged over its own T - tau terms") {
    // Two samples, lag 1: a single product, not divided by T.
    const std::vector<std::vector<double>> series = {{3.0}, {5.0}};
    const std::vector<double> phi = autocorrelation(series, 1);
    CHECK(phi[0] == doctest::Approx((9.0 + 25.0) / 2.0).epsilon(1e-15));
    CHECK(phi[1] == doctest::Approx(15.0).epsilon(1e-15));
  }

  SUBCASE("iid noise decorrelates") {
    NoiseSource rng(11);
    std::vector<std::vector<double>> series;
    const std::size_t d = 64, T = 4000;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> s(d);
      for (auto& x : s) x = rng.gaussian();
      series.push_back(s);
    }
    const std::vector<double> phi = autocorrelation(series, 4);
    CHECK(phi[0] == doctest::Approx(double(d)).epsilon(0.05));
    for (std::size_t tau = 1; tau < phi.size(); ++tau) {
      CHECK(std::abs(phi[tau]) < 0.05 * phi[0]);
    }
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(autocorrelation({}, 0), std::invalid_argument);
    const std::vector<std::vector<double>> series(4, std::vector<double>{1.0});
    CHECK_THROWS_AS(autocorrelation(series, 4), std::invalid_argument);
    std::vector<std::vector<double>> ragged = series;
    ragged[1].push_back(2.0);
    CHECK_THROWS_AS(autocorrelation(ragged, 1), std::invalid_argument);
  }
}

TEST_CASE("correlogram power spectrum") {
  SUBCASE("white autocovariance gives a flat spectrum") {
    // phi = {c, 0, 0, ...} -> P(nu) = c at every frequency.
    const std::vector<double> phi = {3.7, 0.0, 0.0, 0.0, 0.0};
    const SpectralEstimate est = psd_from_autocorrelation(phi);
    REQUIRE(est.nu.size() == 5);           // k = 0..L with L = 4
    CHECK(est.nu[0] == 0.0);
    CHECK(est.nu[4] == doctest::Approx(4.0 / 9.0).epsilon(1e-15));  // k/(2L+1)
    for (const double p : est.power) CHECK(p == doctest::Approx(3.7).epsilon(1e-15));
    CHECK(est.phi0 == 3.7);
  }

  SUBCASE("grid and cosine series restated directly") {
    const std::vector<double> phi = {1.0, 0.5, -0.25, 0.1};
    const std::size_t L = phi.size() - 1;
    const SpectralEstimate est = psd_from_autocorrelation(phi);
    REQUIRE(est.nu.size() == L + 1);
    for (std::size_t k = 0; k <= L; ++k) {
      const double nu = double(k) / double(2 * L + 1);
      CHECK(est.nu[k] == doctest::Approx(nu).epsilon(1e-15));
      double expected = phi[0];
      for (std::size_t tau = 1; tau <= L; ++tau) {
        expected += 2.0 * phi[tau] * std::cos(2.0 * M_PI * nu * double(tau));
      }
      CHECK(est.power[k] == doctest::Approx(expected).epsilon(1e-13));
    }
  }

  SUBCASE("a slowly decaying autocovariance concentrates power at low frequency") {
    std::vector<double> phi(16);
    for (std::size_t tau = 0; tau < phi.size(); ++tau) phi[tau] = std::pow(0.85, double(tau));
    const SpectralEstimate est = psd_from_autocorrelation(phi);
    for (std::size_t k = 1; k < est.power.size(); ++k) {
      CHECK(est.power[k] < est.power[k - 1]);  // monotone over the half grid
    }
  }

  SUBCASE("Parseval: the symmetric grid mean returns phi(0)") {
    const std::vector<double> phi = {2.0, -0.7, 0.33, 0.05, -0.4};
    const SpectralEstimate est = psd_from_autocorrelation(phi);
    CHECK(parseval_residual(est) < 1e-12);

    NoiseSource rng(123);
    std::vector<double> random_phi(24);
    for (auto& p : random_phi) p = rng.gaussian();
    CHECK(parseval_residual(psd_from_autocorrelation(random_phi)) < 1e-12);
  }

  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(psd_from_autocorrelation({}), std::invalid_argument);
  }
}

TEST_CASE("expected noise floor") {
  // d sigma_dp^2 + sigma_sgd^2 / B = 4*0.25 + 1/10.
  CHECK(expected_noise_psd(4, 0.5, 1.0, 10) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(expected_noise_psd(4, 0.5, 0.0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(expected_noise_psd(1, 0.0, 2.0, 4) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(expected_noise_psd(4, -0.5, 1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(expected_noise_psd(4, 0.5, -1.0, 10), std::invalid_argument);
  // A sampling-noise component without a batch size is meaningless.
  CHECK_THROWS_AS(expected_noise_psd(4, 0.5, 1.0, 0), std::invalid_argument);
}

TEST_CASE("white noise through a filter") {
  SUBCASE("pass-through keeps the floor flat") {
    const SpectralEstimate est = filtered_noise_psd(preset("sgd"), 2.5, 8);
    for (const double p : est.power) CHECK(p == doctest::Approx(2.5).epsilon(1e-12));
  }

  SUBCASE("zero level in, zero power out") {
    const SpectralEstimate est = filtered_noise_psd(preset("momentum"), 0.0, 8);
    for (const double p : est.power) CHECK(p == 0.0);
  }

  SUBCASE("the momentum design suppresses the top of the band by 361x") {
    const std::size_t L = 16;
    const SpectralEstimate est = filtered_noise_psd(preset("momentum"), 1.0, L);
    REQUIRE(est.nu.size() == L + 1);
    // The grid's top frequency is L/(2L+1), just below 1/2; compare against
    // |H|^2 evaluated directly.
    for (std::size_t k = 0; k < est.nu.size(); ++k) {
      const double expected = std::norm(frequency_response(preset("momentum"), est.nu[k]));
      CHECK(est.power[k] == doctest::Approx(expected).epsilon(1e-12));
    }
    const double dc = std::norm(frequency_response(preset("momentum"), 0.0));
    const double top = std::norm(frequency_response(preset("momentum"), 0.5));
    CHECK(dc / top == doctest::Approx(361.0).epsilon(1e-12));
    // On-grid check: strictly decreasing power toward the high band.
    CHECK(est.power.front() > est.power.back());
  }

  SUBCASE("grids line up with psd_from_autocorrelation") {
    const std::vector<double> phi(9, 0.0);
    const SpectralEstimate reference = psd_from_autocorrelation(phi);
    const SpectralEstimate filtered = filtered_noise_psd(preset("momentum"), 1.0, 8);
    CHECK(reference.nu == filtered.nu);
  }

  SUBCASE("unstable specs are rejected") {
    FilterSpec runaway;
    runaway.a = {-1.5};
    runaway.b = {0.5};
    runaway.name = "runaway";
    CHECK_THROWS_AS(filtered_noise_psd(runaway, 1.0, 8), std::invalid_argument);
  }
}
