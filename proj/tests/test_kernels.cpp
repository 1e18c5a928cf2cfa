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
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "lpdp/kernels.hpp"
#include "lpdp/rng.hpp"

using lpdp::NoiseSource;
namespace kernels = lpdp::kernels;

namespace {

// Restores the kAuto dispatch no matter how a test exits.
struct BackendGuard {
  ~BackendGuard() { kernels::set_backend(kernels::Backend::kAuto); }
};

std::vector<double> random_vector(NoiseSource& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.gaussian();
  return v;
}

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * (1.0 + std::max(std::abs(a), std::abs(b)));
}

// Lengths that cover the 4-wide SIMD main loop, its remainder tail, and the
// empty case.
const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 33, 100};

}  // namespace

TEST_CASE("scalar kernels match hand calculations") {
  BackendGuard guard;
  kernels::set_backend(kernels::Backend::kScalar);

  const double x[] = {1.0, 2.0, 3.0};
  const double y[] = {4.0, 5.0, 6.0};
  CHECK(kernels::dot(x, y, 3) == 32.0);
  CHECK(kernels::dot(x, y, 0) == 0.0);

  const double v34[] = {3.0, 4.0};
  CHECK(kernels::squared_norm(v34, 2) == 25.0);

  double acc[] = {3.0, 4.0};
  const double ones[] = {1.0, 1.0};
  kernels::axpy(2.0, ones, acc, 2);
  CHECK(acc[0] == 5.0);
  CHECK(acc[1] == 6.0);

  double s[] = {2.0, -6.0};
  kernels::scale(s, 0.5, 2);
  CHECK(s[0] == 1.0);
  CHECK(s[1] == -3.0);

  double v[] = {1.0};
  const double g[] = {2.0};
  kernels::ema_square(v, g, 0.5, 1);
  CHECK(v[0] == 2.5);  // 0.5*1 + 0.5*4

  double out[1];
  const double m[] = {3.0};
  const double vsq[] = {4.0};
  kernels::adam_direction(out, m, vsq, 1.0, 1e-8, 1);
  CHECK(out[0] == 1.5);  // 3 / sqrt(4)

  const double vzero[] = {0.0};
  kernels::adam_direction(out, m, vzero, 1.0, 0.5, 1);
  CHECK(out[0] == 6.0);  // eps floor: 3 / 0.5

  // inv_bias rescales the denominator: v=1, inv_bias=4 -> sqrt(4)=2.
  const double vone[] = {1.0};
  kernels::adam_direction(out, m, vone, 4.0, 1e-8, 1);
  CHECK(out[0] == 1.5);
}

TEST_CASE("scalar kernels match reference loops on random data") {
  BackendGuard guard;
  kernels::set_backend(kernels::Backend::kScalar);
  NoiseSource rng(2024);

  for (const std::size_t n : kLengths) {
    const std::vector<double> x = random_vector(rng, n);
    const std::vector<double> y = random_vector(rng, n);

    double dot_ref = 0.0, sq_ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot_ref += x[i] * y[i];
      sq_ref += x[i] * x[i];
    }
    CHECK(close_rel(kernels::dot(x.data(), y.data(), n), dot_ref, 1e-15));
    CHECK(close_rel(kernels::squared_norm(x.data(), n), sq_ref, 1e-15));

    std::vector<double> acc = y;
    kernels::axpy(0.75, x.data(), acc.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(acc[i] == y[i] + 0.75 * x[i]);

    std::vector<double> v = random_vector(rng, n);
    for (auto& e : v) e = e * e;  // keep the EMA state nonnegative
    std::vector<double> v_ref = v;
    kernels::ema_square(v.data(), x.data(), 0.1, n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(close_rel(v[i], 0.9 * v_ref[i] + 0.1 * x[i] * x[i], 1e-15));
    }

    std::vector<double> dir(n);
    kernels::adam_direction(dir.data(), x.data(), v.data(), 2.0, 1e-8, n);
    for (std::size_t i = 0; i < n; ++i) {
      const double denom = std::max(std::sqrt(v[i] * 2.0), 1e-8);
      CHECK(close_rel(dir[i], x[i] / denom, 1e-15));
    }
  }
}

TEST_CASE("avx2 kernels agree with scalar kernels") {
  if (!kernels::cpu_supports_avx2()) {
    MESSAGE("cpu lacks avx2; dispatch equivalence not exercised here");
    return;
  }
  BackendGuard guard;
  NoiseSource rng(77);

  for (const std::size_t n : kLengths) {
    const std::vector<double> x = random_vector(rng, n);
    const std::vector<double> y = random_vector(rng, n);
    const std::vector<double> vsq = [&] {
      std::vector<double> v = random_vector(rng, n);
      for (auto& e : v) e = e * e;
      return v;
    }();

    kernels::set_backend(kernels::Backend::kScalar);
    const double dot_s = kernels::dot(x.data(), y.data(), n);
    const double sq_s = kernels::squared_norm(x.data(), n);
    std::vector<double> axpy_s = y;
    kernels::axpy(-1.25, x.data(), axpy_s.data(), n);
    std::vector<double> scale_s = x;
    kernels::scale(scale_s.data(), 3.5, n);
    std::vector<double> ema_s = vsq;
    kernels::ema_square(ema_s.data(), x.data(), 0.1, n);
    std::vector<double> adam_s(n);
    kernels::adam_direction(adam_s.data(), x.data(), vsq.data(), 1.25, 1e-8, n);

    kernels::set_backend(kernels::Backend::kAvx2);
    CHECK(std::string(kernels::backend_name()) == "avx2");
    const double dot_a = kernels::dot(x.data(), y.data(), n);
    const double sq_a = kernels::squared_norm(x.data(), n);
    std::vector<double> axpy_a = y;
    kernels::axpy(-1.25, x.data(), axpy_a.data(), n);
    std::vector<double> scale_a = x;
    kernels::scale(scale_a.data(), 3.5, n);
    std::vector<double> ema_a = vsq;
    kernels::ema_square(ema_a.data(), x.data(), 0.1, n);
    std::vector<double> adam_a(n);
    kernels::adam_direction(adam_a.data(), x.data(), vsq.data(), 1.25, 1e-8, n);

    // Reductions may reassociate; elementwise ops must agree exactly apart
    // from FMA contraction.
    CHECK(close_rel(dot_a, dot_s, 1e-12));
    CHECK(close_rel(sq_a, sq_s, 1e-12));
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(close_rel(axpy_a[i], axpy_s[i], 1e-13));
      CHECK(close_rel(scale_a[i], scale_s[i], 1e-13));
      CHECK(close_rel(ema_a[i], ema_s[i], 1e-13));
      CHECK(close_rel(adam_a[i], adam_s[i], 1e-12));
    }
  }
}

TEST_CASE("backend forcing and reporting") {
  BackendGuard guard;

  kernels::set_backend(kernels::Backend::kScalar);
  CHECK(kernels::active_backend() == kernels::Backend::kScalar);
  CHECK(std::string(kernels::backend_name()) == "scalar");

  kernels::set_backend(kernels::Backend::kAuto);
  // Auto resolves to a concrete backend, never reports kAuto.
  CHECK(kernels::active_backend() != kernels::Backend::kAuto);

  if (kernels::cpu_supports_avx2()) {
    kernels::set_backend(kernels::Backend::kAvx2);
    CHECK(kernels::active_backend() == kernels::Backend::kAvx2);
  } else {
    CHECK_THROWS_AS(kernels::set_backend(kernels::Backend::kAvx2), std::invalid_argument);
  }
}
