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

#include "lpdp/kernels.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace lpdp::kernels {

namespace scalar {

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double squared_norm(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double* x, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void ema_square(double* v, const double* g, double beta, std::size_t n) {
  const double keep = 1.0 - beta;
  for (std::size_t i = 0; i < n; ++i) v[i] = keep * v[i] + beta * g[i] * g[i];
}

void adam_direction(double* out, const double* m, const double* v, double inv_bias, double eps,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = m[i] / std::max(std::sqrt(v[i] * inv_bias), eps);
  }
}

}  // namespace scalar

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

namespace {

constexpr bool kHaveAvx2Tu =
#if defined(LPDP_HAVE_AVX2_TU)
    true;
#else
    false;
#endif

std::atomic<Backend> g_requested{Backend::kAuto};

Backend resolve(Backend requested) {
  if (requested != Backend::kAuto) return requested;
  return (kHaveAvx2Tu && cpu_supports_avx2()) ? Backend::kAvx2 : Backend::kScalar;
}

}  // namespace

void set_backend(Backend backend) {
  if (backend == Backend::kAvx2 && (!kHaveAvx2Tu || !cpu_supports_avx2())) {
    throw std::invalid_argument("kernels: AVX2 backend unavailable on this build/CPU");
  }
  g_requested.store(backend, std::memory_order_relaxed);
}

Backend active_backend() { return resolve(g_requested.load(std::memory_order_relaxed)); }

const char* backend_name() {
  return active_backend() == Backend::kAvx2 ? "avx2" : "scalar";
}

#if defined(LPDP_HAVE_AVX2_TU)
#define LPDP_DISPATCH(fn, ...) \
  return active_backend() == Backend::kAvx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#define LPDP_DISPATCH_VOID(fn, ...)                   \
  if (active_backend() == Backend::kAvx2) {           \
    avx2::fn(__VA_ARGS__);                            \
  } else {                                            \
    scalar::fn(__VA_ARGS__);                          \
  }                                                   \
  return
#else
#define LPDP_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#define LPDP_DISPATCH_VOID(fn, ...) \
  scalar::fn(__VA_ARGS__);          \
  return
#endif

double dot(const double* x, const double* y, std::size_t n) { LPDP_DISPATCH(dot, x, y, n); }

double squared_norm(const double* x, std::size_t n) { LPDP_DISPATCH(squared_norm, x, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  LPDP_DISPATCH_VOID(axpy, alpha, x, y, n);
}

void scale(double* x, double alpha, std::size_t n) { LPDP_DISPATCH_VOID(scale, x, alpha, n); }

void ema_square(double* v, const double* g, double beta, std::size_t n) {
  LPDP_DISPATCH_VOID(ema_square, v, g, beta, n);
}

void adam_direction(double* out, const double* m, const double* v, double inv_bias, double eps,
                    std::size_t n) {
  LPDP_DISPATCH_VOID(adam_direction, out, m, v, inv_bias, eps, n);
}

}  // namespace lpdp::kernels
