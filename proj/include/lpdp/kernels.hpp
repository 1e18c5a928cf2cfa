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

// Dense double-precision primitives used by the hot loops (per-sample gradient
// clipping, noisy-mean accumulation, filter recursions, Adam updates). Every
// operation has a scalar reference implementation; on x86-64 an AVX2 variant is
// selected at runtime when the CPU supports it. The two paths are equivalence
// tested; results may differ by FP reassociation only.
namespace lpdp::kernels {

enum class Backend { kAuto, kScalar, kAvx2 };

// Force a backend (kAvx2 throws if the CPU lacks it). Default is kAuto.
void set_backend(Backend backend);
Backend active_backend();
const char* backend_name();
bool cpu_supports_avx2();

double dot(const double* x, const double* y, std::size_t n);
double squared_norm(const double* x, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
// v = (1 - beta) * v + beta * g^2   (elementwise)
void ema_square(double* v, const double* g, double beta, std::size_t n);
// out = m / max(sqrt(v * inv_bias), eps)   (elementwise)
void adam_direction(double* out, const double* m, const double* v, double inv_bias,
                    double eps, std::size_t n);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
double squared_norm(const double* x, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
void ema_square(double* v, const double* g, double beta, std::size_t n);
void adam_direction(double* out, const double* m, const double* v, double inv_bias,
                    double eps, std::size_t n);
}  // namespace scalar

namespace avx2 {
// Defined only when the library is built with the AVX2 translation unit; call
// through the dispatch entry points above unless testing the path directly.
double dot(const double* x, const double* y, std::size_t n);
double squared_norm(const double* x, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, double alpha, std::size_t n);
void ema_square(double* v, const double* g, double beta, std::size_t n);
void adam_direction(double* out, const double* m, const double* v, double inv_bias,
                    double eps, std::size_t n);
}  // namespace avx2

}  // namespace lpdp::kernels
