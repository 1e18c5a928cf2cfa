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
#include <string>
#include <string_view>
#include <vector>

#include "lpdp/optim.hpp"

// Trace serialization. All files start with a comment line embedding the
// config hash so downstream commands can refuse mismatched inputs; all floats
// are written with enough digits to round-trip exactly, so reruns are
// byte-identical.
namespace lpdp {

std::uint64_t fnv1a64(std::string_view bytes);

// Shortest decimal string that round-trips the double exactly.
std::string format_double(double value);

// Per-step scalars: "# config_hash=0x<16 hex> seed=<seed>" then a header row
// "t,loss,grad_norm,g_norm,bias" and one row per record.
void write_trace_csv(const std::string& path, const RunTrace& trace);
RunTrace read_trace_csv(const std::string& path);

// Vector snapshots for spectral analysis: same comment line plus dim= and
// sigma_dp=, then "t,kind,v0..v{d-1}" rows with kind in {g, dir}.
void write_snapshots_csv(const std::string& path, const RunTrace& trace, double sigma_dp);

struct SnapshotFile {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::size_t dim = 0;
  double sigma_dp = 0.0;
  std::vector<std::size_t> steps;
  std::vector<std::vector<double>> g;    // privatized gradients
  std::vector<std::vector<double>> dir;  // dense update directions
};
SnapshotFile read_snapshots_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace lpdp
