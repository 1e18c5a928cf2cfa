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

#include "lpdp/trace_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lpdp {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& path) {
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("trace file '" + path + "': '" + s + "' is not numeric");
  }
  return value;
}

std::uint64_t parse_u64(const std::string& s, const std::string& path, int base = 10) {
  try {
    std::size_t used = 0;
    const std::uint64_t value = std::stoull(s, &used, base);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw std::runtime_error("trace file '" + path + "': '" + s + "' is not a valid integer");
  }
}

// Leading "# key=value key=value ..." comment line -> map.
std::map<std::string, std::string> parse_comment_header(const std::string& line,
                                                        const std::string& path) {
  if (line.rfind("# ", 0) != 0) {
    throw std::runtime_error("trace file '" + path +
                             "': missing '# config_hash=...' comment line");
  }
  std::map<std::string, std::string> kv;
  std::istringstream in(line.substr(2));
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return kv;
}

std::uint64_t header_hash(const std::map<std::string, std::string>& kv, const std::string& path) {
  const auto it = kv.find("config_hash");
  if (it == kv.end() || it->second.rfind("0x", 0) != 0) {
    throw std::runtime_error("trace file '" + path + "': missing config_hash in header");
  }
  return parse_u64(it->second.substr(2), path, 16);
}

}  // namespace

void write_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "# config_hash=" << hash_hex(trace.config_hash) << " seed=" << trace.seed << "\n";
  out << "t,loss,grad_norm,g_norm,bias\n";
  for (const auto& rec : trace.records) {
    out << rec.t << ',' << format_double(rec.loss) << ',' << format_double(rec.grad_norm) << ','
        << format_double(rec.g_norm) << ',' << format_double(rec.bias) << "\n";
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

RunTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace file '" + path + "' is empty");
  const auto kv = parse_comment_header(line, path);
  RunTrace trace;
  trace.config_hash = header_hash(kv, path);
  if (const auto it = kv.find("seed"); it != kv.end()) trace.seed = parse_u64(it->second, path);
  if (!std::getline(in, line) || split_on(line, ',') !=
                                     std::vector<std::string>{"t", "loss", "grad_norm", "g_norm",
                                                              "bias"}) {
    throw std::runtime_error("trace file '" + path + "': unexpected column header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_on(line, ',');
    if (fields.size() != 5) {
      throw std::runtime_error("trace file '" + path + "': malformed row '" + line + "'");
    }
    TraceRecord rec;
    rec.t = parse_u64(fields[0], path);
    rec.loss = parse_double(fields[1], path);
    rec.grad_norm = parse_double(fields[2], path);
    rec.g_norm = parse_double(fields[3], path);
    rec.bias = parse_double(fields[4], path);
    trace.records.push_back(rec);
  }
  if (!trace.records.empty()) trace.final_loss = trace.records.back().loss;
  return trace;
}

void write_snapshots_csv(const std::string& path, const RunTrace& trace, double sigma_dp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const std::size_t dim = trace.g_snapshots.empty() ? 0 : trace.g_snapshots.front().size();
  out << "# config_hash=" << hash_hex(trace.config_hash) << " seed=" << trace.seed
      << " dim=" << dim << " sigma_dp=" << format_double(sigma_dp) << "\n";
  out << "t,kind";
  for (std::size_t j = 0; j < dim; ++j) out << ",v" << j;
  out << "\n";
  for (std::size_t s = 0; s < trace.snapshot_steps.size(); ++s) {
    out << trace.snapshot_steps[s] << ",g";
    for (double v : trace.g_snapshots[s]) out << ',' << format_double(v);
    out << "\n";
    out << trace.snapshot_steps[s] << ",dir";
    for (double v : trace.dir_snapshots[s]) out << ',' << format_double(v);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

SnapshotFile read_snapshots_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("snapshot file '" + path + "' is empty");
  const auto kv = parse_comment_header(line, path);
  SnapshotFile file;
  file.config_hash = header_hash(kv, path);
  if (const auto it = kv.find("seed"); it != kv.end()) file.seed = parse_u64(it->second, path);
  if (const auto it = kv.find("dim"); it != kv.end()) {
    file.dim = static_cast<std::size_t>(parse_u64(it->second, path));
  }
  if (const auto it = kv.find("sigma_dp"); it != kv.end()) {
    file.sigma_dp = parse_double(it->second, path);
  }
  if (!std::getline(in, line)) {
    throw std::runtime_error("snapshot file '" + path + "': missing column header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_on(line, ',');
    if (fields.size() != file.dim + 2) {
      throw std::runtime_error("snapshot file '" + path + "': malformed row '" + line + "'");
    }
    std::vector<double> values(file.dim);
    for (std::size_t j = 0; j < file.dim; ++j) values[j] = parse_double(fields[j + 2], path);
    const std::size_t t = static_cast<std::size_t>(parse_u64(fields[0], path));
    if (fields[1] == "g") {
      file.steps.push_back(t);
      file.g.push_back(std::move(values));
    } else if (fields[1] == "dir") {
      file.dir.push_back(std::move(values));
    } else {
      throw std::runtime_error("snapshot file '" + path + "': unknown row kind '" + fields[1] +
                               "'");
    }
  }
  return file;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace lpdp
