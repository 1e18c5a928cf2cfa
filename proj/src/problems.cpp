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

#include "lpdp/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "lpdp/kernels.hpp"
#include "lpdp/rng.hpp"
#include "lpdp/trace_io.hpp"

namespace lpdp {

namespace {

std::uint64_t hash_doubles(const std::vector<double>& values) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()),
                                  values.size() * sizeof(double)));
}

struct QuadraticData {
  std::vector<double> eigenvalues;   // diagonal of A
  std::vector<double> b;             // N x d, row-major
  std::vector<double> b_mean;        // empirical mean of the rows
  std::size_t dim = 0, n = 0;
};

struct LogisticData {
  std::vector<double> features;  // N x d, row-major
  std::vector<std::size_t> labels;
  std::size_t dim = 0, n = 0, k = 0;
};

// Softmax of W' * feat for column-major W (d x k); returns probabilities.
void softmax_scores(const LogisticData& data, const std::vector<double>& w, std::size_t i,
                    std::vector<double>& probs) {
  const double* feat = data.features.data() + i * data.dim;
  probs.resize(data.k);
  double max_score = -1e300;
  for (std::size_t c = 0; c < data.k; ++c) {
    probs[c] = kernels::dot(w.data() + c * data.dim, feat, data.dim);
    max_score = std::max(max_score, probs[c]);
  }
  double z = 0.0;
  for (std::size_t c = 0; c < data.k; ++c) {
    probs[c] = std::exp(probs[c] - max_score);
    z += probs[c];
  }
  for (std::size_t c = 0; c < data.k; ++c) probs[c] /= z;
}

Problem logistic_core(std::shared_ptr<const LogisticData> data, const std::string& kind) {
  Problem p;
  p.kind = kind;
  p.dim = data->dim * data->k;
  p.n_samples = data->n;
  p.matrix_rows = data->dim;
  p.matrix_cols = data->k;
  p.x0.assign(p.dim, 0.0);
  p.f_star = 0.0;  // cross-entropy is nonnegative
  p.strong_convexity = 0.0;

  double max_feat_sq = 0.0;
  for (std::size_t i = 0; i < data->n; ++i) {
    max_feat_sq = std::max(
        max_feat_sq, kernels::squared_norm(data->features.data() + i * data->dim, data->dim));
  }
  // ||softmax - onehot|| <= sqrt(2) and the per-sample Hessian curvature is at
  // most ||feat||^2, so these bounds are valid if not tight.
  p.grad_bound = std::sqrt(2.0 * max_feat_sq);
  p.lipschitz = max_feat_sq;
  p.sigma_sgd = 0.0;
  p.content_hash = hash_doubles(data->features);

  p.sample_loss = [data](const std::vector<double>& w, std::size_t i) {
    std::vector<double> probs;
    softmax_scores(*data, w, i, probs);
    const double py = std::max(probs[data->labels[i]], 1e-300);
    return -std::log(py);
  };
  p.sample_grad = [data](const std::vector<double>& w, std::size_t i, std::vector<double>& out) {
    std::vector<double> probs;
    softmax_scores(*data, w, i, probs);
    out.assign(data->dim * data->k, 0.0);
    const double* feat = data->features.data() + i * data->dim;
    for (std::size_t c = 0; c < data->k; ++c) {
      const double coeff = probs[c] - (c == data->labels[i] ? 1.0 : 0.0);
      kernels::axpy(coeff, feat, out.data() + c * data->dim, data->dim);
    }
  };
  p.loss = [data](const std::vector<double>& w) {
    double acc = 0.0;
    std::vector<double> probs;
    for (std::size_t i = 0; i < data->n; ++i) {
      softmax_scores(*data, w, i, probs);
      acc -= std::log(std::max(probs[data->labels[i]], 1e-300));
    }
    return acc / static_cast<double>(data->n);
  };
  p.full_grad = [data](const std::vector<double>& w, std::vector<double>& out) {
    out.assign(data->dim * data->k, 0.0);
    std::vector<double> probs;
    const double inv_n = 1.0 / static_cast<double>(data->n);
    for (std::size_t i = 0; i < data->n; ++i) {
      softmax_scores(*data, w, i, probs);
      const double* feat = data->features.data() + i * data->dim;
      for (std::size_t c = 0; c < data->k; ++c) {
        const double coeff = inv_n * (probs[c] - (c == data->labels[i] ? 1.0 : 0.0));
        kernels::axpy(coeff, feat, out.data() + c * data->dim, data->dim);
      }
    }
  };
  return p;
}

}  // namespace

Problem make_quadratic(std::size_t dim, double lipschitz, double mu, double sigma_sgd,
                       std::size_t n_samples, std::uint64_t seed) {
  if (dim == 0 || n_samples == 0) {
    throw std::invalid_argument("make_quadratic: dim and N must be positive");
  }
  if (!(mu > 0.0) || !(mu <= lipschitz)) {
    throw std::invalid_argument("make_quadratic: need 0 < mu <= L");
  }
  if (sigma_sgd < 0.0) throw std::invalid_argument("make_quadratic: sigma_sgd must be >= 0");

  auto data = std::make_shared<QuadraticData>();
  data->dim = dim;
  data->n = n_samples;
  data->eigenvalues.resize(dim);
  // Log-spaced spectrum with both endpoints exact, so the declared L and mu
  // are the true extreme eigenvalues.
  for (std::size_t j = 0; j < dim; ++j) {
    if (j == 0) {
      data->eigenvalues[j] = dim == 1 ? lipschitz : mu;
    } else if (j + 1 == dim) {
      data->eigenvalues[j] = lipschitz;
    } else {
      const double frac = static_cast<double>(j) / static_cast<double>(dim - 1);
      data->eigenvalues[j] = mu * std::pow(lipschitz / mu, frac);
    }
  }

  NoiseSource rng(seed);
  std::vector<double> b_bar(dim);
  for (std::size_t j = 0; j < dim; ++j) b_bar[j] = rng.gaussian();
  data->b.resize(n_samples * dim);
  const double zeta_scale = sigma_sgd / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      data->b[i * dim + j] = b_bar[j] + zeta_scale * rng.gaussian();
    }
  }
  data->b_mean.assign(dim, 0.0);
  for (std::size_t i = 0; i < n_samples; ++i) {
    kernels::axpy(1.0 / static_cast<double>(n_samples), data->b.data() + i * dim,
                  data->b_mean.data(), dim);
  }

  Problem p;
  p.kind = "quadratic";
  p.dim = dim;
  p.n_samples = n_samples;
  p.lipschitz = data->eigenvalues.back();
  p.strong_convexity = data->eigenvalues.front();
  p.sigma_sgd = sigma_sgd;
  p.grad_bound = 0.0;  // quadratics have no global gradient bound
  p.x0.assign(dim, 0.0);
  // F(x) = 1/2 x'Dx - bmean'x has minimizer x*_j = bmean_j / lambda_j.
  double f_star = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    f_star -= 0.5 * data->b_mean[j] * data->b_mean[j] / data->eigenvalues[j];
  }
  p.f_star = f_star;
  p.content_hash = hash_doubles(data->b);

  p.sample_loss = [data](const std::vector<double>& x, std::size_t i) {
    double acc = 0.0;
    const double* bi = data->b.data() + i * data->dim;
    for (std::size_t j = 0; j < data->dim; ++j) {
      acc += 0.5 * data->eigenvalues[j] * x[j] * x[j] - bi[j] * x[j];
    }
    return acc;
  };
  p.sample_grad = [data](const std::vector<double>& x, std::size_t i, std::vector<double>& out) {
    out.resize(data->dim);
    const double* bi = data->b.data() + i * data->dim;
    for (std::size_t j = 0; j < data->dim; ++j) out[j] = data->eigenvalues[j] * x[j] - bi[j];
  };
  p.loss = [data](const std::vector<double>& x) {
    double acc = 0.0;
    for (std::size_t j = 0; j < data->dim; ++j) {
      acc += 0.5 * data->eigenvalues[j] * x[j] * x[j] - data->b_mean[j] * x[j];
    }
    return acc;
  };
  p.full_grad = [data](const std::vector<double>& x, std::vector<double>& out) {
    out.resize(data->dim);
    for (std::size_t j = 0; j < data->dim; ++j) {
      out[j] = data->eigenvalues[j] * x[j] - data->b_mean[j];
    }
  };
  return p;
}

Problem make_logistic(std::size_t dim, std::size_t n_classes, std::size_t n_samples,
                      double separation, std::uint64_t seed) {
  if (dim == 0 || n_samples == 0) {
    throw std::invalid_argument("make_logistic: dim and N must be positive");
  }
  if (n_classes < 2) throw std::invalid_argument("make_logistic: need at least 2 classes");
  if (!(separation >= 0.0)) throw std::invalid_argument("make_logistic: separation must be >= 0");

  auto data = std::make_shared<LogisticData>();
  data->dim = dim;
  data->n = n_samples;
  data->k = n_classes;

  NoiseSource rng(seed);
  // Class centers: scaled basis vectors when they fit (pairwise distance
  // exactly `separation`), random directions of the same radius otherwise.
  std::vector<double> centers(n_classes * dim, 0.0);
  const double radius = separation / std::sqrt(2.0);
  if (n_classes <= dim) {
    for (std::size_t c = 0; c < n_classes; ++c) centers[c * dim + c] = radius;
  } else {
    for (std::size_t c = 0; c < n_classes; ++c) {
      double* row = centers.data() + c * dim;
      for (std::size_t j = 0; j < dim; ++j) row[j] = rng.gaussian();
      const double norm = std::sqrt(kernels::squared_norm(row, dim));
      if (norm > 0.0) kernels::scale(row, radius / norm, dim);
    }
  }
  data->features.resize(n_samples * dim);
  data->labels.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t y = i % n_classes;
    data->labels[i] = y;
    double* row = data->features.data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) row[j] = centers[y * dim + j] + rng.gaussian();
  }
  return logistic_core(std::move(data), "logistic");
}

Problem load_csv(const std::string& path, const std::string& label_column,
                 std::size_t max_cells) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur.push_back(ch);
      }
    }
    fields.push_back(cur);
    return fields;
  };

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: '" + path + "' is empty");
  const std::vector<std::string> header = split(line);
  std::size_t label_idx = header.size();
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == label_column) label_idx = j;
  }
  if (label_idx == header.size()) {
    std::ostringstream msg;
    msg << "load_csv: unknown label column '" << label_column << "'; header has:";
    for (const auto& h : header) msg << " " << h;
    throw std::runtime_error(msg.str());
  }
  const std::size_t n_cols = header.size();
  if (n_cols < 2) throw std::runtime_error("load_csv: need at least one feature column");

  std::vector<double> raw;    // all numeric cells, row-major
  std::size_t row_no = 1;     // header is row 1
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != n_cols) {
      std::ostringstream msg;
      msg << "load_csv: row " << row_no << ": expected " << n_cols << " fields, got "
          << fields.size();
      throw std::runtime_error(msg.str());
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      try {
        std::size_t used = 0;
        const double value = std::stod(fields[j], &used);
        if (used != fields[j].size()) throw std::invalid_argument("trailing characters");
        raw.push_back(value);
      } catch (const std::exception&) {
        std::ostringstream msg;
        msg << "load_csv: row " << row_no << ", column '" << header[j] << "': '" << fields[j]
            << "' is not numeric";
        throw std::runtime_error(msg.str());
      }
    }
    if (raw.size() > max_cells) {
      std::ostringstream msg;
      msg << "load_csv: '" << path << "' exceeds the cell cap of " << max_cells
          << "; raise problem.max_cells to load larger files";
      throw std::runtime_error(msg.str());
    }
  }
  const std::size_t n = raw.size() / n_cols;
  if (n == 0) throw std::runtime_error("load_csv: '" + path + "' has no data rows");

  auto data = std::make_shared<LogisticData>();
  data->dim = n_cols - 1;
  data->n = n;
  data->labels.resize(n);
  data->features.resize(n * data->dim);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double raw_label = raw[i * n_cols + label_idx];
    const double rounded = std::round(raw_label);
    if (std::abs(raw_label - rounded) > 1e-9 || rounded < 0.0) {
      std::ostringstream msg;
      msg << "load_csv: row " << (i + 2) << ", column '" << label_column << "': label "
          << raw_label << " is not a nonnegative integer";
      throw std::runtime_error(msg.str());
    }
    data->labels[i] = static_cast<std::size_t>(rounded);
    max_label = std::max(max_label, data->labels[i]);
    std::size_t out_j = 0;
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (j == label_idx) continue;
      data->features[i * data->dim + out_j] = raw[i * n_cols + j];
      ++out_j;
    }
  }
  data->k = max_label + 1;
  if (data->k < 2) throw std::runtime_error("load_csv: need at least 2 distinct classes");

  // Standardize features to zero mean, unit variance (constant columns to 0).
  for (std::size_t j = 0; j < data->dim; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += data->features[i * data->dim + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double centered = data->features[i * data->dim + j] - mean;
      var += centered * centered;
    }
    var /= static_cast<double>(n);
    const double inv_std = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto& cell = data->features[i * data->dim + j];
      cell = (cell - mean) * inv_std;
    }
  }
  return logistic_core(std::move(data), "csv");
}

}  // namespace lpdp
