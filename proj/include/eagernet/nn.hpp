/*
 * Copyright 2026 The eagernet authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eagernet/errors.hpp"
#include "eagernet/matrix.hpp"
#include "eagernet/random.hpp"

// Minimal dense network kernel: affine layers, Leaky ReLU, inverted dropout,
// sigmoid/softmax, hand-written reverse-mode gradients and Adam. Batches are
// row-per-sample matrices; everything is deterministic under a fixed seed.

namespace eagernet {

struct DenseLayer {
  Matrix w;               // out x in
  std::vector<double> b;  // out

  size_t in_width() const { return w.cols; }
  size_t out_width() const { return w.rows; }

  // He-style scaled uniform init, biases zero.
  static DenseLayer init(size_t in, size_t out, Rng& rng) {
    DenseLayer l;
    l.w = Matrix(out, in);
    l.b.assign(out, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (auto& v : l.w.data) v = rng.uniform(-limit, limit);
    return l;
  }

  static DenseLayer zeros_like(const DenseLayer& o) {
    DenseLayer l;
    l.w = Matrix(o.w.rows, o.w.cols);
    l.b.assign(o.b.size(), 0.0);
    return l;
  }
};

// y = x W^T + b, row-wise over the batch.
inline Matrix linear_forward(const DenseLayer& layer, const Matrix& x) {
  if (x.cols != layer.in_width())
    throw DataError("linear layer expects width " + std::to_string(layer.in_width()) +
                    ", got " + std::to_string(x.cols));
  Matrix y(x.rows, layer.out_width());
  for (size_t n = 0; n < x.rows; ++n) {
    auto xr = x.row(n);
    auto yr = y.row(n);
    for (size_t o = 0; o < layer.out_width(); ++o) {
      auto wr = layer.w.row(o);
      double acc = layer.b[o];
      for (size_t i = 0; i < wr.size(); ++i) acc += xr[i] * wr[i];
      yr[o] = acc;
    }
  }
  return y;
}

// Accumulates dW and db into `grad`; writes dL/dx into `dx` when non-null.
inline void linear_backward(const DenseLayer& layer, const Matrix& x,
                            const Matrix& dy, DenseLayer& grad,
                            Matrix* dx = nullptr) {
  if (dx) *dx = Matrix(x.rows, x.cols);
  for (size_t n = 0; n < x.rows; ++n) {
    auto xr = x.row(n);
    auto dyr = dy.row(n);
    for (size_t o = 0; o < layer.out_width(); ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      auto gw = grad.w.row(o);
      for (size_t i = 0; i < xr.size(); ++i) gw[i] += g * xr[i];
      grad.b[o] += g;
      if (dx) {
        auto dxr = dx->row(n);
        auto wr = layer.w.row(o);
        for (size_t i = 0; i < wr.size(); ++i) dxr[i] += g * wr[i];
      }
    }
  }
}

// dL/dx alone, same accumulation order as linear_backward's dx path.
inline Matrix input_gradient(const DenseLayer& layer, const Matrix& dy) {
  Matrix dx(dy.rows, layer.in_width());
  for (size_t n = 0; n < dy.rows; ++n) {
    auto dyr = dy.row(n);
    auto dxr = dx.row(n);
    for (size_t o = 0; o < layer.out_width(); ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      auto wr = layer.w.row(o);
      for (size_t i = 0; i < wr.size(); ++i) dxr[i] += g * wr[i];
    }
  }
  return dx;
}

inline constexpr double kLeakyReluAlpha = 0.1;

inline Matrix leaky_relu(const Matrix& x, double alpha = kLeakyReluAlpha) {
  Matrix y(x.rows, x.cols);
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double v = x.data[i];
    y.data[i] = v > 0.0 ? v : alpha * v;
  }
  return y;
}

// dL/dz given pre-activations z and dL/da. The slope at exactly 0 is alpha.
inline Matrix leaky_relu_backward(const Matrix& z, const Matrix& da,
                                  double alpha = kLeakyReluAlpha) {
  Matrix dz(z.rows, z.cols);
  for (size_t i = 0; i < z.data.size(); ++i)
    dz.data[i] = da.data[i] * (z.data[i] > 0.0 ? 1.0 : alpha);
  return dz;
}

// Inverted dropout mask: entries are 0 with probability r, else 1/(1-r), so
// the evaluation path needs no rescaling. r == 0 consumes no random draws.
inline Matrix dropout_mask(size_t rows, size_t cols, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw DataError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  Matrix mask(rows, cols);
  if (rate == 0.0) {
    for (auto& v : mask.data) v = 1.0;
    return mask;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& v : mask.data) v = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// In-place row softmax, shift-by-max for stability.
inline void softmax_rows(Matrix& m) {
  for (size_t n = 0; n < m.rows; ++n) {
    auto row = m.row(n);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
}

inline void softmax_row(std::span<double> row) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double sum = 0.0;
  for (auto& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : row) v /= sum;
}

inline double log_sum_exp(std::span<const double> row) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : row) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction, one state per parameter tensor.
class AdamState {
 public:
  explicit AdamState(size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(const AdamConfig& cfg, std::span<double> params,
            std::span<const double> grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i];
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient at parameter " + std::to_string(i));
      m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * g;
      v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }

  int64_t steps() const { return t_; }

 private:
  int64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace eagernet
