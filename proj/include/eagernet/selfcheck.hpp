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
#include <string>
#include <vector>

#include "eagernet/metrics.hpp"
#include "eagernet/model.hpp"
#include "eagernet/trainer.hpp"

// Fast invariant suite behind `eagernet selfcheck`: gradient checks on a toy
// model for both variants, weight schedule sums, activation outputs and the
// eager/full consistency guarantee.

namespace eagernet {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline double combined_loss_value(const EagerNetModel& m, const Matrix& x,
                                  const Targets& y, std::span<const double> w) {
  const std::vector<Matrix> logits = forward_full(m, x);
  double total = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) total += w[k] * head_loss(logits[k], y);
  return total;
}

// Max relative error between analytic gradients and central differences over
// every parameter of the model.
inline double gradient_check(EagerNetModel m, const Matrix& x, const Targets& y,
                             std::span<const double> w, BackpropMode mode,
                             double h = 1e-5) {
  m.config.dropout = 0.0;
  const BackwardResult back = compute_gradients(m, x, y, w, mode);
  double worst = 0.0;
  auto check_tensor = [&](std::vector<double>& params, const std::vector<double>& grads) {
    for (size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + h;
      const double up = combined_loss_value(m, x, y, w);
      params[i] = keep - h;
      const double down = combined_loss_value(m, x, y, w);
      params[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max(std::abs(fd) + std::abs(grads[i]), 1e-6);
      worst = std::max(worst, std::abs(fd - grads[i]) / denom);
    }
  };
  for (size_t k = 0; k < m.depth(); ++k) {
    check_tensor(m.hidden[k].w.data, back.grads.hidden[k].w.data);
    check_tensor(m.hidden[k].b, back.grads.hidden[k].b);
    check_tensor(m.heads[k].w.data, back.grads.heads[k].w.data);
    check_tensor(m.heads[k].b, back.grads.heads[k].b);
  }
  return worst;
}

}  // namespace detail

inline std::vector<CheckResult> run_selfcheck() {
  std::vector<CheckResult> results;
  auto record = [&results](const std::string& name, bool pass, std::string detail = "") {
    results.push_back({name, pass, std::move(detail)});
  };

  Rng rng(20260808, rng_stream::kSynthetic);

  // gradient check, binary, full and one-step backprop
  {
    ModelConfig mc;
    mc.input_width = 6;
    mc.hidden_widths = {8, 8};
    mc.head_width = 1;
    mc.variant = Variant::binary;
    mc.dropout = 0.0;
    EagerNetModel m = EagerNetModel::init(mc, 11);
    Matrix x(16, 6);
    for (auto& v : x.data) v = rng.normal();
    Targets y;
    y.variant = Variant::binary;
    for (size_t n = 0; n < 16; ++n) y.binary.push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
    const auto w = loss_weights(2, WeightScheme::uniform);
    for (BackpropMode mode : {BackpropMode::full, BackpropMode::one_step}) {
      const double err = detail::gradient_check(m, x, y, w, mode);
      record("gradient-binary-" + to_string(mode), err < 1e-4,
             "max rel err " + std::to_string(err));
    }
  }

  // gradient check, 3-class
  {
    ModelConfig mc;
    mc.input_width = 6;
    mc.hidden_widths = {8, 8};
    mc.head_width = 3;
    mc.variant = Variant::multiclass;
    mc.dropout = 0.0;
    EagerNetModel m = EagerNetModel::init(mc, 12);
    Matrix x(16, 6);
    for (auto& v : x.data) v = rng.normal();
    std::vector<int32_t> fams;
    for (size_t n = 0; n < 16; ++n) fams.push_back(static_cast<int32_t>(rng.below(3)));
    Targets y;
    y.variant = Variant::multiclass;
    y.onehot = one_hot(fams, 3);
    const auto w = loss_weights(2, WeightScheme::increasing);
    const double err = detail::gradient_check(m, x, y, w, BackpropMode::full);
    record("gradient-multiclass-full", err < 1e-4, "max rel err " + std::to_string(err));
  }

  // weight schedules sum to 1
  {
    bool ok = true;
    for (size_t layers = 1; layers <= 16 && ok; ++layers) {
      for (auto s : {WeightScheme::uniform, WeightScheme::increasing, WeightScheme::decreasing}) {
        double sum = 0.0;
        for (double v : loss_weights(layers, s)) sum += v;
        ok = ok && std::abs(sum - 1.0) < 1e-12;
      }
    }
    record("loss-weight-schedules", ok);
  }

  // softmax rows on the simplex, sigmoid in (0, 1)
  {
    Matrix z(32, 5);
    for (auto& v : z.data) v = rng.uniform(-400.0, 400.0);
    Matrix p = z;
    softmax_rows(p);
    bool ok = true;
    for (size_t n = 0; n < p.rows; ++n) {
      double sum = 0.0;
      for (double v : p.row(n)) sum += v;
      ok = ok && std::abs(sum - 1.0) < 1e-12;
    }
    for (int i = 0; i < 64; ++i) {
      const double s = sigmoid(rng.uniform(-36.0, 36.0));
      ok = ok && s > 0.0 && s < 1.0;
    }
    record("activation-ranges", ok);
  }

  // eager forward matches the full forward prefix bitwise
  {
    ModelConfig mc;
    mc.input_width = 5;
    mc.hidden_widths = {8, 8, 8};
    mc.head_width = 3;
    mc.variant = Variant::multiclass;
    EagerNetModel m = EagerNetModel::init(mc, 13);
    Matrix x(8, 5);
    for (auto& v : x.data) v = rng.normal();
    const std::vector<Matrix> full = forward_full(m, x);
    bool ok = true;
    for (size_t n = 0; n < x.rows && ok; ++n) {
      const EagerPrediction p = forward_eager(m, x.row(n), 1.0);
      ok = ok && p.exit_layer == 3 && p.layers_evaluated == 3;
      for (size_t k = 0; k < p.head_logits.size() && ok; ++k)
        for (size_t c = 0; c < p.head_logits[k].size() && ok; ++c)
          ok = ok && p.head_logits[k][c] == full[k](n, c);
    }
    record("eager-matches-full-prefix", ok);
  }

  // serialization round trip
  {
    ModelConfig mc;
    mc.input_width = 4;
    mc.hidden_widths = {6, 6};
    mc.head_width = 1;
    mc.variant = Variant::binary;
    EagerNetModel m = EagerNetModel::init(mc, 14);
    m.class_names = {"benign", "attack"};
    m.norm.mean.assign(4, 0.5);
    m.norm.stdev.assign(4, 2.0);
    const auto bytes = serialize_model(m);
    const EagerNetModel back = deserialize_model(bytes);
    bool ok = back.hidden.size() == m.hidden.size();
    for (size_t k = 0; ok && k < m.hidden.size(); ++k)
      ok = back.hidden[k].w.data == m.hidden[k].w.data && back.hidden[k].b == m.hidden[k].b &&
           back.heads[k].w.data == m.heads[k].w.data && back.heads[k].b == m.heads[k].b;
    record("model-round-trip", ok);
  }

  return results;
}

}  // namespace eagernet
