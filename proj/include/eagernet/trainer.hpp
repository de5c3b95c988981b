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
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eagernet/csv.hpp"
#include "eagernet/dataset.hpp"
#include "eagernet/model.hpp"
#include "eagernet/nn.hpp"

// Training with the combined weighted multi-head loss: per-head binary or
// categorical cross-entropy, weighted by the uniform / increasing /
// decreasing schedules, every head's loss backpropagated to the input. The
// gradient structure follows the architecture: the last hidden layer is
// shaped only by the last head's loss, the first by all of them. The
// one-step mode restricts each intermediate head's loss to its own head and
// the hidden layer it is attached to (ablation).

namespace eagernet {

enum class WeightScheme { uniform, increasing, decreasing, last_only, custom };
enum class BackpropMode { full, one_step };

inline std::string to_string(WeightScheme s) {
  switch (s) {
    case WeightScheme::uniform: return "uniform";
    case WeightScheme::increasing: return "increasing";
    case WeightScheme::decreasing: return "decreasing";
    case WeightScheme::last_only: return "last_only";
    case WeightScheme::custom: return "custom";
  }
  return "?";
}

inline WeightScheme weight_scheme_from_string(const std::string& s) {
  if (s == "uniform") return WeightScheme::uniform;
  if (s == "increasing") return WeightScheme::increasing;
  if (s == "decreasing") return WeightScheme::decreasing;
  if (s == "last_only") return WeightScheme::last_only;
  if (s == "custom") return WeightScheme::custom;
  throw DataError("unknown weight scheme '" + s + "'");
}

inline std::string to_string(BackpropMode m) {
  return m == BackpropMode::full ? "full" : "one-step";
}

inline BackpropMode backprop_mode_from_string(const std::string& s) {
  if (s == "full") return BackpropMode::full;
  if (s == "one-step" || s == "one_step") return BackpropMode::one_step;
  throw DataError("unknown backprop mode '" + s + "' (full | one-step)");
}

// Per-head loss weights. uniform: 1/L each. increasing: w_i = (i+1) / sum of
// 1..L, so later heads count more. decreasing: the reverse. All three sum to
// 1 by construction.
inline std::vector<double> loss_weights(size_t layers, WeightScheme scheme) {
  if (layers == 0) throw DataError("loss weights need at least one layer");
  std::vector<double> w(layers);
  switch (scheme) {
    case WeightScheme::uniform:
      for (auto& v : w) v = 1.0 / static_cast<double>(layers);
      break;
    case WeightScheme::increasing: {
      const double total = static_cast<double>(layers * (layers + 1) / 2);
      for (size_t i = 0; i < layers; ++i) w[i] = static_cast<double>(i + 1) / total;
      break;
    }
    case WeightScheme::decreasing: {
      const double total = static_cast<double>(layers * (layers + 1) / 2);
      for (size_t i = 0; i < layers; ++i)
        w[i] = static_cast<double>(layers - i) / total;
      break;
    }
    case WeightScheme::last_only:
      w.assign(layers, 0.0);
      w.back() = 1.0;
      break;
    case WeightScheme::custom:
      throw DataError("custom weights must be supplied explicitly");
  }
  return w;
}

// ---- losses (batch mean, numerically stable, with gradients) ----

// Binary cross-entropy on logits: mean of max(x,0) - x y + log(1 + e^-|x|).
inline double bce_loss(const Matrix& logits, std::span<const double> y) {
  if (logits.cols != 1 || logits.rows != y.size())
    throw DataError("bce expects an N x 1 logit matrix matching the labels");
  double total = 0.0;
  for (size_t n = 0; n < logits.rows; ++n) {
    const double x = logits(n, 0);
    total += std::max(x, 0.0) - x * y[n] + std::log1p(std::exp(-std::abs(x)));
  }
  return total / static_cast<double>(logits.rows);
}

// d bce / d logits = (sigmoid(x) - y) / N.
inline Matrix bce_grad(const Matrix& logits, std::span<const double> y) {
  Matrix g(logits.rows, 1);
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  for (size_t n = 0; n < logits.rows; ++n)
    g(n, 0) = (sigmoid(logits(n, 0)) - y[n]) * inv_n;
  return g;
}

inline void check_one_hot(const Matrix& y) {
  for (size_t n = 0; n < y.rows; ++n) {
    double sum = 0.0;
    for (double v : y.row(n)) {
      if (v != 0.0 && v != 1.0)
        throw DataError("target row " + std::to_string(n) + " is not one-hot");
      sum += v;
    }
    if (sum != 1.0)
      throw DataError("target row " + std::to_string(n) + " is not one-hot");
  }
}

// Categorical cross-entropy on logits: mean negative log-softmax of the true
// class.
inline double cce_loss(const Matrix& logits, const Matrix& y_onehot) {
  if (!logits.same_shape(y_onehot))
    throw DataError("cce logits and one-hot targets must have the same shape");
  check_one_hot(y_onehot);
  double total = 0.0;
  for (size_t n = 0; n < logits.rows; ++n) {
    auto row = logits.row(n);
    const double lse = log_sum_exp(row);
    auto yr = y_onehot.row(n);
    for (size_t c = 0; c < row.size(); ++c)
      if (yr[c] == 1.0) total += lse - row[c];
  }
  return total / static_cast<double>(logits.rows);
}

// d cce / d logits = (softmax(x) - y) / N.
inline Matrix cce_grad(const Matrix& logits, const Matrix& y_onehot) {
  Matrix g = logits;
  softmax_rows(g);
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  for (size_t i = 0; i < g.data.size(); ++i)
    g.data[i] = (g.data[i] - y_onehot.data[i]) * inv_n;
  return g;
}

// Targets for one batch; which member is active follows the model variant.
struct Targets {
  Variant variant = Variant::binary;
  std::vector<double> binary;
  Matrix onehot;
};

inline double head_loss(const Matrix& logits, const Targets& y) {
  return y.variant == Variant::binary ? bce_loss(logits, y.binary)
                                      : cce_loss(logits, y.onehot);
}

inline Matrix head_loss_grad(const Matrix& logits, const Targets& y) {
  return y.variant == Variant::binary ? bce_grad(logits, y.binary)
                                      : cce_grad(logits, y.onehot);
}

struct Gradients {
  std::vector<DenseLayer> hidden;  // same shapes as the model's layers
  std::vector<DenseLayer> heads;
};

struct BackwardResult {
  Gradients grads;
  std::vector<double> head_losses;  // unweighted, per head
  double combined = 0.0;            // sum of w_k * loss_k
};

// Reverse pass of the combined weighted loss over a recorded tape. Heads with
// weight exactly 0 are skipped entirely, which keeps the arithmetic of the
// remaining path identical to a network without those heads.
inline BackwardResult combined_backward(const EagerNetModel& m, const ForwardTape& tape,
                                        const std::vector<Matrix>& head_logits,
                                        const Targets& y,
                                        std::span<const double> weights,
                                        BackpropMode mode = BackpropMode::full) {
  const size_t layers = m.depth();
  if (weights.size() != layers)
    throw DataError("got " + std::to_string(weights.size()) + " loss weights for " +
                    std::to_string(layers) + " heads");

  BackwardResult res;
  res.grads.hidden.reserve(layers);
  res.grads.heads.reserve(layers);
  for (size_t k = 0; k < layers; ++k) {
    res.grads.hidden.push_back(DenseLayer::zeros_like(m.hidden[k]));
    res.grads.heads.push_back(DenseLayer::zeros_like(m.heads[k]));
  }
  res.head_losses.resize(layers);
  for (size_t k = 0; k < layers; ++k) {
    res.head_losses[k] = head_loss(head_logits[k], y);
    res.combined += weights[k] * res.head_losses[k];
  }

  const bool pre_act = m.config.heads_tap_preactivation;
  Matrix g;  // dL/d(dropped activation of layer k), arriving from above
  for (size_t k = layers; k-- > 0;) {
    const bool top = (k + 1 == layers);

    // head k's contribution, scaled by its loss weight
    Matrix inject;
    const bool head_active = weights[k] != 0.0;
    if (head_active) {
      Matrix delta = head_loss_grad(head_logits[k], y);
      for (auto& v : delta.data) v *= weights[k];
      linear_backward(m.heads[k], tape.head_in[k], delta, res.grads.heads[k], &inject);
    }

    // one-step mode excludes intermediate head injections from the stream
    // that continues below this layer
    const bool exclude_down = mode == BackpropMode::one_step && !top && head_active;

    Matrix dz;
    Matrix dz_down_only;
    if (!pre_act) {
      Matrix da_total;
      if (!top && head_active) {
        da_total = add(g, inject);
      } else if (head_active) {
        da_total = std::move(inject);
      } else if (!top) {
        da_total = std::move(g);
      } else {
        da_total = Matrix(tape.pre[k].rows, tape.pre[k].cols);
      }
      Matrix da_masked = hadamard(da_total, tape.masks[k]);
      dz = leaky_relu_backward(tape.pre[k], da_masked, m.config.alpha);
      if (exclude_down) {
        Matrix down_masked = hadamard(g, tape.masks[k]);
        dz_down_only = leaky_relu_backward(tape.pre[k], down_masked, m.config.alpha);
      }
    } else {
      // pre-activation heads: the head reads mask .* z, so its gradient joins
      // dz directly through the mask, bypassing the activation slope.
      Matrix trunk_masked = top ? Matrix(tape.pre[k].rows, tape.pre[k].cols)
                                : hadamard(g, tape.masks[k]);
      Matrix dz_trunk = leaky_relu_backward(tape.pre[k], trunk_masked, m.config.alpha);
      if (head_active) {
        Matrix dz_head = hadamard(inject, tape.masks[k]);
        dz = add(dz_trunk, dz_head);
        if (exclude_down) dz_down_only = std::move(dz_trunk);
      } else {
        dz = std::move(dz_trunk);
      }
    }

    linear_backward(m.hidden[k], tape.inputs[k], dz, res.grads.hidden[k], nullptr);
    if (k > 0) g = input_gradient(m.hidden[k], exclude_down ? dz_down_only : dz);
  }
  return res;
}

// Convenience wrapper for gradient checks: one dropout-free training forward
// plus the combined backward.
inline BackwardResult compute_gradients(const EagerNetModel& m, const Matrix& x,
                                        const Targets& y,
                                        std::span<const double> weights,
                                        BackpropMode mode = BackpropMode::full) {
  EagerNetModel probe = m;
  probe.config.dropout = 0.0;
  Rng unused(0);
  ForwardTape tape;
  std::vector<Matrix> logits = forward_train(probe, x, unused, tape);
  return combined_backward(probe, tape, logits, y, weights, mode);
}

// ---- training loop ----

struct TrainConfig {
  Variant variant = Variant::binary;
  WeightScheme weight_scheme = WeightScheme::uniform;
  std::vector<double> custom_weights;  // used when weight_scheme == custom
  size_t depth = 3;
  size_t width = 128;
  int epochs = 800;  // training cap
  size_t batch_size = 128;
  uint64_t seed = 1;
  AdamConfig adam;  // lr 0.001
  double alpha = kLeakyReluAlpha;
  double dropout = 0.2;
  BackpropMode backprop_mode = BackpropMode::full;
  bool heads_tap_preactivation = false;
  int patience = 0;  // 0 disables early stopping
};

inline std::vector<double> resolve_weights(const TrainConfig& cfg) {
  if (cfg.weight_scheme == WeightScheme::custom) {
    if (cfg.custom_weights.size() != cfg.depth)
      throw DataError("custom weights must list one value per layer");
    for (double w : cfg.custom_weights)
      if (w < 0.0) throw DataError("loss weights must be non-negative");
    return cfg.custom_weights;
  }
  return loss_weights(cfg.depth, cfg.weight_scheme);
}

struct EpochStats {
  int epoch = 0;          // 1-based
  double train_loss = 0;  // combined weighted loss, mean over the epoch
  double val_loss = 0;    // combined weighted loss on the monitor split
  std::vector<double> head_val_acc;
};

struct TrainResult {
  EagerNetModel model;      // best monitored snapshot
  EagerNetModel final_model;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  bool monitored_on_train = false;  // no validation rows were available
};

using EpochCallback = std::function<void(const EpochStats&, const EagerNetModel&)>;

namespace detail {

inline Targets make_targets(Variant variant, const Dataset& ds,
                            const std::vector<size_t>& idx) {
  Targets t;
  t.variant = variant;
  if (variant == Variant::binary) {
    t.binary.reserve(idx.size());
    for (size_t i : idx) t.binary.push_back(ds.binary_labels[i]);
  } else {
    std::vector<int32_t> fams;
    fams.reserve(idx.size());
    for (size_t i : idx) fams.push_back(ds.family_labels[i]);
    t.onehot = one_hot(fams, ds.classes());
  }
  return t;
}

inline Targets gather_targets(const Targets& all, const std::vector<size_t>& idx) {
  Targets t;
  t.variant = all.variant;
  if (all.variant == Variant::binary) {
    t.binary.reserve(idx.size());
    for (size_t i : idx) t.binary.push_back(all.binary[i]);
  } else {
    t.onehot = Matrix(idx.size(), all.onehot.cols);
    for (size_t r = 0; r < idx.size(); ++r) {
      auto src = all.onehot.row(idx[r]);
      std::copy(src.begin(), src.end(), t.onehot.row(r).begin());
    }
  }
  return t;
}

inline int predicted_class(const EagerNetModel& m, std::span<const double> logits) {
  return decide(m, logits).cls;
}

inline int true_class(const Targets& t, size_t row) {
  if (t.variant == Variant::binary) return t.binary[row] > 0.5 ? 1 : 0;
  auto r = t.onehot.row(row);
  for (size_t c = 0; c < r.size(); ++c)
    if (r[c] == 1.0) return static_cast<int>(c);
  return 0;
}

}  // namespace detail

// Seeded minibatch training. History records the combined train loss, the
// monitored loss and per-head accuracy per epoch; the best-loss snapshot is
// returned. Monitoring uses the validation split when the dataset has one
// and falls back to the training split otherwise (never the test split).
inline TrainResult train(const TrainConfig& cfg, const Dataset& ds,
                         const EpochCallback& on_epoch = nullptr) {
  if (cfg.epochs < 1) throw DataError("epochs must be >= 1");
  if (cfg.depth < 1) throw DataError("depth must be >= 1");
  if (cfg.batch_size < 1) throw DataError("batch size must be >= 1");
  if (cfg.variant == Variant::multiclass && ds.classes() < 2)
    throw DataError("multiclass training needs at least 2 classes");

  ModelConfig mc;
  mc.input_width = ds.cols();
  mc.hidden_widths.assign(cfg.depth, cfg.width);
  mc.head_width = cfg.variant == Variant::binary ? 1 : ds.classes();
  mc.variant = cfg.variant;
  mc.alpha = cfg.alpha;
  mc.dropout = cfg.dropout;
  mc.heads_tap_preactivation = cfg.heads_tap_preactivation;

  EagerNetModel model = EagerNetModel::init(mc, cfg.seed);
  model.norm = ds.norm;
  model.class_names = ds.class_names;

  const std::vector<double> weights = resolve_weights(cfg);

  const std::vector<size_t> train_idx = ds.rows_of(Split::train);
  std::vector<size_t> monitor_idx = ds.rows_of(Split::val);
  if (train_idx.empty()) throw DataError("dataset has no training rows");
  const bool monitor_on_train = monitor_idx.empty();
  if (monitor_on_train) monitor_idx = train_idx;

  const Matrix monitor_x = ds.gather(monitor_idx);
  const Targets monitor_y = detail::make_targets(cfg.variant, ds, monitor_idx);
  const Targets train_y_all = detail::make_targets(cfg.variant, ds, train_idx);

  Rng shuffle_rng(cfg.seed, rng_stream::kShuffle);
  Rng dropout_rng(cfg.seed, rng_stream::kDropout);

  std::vector<AdamState> hidden_w_state, hidden_b_state, head_w_state, head_b_state;
  for (const auto& l : model.hidden) {
    hidden_w_state.emplace_back(l.w.size());
    hidden_b_state.emplace_back(l.b.size());
  }
  for (const auto& l : model.heads) {
    head_w_state.emplace_back(l.w.size());
    head_b_state.emplace_back(l.b.size());
  }

  TrainResult result;
  result.model = model;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<size_t> order(train_idx.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t loss_rows = 0;

    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<size_t> batch_local(order.begin() + static_cast<long>(start),
                                      order.begin() + static_cast<long>(start + count));
      std::vector<size_t> batch_rows;
      batch_rows.reserve(count);
      for (size_t i : batch_local) batch_rows.push_back(train_idx[i]);

      const Matrix x = ds.gather(batch_rows);
      const Targets y = detail::gather_targets(train_y_all, batch_local);

      ForwardTape tape;
      const std::vector<Matrix> logits = forward_train(model, x, dropout_rng, tape);
      BackwardResult back =
          combined_backward(model, tape, logits, y, weights, cfg.backprop_mode);

      if (!std::isfinite(back.combined))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(start / cfg.batch_size));
      loss_sum += back.combined * static_cast<double>(count);
      loss_rows += count;

      for (size_t k = 0; k < model.depth(); ++k) {
        hidden_w_state[k].step(cfg.adam, model.hidden[k].w.data,
                               back.grads.hidden[k].w.data);
        hidden_b_state[k].step(cfg.adam, model.hidden[k].b, back.grads.hidden[k].b);
        if (weights[k] == 0.0) continue;  // untouched by construction
        head_w_state[k].step(cfg.adam, model.heads[k].w.data, back.grads.heads[k].w.data);
        head_b_state[k].step(cfg.adam, model.heads[k].b, back.grads.heads[k].b);
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(loss_rows);

    const std::vector<Matrix> mon_logits = forward_full(model, monitor_x);
    stats.val_loss = 0.0;
    stats.head_val_acc.resize(model.depth());
    for (size_t k = 0; k < model.depth(); ++k) {
      stats.val_loss += weights[k] * head_loss(mon_logits[k], monitor_y);
      size_t correct = 0;
      for (size_t n = 0; n < monitor_x.rows; ++n)
        if (detail::predicted_class(model, mon_logits[k].row(n)) ==
            detail::true_class(monitor_y, n))
          ++correct;
      stats.head_val_acc[k] =
          static_cast<double>(correct) / static_cast<double>(monitor_x.rows);
    }

    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats, model);

    if (stats.val_loss < best_loss) {
      best_loss = stats.val_loss;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }

  result.final_model = std::move(model);
  result.monitored_on_train = monitor_on_train;
  return result;
}

inline void write_history_csv(const std::vector<EpochStats>& history, std::ostream& out) {
  std::vector<std::string> cells = {"epoch", "train_loss", "val_loss"};
  const size_t heads = history.empty() ? 0 : history.front().head_val_acc.size();
  for (size_t k = 0; k < heads; ++k) cells.push_back("head_" + std::to_string(k));
  write_csv_row(out, cells);
  for (const auto& e : history) {
    cells.clear();
    cells.push_back(std::to_string(e.epoch));
    cells.push_back(format_double(e.train_loss));
    cells.push_back(format_double(e.val_loss));
    for (double a : e.head_val_acc) cells.push_back(format_double(a));
    write_csv_row(out, cells);
  }
}

// ---- config file (JSON) ----

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    cfg.variant = variant_from_string(j.at("variant").get<std::string>());
    cfg.depth = j.at("depth").get<size_t>();
    cfg.width = j.at("width").get<size_t>();
    if (j.contains("weight_scheme"))
      cfg.weight_scheme = weight_scheme_from_string(j["weight_scheme"].get<std::string>());
    if (j.contains("custom_weights"))
      cfg.custom_weights = j["custom_weights"].get<std::vector<double>>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<size_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("learning_rate")) cfg.adam.lr = j["learning_rate"].get<double>();
    if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
    if (j.contains("dropout")) cfg.dropout = j["dropout"].get<double>();
    if (j.contains("backprop_mode"))
      cfg.backprop_mode = backprop_mode_from_string(j["backprop_mode"].get<std::string>());
    if (j.contains("heads_tap_preactivation"))
      cfg.heads_tap_preactivation = j["heads_tap_preactivation"].get<bool>();
    if (j.contains("patience")) cfg.patience = j["patience"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad train config: ") + e.what());
  }
  return cfg;
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["variant"] = to_string(cfg.variant);
  j["weight_scheme"] = to_string(cfg.weight_scheme);
  if (!cfg.custom_weights.empty()) j["custom_weights"] = cfg.custom_weights;
  j["depth"] = cfg.depth;
  j["width"] = cfg.width;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["learning_rate"] = cfg.adam.lr;
  j["alpha"] = cfg.alpha;
  j["dropout"] = cfg.dropout;
  j["backprop_mode"] = to_string(cfg.backprop_mode);
  j["heads_tap_preactivation"] = cfg.heads_tap_preactivation;
  j["patience"] = cfg.patience;
  return j;
}

}  // namespace eagernet
