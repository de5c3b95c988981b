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
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "eagernet/model.hpp"

// Evaluation: accuracy / precision / recall / F1 / Youden's J, the confidence
// threshold sweep (accuracy and mean layers used per threshold), and the
// per-layer per-class accuracy matrix. All evaluation is read-only over an
// immutable model and deterministic regardless of thread count.

namespace eagernet {

struct BinaryCounts {
  uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  uint64_t total() const { return tp + fp + tn + fn; }
};

struct BinaryMetrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double youden_j = 0;
  // set when a denominator was empty and the metric was pinned to 0
  bool degenerate = false;
};

inline BinaryMetrics binary_metrics(const BinaryCounts& c) {
  if (c.total() == 0) throw DataError("no samples to score");
  BinaryMetrics m;
  auto ratio = [&m](uint64_t num, uint64_t den) {
    if (den == 0) {
      m.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = (m.precision + m.recall) == 0.0
             ? (m.degenerate = true, 0.0)
             : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  const double specificity = ratio(c.tn, c.tn + c.fp);
  m.youden_j = m.recall + specificity - 1.0;
  return m;
}

// counts(t, p): rows true class, columns predicted class.
struct ConfusionMatrix {
  size_t classes = 0;
  std::vector<uint64_t> counts;

  explicit ConfusionMatrix(size_t c = 0) : classes(c), counts(c * c, 0) {}
  uint64_t& at(size_t t, size_t p) { return counts[t * classes + p]; }
  uint64_t at(size_t t, size_t p) const { return counts[t * classes + p]; }

  uint64_t total() const {
    uint64_t s = 0;
    for (uint64_t v : counts) s += v;
    return s;
  }
  uint64_t row_sum(size_t t) const {
    uint64_t s = 0;
    for (size_t p = 0; p < classes; ++p) s += at(t, p);
    return s;
  }
  uint64_t col_sum(size_t p) const {
    uint64_t s = 0;
    for (size_t t = 0; t < classes; ++t) s += at(t, p);
    return s;
  }
};

// One-vs-rest counts for one class of a multiclass confusion matrix.
inline BinaryCounts one_vs_rest(const ConfusionMatrix& cm, size_t cls) {
  BinaryCounts c;
  c.tp = cm.at(cls, cls);
  c.fn = cm.row_sum(cls) - c.tp;
  c.fp = cm.col_sum(cls) - c.tp;
  c.tn = cm.total() - c.tp - c.fn - c.fp;
  return c;
}

enum class F1Average { macro, micro, weighted };

inline double f1_multiclass(const ConfusionMatrix& cm, F1Average avg = F1Average::macro) {
  if (cm.classes < 2) throw DataError("multiclass F1 needs at least 2 classes");
  if (avg == F1Average::micro) {
    // micro F1 == accuracy for single-label classification
    uint64_t diag = 0;
    for (size_t c = 0; c < cm.classes; ++c) diag += cm.at(c, c);
    return cm.total() == 0 ? 0.0 : static_cast<double>(diag) / static_cast<double>(cm.total());
  }
  double sum = 0.0;
  double weight_total = 0.0;
  for (size_t c = 0; c < cm.classes; ++c) {
    const BinaryCounts bc = one_vs_rest(cm, c);
    const double p = (bc.tp + bc.fp) == 0 ? 0.0
                     : static_cast<double>(bc.tp) / static_cast<double>(bc.tp + bc.fp);
    const double r = (bc.tp + bc.fn) == 0 ? 0.0
                     : static_cast<double>(bc.tp) / static_cast<double>(bc.tp + bc.fn);
    const double f1 = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    const double w = avg == F1Average::weighted
                         ? static_cast<double>(cm.row_sum(c))
                         : 1.0;
    sum += w * f1;
    weight_total += w;
  }
  return weight_total == 0.0 ? 0.0 : sum / weight_total;
}

// ---- last-head (conventional) evaluation ----

inline std::vector<int> predict_last_head(const EagerNetModel& m, const Matrix& x) {
  const std::vector<Matrix> logits = forward_full(m, x);
  const Matrix& last = logits.back();
  std::vector<int> pred(x.rows);
  for (size_t n = 0; n < x.rows; ++n) pred[n] = decide(m, last.row(n)).cls;
  return pred;
}

inline BinaryCounts binary_confusion(std::span<const int> pred, std::span<const int> truth) {
  BinaryCounts c;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == 1)
      pred[i] == 1 ? ++c.tp : ++c.fn;
    else
      pred[i] == 1 ? ++c.fp : ++c.tn;
  }
  return c;
}

inline ConfusionMatrix multiclass_confusion(std::span<const int> pred,
                                            std::span<const int> truth, size_t classes) {
  ConfusionMatrix cm(classes);
  for (size_t i = 0; i < pred.size(); ++i)
    ++cm.at(static_cast<size_t>(truth[i]), static_cast<size_t>(pred[i]));
  return cm;
}

// ---- confidence threshold sweep ----

struct SweepPoint {
  double threshold = 0;
  double accuracy = 0;
  double mean_exit_layer = 0;
  std::vector<uint64_t> exit_hist;  // index 0 == exit at layer 1
};

struct SweepReport {
  std::vector<SweepPoint> points;
  uint64_t provenance = 0;  // FNV-1a 64 of the serialized model
  // per-sample exit layers, points x samples; filled when requested
  std::vector<std::vector<uint16_t>> exits;
};

// Evenly spaced thresholds across the model's valid confidence range, last
// point exactly 1.0.
inline std::vector<double> default_threshold_grid(const EagerNetModel& m, size_t n = 101) {
  if (n < 2) throw DataError("threshold grid needs at least 2 points");
  const double lo = m.confidence_floor();
  std::vector<double> grid(n);
  for (size_t i = 0; i < n; ++i)
    grid[i] = lo + (1.0 - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  grid.back() = 1.0;
  return grid;
}

// Runs the eager forward over the test set at every threshold. Thresholds
// must be strictly increasing. Parallelism splits the threshold grid;
// per-point results are independent, so the report is identical for any
// thread count.
inline SweepReport threshold_sweep(const EagerNetModel& m, const Matrix& x,
                                   std::span<const int> truth,
                                   std::span<const double> thresholds,
                                   bool record_exits = false, unsigned threads = 1) {
  if (x.rows == 0) throw DataError("sweep needs a non-empty test set");
  if (truth.size() != x.rows) throw DataError("label count does not match rows");
  for (size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw DataError("thresholds must be strictly increasing");

  SweepReport report;
  report.provenance = fnv1a64(serialize_model(m));
  report.points.resize(thresholds.size());
  if (record_exits) report.exits.resize(thresholds.size());

  auto run_point = [&](size_t ti) {
    const double threshold = thresholds[ti];
    SweepPoint pt;
    pt.threshold = threshold;
    pt.exit_hist.assign(m.depth(), 0);
    uint64_t correct = 0;
    uint64_t exit_sum = 0;
    std::vector<uint16_t> exits;
    if (record_exits) exits.resize(x.rows);
    for (size_t n = 0; n < x.rows; ++n) {
      const EagerPrediction p = forward_eager(m, x.row(n), threshold);
      if (p.cls == truth[n]) ++correct;
      exit_sum += static_cast<uint64_t>(p.exit_layer);
      ++pt.exit_hist[static_cast<size_t>(p.exit_layer - 1)];
      if (record_exits) exits[n] = static_cast<uint16_t>(p.exit_layer);
    }
    pt.accuracy = static_cast<double>(correct) / static_cast<double>(x.rows);
    pt.mean_exit_layer = static_cast<double>(exit_sum) / static_cast<double>(x.rows);
    report.points[ti] = std::move(pt);
    if (record_exits) report.exits[ti] = std::move(exits);
  };

  if (threads <= 1 || thresholds.size() < 2) {
    for (size_t ti = 0; ti < thresholds.size(); ++ti) run_point(ti);
  } else {
    const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(thresholds.size()));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (size_t ti = w; ti < thresholds.size(); ti += workers) run_point(ti);
      });
    }
    for (auto& t : pool) t.join();
  }
  return report;
}

// ---- per-layer per-class accuracy (multiclass only) ----

struct LayerClassMatrix {
  size_t layers = 0;
  size_t classes = 0;
  std::vector<double> accuracy;    // layers x classes; NaN where support == 0
  std::vector<uint64_t> support;   // per class

  double at(size_t layer, size_t cls) const { return accuracy[layer * classes + cls]; }
  bool absent(size_t cls) const { return support[cls] == 0; }
};

inline LayerClassMatrix layer_class_accuracy(const EagerNetModel& m, const Matrix& x,
                                             std::span<const int> truth) {
  if (m.config.variant != Variant::multiclass)
    throw DataError("per-layer per-class accuracy requires a multiclass model");
  LayerClassMatrix out;
  out.layers = m.depth();
  out.classes = m.config.head_width;
  out.support.assign(out.classes, 0);
  std::vector<uint64_t> correct(out.layers * out.classes, 0);

  const std::vector<Matrix> logits = forward_full(m, x);
  for (size_t n = 0; n < x.rows; ++n) {
    const auto t = static_cast<size_t>(truth[n]);
    if (t >= out.classes) throw DataError("label out of range at row " + std::to_string(n));
    ++out.support[t];
    for (size_t k = 0; k < out.layers; ++k)
      if (decide(m, logits[k].row(n)).cls == truth[n]) ++correct[k * out.classes + t];
  }
  out.accuracy.assign(out.layers * out.classes,
                      std::numeric_limits<double>::quiet_NaN());
  for (size_t k = 0; k < out.layers; ++k)
    for (size_t c = 0; c < out.classes; ++c)
      if (out.support[c] > 0)
        out.accuracy[k * out.classes + c] =
            static_cast<double>(correct[k * out.classes + c]) /
            static_cast<double>(out.support[c]);
  return out;
}

}  // namespace eagernet
