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

// End-to-end acceptance suite. Each case prints one PASS/FAIL line with the
// measured quantities, so a run reads as a checklist.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "eagernet/flow_csv.hpp"
#include "eagernet/metrics.hpp"
#include "eagernet/synthetic.hpp"
#include "eagernet/trainer.hpp"
#include "fcnn_oracle.hpp"
#include "helpers.hpp"

using namespace eagernet;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration_cast<std::chrono::duration<double>>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
}

double combined_loss(const EagerNetModel& m, const Matrix& x, const Targets& y,
                     std::span<const double> w) {
  const auto logits = forward_full(m, x);
  double total = 0;
  for (size_t k = 0; k < logits.size(); ++k) total += w[k] * head_loss(logits[k], y);
  return total;
}

// Shared desk-scale experiment: 30k samples, 3 classes (one separable only by
// a nonlinear boundary), 5x32 EagerNet trained 200 epochs.
struct DeskScale {
  Dataset ds;
  TrainResult result;
  Matrix test_x;
  std::vector<int> test_truth;
  double train_seconds = 0;
};

const TrainConfig& desk_config() {
  static const TrainConfig cfg = [] {
    TrainConfig c;
    c.variant = Variant::multiclass;
    c.weight_scheme = WeightScheme::uniform;
    c.depth = 5;
    c.width = 32;
    c.epochs = 200;
    c.batch_size = 128;
    c.seed = 1;
    return c;
  }();
  return cfg;
}

Dataset desk_dataset(uint64_t seed) {
  const RawRows raw = generate_three_class(30000, seed);
  PrepareOptions popts;
  popts.split.seed = seed;
  popts.split.val_fraction = 0.15;
  return prepare_dataset(raw, popts);
}

const DeskScale& desk_scale() {
  static const DeskScale fixture = [] {
    DeskScale f;
    Timer t;
    f.ds = desk_dataset(1);
    f.result = train(desk_config(), f.ds);
    f.train_seconds = t.seconds();
    const auto rows = f.ds.rows_of(Split::test);
    f.test_x = f.ds.gather(rows);
    for (size_t i : rows) f.test_truth.push_back(f.ds.family_labels[i]);
    return f;
  }();
  return fixture;
}

}  // namespace

TEST_CASE("criterion 1: gradient correctness") {
  Timer timer;
  double worst = 0;
  Rng rng(11, 8);

  auto check_model = [&](Variant variant, size_t head_width, uint64_t seed) {
    ModelConfig mc;
    mc.input_width = 31;
    mc.hidden_widths = {8, 8};
    mc.head_width = head_width;
    mc.variant = variant;
    mc.dropout = 0.0;
    EagerNetModel m = EagerNetModel::init(mc, seed);
    Matrix x(16, 31);
    for (auto& v : x.data) v = rng.normal();
    Targets y;
    y.variant = variant;
    if (variant == Variant::binary) {
      for (size_t n = 0; n < 16; ++n) y.binary.push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
    } else {
      std::vector<int32_t> fams;
      for (size_t n = 0; n < 16; ++n) fams.push_back(static_cast<int32_t>(rng.below(head_width)));
      y.onehot = one_hot(fams, head_width);
    }
    const auto w = loss_weights(2, WeightScheme::uniform);
    const BackwardResult back = compute_gradients(m, x, y, w);
    auto probe_tensor = [&](std::vector<double>& params, const std::vector<double>& grads) {
      for (size_t i = 0; i < params.size(); ++i) {
        auto loss = [&]() { return combined_loss(m, x, y, w); };
        const double fd = testing_oracle::central_diff(loss, params[i], 1e-5);
        worst = std::max(worst, testing_oracle::rel_err(fd, grads[i]));
      }
    };
    for (size_t k = 0; k < 2; ++k) {
      probe_tensor(m.hidden[k].w.data, back.grads.hidden[k].w.data);
      probe_tensor(m.hidden[k].b, back.grads.hidden[k].b);
      probe_tensor(m.heads[k].w.data, back.grads.heads[k].w.data);
      probe_tensor(m.heads[k].b, back.grads.heads[k].b);
    }
  };
  check_model(Variant::binary, 1, 101);
  check_model(Variant::multiclass, 3, 102);

  const double secs = timer.seconds();
  const bool pass = worst < 1e-4 && secs < 10.0;
  std::ostringstream detail;
  detail << "max rel err " << worst << ", " << secs << " s";
  report(1, "gradient correctness", pass, detail.str());
  CHECK(worst < 1e-4);
  CHECK(secs < 10.0);
}

TEST_CASE("criterion 2: loss oracles") {
  Timer timer;
  double worst = 0;

  // hand values first
  {
    Matrix logits(1, 1);
    std::vector<double> y = {1.0};
    worst = std::max(worst, std::abs(bce_loss(logits, y) - std::log(2.0)));
    Matrix ml(1, 4);
    worst = std::max(worst, std::abs(cce_loss(ml, one_hot({1}, 4)) - std::log(4.0)));
  }

  Rng rng(12, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 1 + rng.below(48);
    if (trial % 2 == 0) {
      Matrix logits(n, 1);
      std::vector<double> y(n), flat(n);
      for (size_t i = 0; i < n; ++i) {
        logits(i, 0) = rng.uniform(-30, 30);
        flat[i] = logits(i, 0);
        y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
      }
      worst = std::max(worst, std::abs(bce_loss(logits, y) - testing_oracle::naive_bce(flat, y)));
    } else {
      const size_t c = 2 + rng.below(8);
      Matrix logits(n, c);
      for (auto& v : logits.data) v = rng.uniform(-25, 25);
      std::vector<int32_t> fams;
      for (size_t i = 0; i < n; ++i) fams.push_back(static_cast<int32_t>(rng.below(c)));
      const Matrix y = one_hot(fams, c);
      worst = std::max(worst, std::abs(cce_loss(logits, y) - testing_oracle::naive_cce(logits, y)));
    }
  }
  const double secs = timer.seconds();
  const bool pass = worst < 1e-10 && secs < 5.0;
  std::ostringstream detail;
  detail << "max abs err " << worst << " over 1000 batches, " << secs << " s";
  report(2, "loss oracles", pass, detail.str());
  CHECK(worst < 1e-10);
  CHECK(secs < 5.0);
}

TEST_CASE("criterion 3: weight schedules") {
  Timer timer;
  bool ok = true;
  for (size_t layers = 1; layers <= 16; ++layers) {
    const uint64_t denom = layers * (layers + 1) / 2;
    const auto uni = loss_weights(layers, WeightScheme::uniform);
    const auto inc = loss_weights(layers, WeightScheme::increasing);
    const auto dec = loss_weights(layers, WeightScheme::decreasing);
    uint64_t numerators = 0;
    for (size_t i = 0; i < layers; ++i) {
      ok = ok && uni[i] == 1.0 / static_cast<double>(layers);
      ok = ok && inc[i] == static_cast<double>(i + 1) / static_cast<double>(denom);
      ok = ok && dec[i] == static_cast<double>(layers - i) / static_cast<double>(denom);
      numerators += i + 1;
    }
    ok = ok && numerators == denom;  // exact rational sum to 1
    double fsum = 0;
    for (double v : inc) fsum += v;
    ok = ok && std::abs(fsum - 1.0) < 1e-12;
  }
  ok = ok && loss_weights(3, WeightScheme::uniform) ==
                 std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3};
  ok = ok && loss_weights(3, WeightScheme::increasing) ==
                 std::vector<double>{1.0 / 6, 2.0 / 6, 3.0 / 6};
  ok = ok && loss_weights(3, WeightScheme::decreasing) ==
                 std::vector<double>{3.0 / 6, 2.0 / 6, 1.0 / 6};
  const double secs = timer.seconds();
  std::ostringstream detail;
  detail << "L = 1..16, three schemes, " << secs << " s";
  report(3, "weight schedules", ok && secs < 1.0, detail.str());
  CHECK(ok);
  CHECK(secs < 1.0);
}

TEST_CASE("criterion 4: agreement at ceiling") {
  const DeskScale& f = desk_scale();
  const EagerNetModel& model = f.result.model;
  const std::vector<int> last_head = predict_last_head(model, f.test_x);
  size_t agree = 0;
  double exit_sum = 0;
  for (size_t n = 0; n < f.test_x.rows; ++n) {
    const EagerPrediction p = forward_eager(model, f.test_x.row(n), 1.0);
    if (p.cls == last_head[n]) ++agree;
    exit_sum += p.exit_layer;
  }
  const double mean_exit = exit_sum / static_cast<double>(f.test_x.rows);
  const bool pass = agree == f.test_x.rows && mean_exit == static_cast<double>(model.depth());
  std::ostringstream detail;
  detail << agree << "/" << f.test_x.rows << " agree, mean exit " << mean_exit;
  report(4, "agreement at ceiling", pass, detail.str());
  CHECK(agree == f.test_x.rows);
  CHECK(mean_exit == static_cast<double>(model.depth()));
}

TEST_CASE("criterion 5: exit monotonicity over a 101-point grid") {
  const DeskScale& f = desk_scale();
  const EagerNetModel& model = f.result.model;
  const auto grid = default_threshold_grid(model, 101);
  const SweepReport report_data =
      threshold_sweep(model, f.test_x, f.test_truth, grid, true, 2);

  size_t violations = 0;
  for (size_t n = 0; n < f.test_x.rows; ++n)
    for (size_t t = 1; t < grid.size(); ++t)
      if (report_data.exits[t][n] < report_data.exits[t - 1][n]) ++violations;
  size_t mean_violations = 0;
  for (size_t t = 1; t < grid.size(); ++t)
    if (report_data.points[t].mean_exit_layer < report_data.points[t - 1].mean_exit_layer)
      ++mean_violations;

  const bool pass = violations == 0 && mean_violations == 0;
  std::ostringstream detail;
  detail << violations << " per-sample violations, " << mean_violations
         << " mean violations over " << grid.size() << " thresholds";
  report(5, "exit monotonicity", pass, detail.str());
  CHECK(violations == 0);
  CHECK(mean_violations == 0);
}

TEST_CASE("criterion 6: baseline reduction is bitwise") {
  const RawRows raw = generate_blobs(900, 71);
  PrepareOptions popts;
  popts.split.seed = 6;
  const Dataset ds = prepare_dataset(raw, popts);

  TrainConfig cfg;
  cfg.variant = Variant::binary;
  cfg.weight_scheme = WeightScheme::last_only;
  cfg.depth = 3;
  cfg.width = 16;
  cfg.epochs = 50;
  cfg.batch_size = 64;
  cfg.seed = 61;

  std::vector<std::vector<DenseLayer>> eager_snapshots;
  train(cfg, ds, [&](const EpochStats&, const EagerNetModel& m) {
    eager_snapshots.push_back(m.hidden);
  });

  ModelConfig mc;
  mc.input_width = ds.cols();
  mc.hidden_widths.assign(cfg.depth, cfg.width);
  mc.head_width = 1;
  mc.variant = Variant::binary;
  mc.dropout = cfg.dropout;
  const auto plain = testing_oracle::train_plain_fcnn(
      testing_oracle::plain_fcnn_like(mc, cfg.seed), ds, cfg);

  bool identical = eager_snapshots.size() == plain.size();
  size_t epochs_checked = 0;
  for (size_t e = 0; identical && e < plain.size(); ++e, ++epochs_checked)
    for (size_t k = 0; k < cfg.depth; ++k)
      identical = identical &&
                  eager_snapshots[e][k].w.data == plain[e].hidden[k].w.data &&
                  eager_snapshots[e][k].b == plain[e].hidden[k].b;

  std::ostringstream detail;
  detail << epochs_checked << "/50 epoch snapshots bitwise identical";
  report(6, "baseline reduction", identical, detail.str());
  CHECK(identical);
}

TEST_CASE("criterion 7: flowmeter golden vectors and trace properties") {
  bool ok = true;
  double worst = 0;

  // 3-packet hand trace
  {
    FlowTable table;
    table.ingest(testing_oracle::packet(0.00, "10.0.0.1", 1000, "10.0.0.2", 2000, 100, true));
    table.ingest(testing_oracle::packet(0.50, "10.0.0.2", 2000, "10.0.0.1", 1000, 60, false, true));
    table.ingest(testing_oracle::packet(1.25, "10.0.0.1", 1000, "10.0.0.2", 2000, 40, false, true, true));
    const auto flows = table.flush();
    ok = ok && flows.size() == 1;
    if (ok) {
      const std::array<double, kFeatureCount> expect = {
          1250, 1000, 2000, 6, 200,
          70, 40, 100, 30, 1.25, 1.25, 1.25, 0, 2, 1, 1, 1, 0,
          60, 60, 60, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0};
      for (size_t k = 0; k < kFeatureCount; ++k)
        worst = std::max(worst, std::abs(flows[0].values[k] - expect[k]));
    }
  }

  // 50-packet synthetic trace against the naive oracle
  {
    TraceOptions opts;
    opts.flows = 9;
    opts.seed = 41;
    const LabeledTrace trace = generate_trace(opts);
    ok = ok && trace.packets.size() >= 50;
    FlowTable table;
    std::vector<FeatureVector> got;
    for (const auto& p : trace.packets)
      for (auto& fv : table.ingest(p)) got.push_back(std::move(fv));
    for (auto& fv : table.flush()) got.push_back(std::move(fv));
    const auto expect = testing_oracle::naive_flows(trace.packets);
    ok = ok && got.size() == expect.size();
    for (size_t i = 0; ok && i < got.size(); ++i) {
      const auto want = testing_oracle::naive_feature_vector(expect[i]);
      for (size_t k = 0; k < kFeatureCount; ++k)
        worst = std::max(worst, std::abs(got[i].values[k] - want[k]));
    }
  }
  ok = ok && worst <= 1e-9;

  // direction-swap symmetry and split invariance over 100 random traces.
  // Forward follows the first packet, so relabeling every packet's direction
  // leaves the directional blocks in place and swaps only the port pair.
  size_t traces_ok = 0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    TraceOptions opts;
    opts.flows = 6;
    opts.seed = seed;
    LabeledTrace trace = generate_trace(opts);

    FlowTable t1;
    std::vector<FeatureVector> one_shot;
    for (const auto& p : trace.packets) t1.ingest(p);
    one_shot = t1.flush();

    FlowTable t2;
    std::vector<FeatureVector> stepwise;
    for (const auto& p : trace.packets)
      for (auto& fv : t2.ingest(p)) stepwise.push_back(std::move(fv));
    for (auto& fv : t2.flush()) stepwise.push_back(std::move(fv));

    bool same = one_shot.size() == stepwise.size();
    for (size_t i = 0; same && i < one_shot.size(); ++i)
      same = one_shot[i].values == stepwise[i].values;

    reverse_trace_directions(trace.packets);
    FlowTable t3;
    for (const auto& p : trace.packets) t3.ingest(p);
    const auto mirrored = t3.flush();
    bool swapped = mirrored.size() == one_shot.size();
    for (size_t i = 0; swapped && i < mirrored.size(); ++i) {
      const auto& a = one_shot[i].values;
      const auto& b = mirrored[i].values;
      swapped = swapped && a[1] == b[2] && a[2] == b[1];
      for (size_t k = 0; swapped && k < kFeatureCount; ++k)
        if (k != 1 && k != 2) swapped = a[k] == b[k];
    }
    if (same && swapped) ++traces_ok;
  }
  ok = ok && traces_ok == 100;

  std::ostringstream detail;
  detail << "max stat err " << worst << ", " << traces_ok << "/100 traces symmetric and split-invariant";
  report(7, "flowmeter golden vectors", ok, detail.str());
  CHECK(ok);
}

TEST_CASE("criterion 8: desk-scale accuracy-compute tradeoff") {
  const DeskScale& f = desk_scale();
  const EagerNetModel& model = f.result.model;
  const size_t layers = model.depth();

  // (a) last-head accuracy
  const std::vector<int> pred = predict_last_head(model, f.test_x);
  size_t correct = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == f.test_truth[i]) ++correct;
  const double last_acc = static_cast<double>(correct) / static_cast<double>(pred.size());

  // (b) a threshold trading little accuracy for a large layer saving
  const auto grid = default_threshold_grid(model, 101);
  const SweepReport sweep = threshold_sweep(model, f.test_x, f.test_truth, grid, false, 2);
  bool tradeoff = false;
  double best_acc = 0, best_exit = 0;
  for (const auto& pt : sweep.points) {
    if (pt.accuracy >= 0.93 && pt.mean_exit_layer <= 0.6 * static_cast<double>(layers)) {
      tradeoff = true;
      if (pt.accuracy > best_acc) {
        best_acc = pt.accuracy;
        best_exit = pt.mean_exit_layer;
      }
    }
  }

  // (c) the hard class needs depth
  const LayerClassMatrix m = layer_class_accuracy(model, f.test_x, f.test_truth);
  const size_t hard = 2;  // "mosaic", the checkerboard-parity family
  const double head1 = m.at(0, hard);
  const double headL = m.at(layers - 1, hard);
  const bool deep_gain = head1 <= headL - 0.05;

  const bool pass = last_acc >= 0.95 && tradeoff && deep_gain && f.train_seconds < 300.0;
  std::ostringstream detail;
  detail << "last-head acc " << last_acc << "; tradeoff point acc " << best_acc
         << " at mean exit " << best_exit << "; hard class head1 " << head1
         << " vs headL " << headL << "; train " << f.train_seconds << " s";
  report(8, "desk-scale tradeoff", pass, detail.str());
  CHECK(last_acc >= 0.95);
  CHECK(tradeoff);
  CHECK(deep_gain);
  CHECK(f.train_seconds < 300.0);
}

TEST_CASE("criterion 9: full backprop beats one-step on intermediate heads") {
  double full_total = 0, one_step_total = 0;
  std::ostringstream per_seed;
  for (uint64_t seed : {1, 2, 3}) {
    const Dataset ds = desk_dataset(seed);
    for (BackpropMode mode : {BackpropMode::full, BackpropMode::one_step}) {
      TrainConfig cfg = desk_config();
      cfg.seed = seed;
      cfg.backprop_mode = mode;
      const TrainResult result = train(cfg, ds);
      const EpochStats& last = result.history.back();
      double mean = 0;
      for (size_t k = 0; k + 1 < last.head_val_acc.size(); ++k)
        mean += last.head_val_acc[k];
      mean /= static_cast<double>(last.head_val_acc.size() - 1);
      (mode == BackpropMode::full ? full_total : one_step_total) += mean;
      per_seed << (mode == BackpropMode::full ? " full=" : " one-step=") << mean;
    }
  }
  const double full_mean = full_total / 3.0;
  const double one_step_mean = one_step_total / 3.0;
  const bool pass = full_mean >= one_step_mean;
  std::ostringstream detail;
  detail << "intermediate-head val acc: full " << full_mean << " vs one-step "
         << one_step_mean << " (3 seeds:" << per_seed.str() << ")";
  report(9, "ablation direction", pass, detail.str());
  CHECK(full_mean >= one_step_mean);
}
