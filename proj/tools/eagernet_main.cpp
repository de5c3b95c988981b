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

// eagernet: flow feature extraction, dataset preparation, training with the
// combined multi-head loss, and evaluation (metrics, confidence sweep,
// per-layer per-class accuracy).
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eagernet/dataset.hpp"
#include "eagernet/flow_csv.hpp"
#include "eagernet/manifest.hpp"
#include "eagernet/metrics.hpp"
#include "eagernet/model.hpp"
#include "eagernet/selfcheck.hpp"
#include "eagernet/synthetic.hpp"
#include "eagernet/trainer.hpp"
#include "eagernet/version.hpp"

namespace {

using namespace eagernet;

struct GlobalOpts {
  std::optional<uint64_t> seed;
  unsigned threads = 1;
  bool quiet = false;
};

std::ostream& info(const GlobalOpts& g) {
  static std::ofstream devnull;
  if (g.quiet) {
    devnull.setstate(std::ios::badbit);
    return devnull;
  }
  return std::cerr;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  return out;
}

// Splits of the bundle selectable on the evaluation commands.
std::vector<size_t> select_rows(const Dataset& ds, const std::string& which) {
  if (which == "test") return ds.rows_of(Split::test);
  if (which == "train") return ds.rows_of(Split::train);
  if (which == "val") return ds.rows_of(Split::val);
  if (which == "all") {
    std::vector<size_t> idx(ds.rows());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
  }
  throw DataError("unknown split '" + which + "' (test | train | val | all)");
}

std::vector<int> truth_for(const EagerNetModel& model, const Dataset& ds,
                           const std::vector<size_t>& rows) {
  std::vector<int> truth;
  truth.reserve(rows.size());
  for (size_t i : rows)
    truth.push_back(model.config.variant == Variant::binary
                        ? static_cast<int>(ds.binary_labels[i])
                        : static_cast<int>(ds.family_labels[i]));
  return truth;
}

void check_model_matches(const EagerNetModel& model, const Dataset& ds) {
  if (model.config.input_width != ds.cols())
    throw DataError("model input width " + std::to_string(model.config.input_width) +
                    " does not match bundle columns " + std::to_string(ds.cols()));
  if (model.config.variant == Variant::multiclass &&
      model.config.head_width != ds.classes())
    throw DataError("model has " + std::to_string(model.config.head_width) +
                    " classes, bundle has " + std::to_string(ds.classes()));
}

int cmd_extract(const GlobalOpts& g, const std::string& in_path,
                const std::string& out_path, double timeout,
                const std::string& timeout_mode, double reorder_tolerance,
                const std::string& labels_path) {
  RunManifest manifest("extract", g.seed.value_or(0));
  manifest.add_input(in_path);
  FlowTable::Options opts;
  opts.timeout_seconds = timeout;
  opts.reorder_tolerance = reorder_tolerance;
  if (timeout_mode == "idle")
    opts.timeout_mode = TimeoutMode::idle;
  else if (timeout_mode == "absolute")
    opts.timeout_mode = TimeoutMode::absolute;
  else
    throw DataError("unknown timeout mode '" + timeout_mode + "' (idle | absolute)");

  std::optional<LabelMap> labels;
  if (!labels_path.empty()) {
    auto lin = open_in(labels_path);
    labels = LabelMap::read(lin, labels_path);
    manifest.add_input(labels_path);
  }

  auto in = open_in(in_path);
  auto out = open_out(out_path);
  const ExtractStats stats =
      extract_flows(in, out, opts, labels ? &*labels : nullptr,
                    g.quiet ? nullptr : &std::cerr, in_path);
  out.close();

  nlohmann::json cfg;
  cfg["timeout_seconds"] = timeout;
  cfg["timeout_mode"] = timeout_mode;
  cfg["reorder_tolerance"] = reorder_tolerance;
  cfg["packets"] = stats.packets;
  cfg["rejected"] = stats.rejected;
  cfg["flows"] = stats.flows;
  cfg["unlabeled"] = stats.unlabeled;
  manifest.set_config(cfg);
  manifest.add_output(out_path);
  manifest.write(out_path);

  info(g) << "extracted " << stats.flows << " flows from " << stats.packets
          << " packets (" << stats.rejected << " rejected, " << stats.unlabeled
          << " unlabeled)\n";
  if (stats.packets > 0 && stats.rejected == stats.packets)
    throw DataError("all " + std::to_string(stats.packets) + " records were rejected");
  return 0;
}

int cmd_prepare(const GlobalOpts& g, const std::string& in_path,
                const std::string& out_path, uint64_t seed, double val_fraction,
                bool stratify) {
  RunManifest manifest("prepare", seed);
  manifest.add_input(in_path);
  auto in = open_in(in_path);
  const RawRows raw = read_feature_csv(in, in_path);

  PrepareOptions opts;
  opts.split.seed = seed;
  opts.split.val_fraction = val_fraction;
  opts.split.stratify = stratify;
  const Dataset ds = prepare_dataset(raw, opts);
  save_dataset(ds, out_path);

  nlohmann::json cfg;
  cfg["seed"] = seed;
  cfg["val_fraction"] = val_fraction;
  cfg["stratify"] = stratify;
  cfg["rows_in"] = raw.size();
  cfg["rows_after_dedup"] = ds.rows();
  cfg["classes"] = ds.class_names;
  manifest.set_config(cfg);
  manifest.add_output(out_path);
  manifest.write(out_path);

  info(g) << "prepared " << ds.rows() << " rows (" << raw.size() - ds.rows()
          << " duplicates dropped), " << ds.classes() << " classes, "
          << ds.rows_of(Split::train).size() << "/" << ds.rows_of(Split::val).size()
          << "/" << ds.rows_of(Split::test).size() << " train/val/test\n";
  return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& data_path,
              const std::string& config_path, const std::string& model_path,
              const std::string& history_path) {
  nlohmann::json config_json;
  {
    auto in = open_in(config_path);
    try {
      in >> config_json;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(config_path + ": " + e.what());
    }
  }
  TrainConfig cfg = train_config_from_json(config_json);
  if (g.seed) cfg.seed = *g.seed;

  RunManifest manifest("train", cfg.seed);
  manifest.add_input(data_path);
  manifest.add_input(config_path);

  const Dataset ds = load_dataset(data_path);
  info(g) << "training " << to_string(cfg.variant) << " " << cfg.depth << "x"
          << cfg.width << " (" << to_string(cfg.weight_scheme) << " weights, "
          << to_string(cfg.backprop_mode) << " backprop) for up to " << cfg.epochs
          << " epochs\n";

  const TrainResult result = train(cfg, ds, [&g](const EpochStats& e, const EagerNetModel&) {
    if (e.epoch % 10 == 0 || e.epoch == 1)
      info(g) << "epoch " << e.epoch << ": train " << e.train_loss << ", monitor "
              << e.val_loss << "\n";
  });

  save_model(result.model, model_path);
  if (!history_path.empty()) {
    auto out = open_out(history_path);
    write_history_csv(result.history, out);
  }

  manifest.set_config(train_config_to_json(cfg));
  manifest.add_output(model_path);
  if (!history_path.empty()) manifest.add_output(history_path);
  manifest.write(model_path);

  info(g) << "kept epoch " << result.best_epoch << " snapshot"
          << (result.monitored_on_train ? " (monitored on the training split)" : "")
          << "\n";
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& model_path,
             const std::string& data_path, const std::string& out_path,
             const std::string& split) {
  RunManifest manifest("eval", g.seed.value_or(0));
  manifest.add_input(model_path);
  manifest.add_input(data_path);
  const EagerNetModel model = load_model(model_path);
  const Dataset ds = load_dataset(data_path);
  check_model_matches(model, ds);

  const std::vector<size_t> rows = select_rows(ds, split);
  if (rows.empty()) throw DataError("split '" + split + "' has no rows");
  const Matrix x = ds.gather(rows);
  const std::vector<int> truth = truth_for(model, ds, rows);
  const std::vector<int> pred = predict_last_head(model, x);

  nlohmann::json j;
  j["variant"] = to_string(model.config.variant);
  j["split"] = split;
  j["samples"] = rows.size();
  if (model.config.variant == Variant::binary) {
    const BinaryCounts c = binary_confusion(pred, truth);
    const BinaryMetrics m = binary_metrics(c);
    j["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["youden_j"] = m.youden_j;
    j["degenerate"] = m.degenerate;
  } else {
    const ConfusionMatrix cm = multiclass_confusion(pred, truth, model.config.head_width);
    uint64_t diag = 0;
    for (size_t c = 0; c < cm.classes; ++c) diag += cm.at(c, c);
    j["accuracy"] = static_cast<double>(diag) / static_cast<double>(cm.total());
    j["f1_macro"] = f1_multiclass(cm, F1Average::macro);
    j["f1_micro"] = f1_multiclass(cm, F1Average::micro);
    j["f1_weighted"] = f1_multiclass(cm, F1Average::weighted);
    nlohmann::json per_class = nlohmann::json::array();
    for (size_t c = 0; c < cm.classes; ++c) {
      const BinaryCounts bc = one_vs_rest(cm, c);
      nlohmann::json e;
      e["class"] = c < model.class_names.size() ? model.class_names[c]
                                                : std::to_string(c);
      e["support"] = cm.row_sum(c);
      if (bc.total() > 0) {
        const BinaryMetrics bm = binary_metrics(bc);
        e["precision"] = bm.precision;
        e["recall"] = bm.recall;
        e["f1"] = bm.f1;
        e["youden_j"] = bm.youden_j;
      }
      per_class.push_back(e);
    }
    j["per_class"] = per_class;
    nlohmann::json rows_json = nlohmann::json::array();
    for (size_t t = 0; t < cm.classes; ++t) {
      nlohmann::json row = nlohmann::json::array();
      for (size_t p = 0; p < cm.classes; ++p) row.push_back(cm.at(t, p));
      rows_json.push_back(row);
    }
    j["confusion"] = rows_json;
  }

  {
    auto out = open_out(out_path);
    out << j.dump(2) << '\n';
  }
  manifest.set_config({{"split", split}});
  manifest.add_output(out_path);
  manifest.write(out_path);
  info(g) << "wrote " << out_path << "\n";
  return 0;
}

int cmd_sweep(const GlobalOpts& g, const std::string& model_path,
              const std::string& data_path, const std::string& out_path,
              size_t grid, const std::string& split) {
  RunManifest manifest("sweep", g.seed.value_or(0));
  manifest.add_input(model_path);
  manifest.add_input(data_path);
  const EagerNetModel model = load_model(model_path);
  const Dataset ds = load_dataset(data_path);
  check_model_matches(model, ds);

  const std::vector<size_t> rows = select_rows(ds, split);
  if (rows.empty()) throw DataError("split '" + split + "' has no rows");
  const Matrix x = ds.gather(rows);
  const std::vector<int> truth = truth_for(model, ds, rows);

  const std::vector<double> grid_points = default_threshold_grid(model, grid);
  const SweepReport report =
      threshold_sweep(model, x, truth, grid_points, false, g.threads);

  {
    auto out = open_out(out_path);
    std::vector<std::string> cells = {"threshold", "accuracy", "mean_exit_layer"};
    for (size_t k = 1; k <= model.depth(); ++k)
      cells.push_back("exit_hist_" + std::to_string(k));
    write_csv_row(out, cells);
    for (const auto& pt : report.points) {
      cells.clear();
      cells.push_back(format_double(pt.threshold));
      cells.push_back(format_double(pt.accuracy));
      cells.push_back(format_double(pt.mean_exit_layer));
      for (uint64_t h : pt.exit_hist) cells.push_back(std::to_string(h));
      write_csv_row(out, cells);
    }
  }

  manifest.set_config({{"grid", grid},
                       {"split", split},
                       {"model_fnv64", hex64(report.provenance)}});
  manifest.add_output(out_path);
  manifest.write(out_path);
  info(g) << "wrote " << out_path << " (" << report.points.size() << " thresholds)\n";
  return 0;
}

int cmd_matrix(const GlobalOpts& g, const std::string& model_path,
               const std::string& data_path, const std::string& out_path,
               const std::string& split) {
  RunManifest manifest("matrix", g.seed.value_or(0));
  manifest.add_input(model_path);
  manifest.add_input(data_path);
  const EagerNetModel model = load_model(model_path);
  const Dataset ds = load_dataset(data_path);
  check_model_matches(model, ds);

  const std::vector<size_t> rows = select_rows(ds, split);
  if (rows.empty()) throw DataError("split '" + split + "' has no rows");
  const Matrix x = ds.gather(rows);
  const std::vector<int> truth = truth_for(model, ds, rows);
  const LayerClassMatrix m = layer_class_accuracy(model, x, truth);

  {
    auto out = open_out(out_path);
    std::vector<std::string> cells = {"layer"};
    for (size_t c = 0; c < m.classes; ++c)
      cells.push_back(c < model.class_names.size() ? model.class_names[c]
                                                   : std::to_string(c));
    write_csv_row(out, cells);
    for (size_t k = 0; k < m.layers; ++k) {
      cells.clear();
      cells.push_back(std::to_string(k + 1));
      for (size_t c = 0; c < m.classes; ++c)
        cells.push_back(m.absent(c) ? "" : format_double(m.at(k, c)));
      write_csv_row(out, cells);
    }
    cells.clear();
    cells.push_back("support");
    for (size_t c = 0; c < m.classes; ++c) cells.push_back(std::to_string(m.support[c]));
    write_csv_row(out, cells);
  }

  manifest.set_config({{"split", split}});
  manifest.add_output(out_path);
  manifest.write(out_path);
  info(g) << "wrote " << out_path << "\n";
  return 0;
}

int cmd_selfcheck(const GlobalOpts&) {
  const std::vector<CheckResult> results = run_selfcheck();
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name;
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
    all = all && r.pass;
  }
  std::cout << (all ? "selfcheck: all checks passed" : "selfcheck: FAILURES") << "\n";
  return all ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EagerNet early-exit intrusion detection pipeline"};
  app.set_version_flag("--version", std::string("eagernet ") + eagernet::kToolVersion);
  app.require_subcommand(1);

  GlobalOpts g;
  if (const char* env = std::getenv("EAGERNET_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) g.threads = static_cast<unsigned>(v);
  }
  uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "Override the seed");
  app.add_option("--threads", g.threads, "Worker threads for evaluation commands")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  // extract
  auto* extract = app.add_subcommand("extract", "Aggregate packet records into CAIA flow features");
  std::string ex_in, ex_out, ex_labels;
  double ex_timeout = kDefaultFlowTimeout, ex_reorder = 0.0;
  std::string ex_mode = "idle";
  extract->add_option("--in", ex_in, "Packet record CSV")->required();
  extract->add_option("--out", ex_out, "Flow feature CSV")->required();
  extract->add_option("--timeout", ex_timeout, "Flow timeout in seconds");
  extract->add_option("--timeout-mode", ex_mode, "idle | absolute");
  extract->add_option("--reorder-tolerance", ex_reorder,
                      "Accept timestamps up to this many seconds out of order");
  extract->add_option("--labels", ex_labels, "Five-tuple keyed label sidecar CSV");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Build a normalized train/test bundle");
  std::string pr_in, pr_out;
  uint64_t pr_seed = 1;
  double pr_val = 0.0;
  bool pr_stratify = false;
  prepare->add_option("--in", pr_in, "Flow feature CSV with labels")->required();
  prepare->add_option("--out", pr_out, "Output bundle")->required();
  prepare->add_option("--seed", pr_seed, "Split seed");
  prepare->add_option("--val-fraction", pr_val, "Validation slice carved from the training split")
      ->check(CLI::Range(0.0, 0.999));
  prepare->add_flag("--stratify", pr_stratify, "Stratify the split by family");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an EagerNet model");
  std::string tr_data, tr_config, tr_model, tr_history;
  train_cmd->add_option("--data", tr_data, "Dataset bundle")->required();
  train_cmd->add_option("--config", tr_config, "Training config (JSON)")->required();
  train_cmd->add_option("--out", tr_model, "Output model file")->required();
  train_cmd->add_option("--history", tr_history, "Per-epoch history CSV");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Last-head metrics as JSON");
  std::string ev_model, ev_data, ev_out, ev_split = "test";
  eval_cmd->add_option("--model", ev_model)->required();
  eval_cmd->add_option("--data", ev_data)->required();
  eval_cmd->add_option("--out", ev_out)->required();
  eval_cmd->add_option("--split", ev_split, "test | train | val | all");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Confidence threshold sweep CSV");
  std::string sw_model, sw_data, sw_out, sw_split = "test";
  size_t sw_grid = 101;
  sweep_cmd->add_option("--model", sw_model)->required();
  sweep_cmd->add_option("--data", sw_data)->required();
  sweep_cmd->add_option("--out", sw_out)->required();
  sweep_cmd->add_option("--grid", sw_grid, "Number of thresholds");
  sweep_cmd->add_option("--split", sw_split, "test | train | val | all");

  // matrix
  auto* matrix_cmd = app.add_subcommand("matrix", "Per-layer per-class accuracy CSV");
  std::string mx_model, mx_data, mx_out, mx_split = "test";
  matrix_cmd->add_option("--model", mx_model)->required();
  matrix_cmd->add_option("--data", mx_data)->required();
  matrix_cmd->add_option("--out", mx_out)->required();
  matrix_cmd->add_option("--split", mx_split, "test | train | val | all");

  // selfcheck
  app.add_subcommand("selfcheck", "Run the built-in gradient and invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // collapse CLI11's per-error codes onto the documented usage exit code
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed_flag;

  try {
    if (extract->parsed())
      return cmd_extract(g, ex_in, ex_out, ex_timeout, ex_mode, ex_reorder, ex_labels);
    if (prepare->parsed())
      return cmd_prepare(g, pr_in, pr_out, g.seed.value_or(pr_seed), pr_val, pr_stratify);
    if (train_cmd->parsed()) return cmd_train(g, tr_data, tr_config, tr_model, tr_history);
    if (eval_cmd->parsed()) return cmd_eval(g, ev_model, ev_data, ev_out, ev_split);
    if (sweep_cmd->parsed()) return cmd_sweep(g, sw_model, sw_data, sw_out, sw_grid, sw_split);
    if (matrix_cmd->parsed()) return cmd_matrix(g, mx_model, mx_data, mx_out, mx_split);
    return cmd_selfcheck(g);
  } catch (const eagernet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const eagernet::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
