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

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eagernet/blob.hpp"
#include "eagernet/dataset.hpp"
#include "eagernet/nn.hpp"

// The multi-head model: a stack of hidden layers with one affine output head
// per layer ("a copy of the output neurons", no hidden layers inside heads).
// Training evaluates every head; eager inference walks the stack one layer at
// a time and stops at the first head whose confidence reaches the threshold.

namespace eagernet {

enum class Variant { binary, multiclass };

inline std::string to_string(Variant v) {
  return v == Variant::binary ? "binary" : "multiclass";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "binary") return Variant::binary;
  if (s == "multiclass") return Variant::multiclass;
  throw DataError("unknown variant '" + s + "' (binary | multiclass)");
}

struct ModelConfig {
  size_t input_width = kFeatureCount;
  std::vector<size_t> hidden_widths;  // e.g. 5 x 32
  size_t head_width = 1;              // 1 (binary) or C (multiclass)
  Variant variant = Variant::binary;
  double alpha = kLeakyReluAlpha;
  double dropout = 0.2;
  // Heads read the post-activation value by default; pre-activation tapping
  // is available as a config switch.
  bool heads_tap_preactivation = false;

  size_t depth() const { return hidden_widths.size(); }
};

struct EagerNetModel {
  ModelConfig config;
  std::vector<DenseLayer> hidden;
  std::vector<DenseLayer> heads;  // one per hidden layer, identical out width
  NormStats norm;                 // input normalization, persisted with the model
  std::vector<std::string> class_names;

  size_t depth() const { return hidden.size(); }

  // Lowest representable confidence: 0.5 for the sigmoid case, 1/C for
  // softmax.
  double confidence_floor() const {
    return config.variant == Variant::binary
               ? 0.5
               : 1.0 / static_cast<double>(config.head_width);
  }

  // Layers first, then heads, so hidden initialization is independent of the
  // number of heads drawn afterwards.
  static EagerNetModel init(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.hidden_widths.empty()) throw DataError("model needs at least one hidden layer");
    if (cfg.head_width < 1) throw DataError("head width must be >= 1");
    EagerNetModel m;
    m.config = cfg;
    Rng rng(seed, rng_stream::kInit);
    size_t in = cfg.input_width;
    for (size_t w : cfg.hidden_widths) {
      m.hidden.push_back(DenseLayer::init(in, w, rng));
      in = w;
    }
    for (size_t w : cfg.hidden_widths)
      m.heads.push_back(DenseLayer::init(w, cfg.head_width, rng));
    return m;
  }
};

// Everything the backward pass needs from one training forward.
struct ForwardTape {
  std::vector<Matrix> inputs;   // input to hidden layer k (post-dropout below)
  std::vector<Matrix> pre;      // z_k
  std::vector<Matrix> masks;    // dropout masks (all ones at rate 0 / eval)
  std::vector<Matrix> head_in;  // what head k consumed
};

// Training forward: records the tape, applies dropout after each hidden
// activation. Heads see the dropped value so they train against the same
// noise as the trunk.
inline std::vector<Matrix> forward_train(const EagerNetModel& m, const Matrix& x,
                                         Rng& dropout_rng, ForwardTape& tape) {
  const size_t layers = m.depth();
  tape.inputs.clear();
  tape.pre.clear();
  tape.masks.clear();
  tape.head_in.clear();
  std::vector<Matrix> logits;
  logits.reserve(layers);
  Matrix cur = x;
  for (size_t k = 0; k < layers; ++k) {
    tape.inputs.push_back(cur);
    Matrix z = linear_forward(m.hidden[k], cur);
    Matrix a = leaky_relu(z, m.config.alpha);
    Matrix mask = dropout_mask(z.rows, z.cols, m.config.dropout, dropout_rng);
    Matrix dropped = hadamard(a, mask);
    Matrix head_in = m.config.heads_tap_preactivation ? hadamard(z, mask) : dropped;
    logits.push_back(linear_forward(m.heads[k], head_in));
    tape.pre.push_back(std::move(z));
    tape.masks.push_back(std::move(mask));
    tape.head_in.push_back(std::move(head_in));
    cur = std::move(dropped);
  }
  return logits;
}

// Evaluation forward over a batch: all layers, all heads, no dropout.
inline std::vector<Matrix> forward_full(const EagerNetModel& m, const Matrix& x) {
  std::vector<Matrix> logits;
  logits.reserve(m.depth());
  Matrix cur = x;
  for (size_t k = 0; k < m.depth(); ++k) {
    Matrix z = linear_forward(m.hidden[k], cur);
    Matrix a = leaky_relu(z, m.config.alpha);
    logits.push_back(linear_forward(m.heads[k],
                                    m.config.heads_tap_preactivation ? z : a));
    cur = std::move(a);
  }
  return logits;
}

struct HeadDecision {
  int cls = 0;
  double confidence = 0.0;
};

// Binary confidence: how far the sigmoid output sits from the farthest label,
// max(p, 1-p) in [0.5, 1].
inline HeadDecision decide_binary(double logit) {
  const double p = sigmoid(logit);
  HeadDecision d;
  d.cls = p > 0.5 ? 1 : 0;
  d.confidence = std::max(p, 1.0 - p);
  return d;
}

// Multiclass confidence: the max softmax probability, in [1/C, 1]. Argmax
// ties break toward the lowest class index.
inline HeadDecision decide_multiclass(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  softmax_row(p);
  HeadDecision d;
  d.cls = 0;
  d.confidence = p[0];
  for (size_t i = 1; i < p.size(); ++i) {
    if (p[i] > d.confidence) {
      d.confidence = p[i];
      d.cls = static_cast<int>(i);
    }
  }
  return d;
}

inline HeadDecision decide(const EagerNetModel& m, std::span<const double> logits) {
  return m.config.variant == Variant::binary ? decide_binary(logits[0])
                                             : decide_multiclass(logits);
}

struct EagerPrediction {
  int cls = 0;
  double confidence = 0.0;
  int exit_layer = 0;         // 1-based
  int layers_evaluated = 0;   // hidden-layer matrix multiplies executed
  std::vector<std::vector<double>> head_logits;  // heads 1..exit_layer
};

// Confidence-thresholded forward over one sample. Exits at the first head
// whose confidence reaches the threshold; the last head answers regardless.
// A threshold of exactly 1.0 always runs the full stack, so ceiling
// predictions match the plain last-head output even if an intermediate
// confidence saturates to 1.0 in double precision.
inline EagerPrediction forward_eager(const EagerNetModel& m,
                                     std::span<const double> x, double threshold) {
  const double floor = m.confidence_floor();
  if (!(threshold >= floor && threshold <= 1.0))
    throw DataError("threshold " + std::to_string(threshold) +
                    " outside valid confidence range [" + std::to_string(floor) +
                    ", 1]");
  if (x.size() != m.config.input_width)
    throw DataError("sample width " + std::to_string(x.size()) +
                    " does not match model input width " +
                    std::to_string(m.config.input_width));

  Matrix cur(1, x.size());
  std::copy(x.begin(), x.end(), cur.data.begin());

  EagerPrediction out;
  const size_t layers = m.depth();
  for (size_t k = 0; k < layers; ++k) {
    Matrix z = linear_forward(m.hidden[k], cur);
    ++out.layers_evaluated;
    Matrix a = leaky_relu(z, m.config.alpha);
    Matrix logits = linear_forward(m.heads[k],
                                   m.config.heads_tap_preactivation ? z : a);
    out.head_logits.emplace_back(logits.row(0).begin(), logits.row(0).end());
    const HeadDecision d = decide(m, logits.row(0));
    const bool last = k + 1 == layers;
    if (last || (threshold < 1.0 && d.confidence >= threshold)) {
      out.cls = d.cls;
      out.confidence = d.confidence;
      out.exit_layer = static_cast<int>(k + 1);
      return out;
    }
    cur = std::move(a);
  }
  throw NumericError("unreachable: eager forward fell through the stack");
}

// ---- model serialization ----
// EAGR | u16 version | JSON config header | little-endian f64 parameter blob.
// Parameter order: hidden layers (W row-major, then b), then heads likewise.

inline constexpr char kModelMagic[4] = {'E', 'A', 'G', 'R'};
inline constexpr uint16_t kModelVersion = 1;

inline size_t parameter_count(const EagerNetModel& m) {
  size_t n = 0;
  for (const auto& l : m.hidden) n += l.w.size() + l.b.size();
  for (const auto& l : m.heads) n += l.w.size() + l.b.size();
  return n;
}

inline std::vector<uint8_t> serialize_model(const EagerNetModel& m) {
  nlohmann::json header;
  header["format"] = "eagernet-model";
  header["input_width"] = m.config.input_width;
  header["hidden_widths"] = m.config.hidden_widths;
  header["head_width"] = m.config.head_width;
  header["variant"] = to_string(m.config.variant);
  header["alpha"] = m.config.alpha;
  header["dropout"] = m.config.dropout;
  header["heads_tap_preactivation"] = m.config.heads_tap_preactivation;
  header["class_names"] = m.class_names;
  header["norm_mean"] = m.norm.mean;
  header["norm_stdev"] = m.norm.stdev;
  header["param_count"] = parameter_count(m);

  std::vector<uint8_t> payload;
  payload.reserve(parameter_count(m) * 8);
  auto put_layer = [&payload](const DenseLayer& l) {
    for (double v : l.w.data) put_f64_le(payload, v);
    for (double v : l.b) put_f64_le(payload, v);
  };
  for (const auto& l : m.hidden) put_layer(l);
  for (const auto& l : m.heads) put_layer(l);
  return encode_blob(kModelMagic, kModelVersion, std::move(header), std::move(payload));
}

inline EagerNetModel deserialize_model(std::span<const uint8_t> bytes,
                                       const std::string& name = "model") {
  const BlobFile f = decode_blob(bytes, kModelMagic, kModelVersion, name);
  EagerNetModel m;
  try {
    m.config.input_width = f.header.at("input_width").get<size_t>();
    m.config.hidden_widths = f.header.at("hidden_widths").get<std::vector<size_t>>();
    m.config.head_width = f.header.at("head_width").get<size_t>();
    m.config.variant = variant_from_string(f.header.at("variant").get<std::string>());
    m.config.alpha = f.header.at("alpha").get<double>();
    m.config.dropout = f.header.at("dropout").get<double>();
    m.config.heads_tap_preactivation = f.header.at("heads_tap_preactivation").get<bool>();
    m.class_names = f.header.at("class_names").get<std::vector<std::string>>();
    m.norm.mean = f.header.at("norm_mean").get<std::vector<double>>();
    m.norm.stdev = f.header.at("norm_stdev").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ": config header missing fields: " + e.what());
  }
  const size_t params = f.header.at("param_count").get<size_t>();
  if (f.payload.size() != params * 8)
    throw DataError(name + ": parameter blob is " + std::to_string(f.payload.size()) +
                    " bytes at offset " + std::to_string(bytes.size() - f.payload.size()) +
                    ", expected " + std::to_string(params * 8));

  size_t off = 0;
  auto take_layer = [&](size_t in, size_t out) {
    DenseLayer l;
    l.w = Matrix(out, in);
    for (auto& v : l.w.data) {
      v = get_f64_le(f.payload, off);
      off += 8;
    }
    l.b.resize(out);
    for (auto& v : l.b) {
      v = get_f64_le(f.payload, off);
      off += 8;
    }
    return l;
  };
  size_t in = m.config.input_width;
  for (size_t w : m.config.hidden_widths) {
    m.hidden.push_back(take_layer(in, w));
    in = w;
  }
  for (size_t w : m.config.hidden_widths)
    m.heads.push_back(take_layer(w, m.config.head_width));
  return m;
}

inline void save_model(const EagerNetModel& m, const std::string& path) {
  write_file_bytes(path, serialize_model(m));
}

inline EagerNetModel load_model(const std::string& path) {
  return deserialize_model(read_file_bytes(path), path);
}

}  // namespace eagernet
