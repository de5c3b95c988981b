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
#include <cmath>
#include <cstdint>
#include <istream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "eagernet/blob.hpp"
#include "eagernet/csv.hpp"
#include "eagernet/errors.hpp"
#include "eagernet/flow.hpp"
#include "eagernet/matrix.hpp"
#include "eagernet/random.hpp"

// Feature CSV -> training-ready tensors: deduplication, seeded 2/3-1/3 split
// (optionally stratified, optionally carving a validation slice out of the
// training side), z-normalization fitted on training rows only, and binary /
// one-hot label encoding with benign fixed at class index 0.

namespace eagernet {

// Rows as read from a feature CSV, before encoding and normalization.
struct RawRows {
  Matrix features;
  std::vector<uint8_t> binary;        // 0 benign, 1 attack
  std::vector<std::string> family;    // "benign" for benign rows

  size_t size() const { return features.rows; }
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stdev;  // constant columns clamped to 1 before division
};

enum class Split : uint8_t { train = 0, val = 1, test = 2 };

struct Dataset {
  Matrix features;  // stored normalized
  std::vector<uint8_t> binary_labels;
  std::vector<int32_t> family_labels;        // index into class_names
  std::vector<std::string> class_names;      // class_names[0] == "benign"
  NormStats norm;
  std::vector<uint8_t> split;                // Split values per row
  uint64_t seed = 0;

  size_t rows() const { return features.rows; }
  size_t cols() const { return features.cols; }
  size_t classes() const { return class_names.size(); }

  std::vector<size_t> rows_of(Split s) const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < split.size(); ++i)
      if (split[i] == static_cast<uint8_t>(s)) idx.push_back(i);
    return idx;
  }

  Matrix gather(const std::vector<size_t>& idx) const {
    Matrix out(idx.size(), features.cols);
    for (size_t r = 0; r < idx.size(); ++r) {
      auto src = features.row(idx[r]);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }
};

// First occurrence kept; equality is over the raw feature bytes plus both
// labels, so rows differing only in label survive.
inline RawRows deduplicate(const RawRows& in) {
  struct RowRef {
    const RawRows* rows;
    size_t i;
  };
  struct RowHash {
    size_t operator()(const RowRef& r) const {
      auto row = r.rows->features.row(r.i);
      uint64_t h = fnv1a64({reinterpret_cast<const uint8_t*>(row.data()),
                            row.size() * sizeof(double)});
      h = fnv1a64({&r.rows->binary[r.i], 1}, h);
      const std::string& fam = r.rows->family[r.i];
      h = fnv1a64({reinterpret_cast<const uint8_t*>(fam.data()), fam.size()}, h);
      return static_cast<size_t>(h);
    }
  };
  struct RowEq {
    bool operator()(const RowRef& a, const RowRef& b) const {
      auto ra = a.rows->features.row(a.i);
      auto rb = b.rows->features.row(b.i);
      return a.rows->binary[a.i] == b.rows->binary[b.i] &&
             a.rows->family[a.i] == b.rows->family[b.i] &&
             std::equal(ra.begin(), ra.end(), rb.begin(), rb.end(),
                        [](double x, double y) {
                          return std::bit_cast<uint64_t>(x) == std::bit_cast<uint64_t>(y);
                        });
    }
  };

  std::unordered_set<RowRef, RowHash, RowEq> seen;
  std::vector<size_t> keep;
  for (size_t i = 0; i < in.size(); ++i)
    if (seen.insert({&in, i}).second) keep.push_back(i);

  RawRows out;
  out.features = Matrix(keep.size(), in.features.cols);
  out.binary.reserve(keep.size());
  out.family.reserve(keep.size());
  for (size_t r = 0; r < keep.size(); ++r) {
    auto src = in.features.row(keep[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.binary.push_back(in.binary[keep[r]]);
    out.family.push_back(in.family[keep[r]]);
  }
  return out;
}

inline NormStats zscore_fit(const Matrix& features, const std::vector<size_t>& rows) {
  NormStats stats;
  stats.mean.assign(features.cols, 0.0);
  stats.stdev.assign(features.cols, 1.0);
  if (rows.empty()) return stats;
  const double n = static_cast<double>(rows.size());
  for (size_t c = 0; c < features.cols; ++c) {
    double sum = 0.0;
    for (size_t r : rows) sum += features(r, c);
    const double mean = sum / n;
    double sq = 0.0;
    for (size_t r : rows) {
      const double d = features(r, c) - mean;
      sq += d * d;
    }
    const double stdev = std::sqrt(sq / n);  // population
    stats.mean[c] = mean;
    stats.stdev[c] = stdev < 1e-12 ? 1.0 : stdev;
  }
  return stats;
}

inline void zscore_apply(const NormStats& stats, Matrix& features) {
  if (stats.mean.size() != features.cols)
    throw DataError("normalization stats width " + std::to_string(stats.mean.size()) +
                    " does not match feature width " + std::to_string(features.cols));
  for (size_t r = 0; r < features.rows; ++r) {
    auto row = features.row(r);
    for (size_t c = 0; c < features.cols; ++c)
      row[c] = (row[c] - stats.mean[c]) / stats.stdev[c];
  }
}

struct SplitOptions {
  uint64_t seed = 1;
  double val_fraction = 0.0;  // carved out of the training two-thirds
  bool stratify = false;
};

// Deterministic shuffle, first ceil(2N/3) rows on the training side. With
// stratification the 2/3 boundary is applied per family instead.
inline std::vector<uint8_t> split_assign(size_t n, const SplitOptions& opts,
                                         const std::vector<int32_t>* families = nullptr) {
  if (n < 3) throw DataError("need at least 3 rows to split, got " + std::to_string(n));
  if (opts.val_fraction < 0.0 || opts.val_fraction >= 1.0)
    throw DataError("val fraction must be in [0, 1)");
  Rng rng(opts.seed, rng_stream::kSplit);

  std::vector<size_t> train_side;
  std::vector<uint8_t> assign(n, static_cast<uint8_t>(Split::test));
  if (opts.stratify && families != nullptr) {
    int32_t max_class = 0;
    for (int32_t f : *families) max_class = std::max(max_class, f);
    std::vector<std::vector<size_t>> groups(static_cast<size_t>(max_class) + 1);
    for (size_t i = 0; i < n; ++i) groups[static_cast<size_t>((*families)[i])].push_back(i);
    for (auto& g : groups) {
      if (g.empty()) continue;
      rng.shuffle(g);
      const size_t k = (2 * g.size() + 2) / 3;
      for (size_t i = 0; i < k; ++i) train_side.push_back(g[i]);
    }
  } else {
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    const size_t k = (2 * n + 2) / 3;  // ceil(2n/3)
    train_side.assign(perm.begin(), perm.begin() + k);
  }

  const size_t val_count =
      static_cast<size_t>(std::llround(opts.val_fraction * static_cast<double>(train_side.size())));
  rng.shuffle(train_side);
  for (size_t i = 0; i < train_side.size(); ++i)
    assign[train_side[i]] =
        static_cast<uint8_t>(i < val_count ? Split::val : Split::train);
  return assign;
}

// Class names with benign pinned to index 0 and the attack families sorted.
inline std::vector<std::string> enumerate_classes(const std::vector<std::string>& family) {
  std::set<std::string> attacks;
  for (const auto& f : family)
    if (f != "benign") attacks.insert(f);
  std::vector<std::string> names = {"benign"};
  names.insert(names.end(), attacks.begin(), attacks.end());
  return names;
}

inline int32_t class_index(const std::vector<std::string>& names, const std::string& family) {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == family) return static_cast<int32_t>(i);
  std::string known;
  for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
  throw DataError("unknown family '" + family + "' (known classes: " + known + ")");
}

inline Matrix one_hot(const std::vector<int32_t>& labels, size_t classes) {
  Matrix out(labels.size(), classes);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<size_t>(labels[i]) >= classes)
      throw DataError("family index " + std::to_string(labels[i]) + " out of range");
    out(i, static_cast<size_t>(labels[i])) = 1.0;
  }
  return out;
}

struct PrepareOptions {
  SplitOptions split;
};

inline Dataset prepare_dataset(const RawRows& raw, const PrepareOptions& opts) {
  const RawRows rows = deduplicate(raw);
  Dataset ds;
  ds.seed = opts.split.seed;
  ds.class_names = enumerate_classes(rows.family);
  ds.binary_labels = rows.binary;
  ds.family_labels.reserve(rows.size());
  for (const auto& f : rows.family)
    ds.family_labels.push_back(class_index(ds.class_names, f));
  ds.features = rows.features;
  ds.split = split_assign(rows.size(), opts.split, &ds.family_labels);
  ds.norm = zscore_fit(ds.features, ds.rows_of(Split::train));
  zscore_apply(ds.norm, ds.features);
  return ds;
}

// ---- feature CSV ingestion ----

// Accepts the flowmeter output schema: the 31 CAIA columns (validated by
// name) followed by label and family. Family may be blank: benign rows
// default to "benign", attack rows to "attack".
inline RawRows read_feature_csv(std::istream& in, const std::string& name) {
  CsvReader reader(in, name);
  const auto& names = feature_names();
  if (reader.header().size() < kFeatureCount)
    throw DataError(name + ": expected at least " + std::to_string(kFeatureCount) +
                    " feature columns");
  for (size_t i = 0; i < kFeatureCount; ++i)
    if (reader.header()[i] != names[i])
      throw DataError(name + ": feature column " + std::to_string(i) + " is '" +
                      reader.header()[i] + "', expected '" + names[i] + "'");
  const int label_col = reader.column("label");
  const int family_col = reader.column("family");
  if (label_col < 0)
    throw DataError(name + ": no label column; training data must be labeled");

  std::vector<double> values;
  std::vector<uint8_t> binary;
  std::vector<std::string> family;
  std::vector<std::string_view> cells;
  while (reader.next(cells)) {
    const std::string where = reader.location();
    for (size_t i = 0; i < kFeatureCount; ++i)
      values.push_back(parse_double_field(cells[i], where));
    const std::string_view label = cells[static_cast<size_t>(label_col)];
    if (label != "0" && label != "1")
      throw DataError(where + ": label must be 0 or 1, got '" + std::string(label) + "'");
    const bool attack = label == "1";
    binary.push_back(attack ? 1 : 0);
    std::string fam = family_col >= 0 ? std::string(cells[static_cast<size_t>(family_col)]) : "";
    if (fam.empty()) fam = attack ? "attack" : "benign";
    if (!attack && fam != "benign")
      throw DataError(where + ": benign rows must have family 'benign', got '" + fam + "'");
    if (attack && fam == "benign")
      throw DataError(where + ": attack rows cannot have family 'benign'");
    family.push_back(std::move(fam));
  }
  RawRows rows;
  rows.binary = std::move(binary);
  rows.family = std::move(family);
  rows.features = Matrix(rows.binary.size(), kFeatureCount);
  std::copy(values.begin(), values.end(), rows.features.data.begin());
  return rows;
}

// ---- bundle serialization ----

inline constexpr char kBundleMagic[4] = {'E', 'G', 'R', 'B'};
inline constexpr uint16_t kBundleVersion = 1;

inline std::vector<uint8_t> serialize_dataset(const Dataset& ds) {
  nlohmann::json header;
  header["format"] = "eagernet-bundle";
  header["rows"] = ds.rows();
  header["cols"] = ds.cols();
  header["class_names"] = ds.class_names;
  header["norm_mean"] = ds.norm.mean;
  header["norm_stdev"] = ds.norm.stdev;
  header["seed"] = ds.seed;

  std::vector<uint8_t> payload;
  payload.reserve(ds.features.size() * 8 + ds.rows() * 6);
  for (double v : ds.features.data) put_f64_le(payload, v);
  payload.insert(payload.end(), ds.binary_labels.begin(), ds.binary_labels.end());
  for (int32_t f : ds.family_labels)
    put_u32_le(payload, static_cast<uint32_t>(f));
  payload.insert(payload.end(), ds.split.begin(), ds.split.end());
  return encode_blob(kBundleMagic, kBundleVersion, std::move(header), std::move(payload));
}

inline Dataset deserialize_dataset(std::span<const uint8_t> bytes,
                                   const std::string& name = "bundle") {
  const BlobFile f = decode_blob(bytes, kBundleMagic, kBundleVersion, name);
  Dataset ds;
  const size_t rows = f.header.at("rows").get<size_t>();
  const size_t cols = f.header.at("cols").get<size_t>();
  ds.class_names = f.header.at("class_names").get<std::vector<std::string>>();
  ds.norm.mean = f.header.at("norm_mean").get<std::vector<double>>();
  ds.norm.stdev = f.header.at("norm_stdev").get<std::vector<double>>();
  ds.seed = f.header.at("seed").get<uint64_t>();

  const size_t expect = rows * cols * 8 + rows + rows * 4 + rows;
  if (f.payload.size() != expect)
    throw DataError(name + ": payload is " + std::to_string(f.payload.size()) +
                    " bytes, expected " + std::to_string(expect));
  ds.features = Matrix(rows, cols);
  size_t off = 0;
  for (size_t i = 0; i < rows * cols; ++i, off += 8)
    ds.features.data[i] = get_f64_le(f.payload, off);
  ds.binary_labels.assign(f.payload.begin() + static_cast<long>(off),
                          f.payload.begin() + static_cast<long>(off + rows));
  off += rows;
  ds.family_labels.reserve(rows);
  for (size_t i = 0; i < rows; ++i, off += 4) {
    uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<uint32_t>(f.payload[off + b]) << (8 * b);
    ds.family_labels.push_back(static_cast<int32_t>(v));
  }
  ds.split.assign(f.payload.begin() + static_cast<long>(off), f.payload.end());
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  write_file_bytes(path, serialize_dataset(ds));
}

inline Dataset load_dataset(const std::string& path) {
  return deserialize_dataset(read_file_bytes(path), path);
}

}  // namespace eagernet
