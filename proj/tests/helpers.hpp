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
#include <map>
#include <string>
#include <vector>

#include "eagernet/flow.hpp"
#include "eagernet/model.hpp"
#include "eagernet/trainer.hpp"

// Test-side oracles, deliberately written from scratch so they share no code
// path with the implementation they check.

namespace testing_oracle {

inline eagernet::PacketRecord packet(double ts, const std::string& src_ip,
                                     uint16_t src_port, const std::string& dst_ip,
                                     uint16_t dst_port, uint32_t length,
                                     bool syn = false, bool ack = false,
                                     bool fin = false, bool cwr = false,
                                     uint8_t protocol = 6) {
  eagernet::PacketRecord p;
  p.timestamp = ts;
  p.src_ip = src_ip;
  p.dst_ip = dst_ip;
  p.src_port = src_port;
  p.dst_port = dst_port;
  p.protocol = protocol;
  p.ip_total_length = length;
  p.syn = syn;
  p.ack = ack;
  p.fin = fin;
  p.cwr = cwr;
  return p;
}

// Two-pass mean/min/max/population-stdev; empty list -> zeros.
struct NaiveStats {
  double mean = 0, min = 0, max = 0, stdev = 0;
};

inline NaiveStats naive_stats(const std::vector<double>& xs) {
  NaiveStats s;
  if (xs.empty()) return s;
  s.min = xs[0];
  s.max = xs[0];
  double sum = 0;
  for (double x : xs) {
    sum += x;
    if (x < s.min) s.min = x;
    if (x > s.max) s.max = x;
  }
  s.mean = sum / static_cast<double>(xs.size());
  double sq = 0;
  for (double x : xs) sq += (x - s.mean) * (x - s.mean);
  s.stdev = std::sqrt(sq / static_cast<double>(xs.size()));
  return s;
}

// Flow reconstruction from a packet list, independently of FlowTable: groups
// by the unordered endpoint pair, forward = first packet's direction. Only
// valid for traces that never hit the timeout.
struct NaiveFlow {
  eagernet::FlowTuple tuple;
  std::vector<double> fwd_len, bwd_len, fwd_ts, bwd_ts;
  uint64_t fwd_syn = 0, fwd_ack = 0, fwd_fin = 0, fwd_cwr = 0;
  uint64_t bwd_syn = 0, bwd_ack = 0, bwd_fin = 0, bwd_cwr = 0;
  double first_ts = 0, last_ts = 0;
  double octets = 0;
};

inline std::vector<NaiveFlow> naive_flows(const std::vector<eagernet::PacketRecord>& pkts) {
  std::vector<NaiveFlow> flows;
  std::map<std::string, size_t> index;
  for (const auto& p : pkts) {
    std::string a = p.src_ip + ":" + std::to_string(p.src_port);
    std::string b = p.dst_ip + ":" + std::to_string(p.dst_port);
    std::string key = (a < b ? a + "|" + b : b + "|" + a) + "|" + std::to_string(p.protocol);
    auto it = index.find(key);
    if (it == index.end()) {
      NaiveFlow f;
      f.tuple = {p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol};
      f.first_ts = f.last_ts = p.timestamp;
      index.emplace(key, flows.size());
      flows.push_back(f);
      it = index.find(key);
    }
    NaiveFlow& f = flows[it->second];
    const bool fwd = p.src_ip == f.tuple.src_ip && p.src_port == f.tuple.src_port;
    (fwd ? f.fwd_len : f.bwd_len).push_back(p.ip_total_length);
    (fwd ? f.fwd_ts : f.bwd_ts).push_back(p.timestamp);
    if (fwd) {
      f.fwd_syn += p.syn;
      f.fwd_ack += p.ack;
      f.fwd_fin += p.fin;
      f.fwd_cwr += p.cwr;
    } else {
      f.bwd_syn += p.syn;
      f.bwd_ack += p.ack;
      f.bwd_fin += p.fin;
      f.bwd_cwr += p.cwr;
    }
    f.octets += p.ip_total_length;
    if (p.timestamp > f.last_ts) f.last_ts = p.timestamp;
  }
  return flows;
}

inline std::vector<double> gaps_of(const std::vector<double>& ts) {
  std::vector<double> g;
  for (size_t i = 1; i < ts.size(); ++i) g.push_back(ts[i] - ts[i - 1]);
  return g;
}

inline std::array<double, eagernet::kFeatureCount> naive_feature_vector(const NaiveFlow& f) {
  std::array<double, eagernet::kFeatureCount> v{};
  v[0] = (f.last_ts - f.first_ts) * 1000.0;
  v[1] = f.tuple.src_port;
  v[2] = f.tuple.dst_port;
  v[3] = f.tuple.protocol;
  v[4] = f.octets;
  auto fill = [&v](size_t base, const std::vector<double>& len,
                   const std::vector<double>& ts, uint64_t syn, uint64_t ack,
                   uint64_t fin, uint64_t cwr) {
    const NaiveStats ls = naive_stats(len);
    const NaiveStats gs = naive_stats(gaps_of(ts));
    v[base + 0] = ls.mean;
    v[base + 1] = ls.min;
    v[base + 2] = ls.max;
    v[base + 3] = ls.stdev;
    v[base + 4] = gs.mean;
    v[base + 5] = gs.min;
    v[base + 6] = gs.max;
    v[base + 7] = gs.stdev;
    v[base + 8] = static_cast<double>(len.size());
    v[base + 9] = static_cast<double>(syn);
    v[base + 10] = static_cast<double>(ack);
    v[base + 11] = static_cast<double>(fin);
    v[base + 12] = static_cast<double>(cwr);
  };
  fill(5, f.fwd_len, f.fwd_ts, f.fwd_syn, f.fwd_ack, f.fwd_fin, f.fwd_cwr);
  fill(18, f.bwd_len, f.bwd_ts, f.bwd_syn, f.bwd_ack, f.bwd_fin, f.bwd_cwr);
  return v;
}

// Literal transcription of the cross-entropy definitions, evaluated in long
// double. 1 - sigma(x) is written as sigma(-x), the same quantity without the
// cancellation that would otherwise swamp the tolerance at large logits.
inline double naive_bce(const std::vector<double>& logits, const std::vector<double>& y) {
  long double total = 0;
  for (size_t n = 0; n < logits.size(); ++n) {
    const long double x = logits[n];
    const long double p = 1.0L / (1.0L + std::exp(-x));
    const long double q = 1.0L / (1.0L + std::exp(x));  // 1 - p
    total += static_cast<long double>(y[n]) * std::log(p) +
             (1.0L - static_cast<long double>(y[n])) * std::log(q);
  }
  return static_cast<double>(-total / static_cast<long double>(logits.size()));
}

inline double naive_cce(const eagernet::Matrix& logits, const eagernet::Matrix& y) {
  long double total = 0;
  for (size_t n = 0; n < logits.rows; ++n) {
    long double denom = 0;
    for (size_t c = 0; c < logits.cols; ++c)
      denom += std::exp(static_cast<long double>(logits(n, c)));
    for (size_t c = 0; c < logits.cols; ++c) {
      if (y(n, c) == 1.0) {
        const long double p = std::exp(static_cast<long double>(logits(n, c))) / denom;
        total += std::log(p);
      }
    }
  }
  return static_cast<double>(-total / static_cast<long double>(logits.rows));
}

// Central finite difference of a scalar function of one model parameter.
template <typename LossFn>
double central_diff(LossFn&& loss, double& param, double h = 1e-5) {
  const double keep = param;
  param = keep + h;
  const double up = loss();
  param = keep - h;
  const double down = loss();
  param = keep;
  return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6);
}

}  // namespace testing_oracle
