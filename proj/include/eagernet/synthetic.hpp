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
#include <string>
#include <vector>

#include "eagernet/dataset.hpp"
#include "eagernet/flow.hpp"
#include "eagernet/random.hpp"

// Seeded synthetic inputs: a labeled packet-trace generator (three traffic
// families with distinct packet-level behavior) and feature-space dataset
// generators for training tests. Everything here is deterministic per seed,
// so fixtures can be regenerated byte-identically.

namespace eagernet {

struct LabeledTrace {
  struct Entry {
    FlowTuple flow;
    int label = 0;
    std::string family;
  };
  std::vector<PacketRecord> packets;  // globally sorted by timestamp
  std::vector<Entry> labels;          // one per flow
};

struct TraceOptions {
  size_t flows = 30;
  uint64_t seed = 7;
  double start_time = 0.0;
  // fraction of flows per family; remainder is benign
  double flood_fraction = 0.25;
  double bulk_fraction = 0.25;
};

// Benign: short bidirectional exchanges of small packets. "flood": bursts of
// forward SYNs with tiny gaps. "bulk": large forward packets with sparse ACK
// responses.
inline LabeledTrace generate_trace(const TraceOptions& opts) {
  Rng rng(opts.seed, rng_stream::kSynthetic);
  LabeledTrace trace;

  struct Pending {
    PacketRecord pkt;
    double ts;
  };
  std::vector<Pending> pending;

  for (size_t f = 0; f < opts.flows; ++f) {
    const double pick = rng.uniform();
    std::string family = "benign";
    if (pick < opts.flood_fraction)
      family = "flood";
    else if (pick < opts.flood_fraction + opts.bulk_fraction)
      family = "bulk";

    FlowTuple tuple;
    tuple.src_ip = "10." + std::to_string(f / 250 % 250) + ".0." + std::to_string(f % 250 + 1);
    tuple.dst_ip = "192.168." + std::to_string(f % 200) + ".10";
    tuple.src_port = static_cast<uint16_t>(1024 + f);  // unique per flow
    tuple.dst_port = family == "bulk" ? 443 : 80;
    tuple.protocol = kTcpProtocol;

    double t = opts.start_time + rng.uniform(0.0, 30.0);
    const size_t packets = 3 + rng.below(10);
    for (size_t p = 0; p < packets; ++p) {
      PacketRecord pkt;
      pkt.protocol = tuple.protocol;
      bool forward = true;
      if (family == "flood") {
        forward = rng.uniform() < 0.9;
        pkt.ip_total_length = 40 + static_cast<uint32_t>(rng.below(8));
        pkt.syn = forward;
        pkt.ack = !forward;
        t += rng.uniform(0.0005, 0.01);
      } else if (family == "bulk") {
        forward = rng.uniform() < 0.7;
        pkt.ip_total_length =
            forward ? 1200 + static_cast<uint32_t>(rng.below(300))
                    : 52 + static_cast<uint32_t>(rng.below(12));
        pkt.ack = p > 0;
        pkt.syn = p == 0;
        pkt.cwr = forward && rng.uniform() < 0.08;
        t += rng.uniform(0.002, 0.08);
      } else {
        forward = (p % 2) == 0;
        pkt.ip_total_length = 60 + static_cast<uint32_t>(rng.below(240));
        pkt.syn = p == 0;
        pkt.ack = p > 0;
        pkt.fin = p + 1 == packets;
        t += rng.uniform(0.01, 0.4);
      }
      if (forward) {
        pkt.src_ip = tuple.src_ip;
        pkt.dst_ip = tuple.dst_ip;
        pkt.src_port = tuple.src_port;
        pkt.dst_port = tuple.dst_port;
      } else {
        pkt.src_ip = tuple.dst_ip;
        pkt.dst_ip = tuple.src_ip;
        pkt.src_port = tuple.dst_port;
        pkt.dst_port = tuple.src_port;
      }
      pkt.timestamp = t;
      pending.push_back({pkt, t});
    }
    trace.labels.push_back({tuple, family == "benign" ? 0 : 1, family});
  }

  std::stable_sort(pending.begin(), pending.end(),
                   [](const Pending& a, const Pending& b) { return a.ts < b.ts; });
  trace.packets.reserve(pending.size());
  for (auto& p : pending) trace.packets.push_back(std::move(p.pkt));
  return trace;
}

// Swaps source and destination of every packet in place.
inline void reverse_trace_directions(std::vector<PacketRecord>& packets) {
  for (auto& p : packets) {
    std::swap(p.src_ip, p.dst_ip);
    std::swap(p.src_port, p.dst_port);
  }
}

// ---- feature-space datasets ----

// Two linearly separable Gaussian blobs; families "benign" / "attack".
inline RawRows generate_blobs(size_t n, uint64_t seed, size_t dims = 6,
                              double separation = 4.0) {
  Rng rng(seed, rng_stream::kSynthetic);
  RawRows rows;
  rows.features = Matrix(n, dims);
  rows.binary.reserve(n);
  rows.family.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const bool attack = rng.uniform() < 0.5;
    const double center = attack ? separation / 2.0 : -separation / 2.0;
    auto row = rows.features.row(i);
    for (size_t d = 0; d < dims; ++d)
      row[d] = rng.normal() + (d < 2 ? center : 0.0);
    rows.binary.push_back(attack ? 1 : 0);
    rows.family.emplace_back(attack ? "attack" : "benign");
  }
  return rows;
}

// Three classes over 8 features. "benign" is a well separated blob in the
// first two coordinates. The two attack families share that subspace and
// differ only by the checkerboard parity of (x2, x3) on a 3x3 grid — a
// disconnected boundary a single modest hidden layer cannot carve but a deep
// stack can:
//
//   benign:   x0, x1 ~ N(+2.0, 0.7)              50 %
//   "flood":  x0, x1 ~ N(-1.2, 0.8), parity even  30 %
//   "mosaic": x0, x1 ~ N(-1.2, 0.8), parity odd   20 %
//
// Parity samples keep a small margin from the cell edges so the pattern is
// noise-free; the remaining four coordinates are pure noise.
inline RawRows generate_three_class(size_t n, uint64_t seed) {
  Rng rng(seed, rng_stream::kSynthetic);
  RawRows rows;
  const size_t dims = 8;
  rows.features = Matrix(n, dims);
  rows.binary.reserve(n);
  rows.family.reserve(n);

  const double cell = 4.0 / 3.0;
  const double margin = 0.10;
  auto draw_cell_axis = [&](int& index) {
    for (;;) {
      const double u = rng.uniform(-2.0, 2.0);
      const double frac = (u + 2.0) / cell;  // in [0, 3)
      const double inside = frac - std::floor(frac);
      if (std::min(inside, 1.0 - inside) * cell >= margin) {
        index = static_cast<int>(std::floor(frac));
        return u;
      }
    }
  };

  for (size_t i = 0; i < n; ++i) {
    auto row = rows.features.row(i);
    const double pick = rng.uniform();
    int cls;
    if (pick < 0.50) {
      cls = 0;
      row[0] = 2.0 + 0.7 * rng.normal();
      row[1] = 2.0 + 0.7 * rng.normal();
      row[2] = rng.uniform(-2.0, 2.0);
      row[3] = rng.uniform(-2.0, 2.0);
    } else {
      const int want_parity = pick < 0.50 + 0.30 ? 0 : 1;
      cls = want_parity == 0 ? 1 : 2;
      row[0] = -1.2 + 0.8 * rng.normal();
      row[1] = -1.2 + 0.8 * rng.normal();
      for (;;) {
        int ia = 0, ib = 0;
        const double a = draw_cell_axis(ia);
        const double b = draw_cell_axis(ib);
        if ((ia + ib) % 2 == want_parity) {
          row[2] = a;
          row[3] = b;
          break;
        }
      }
    }
    for (size_t d = 4; d < dims; ++d) row[d] = rng.normal();
    rows.binary.push_back(cls == 0 ? 0 : 1);
    rows.family.emplace_back(cls == 0 ? "benign" : (cls == 1 ? "flood" : "mosaic"));
  }
  return rows;
}

}  // namespace eagernet
