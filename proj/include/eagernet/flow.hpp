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
#include <array>
#include <cmath>
#include <cstdint>
#include <list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "eagernet/digest.hpp"
#include "eagernet/errors.hpp"

// Bidirectional five-tuple flow aggregation producing the 31-value CAIA
// statistical feature vector per flow:
//
//   5 direction-less values (duration ms, source port, destination port,
//   protocol, octet total), then for the forward and the backward direction:
//   mean/min/max/stdev of IP total length, mean/min/max/stdev of the
//   inter-packet gap in seconds, packet count, and SYN/ACK/FIN/CWR counts.
//
// Forward is the direction of the first packet observed for the flow. Flows
// are terminated after a configurable idle timeout (default 1800 s).

namespace eagernet {

inline constexpr uint8_t kTcpProtocol = 6;
inline constexpr size_t kFeatureCount = 31;
inline constexpr double kDefaultFlowTimeout = 1800.0;

struct PacketRecord {
  double timestamp = 0.0;  // seconds, non-decreasing across a trace
  std::string src_ip;
  std::string dst_ip;
  uint16_t src_port = 0;
  uint16_t dst_port = 0;
  uint8_t protocol = 0;
  uint32_t ip_total_length = 0;
  bool syn = false;
  bool ack = false;
  bool fin = false;
  bool cwr = false;
};

// Throws DataError for records violating the input contract.
inline void validate_packet(const PacketRecord& pkt, const std::string& where) {
  if (!(pkt.timestamp >= 0.0))
    throw DataError(where + ": negative or NaN timestamp");
  if (pkt.protocol != kTcpProtocol && (pkt.syn || pkt.ack || pkt.fin || pkt.cwr))
    throw DataError(where + ": TCP flags set on non-TCP packet (protocol " +
                    std::to_string(pkt.protocol) + ")");
}

struct SummaryStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double stdev = 0.0;
};

// Streaming mean/min/max and Welford variance accumulator. Population
// standard deviation; the empty set summarizes to all zeros and a singleton
// to stdev 0 so no NaN ever reaches the training matrix.
struct RunningStats {
  uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double min = 0.0;
  double max = 0.0;

  void add(double x) {
    if (n == 0) {
      min = max = x;
    } else {
      min = std::min(min, x);
      max = std::max(max, x);
    }
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }

  SummaryStats summary() const {
    if (n == 0) return {};
    const double var = std::max(0.0, m2 / static_cast<double>(n));
    return {mean, min, max, std::sqrt(var)};
  }
};

inline SummaryStats summarize(std::span<const double> values) {
  RunningStats rs;
  for (double v : values) rs.add(v);
  return rs.summary();
}

// Canonical endpoint-pair key: both directions of a conversation hash to the
// same bucket. Which endpoint initiated is tracked on the accumulator, not
// here.
struct FlowKey {
  std::string ip_a, ip_b;
  uint16_t port_a = 0, port_b = 0;
  uint8_t protocol = 0;

  bool operator==(const FlowKey&) const = default;

  static FlowKey of(const PacketRecord& pkt) {
    FlowKey k;
    k.protocol = pkt.protocol;
    const bool src_first = std::tie(pkt.src_ip, pkt.src_port) <=
                           std::tie(pkt.dst_ip, pkt.dst_port);
    if (src_first) {
      k.ip_a = pkt.src_ip;
      k.port_a = pkt.src_port;
      k.ip_b = pkt.dst_ip;
      k.port_b = pkt.dst_port;
    } else {
      k.ip_a = pkt.dst_ip;
      k.port_a = pkt.dst_port;
      k.ip_b = pkt.src_ip;
      k.port_b = pkt.src_port;
    }
    return k;
  }
};

struct FlowKeyHash {
  size_t operator()(const FlowKey& k) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::span<const uint8_t> bytes) { h = fnv1a64(bytes, h); };
    mix({reinterpret_cast<const uint8_t*>(k.ip_a.data()), k.ip_a.size()});
    mix({reinterpret_cast<const uint8_t*>(k.ip_b.data()), k.ip_b.size()});
    const uint8_t tail[5] = {
        static_cast<uint8_t>(k.port_a >> 8), static_cast<uint8_t>(k.port_a),
        static_cast<uint8_t>(k.port_b >> 8), static_cast<uint8_t>(k.port_b),
        k.protocol};
    mix({tail, sizeof(tail)});
    return static_cast<size_t>(h);
  }
};

// The five-tuple in forward orientation; used to pass labels through.
struct FlowTuple {
  std::string src_ip, dst_ip;
  uint16_t src_port = 0, dst_port = 0;
  uint8_t protocol = 0;

  bool operator==(const FlowTuple&) const = default;

  FlowTuple reversed() const {
    return {dst_ip, src_ip, dst_port, src_port, protocol};
  }
};

struct FlowTupleHash {
  size_t operator()(const FlowTuple& t) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::span<const uint8_t> bytes) { h = fnv1a64(bytes, h); };
    mix({reinterpret_cast<const uint8_t*>(t.src_ip.data()), t.src_ip.size()});
    mix({reinterpret_cast<const uint8_t*>(t.dst_ip.data()), t.dst_ip.size()});
    const uint8_t tail[5] = {
        static_cast<uint8_t>(t.src_port >> 8), static_cast<uint8_t>(t.src_port),
        static_cast<uint8_t>(t.dst_port >> 8), static_cast<uint8_t>(t.dst_port),
        t.protocol};
    mix({tail, sizeof(tail)});
    return static_cast<size_t>(h);
  }
};

struct DirectionStats {
  uint64_t packets = 0;
  RunningStats length;  // ipTotalLength
  RunningStats gap;     // interPacketTimeSeconds, defined from the 2nd packet on
  double prev_ts = 0.0;
  uint64_t syn = 0, ack = 0, fin = 0, cwr = 0;

  void add(const PacketRecord& pkt) {
    if (packets > 0) gap.add(std::max(0.0, pkt.timestamp - prev_ts));
    prev_ts = pkt.timestamp;
    ++packets;
    length.add(static_cast<double>(pkt.ip_total_length));
    syn += pkt.syn;
    ack += pkt.ack;
    fin += pkt.fin;
    cwr += pkt.cwr;
  }
};

struct FlowAccumulator {
  FlowTuple forward;  // five-tuple of the first packet
  double first_ts = 0.0;
  double last_ts = 0.0;
  uint64_t octet_total = 0;
  DirectionStats dir[2];  // 0 = forward, 1 = backward
  uint64_t seq = 0;       // creation order, drives deterministic emission

  void add(const PacketRecord& pkt) {
    const bool fwd = pkt.src_ip == forward.src_ip && pkt.src_port == forward.src_port;
    dir[fwd ? 0 : 1].add(pkt);
    octet_total += pkt.ip_total_length;
    last_ts = std::max(last_ts, pkt.timestamp);
  }
};

struct FeatureVector {
  std::array<double, kFeatureCount> values{};
  FlowTuple flow;           // forward orientation, for labeling and diagnostics
  std::string label;        // optional pass-through
  std::string family;       // optional pass-through
};

// Fixed output column order. Indexes into FeatureVector::values.
inline const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = {
      "flowDurationMilliseconds",
      "sourceTransportPort",
      "destinationTransportPort",
      "protocolIdentifier",
      "octetTotalCount",
      "fwdIpTotalLengthMean",
      "fwdIpTotalLengthMin",
      "fwdIpTotalLengthMax",
      "fwdIpTotalLengthStdev",
      "fwdInterPacketTimeMean",
      "fwdInterPacketTimeMin",
      "fwdInterPacketTimeMax",
      "fwdInterPacketTimeStdev",
      "fwdPacketTotalCount",
      "fwdTcpSynTotalCount",
      "fwdTcpAckTotalCount",
      "fwdTcpFinTotalCount",
      "fwdTcpCwrTotalCount",
      "bwdIpTotalLengthMean",
      "bwdIpTotalLengthMin",
      "bwdIpTotalLengthMax",
      "bwdIpTotalLengthStdev",
      "bwdInterPacketTimeMean",
      "bwdInterPacketTimeMin",
      "bwdInterPacketTimeMax",
      "bwdInterPacketTimeStdev",
      "bwdPacketTotalCount",
      "bwdTcpSynTotalCount",
      "bwdTcpAckTotalCount",
      "bwdTcpFinTotalCount",
      "bwdTcpCwrTotalCount",
  };
  return names;
}

inline FeatureVector finalize_flow(const FlowAccumulator& acc) {
  FeatureVector out;
  out.flow = acc.forward;
  auto& v = out.values;
  v[0] = (acc.last_ts - acc.first_ts) * 1000.0;
  v[1] = static_cast<double>(acc.forward.src_port);
  v[2] = static_cast<double>(acc.forward.dst_port);
  v[3] = static_cast<double>(acc.forward.protocol);
  v[4] = static_cast<double>(acc.octet_total);
  size_t i = 5;
  for (int d = 0; d < 2; ++d) {
    const DirectionStats& ds = acc.dir[d];
    const SummaryStats len = ds.length.summary();
    const SummaryStats gap = ds.gap.summary();
    v[i++] = len.mean;
    v[i++] = len.min;
    v[i++] = len.max;
    v[i++] = len.stdev;
    v[i++] = gap.mean;
    v[i++] = gap.min;
    v[i++] = gap.max;
    v[i++] = gap.stdev;
    v[i++] = static_cast<double>(ds.packets);
    v[i++] = static_cast<double>(ds.syn);
    v[i++] = static_cast<double>(ds.ack);
    v[i++] = static_cast<double>(ds.fin);
    v[i++] = static_cast<double>(ds.cwr);
  }
  return out;
}

enum class TimeoutMode { idle, absolute };

struct FlowTableOptions {
  double timeout_seconds = kDefaultFlowTimeout;
  TimeoutMode timeout_mode = TimeoutMode::idle;
  // Packets may arrive up to this many seconds behind the newest timestamp
  // seen; anything older is rejected.
  double reorder_tolerance = 0.0;
};

// Single-writer flow table. Shardable by FlowKey hash: no cross-key state.
class FlowTable {
 public:
  using Options = FlowTableOptions;

  explicit FlowTable(Options opts = Options()) : opts_(opts) {}

  // Folds one packet into the table. Flows whose timeout elapsed strictly
  // before this packet are finalized and returned first, in creation order;
  // if one of them shares the packet's key, the packet starts a fresh flow.
  // Throws DataError for out-of-order or malformed records; the table is
  // unchanged in that case.
  std::vector<FeatureVector> ingest(const PacketRecord& pkt,
                                    const std::string& where = "<packet>") {
    validate_packet(pkt, where);
    if (pkt.timestamp < newest_ts_ - opts_.reorder_tolerance) {
      throw DataError(where + ": timestamp " + std::to_string(pkt.timestamp) +
                      " out of order (newest seen " + std::to_string(newest_ts_) +
                      ", tolerance " + std::to_string(opts_.reorder_tolerance) + ")");
    }
    newest_ts_ = std::max(newest_ts_, pkt.timestamp);

    std::vector<FeatureVector> emitted = expire(pkt.timestamp);

    const FlowKey key = FlowKey::of(pkt);
    auto it = index_.find(key);
    if (it == index_.end()) {
      flows_.emplace_back();
      FlowAccumulator& acc = flows_.back();
      acc.forward = {pkt.src_ip, pkt.dst_ip, pkt.src_port, pkt.dst_port, pkt.protocol};
      acc.first_ts = acc.last_ts = pkt.timestamp;
      acc.seq = next_seq_++;
      acc.add(pkt);
      index_.emplace(key, std::prev(flows_.end()));
    } else {
      FlowAccumulator& acc = *it->second;
      acc.add(pkt);
      // keep the recency list ordered by last activity
      flows_.splice(flows_.end(), flows_, it->second);
    }
    return emitted;
  }

  // Finalizes every resident flow in first-packet order; the table is empty
  // afterwards.
  std::vector<FeatureVector> flush() {
    std::vector<const FlowAccumulator*> order;
    order.reserve(flows_.size());
    for (const auto& acc : flows_) order.push_back(&acc);
    std::sort(order.begin(), order.end(),
              [](const FlowAccumulator* a, const FlowAccumulator* b) {
                return a->seq < b->seq;
              });
    std::vector<FeatureVector> out;
    out.reserve(order.size());
    for (const auto* acc : order) out.push_back(finalize_flow(*acc));
    flows_.clear();
    index_.clear();
    return out;
  }

  size_t active_flows() const { return flows_.size(); }

 private:
  std::vector<FeatureVector> expire(double now) {
    std::vector<const FlowAccumulator*> expired;
    if (opts_.timeout_mode == TimeoutMode::idle) {
      // flows_ is ordered by last activity, oldest first
      while (!flows_.empty() && now - flows_.front().last_ts > opts_.timeout_seconds)
        pop_front(expired);
    } else {
      // absolute lifetime: creation order == first_ts order, but the recency
      // list is not, so scan. Timeouts in absolute mode expire rarely enough
      // that the scan is acceptable at this tool's scale.
      for (auto it = flows_.begin(); it != flows_.end();) {
        if (now - it->first_ts > opts_.timeout_seconds) {
          expired.push_back(&*it);
          index_.erase(FlowKey::of(first_packet_of(*it)));
          it = erase_keep(it);
        } else {
          ++it;
        }
      }
    }
    std::sort(expired.begin(), expired.end(),
              [](const FlowAccumulator* a, const FlowAccumulator* b) {
                return a->seq < b->seq;
              });
    std::vector<FeatureVector> out;
    out.reserve(expired.size());
    for (const auto* acc : expired) out.push_back(finalize_flow(*acc));
    dead_.clear();
    return out;
  }

  void pop_front(std::vector<const FlowAccumulator*>& expired) {
    index_.erase(FlowKey::of(first_packet_of(flows_.front())));
    dead_.splice(dead_.end(), flows_, flows_.begin());
    expired.push_back(&dead_.back());
  }

  std::list<FlowAccumulator>::iterator erase_keep(
      std::list<FlowAccumulator>::iterator it) {
    auto next = std::next(it);
    dead_.splice(dead_.end(), flows_, it);
    return next;
  }

  // Reconstructs a key-equivalent packet for index erasure.
  static PacketRecord first_packet_of(const FlowAccumulator& acc) {
    PacketRecord p;
    p.src_ip = acc.forward.src_ip;
    p.dst_ip = acc.forward.dst_ip;
    p.src_port = acc.forward.src_port;
    p.dst_port = acc.forward.dst_port;
    p.protocol = acc.forward.protocol;
    return p;
  }

  Options opts_;
  double newest_ts_ = 0.0;
  uint64_t next_seq_ = 0;
  std::list<FlowAccumulator> flows_;  // ordered by last activity
  std::list<FlowAccumulator> dead_;   // holds expired flows until finalized
  std::unordered_map<FlowKey, std::list<FlowAccumulator>::iterator, FlowKeyHash>
      index_;
};

}  // namespace eagernet
