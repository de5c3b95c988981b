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

#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "eagernet/csv.hpp"
#include "eagernet/flow.hpp"

// File formats around the flow table.
//
// Packet records:  timestamp,src_ip,dst_ip,src_port,dst_port,protocol,
//                  ip_total_length,syn,ack,fin,cwr
//                  (timestamps as decimal seconds, booleans as 0/1)
// Label sidecar:   src_ip,dst_ip,src_port,dst_port,protocol,label,family
//                  keyed by the flow's forward five-tuple; the reversed
//                  tuple matches as a fallback.
// Feature output:  the 31 CAIA columns of feature_names(), plus label and
//                  family columns when a sidecar is supplied.

namespace eagernet {

inline const char* kPacketCsvHeader =
    "timestamp,src_ip,dst_ip,src_port,dst_port,protocol,ip_total_length,syn,ack,fin,cwr";

inline PacketRecord parse_packet_row(const std::vector<std::string_view>& cells,
                                     const std::string& where) {
  PacketRecord p;
  p.timestamp = parse_double_field(cells[0], where);
  p.src_ip = std::string(cells[1]);
  p.dst_ip = std::string(cells[2]);
  p.src_port = static_cast<uint16_t>(parse_uint_field(cells[3], 65535, where));
  p.dst_port = static_cast<uint16_t>(parse_uint_field(cells[4], 65535, where));
  p.protocol = static_cast<uint8_t>(parse_uint_field(cells[5], 255, where));
  p.ip_total_length =
      static_cast<uint32_t>(parse_uint_field(cells[6], 0xffffffffULL, where));
  p.syn = parse_bool01_field(cells[7], where);
  p.ack = parse_bool01_field(cells[8], where);
  p.fin = parse_bool01_field(cells[9], where);
  p.cwr = parse_bool01_field(cells[10], where);
  return p;
}

struct FlowLabel {
  std::string label;
  std::string family;
};

class LabelMap {
 public:
  static LabelMap read(std::istream& in, const std::string& name) {
    LabelMap m;
    CsvReader reader(in, name);
    const std::vector<std::string> expected = {"src_ip",   "dst_ip", "src_port",
                                               "dst_port", "protocol", "label",
                                               "family"};
    if (reader.header() != expected)
      throw DataError(name + ": unexpected label header");
    std::vector<std::string_view> cells;
    while (reader.next(cells)) {
      const std::string where = reader.location();
      FlowTuple t;
      t.src_ip = std::string(cells[0]);
      t.dst_ip = std::string(cells[1]);
      t.src_port = static_cast<uint16_t>(parse_uint_field(cells[2], 65535, where));
      t.dst_port = static_cast<uint16_t>(parse_uint_field(cells[3], 65535, where));
      t.protocol = static_cast<uint8_t>(parse_uint_field(cells[4], 255, where));
      m.map_[t] = FlowLabel{std::string(cells[5]), std::string(cells[6])};
    }
    return m;
  }

  // Exact five-tuple match first, then the reversed tuple.
  const FlowLabel* find(const FlowTuple& t) const {
    auto it = map_.find(t);
    if (it != map_.end()) return &it->second;
    it = map_.find(t.reversed());
    if (it != map_.end()) return &it->second;
    return nullptr;
  }

  size_t size() const { return map_.size(); }

 private:
  std::unordered_map<FlowTuple, FlowLabel, FlowTupleHash> map_;
};

inline void write_feature_header(std::ostream& out, bool with_labels) {
  std::vector<std::string> cells(feature_names().begin(), feature_names().end());
  if (with_labels) {
    cells.push_back("label");
    cells.push_back("family");
  }
  write_csv_row(out, cells);
}

inline void write_feature_row(std::ostream& out, const FeatureVector& fv,
                              bool with_labels) {
  std::vector<std::string> cells;
  cells.reserve(kFeatureCount + 2);
  for (double v : fv.values) cells.push_back(format_double(v));
  if (with_labels) {
    cells.push_back(fv.label);
    cells.push_back(fv.family);
  }
  write_csv_row(out, cells);
}

struct ExtractStats {
  uint64_t packets = 0;
  uint64_t rejected = 0;
  uint64_t flows = 0;
  uint64_t unlabeled = 0;
};

// Streams a packet CSV through a FlowTable into a feature CSV. Records that
// fail validation are rejected individually: counted, reported on `diag`, and
// the extraction continues.
inline ExtractStats extract_flows(std::istream& packets_in, std::ostream& features_out,
                                  FlowTable::Options opts,
                                  const LabelMap* labels = nullptr,
                                  std::ostream* diag = nullptr,
                                  const std::string& input_name = "packets") {
  CsvReader reader(packets_in, input_name);
  {
    std::vector<std::string_view> expected;
    split_csv_line(kPacketCsvHeader, expected);
    if (reader.header().size() != expected.size())
      throw DataError(input_name + ": unexpected packet header");
    for (size_t i = 0; i < expected.size(); ++i)
      if (reader.header()[i] != expected[i])
        throw DataError(input_name + ": unexpected packet header column '" +
                        reader.header()[i] + "'");
  }

  ExtractStats stats;
  FlowTable table(opts);
  const bool with_labels = labels != nullptr;
  write_feature_header(features_out, with_labels);

  auto emit = [&](std::vector<FeatureVector> vecs) {
    for (auto& fv : vecs) {
      if (with_labels) {
        if (const FlowLabel* l = labels->find(fv.flow)) {
          fv.label = l->label;
          fv.family = l->family;
        } else {
          ++stats.unlabeled;
        }
      }
      write_feature_row(features_out, fv, with_labels);
      ++stats.flows;
    }
  };

  std::vector<std::string_view> cells;
  while (reader.next(cells)) {
    ++stats.packets;
    try {
      PacketRecord pkt = parse_packet_row(cells, reader.location());
      emit(table.ingest(pkt, reader.location()));
    } catch (const DataError& e) {
      ++stats.rejected;
      if (diag) *diag << "rejected: " << e.what() << '\n';
    }
  }
  emit(table.flush());
  return stats;
}

}  // namespace eagernet
