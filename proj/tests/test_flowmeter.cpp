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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "eagernet/flow.hpp"
#include "eagernet/flow_csv.hpp"
#include "eagernet/synthetic.hpp"
#include "helpers.hpp"

using namespace eagernet;
using testing_oracle::packet;

TEST_CASE("summarize matches hand-computed values") {
  SUBCASE("single element") {
    const std::vector<double> xs = {5};
    const SummaryStats s = summarize(xs);
    CHECK(s.mean == 5);
    CHECK(s.min == 5);
    CHECK(s.max == 5);
    CHECK(s.stdev == 0);
  }
  SUBCASE("population stdev of 1,2,3 is sqrt(2/3)") {
    const std::vector<double> xs = {1, 2, 3};
    const SummaryStats s = summarize(xs);
    CHECK(s.mean == doctest::Approx(2).epsilon(1e-12));
    CHECK(s.min == 1);
    CHECK(s.max == 3);
    CHECK(s.stdev == doctest::Approx(0.81649658092772603).epsilon(1e-12));
  }
  SUBCASE("constant list") {
    const std::vector<double> xs = {4, 4, 4, 4};
    const SummaryStats s = summarize(xs);
    CHECK(s.mean == 4);
    CHECK(s.stdev == 0);
  }
  SUBCASE("empty list defines all four as zero") {
    const SummaryStats s = summarize({});
    CHECK(s.mean == 0);
    CHECK(s.min == 0);
    CHECK(s.max == 0);
    CHECK(s.stdev == 0);
  }
}

TEST_CASE("single SYN packet then flush") {
  FlowTable table;
  auto emitted = table.ingest(packet(10.0, "10.0.0.1", 1000, "10.0.0.2", 80, 40, true));
  CHECK(emitted.empty());
  auto flows = table.flush();
  REQUIRE(flows.size() == 1);
  const auto& v = flows[0].values;
  CHECK(v[0] == 0);       // duration
  CHECK(v[1] == 1000);    // source port
  CHECK(v[2] == 80);      // destination port
  CHECK(v[3] == 6);       // protocol
  CHECK(v[4] == 40);      // octets
  CHECK(v[13] == 1);      // fwd packets
  CHECK(v[14] == 1);      // fwd syn
  CHECK(v[26] == 0);      // bwd packets
  CHECK(table.active_flows() == 0);
}

TEST_CASE("idle gap beyond 1800 s splits the flow") {
  FlowTable table;
  auto first = table.ingest(packet(0.0, "a", 1, "b", 2, 100));
  CHECK(first.empty());
  auto emitted = table.ingest(packet(2000.0, "a", 1, "b", 2, 100));
  REQUIRE(emitted.size() == 1);  // the old flow is emitted before the packet applies
  auto rest = table.flush();
  REQUIRE(rest.size() == 1);
  CHECK(emitted[0].values[13] == 1);
  CHECK(rest[0].values[13] == 1);
}

TEST_CASE("idle gap exactly at the timeout keeps the flow") {
  FlowTable table;
  table.ingest(packet(0.0, "a", 1, "b", 2, 100));
  auto emitted = table.ingest(packet(1800.0, "a", 1, "b", 2, 100));
  CHECK(emitted.empty());
  CHECK(table.flush().size() == 1);
}

TEST_CASE("three-packet bidirectional exchange matches the hand oracle") {
  // fwd lengths {100, 40}: mean 70, min 40, max 100, population stdev 30
  // fwd gaps {1.25}; bwd lengths {60}; bwd has no gaps
  FlowTable table;
  table.ingest(packet(0.00, "10.0.0.1", 1000, "10.0.0.2", 2000, 100, true, false));
  table.ingest(packet(0.50, "10.0.0.2", 2000, "10.0.0.1", 1000, 60, false, true));
  table.ingest(packet(1.25, "10.0.0.1", 1000, "10.0.0.2", 2000, 40, false, true, true));
  auto flows = table.flush();
  REQUIRE(flows.size() == 1);
  const auto& v = flows[0].values;
  CHECK(v[0] == doctest::Approx(1250.0).epsilon(1e-12));
  CHECK(v[4] == 200);
  CHECK(v[5] == doctest::Approx(70.0).epsilon(1e-12));
  CHECK(v[6] == 40);
  CHECK(v[7] == 100);
  CHECK(v[8] == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(v[9] == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(v[10] == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(v[11] == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(v[12] == 0);
  CHECK(v[13] == 2);
  CHECK(v[14] == 1);  // fwd syn
  CHECK(v[15] == 1);  // fwd ack
  CHECK(v[16] == 1);  // fwd fin
  CHECK(v[18] == 60);
  CHECK(v[21] == 0);
  CHECK(v[22] == 0);  // bwd gaps empty
  CHECK(v[26] == 1);
  CHECK(v[28] == 1);  // bwd ack
}

TEST_CASE("flush ordering and yield") {
  FlowTable table;
  SUBCASE("empty table flushes to nothing") { CHECK(table.flush().empty()); }
  SUBCASE("N distinct keys come back in first-packet order") {
    table.ingest(packet(0.0, "h3", 3, "s", 99, 10));
    table.ingest(packet(0.1, "h1", 1, "s", 99, 10));
    table.ingest(packet(0.2, "h2", 2, "s", 99, 10));
    table.ingest(packet(0.3, "h1", 1, "s", 99, 10));  // touches h1 again
    auto flows = table.flush();
    REQUIRE(flows.size() == 3);
    CHECK(flows[0].flow.src_ip == "h3");
    CHECK(flows[1].flow.src_ip == "h1");
    CHECK(flows[2].flow.src_ip == "h2");
  }
}

TEST_CASE("out-of-order timestamps are rejected, tolerance admits slop") {
  SUBCASE("default tolerance zero") {
    FlowTable table;
    table.ingest(packet(5.0, "a", 1, "b", 2, 10));
    CHECK_THROWS_AS(table.ingest(packet(4.9, "a", 1, "b", 2, 10)), DataError);
    CHECK(table.flush().size() == 1);  // rejected packet left no trace
  }
  SUBCASE("tolerance admits bounded reordering") {
    FlowTable::Options opts;
    opts.reorder_tolerance = 0.5;
    FlowTable table(opts);
    table.ingest(packet(5.0, "a", 1, "b", 2, 10));
    CHECK_NOTHROW(table.ingest(packet(4.9, "a", 1, "b", 2, 10)));
    CHECK_THROWS_AS(table.ingest(packet(4.0, "a", 1, "b", 2, 10)), DataError);
  }
}

TEST_CASE("flags on a non-TCP packet are malformed") {
  FlowTable table;
  CHECK_THROWS_AS(
      table.ingest(packet(0, "a", 1, "b", 2, 10, true, false, false, false, 17)),
      DataError);
}

TEST_CASE("absolute timeout mode caps flow lifetime") {
  FlowTable::Options opts;
  opts.timeout_seconds = 10.0;
  opts.timeout_mode = TimeoutMode::absolute;
  FlowTable table(opts);
  // steady traffic that never idles but outlives the absolute cap at t = 12
  for (int i = 0; i <= 3; ++i)
    CHECK(table.ingest(packet(i * 3.0, "a", 1, "b", 2, 10)).empty());
  auto emitted = table.ingest(packet(12.0, "a", 1, "b", 2, 10));
  REQUIRE(emitted.size() == 1);
  CHECK(emitted[0].values[13] == 4);
  CHECK(table.flush().size() == 1);  // the t = 12 packet started a fresh flow

  // the same trace under idle mode stays one flow
  FlowTable::Options idle_opts;
  idle_opts.timeout_seconds = 10.0;
  FlowTable idle_table(idle_opts);
  for (int i = 0; i <= 4; ++i)
    CHECK(idle_table.ingest(packet(i * 3.0, "a", 1, "b", 2, 10)).empty());
  CHECK(idle_table.flush().size() == 1);
}

TEST_CASE("fifty-packet synthetic trace matches the naive oracle") {
  TraceOptions opts;
  opts.flows = 9;
  opts.seed = 41;
  const LabeledTrace trace = generate_trace(opts);
  REQUIRE(trace.packets.size() >= 50);

  FlowTable table;
  std::vector<FeatureVector> got;
  for (const auto& p : trace.packets)
    for (auto& fv : table.ingest(p)) got.push_back(std::move(fv));
  for (auto& fv : table.flush()) got.push_back(std::move(fv));

  const auto expected = testing_oracle::naive_flows(trace.packets);
  REQUIRE(got.size() == expected.size());
  for (size_t i = 0; i < got.size(); ++i) {
    const auto want = testing_oracle::naive_feature_vector(expected[i]);
    for (size_t k = 0; k < kFeatureCount; ++k)
      CHECK(got[i].values[k] == doctest::Approx(want[k]).epsilon(1e-9));
  }
}

// Forward is pinned to the first observed packet, so relabeling src/dst on
// every packet relabels the flow's orientation with it: the directional
// feature blocks track the same physical packets and stay put, and only the
// source/destination port pair swaps. Nothing else may move.
TEST_CASE("direction relabeling symmetry") {
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    TraceOptions opts;
    opts.flows = 6;
    opts.seed = seed;
    LabeledTrace trace = generate_trace(opts);

    FlowTable fwd_table;
    for (const auto& p : trace.packets) fwd_table.ingest(p);
    const auto original = fwd_table.flush();

    reverse_trace_directions(trace.packets);
    FlowTable rev_table;
    for (const auto& p : trace.packets) rev_table.ingest(p);
    const auto mirrored = rev_table.flush();

    REQUIRE(original.size() == mirrored.size());
    for (size_t i = 0; i < original.size(); ++i) {
      const auto& a = original[i].values;
      const auto& b = mirrored[i].values;
      CHECK(a[1] == b[2]);  // the five-tuple follows the first packet
      CHECK(a[2] == b[1]);
      // the flow tuple flipped with the relabeling
      CHECK(original[i].flow.src_ip == mirrored[i].flow.dst_ip);
      CHECK(original[i].flow.dst_ip == mirrored[i].flow.src_ip);
      for (size_t k = 0; k < kFeatureCount; ++k) {
        if (k == 1 || k == 2) continue;
        CHECK(a[k] == b[k]);
      }
    }
  }
}

TEST_CASE("packet-by-packet processing equals the single-pass CSV driver") {
  for (uint64_t seed = 300; seed < 400; ++seed) {
    TraceOptions opts;
    opts.flows = 5;
    opts.seed = seed;
    const LabeledTrace trace = generate_trace(opts);

    FlowTable table;
    std::vector<FeatureVector> direct;
    for (const auto& p : trace.packets)
      for (auto& fv : table.ingest(p)) direct.push_back(std::move(fv));
    for (auto& fv : table.flush()) direct.push_back(std::move(fv));

    std::ostringstream packets_csv;
    packets_csv << kPacketCsvHeader << "\n";
    for (const auto& p : trace.packets) {
      packets_csv << format_double(p.timestamp) << ',' << p.src_ip << ',' << p.dst_ip
                  << ',' << p.src_port << ',' << p.dst_port << ',' << int(p.protocol)
                  << ',' << p.ip_total_length << ',' << p.syn << ',' << p.ack << ','
                  << p.fin << ',' << p.cwr << "\n";
    }
    std::istringstream in(packets_csv.str());
    std::ostringstream out;
    const ExtractStats stats = extract_flows(in, out, FlowTable::Options{});
    CHECK(stats.rejected == 0);
    REQUIRE(stats.flows == direct.size());

    std::istringstream parse(out.str());
    CsvReader reader(parse, "features");
    std::vector<std::string_view> cells;
    size_t row = 0;
    while (reader.next(cells)) {
      for (size_t k = 0; k < kFeatureCount; ++k) {
        const double v = parse_double_field(cells[k], "row");
        CHECK(v == direct[row].values[k]);  // shortest round-trip text is exact
      }
      ++row;
    }
    CHECK(row == direct.size());
  }
}

TEST_CASE("lowering the timeout never drops flows") {
  for (uint64_t seed = 7; seed < 27; ++seed) {
    Rng rng(seed, 9);
    std::vector<PacketRecord> pkts;
    double t = 0.0;
    for (int i = 0; i < 120; ++i) {
      t += rng.uniform(0.0, 500.0);
      const int host = static_cast<int>(rng.below(4));
      pkts.push_back(packet(t, "h" + std::to_string(host), 1000, "server", 80,
                            40 + static_cast<uint32_t>(rng.below(100))));
    }
    auto count_flows = [&pkts](double timeout) {
      FlowTable::Options opts;
      opts.timeout_seconds = timeout;
      FlowTable table(opts);
      size_t flows = 0;
      for (const auto& p : pkts) flows += table.ingest(p).size();
      return flows + table.flush().size();
    };
    const size_t strict = count_flows(120.0);
    const size_t loose = count_flows(1800.0);
    CHECK(strict >= loose);
  }
}

TEST_CASE("feature invariants hold on random traces") {
  for (uint64_t seed = 500; seed < 520; ++seed) {
    TraceOptions opts;
    opts.flows = 8;
    opts.seed = seed;
    const LabeledTrace trace = generate_trace(opts);
    FlowTable table;
    for (const auto& p : trace.packets) table.ingest(p);
    for (const auto& fv : table.flush()) {
      const auto& v = fv.values;
      CHECK(v[0] >= 0);
      for (size_t base : {size_t(5), size_t(9), size_t(18), size_t(22)}) {
        CHECK(v[base + 1] <= v[base + 0] + 1e-12);  // min <= mean
        CHECK(v[base + 0] <= v[base + 2] + 1e-12);  // mean <= max
        CHECK(v[base + 3] >= 0);                    // stdev
      }
      for (size_t k = 13; k < 18; ++k) CHECK(v[k] >= 0);
      for (size_t k = 26; k < 31; ++k) CHECK(v[k] >= 0);
    }
  }
}

// No cross-key state: sharding a trace by key hash across independent tables
// and pooling the results must reproduce the single-table output exactly.
TEST_CASE("flow table shards by key hash") {
  for (uint64_t seed = 900; seed < 910; ++seed) {
    TraceOptions opts;
    opts.flows = 10;
    opts.seed = seed;
    const LabeledTrace trace = generate_trace(opts);

    FlowTable whole;
    std::vector<FeatureVector> expect;
    for (const auto& p : trace.packets)
      for (auto& fv : whole.ingest(p)) expect.push_back(std::move(fv));
    for (auto& fv : whole.flush()) expect.push_back(std::move(fv));

    FlowTable shard[2];
    std::vector<FeatureVector> pooled;
    FlowKeyHash hasher;
    for (const auto& p : trace.packets) {
      const size_t which = hasher(FlowKey::of(p)) % 2;
      for (auto& fv : shard[which].ingest(p)) pooled.push_back(std::move(fv));
    }
    for (auto& t : shard)
      for (auto& fv : t.flush()) pooled.push_back(std::move(fv));

    REQUIRE(pooled.size() == expect.size());
    // pooled order differs; match by forward tuple
    for (const auto& want : expect) {
      bool found = false;
      for (const auto& got : pooled)
        if (got.flow == want.flow && got.values == want.values) found = true;
      CHECK(found);
    }
  }
}

TEST_CASE("extract driver rejects malformed rows and keeps going") {
  std::istringstream in(std::string(kPacketCsvHeader) +
                        "\n"
                        "0.5,a,b,1,2,6,100,1,0,0,0\n"
                        "0.6,a,b,70000,2,6,100,0,0,0,0\n"   // bad port
                        "0.7,a,b,1,2,6,100,2,0,0,0\n"       // bad boolean
                        "0.4,a,b,1,2,6,100,0,0,0,0\n"       // out of order
                        "0.8,a,b,1,2,6,100,0,1,0,0\n");
  std::ostringstream out, diag;
  const ExtractStats stats = extract_flows(in, out, FlowTable::Options{}, nullptr, &diag);
  CHECK(stats.packets == 5);
  CHECK(stats.rejected == 3);
  CHECK(stats.flows == 1);
  CHECK(diag.str().find("out of order") != std::string::npos);
}

TEST_CASE("label sidecar joins on the forward tuple with reverse fallback") {
  std::istringstream labels_in(
      "src_ip,dst_ip,src_port,dst_port,protocol,label,family\n"
      "10.0.0.1,10.0.0.2,1000,80,6,1,flood\n"
      "10.0.0.9,10.0.0.3,4000,443,6,0,benign\n");
  const LabelMap labels = LabelMap::read(labels_in, "labels");
  CHECK(labels.size() == 2);

  std::ostringstream packets;
  packets << kPacketCsvHeader << "\n"
          << "0.0,10.0.0.1,10.0.0.2,1000,80,6,40,1,0,0,0\n"
          << "0.1,10.0.0.3,10.0.0.9,443,4000,6,60,0,1,0,0\n"  // reversed key
          << "0.2,10.0.0.7,10.0.0.8,5,6,6,70,0,0,0,0\n";      // unlabeled
  std::istringstream in(packets.str());
  std::ostringstream out;
  const ExtractStats stats = extract_flows(in, out, FlowTable::Options{}, &labels);
  CHECK(stats.flows == 3);
  CHECK(stats.unlabeled == 1);

  std::istringstream parse(out.str());
  CsvReader reader(parse, "features");
  CHECK(reader.header().size() == kFeatureCount + 2);
  std::vector<std::string_view> cells;
  std::vector<std::pair<std::string, std::string>> got;
  while (reader.next(cells))
    got.emplace_back(std::string(cells[kFeatureCount]), std::string(cells[kFeatureCount + 1]));
  REQUIRE(got.size() == 3);
  CHECK(got[0] == std::pair<std::string, std::string>{"1", "flood"});
  CHECK(got[1] == std::pair<std::string, std::string>{"0", "benign"});
  CHECK(got[2] == std::pair<std::string, std::string>{"", ""});
}
