#include <catch_amalgamated.hpp>

#include <map>

#include "did/flow.hpp"
#include "did/rng.hpp"
#include "helpers.hpp"

using namespace did;

namespace {

DecodedPacket packet(std::uint32_t src_ip, std::uint16_t src_port,
                     std::uint32_t dst_ip, std::uint16_t dst_port,
                     std::uint64_t ts_ms, std::uint8_t flags = kTcpAck,
                     Transport proto = Transport::Tcp) {
  auto frame = proto == Transport::Tcp
                   ? testutil::tcp_frame(src_ip, src_port, dst_ip, dst_port, flags)
                   : testutil::udp_frame(src_ip, src_port, dst_ip, dst_port);
  return testutil::decode_one(frame, ts_ms * 1000);
}

// Naive reference: one linear scan applying the FIN/RST rule and the
// max-flow-time rule per canonical key, independent of FlowTable.
struct OracleFlow {
  std::size_t n_packets = 0;
  Termination termination = Termination::CaptureEnd;
  std::uint64_t start_us = 0;
};

std::vector<OracleFlow> oracle_flows(const std::vector<DecodedPacket>& pkts,
                                     std::uint64_t max_flow_ms) {
  struct Live {
    std::size_t flow_slot;
    std::uint64_t start_us;
  };
  std::vector<OracleFlow> out;
  std::map<std::tuple<std::uint32_t, std::uint16_t, std::uint32_t,
                      std::uint16_t, int>, Live> live;
  auto key_of = [](const DecodedPacket& p) {
    auto a = std::tuple{ip_to_u32(p.src_ip), p.src_port};
    auto b = std::tuple{ip_to_u32(p.dst_ip), p.dst_port};
    if (b < a) std::swap(a, b);
    return std::tuple{std::get<0>(a), std::get<1>(a), std::get<0>(b),
                      std::get<1>(b), static_cast<int>(p.protocol)};
  };
  for (const auto& p : pkts) {
    // close anything too old first
    for (auto it = live.begin(); it != live.end();) {
      if (p.timestamp_us - it->second.start_us > max_flow_ms * 1000) {
        out[it->second.flow_slot].termination = Termination::Timeout;
        it = live.erase(it);
      } else {
        ++it;
      }
    }
    auto key = key_of(p);
    auto it = live.find(key);
    if (it == live.end()) {
      out.push_back({0, Termination::CaptureEnd, p.timestamp_us});
      it = live.emplace(key, Live{out.size() - 1, p.timestamp_us}).first;
    }
    ++out[it->second.flow_slot].n_packets;
    if (p.protocol == Transport::Tcp && (p.tcp_flags & (kTcpFin | kTcpRst))) {
      out[it->second.flow_slot].termination = Termination::Fin;
      live.erase(it);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("flow key is canonical and direction-insensitive") {
  auto fwd = FlowKey::of(packet(0x0A000001, 5000, 0x0A000002, 80, 0));
  auto rev = FlowKey::of(packet(0x0A000002, 80, 0x0A000001, 5000, 0));
  CHECK(fwd == rev);
  CHECK(fwd.a.ip == std::array<std::uint8_t, 4>{10, 0, 0, 1});
  CHECK(fwd.a.port == 5000);
  CHECK(fwd.b.port == 80);

  auto udp = FlowKey::of(
      packet(0x0A000001, 5000, 0x0A000002, 80, 0, 0, Transport::Udp));
  CHECK_FALSE(fwd == udp);
}

TEST_CASE("FIN closes the flow after including the FIN packet") {
  FlowTable table;
  CHECK(table.ingest(packet(1, 10, 2, 20, 0)).empty());
  CHECK(table.ingest(packet(2, 20, 1, 10, 10)).empty());
  auto closed = table.ingest(packet(1, 10, 2, 20, 20, kTcpFin | kTcpAck));
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].packets.size() == 3);
  CHECK(closed[0].termination == Termination::Fin);
  CHECK(closed[0].packets.back().tcp_flags & kTcpFin);
  CHECK(table.live_count() == 0);
}

TEST_CASE("maximum flow time closes and restarts the key") {
  FlowTable table;
  CHECK(table.ingest(packet(1, 10, 2, 20, 0)).empty());
  auto closed = table.ingest(packet(1, 10, 2, 20, 1'200'001));
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].termination == Termination::Timeout);
  CHECK(closed[0].packets.size() == 1);
  CHECK(table.live_count() == 1);
  auto rest = table.flush();
  REQUIRE(rest.size() == 1);
  CHECK(rest[0].start_time_us == 1'200'001'000);
}

TEST_CASE("a flow aged exactly the maximum stays open") {
  FlowTable table;
  table.ingest(packet(1, 10, 2, 20, 0));
  CHECK(table.ingest(packet(1, 10, 2, 20, 1'200'000)).empty());
  CHECK(table.live_count() == 1);
}

TEST_CASE("interleaved keys keep their own packet order") {
  FlowTable table;
  table.ingest(packet(1, 10, 2, 20, 0));
  table.ingest(packet(3, 30, 4, 40, 1));
  table.ingest(packet(2, 20, 1, 10, 2));
  table.ingest(packet(4, 40, 3, 30, 3));
  auto flows = table.flush();
  REQUIRE(flows.size() == 2);
  CHECK(flows[0].packets.size() == 2);
  CHECK(flows[1].packets.size() == 2);
  CHECK(flows[0].start_time_us < flows[1].start_time_us);
  CHECK(flows[0].termination == Termination::CaptureEnd);
}

TEST_CASE("flush of an empty table is empty") {
  FlowTable table;
  CHECK(table.flush().empty());
}

TEST_CASE("out-of-order timestamps are rejected") {
  FlowTable table;
  table.ingest(packet(1, 10, 2, 20, 5));
  CHECK_THROWS_AS(table.ingest(packet(1, 10, 2, 20, 4)), OutOfOrderTimestamp);
}

TEST_CASE("RST also terminates the flow") {
  FlowTable table;
  table.ingest(packet(1, 10, 2, 20, 0, kTcpSyn));
  auto closed = table.ingest(packet(2, 20, 1, 10, 1, kTcpRst | kTcpAck));
  REQUIRE(closed.size() == 1);
  CHECK(closed[0].termination == Termination::Fin);
}

TEST_CASE("oracle equivalence and partition on random captures") {
  did::rng::Engine eng(123);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<DecodedPacket> pkts;
    std::uint64_t ts = 0;
    for (int i = 0; i < 400; ++i) {
      ts += did::rng::uniform_int(eng, 200'000);  // up to 200 s jumps
      std::uint32_t a = 1 + static_cast<std::uint32_t>(did::rng::uniform_int(eng, 4));
      std::uint32_t b = 10 + static_cast<std::uint32_t>(did::rng::uniform_int(eng, 3));
      std::uint16_t pa = static_cast<std::uint16_t>(100 + did::rng::uniform_int(eng, 4));
      bool fin = did::rng::uniform_real(eng) < 0.15;
      bool rev = did::rng::uniform_real(eng) < 0.5;
      auto p = rev ? packet(b, 80, a, pa, ts, fin ? kTcpFin : kTcpAck)
                   : packet(a, pa, b, 80, ts, fin ? kTcpFin : kTcpAck);
      pkts.push_back(p);
    }
    auto expected = oracle_flows(pkts, 1'200'000);

    FlowTable table;
    std::vector<FlowRecord> flows;
    for (const auto& p : pkts)
      for (auto& f : table.ingest(p)) flows.push_back(std::move(f));
    for (auto& f : table.flush()) flows.push_back(std::move(f));
    std::sort(flows.begin(), flows.end(),
              [](const FlowRecord& x, const FlowRecord& y) {
                return x.flow_index < y.flow_index;
              });

    REQUIRE(flows.size() == expected.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < flows.size(); ++i) {
      CHECK(flows[i].packets.size() == expected[i].n_packets);
      CHECK(flows[i].termination == expected[i].termination);
      CHECK(flows[i].start_time_us == expected[i].start_us);
      total += flows[i].packets.size();
      if (i > 0) CHECK(flows[i].start_time_us >= flows[i - 1].start_time_us);
    }
    CHECK(total == pkts.size());  // partition: every packet in exactly one flow
  }
}
