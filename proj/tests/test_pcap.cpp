#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "did/pcap.hpp"
#include "did/rng.hpp"
#include "helpers.hpp"

using namespace did;

namespace {

std::string bytes_to_string(const std::vector<std::uint8_t>& v) {
  return std::string(v.begin(), v.end());
}

// hand-built global header, arbitrary endianness and magic
std::vector<std::uint8_t> global_header_be_us() {
  return {0xA1, 0xB2, 0xC3, 0xD4, 0x00, 0x02, 0x00, 0x04,
          0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
          0x00, 0x00, 0xFF, 0xFF, 0x00, 0x00, 0x00, 0x01};
}

std::vector<std::uint8_t> global_header_le_ns() {
  return {0x4D, 0x3C, 0xB2, 0xA1, 0x02, 0x00, 0x04, 0x00,
          0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
          0xFF, 0xFF, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00};
}

void push_u32be(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

void push_u32le(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 24));
}

}  // namespace

TEST_CASE("big-endian microsecond magic") {
  auto bytes = global_header_be_us();
  push_u32be(bytes, 1);       // ts_sec
  push_u32be(bytes, 500000);  // ts_usec
  push_u32be(bytes, 60);
  push_u32be(bytes, 60);
  bytes.insert(bytes.end(), 60, 0xAB);

  std::istringstream in(bytes_to_string(bytes), std::ios::binary);
  CaptureReader r(in);
  CHECK(r.swapped());
  CHECK_FALSE(r.nanosecond());
  auto f = r.next_frame();
  REQUIRE(f.has_value());
  CHECK(f->timestamp_us == 1'500'000);
  CHECK(f->captured_bytes.size() == 60);
  CHECK(f->original_length == 60);
  CHECK_FALSE(r.next_frame().has_value());
}

TEST_CASE("little-endian nanosecond magic converts to microseconds") {
  auto bytes = global_header_le_ns();
  push_u32le(bytes, 1);
  push_u32le(bytes, 500'000'123);  // ns
  push_u32le(bytes, 4);
  push_u32le(bytes, 4);
  bytes.insert(bytes.end(), 4, 0);

  std::istringstream in(bytes_to_string(bytes), std::ios::binary);
  CaptureReader r(in);
  CHECK(r.nanosecond());
  auto f = r.next_frame();
  REQUIRE(f.has_value());
  CHECK(f->timestamp_us == 1'500'000);  // 500000123 ns -> 500000 us
}

TEST_CASE("short file is a truncated header") {
  std::istringstream in(std::string(10, '\0'), std::ios::binary);
  CHECK_THROWS_AS(CaptureReader(in), TruncatedHeader);
}

TEST_CASE("unknown magic and link type rejected") {
  std::string junk = "XXXX";
  junk.resize(24, '\0');
  std::istringstream in(junk, std::ios::binary);
  CHECK_THROWS_AS(CaptureReader(in), UnknownMagic);

  auto hdr = global_header_be_us();
  hdr[23] = 101;  // raw IP link type
  std::istringstream in2(bytes_to_string(hdr), std::ios::binary);
  CHECK_THROWS_AS(CaptureReader(in2), UnsupportedLinkType);
}

TEST_CASE("record body shorter than declared is an error") {
  auto bytes = global_header_be_us();
  push_u32be(bytes, 0);
  push_u32be(bytes, 0);
  push_u32be(bytes, 100);
  push_u32be(bytes, 100);
  bytes.insert(bytes.end(), 40, 0);  // only 40 of 100

  std::istringstream in(bytes_to_string(bytes), std::ios::binary);
  CaptureReader r(in);
  CHECK_THROWS_AS(r.next_frame(), TruncatedRecord);
}

TEST_CASE("minimal TCP frame decodes with the expected layout") {
  auto frame = testutil::tcp_frame(0x0A000001, 5000, 0x0A000002, 80, kTcpSyn);
  REQUIRE(frame.size() == 54);
  auto pkt = testutil::decode_one(frame, 7);
  CHECK(pkt.ip_and_payload.size() == 40);
  CHECK(pkt.protocol == Transport::Tcp);
  CHECK(pkt.src_port == 5000);
  CHECK(pkt.dst_port == 80);
  CHECK(pkt.tcp_flags == kTcpSyn);
  CHECK(pkt.layout.ip_checksum == 10);
  CHECK(pkt.layout.src_ip == 12);
  CHECK(pkt.layout.dst_ip == 16);
  CHECK(pkt.layout.l4_checksum == 36);
  CHECK(ip_to_u32(pkt.src_ip) == 0x0A000001);
}

TEST_CASE("UDP transport checksum offset") {
  auto frame = testutil::udp_frame(0x0A000001, 5353, 0x0A000002, 53);
  auto pkt = testutil::decode_one(frame);
  CHECK(pkt.protocol == Transport::Udp);
  CHECK(pkt.layout.l4_checksum == 26);
}

TEST_CASE("non-IPv4 frames are skipped and counted") {
  std::vector<std::uint8_t> arp(60, 0);
  arp[12] = 0x08;
  arp[13] = 0x06;
  RawFrame rf{0, arp, 60};
  SkipCounters skips;
  CHECK_FALSE(decode_packet(rf, skips).has_value());
  CHECK(skips.counts[static_cast<int>(SkipReason::NonIpv4)] == 1);
}

TEST_CASE("one 802.1Q tag is unwrapped") {
  auto frame = testutil::tcp_frame(0x0A000001, 5000, 0x0A000002, 80, kTcpAck);
  // splice a VLAN tag after the MACs
  std::vector<std::uint8_t> tagged(frame.begin(), frame.begin() + 12);
  tagged.push_back(0x81);
  tagged.push_back(0x00);
  tagged.push_back(0x00);
  tagged.push_back(0x2A);
  tagged.insert(tagged.end(), frame.begin() + 12, frame.end());
  RawFrame rf{0, tagged, static_cast<std::uint32_t>(tagged.size())};
  SkipCounters skips;
  auto pkt = decode_packet(rf, skips);
  REQUIRE(pkt.has_value());
  CHECK(pkt->src_port == 5000);
  CHECK(skips.total() == 0);
}

TEST_CASE("fragments are skipped") {
  auto frame = testutil::tcp_frame(0x0A000001, 1, 0x0A000002, 2, 0);
  frame[14 + 6] = 0x20;  // MF set
  RawFrame rf{0, frame, static_cast<std::uint32_t>(frame.size())};
  SkipCounters skips;
  CHECK_FALSE(decode_packet(rf, skips).has_value());
  CHECK(skips.counts[static_cast<int>(SkipReason::Fragmented)] == 1);
}

TEST_CASE("writer/reader round-trip preserves timestamps and bytes") {
  std::vector<testutil::TimedFrame> frames;
  did::rng::Engine eng(42);
  std::uint64_t ts = 0;
  for (int i = 0; i < 50; ++i) {
    ts += did::rng::uniform_int(eng, 100000);
    std::vector<std::uint8_t> payload(did::rng::uniform_int(eng, 200));
    for (auto& b : payload) b = static_cast<std::uint8_t>(eng());
    frames.push_back({ts, testutil::tcp_frame(1, 2, 3, 4, kTcpAck, payload)});
  }
  std::istringstream in(testutil::pcap_bytes(frames), std::ios::binary);
  CaptureReader r(in);
  for (const auto& expect : frames) {
    auto f = r.next_frame();
    REQUIRE(f.has_value());
    CHECK(f->timestamp_us == expect.ts_us);
    CHECK(f->captured_bytes == expect.bytes);
  }
  CHECK_FALSE(r.next_frame().has_value());
}

TEST_CASE("layout offsets always index valid bytes") {
  did::rng::Engine eng(7);
  SkipCounters skips;
  for (int i = 0; i < 2000; ++i) {
    bool udp = eng() & 1;
    std::vector<std::uint8_t> payload(did::rng::uniform_int(eng, 64));
    for (auto& b : payload) b = static_cast<std::uint8_t>(eng());
    auto frame = udp ? testutil::udp_frame(eng() & 0xFFFFFFFF, 1, 2, 3, payload)
                     : testutil::tcp_frame(eng() & 0xFFFFFFFF, 1, 2, 3,
                                           static_cast<std::uint8_t>(eng()),
                                           payload);
    // random truncation
    frame.resize(did::rng::uniform_int(eng, frame.size() + 1));
    RawFrame rf{0, frame, static_cast<std::uint32_t>(frame.size())};
    auto pkt = decode_packet(rf, skips);
    if (!pkt) continue;
    CHECK(pkt->layout.ip_checksum + 2 <= pkt->ip_and_payload.size());
    CHECK(pkt->layout.src_ip + 4 <= pkt->ip_and_payload.size());
    CHECK(pkt->layout.dst_ip + 4 <= pkt->ip_and_payload.size());
    CHECK(pkt->layout.l4_checksum + 2 <= pkt->ip_and_payload.size());
  }
}
