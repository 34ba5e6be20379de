#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "did/pcap.hpp"
#include "did/synth.hpp"

namespace testutil {

struct TimedFrame {
  std::uint64_t ts_us;
  std::vector<std::uint8_t> bytes;
};

inline std::string pcap_bytes(const std::vector<TimedFrame>& frames) {
  std::ostringstream out(std::ios::binary);
  did::PcapWriter w(out);
  for (const auto& f : frames) w.write_frame(f.ts_us, f.bytes);
  return out.str();
}

inline std::vector<std::uint8_t> tcp_frame(std::uint32_t src_ip,
                                           std::uint16_t src_port,
                                           std::uint32_t dst_ip,
                                           std::uint16_t dst_port,
                                           std::uint8_t flags,
                                           std::vector<std::uint8_t> payload = {}) {
  did::synth::FrameSpec s;
  s.src_ip = src_ip;
  s.dst_ip = dst_ip;
  s.src_port = src_port;
  s.dst_port = dst_port;
  s.protocol = did::Transport::Tcp;
  s.tcp_flags = flags;
  s.payload = std::move(payload);
  return did::synth::build_frame(s);
}

inline std::vector<std::uint8_t> udp_frame(std::uint32_t src_ip,
                                           std::uint16_t src_port,
                                           std::uint32_t dst_ip,
                                           std::uint16_t dst_port,
                                           std::vector<std::uint8_t> payload = {}) {
  did::synth::FrameSpec s;
  s.src_ip = src_ip;
  s.dst_ip = dst_ip;
  s.src_port = src_port;
  s.dst_port = dst_port;
  s.protocol = did::Transport::Udp;
  s.payload = std::move(payload);
  return did::synth::build_frame(s);
}

inline did::DecodedPacket decode_one(const std::vector<std::uint8_t>& frame,
                                     std::uint64_t ts_us = 0) {
  did::RawFrame rf;
  rf.timestamp_us = ts_us;
  rf.captured_bytes = frame;
  rf.original_length = static_cast<std::uint32_t>(frame.size());
  did::SkipCounters skips;
  auto pkt = did::decode_packet(rf, skips);
  if (!pkt) throw std::runtime_error("helper frame did not decode");
  return *pkt;
}

inline std::string temp_path(const std::string& name) {
  return std::string("/tmp/did_test_") + name;
}

}  // namespace testutil
