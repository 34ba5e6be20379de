#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "did/errors.hpp"

namespace did {

enum class Transport : std::uint8_t { Tcp = 6, Udp = 17 };

struct RawFrame {
  std::uint64_t timestamp_us = 0;
  std::vector<std::uint8_t> captured_bytes;
  std::uint32_t original_length = 0;
};

/// Byte offsets of the fields masked before featurization, relative to the
/// start of ip_and_payload.
struct HeaderLayout {
  std::size_t ip_checksum = 0;  // 2 bytes
  std::size_t src_ip = 0;       // 4 bytes
  std::size_t dst_ip = 0;       // 4 bytes
  std::size_t l4_checksum = 0;  // 2 bytes
};

struct DecodedPacket {
  std::uint64_t timestamp_us = 0;
  std::array<std::uint8_t, 4> src_ip{};
  std::array<std::uint8_t, 4> dst_ip{};
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Transport protocol = Transport::Tcp;
  std::uint8_t tcp_flags = 0;  // valid iff protocol == Tcp
  // IPv4 header onward; the data-link header is already stripped.
  std::vector<std::uint8_t> ip_and_payload;
  HeaderLayout layout;
  std::size_t transport_offset = 0;  // first byte of the L4 header
  std::uint16_t ip_total_length = 0; // as declared; capture may be shorter
};

// TCP flag bits
inline constexpr std::uint8_t kTcpFin = 0x01;
inline constexpr std::uint8_t kTcpSyn = 0x02;
inline constexpr std::uint8_t kTcpRst = 0x04;
inline constexpr std::uint8_t kTcpPsh = 0x08;
inline constexpr std::uint8_t kTcpAck = 0x10;

enum class SkipReason : int {
  ShortFrame = 0,
  NonIpv4,          // EtherType other than 0x0800 (after one VLAN unwrap)
  BadIpVersion,
  TruncatedIpHeader,
  Fragmented,
  UnsupportedProtocol,
  TruncatedTransport,
  Count_,
};

struct SkipCounters {
  std::array<std::uint64_t, static_cast<int>(SkipReason::Count_)> counts{};

  void bump(SkipReason r) { ++counts[static_cast<int>(r)]; }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  static const char* name(SkipReason r) {
    switch (r) {
      case SkipReason::ShortFrame: return "short-frame";
      case SkipReason::NonIpv4: return "non-ipv4";
      case SkipReason::BadIpVersion: return "bad-ip-version";
      case SkipReason::TruncatedIpHeader: return "truncated-ip-header";
      case SkipReason::Fragmented: return "fragmented";
      case SkipReason::UnsupportedProtocol: return "unsupported-protocol";
      case SkipReason::TruncatedTransport: return "truncated-transport";
      default: return "?";
    }
  }
};

/// Sequential reader for classic pcap files (both endiannesses, micro- and
/// nanosecond magic). Link type must be Ethernet. Single consumer.
class CaptureReader {
 public:
  static constexpr std::uint32_t kMagicUs = 0xA1B2C3D4;
  static constexpr std::uint32_t kMagicNs = 0xA1B23C4D;

  explicit CaptureReader(const std::string& path)
      : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)) {
    if (!static_cast<std::ifstream*>(owned_.get())->is_open())
      throw IoError("cannot open pcap file: " + path);
    in_ = owned_.get();
    read_global_header();
  }

  explicit CaptureReader(std::istream& in) : in_(&in) { read_global_header(); }

  std::uint32_t snaplen() const { return snaplen_; }
  bool swapped() const { return swap_; }
  bool nanosecond() const { return nanos_; }

  /// Next frame in file order, or nullopt at a clean end of file.
  std::optional<RawFrame> next_frame() {
    std::uint8_t hdr[16];
    in_->read(reinterpret_cast<char*>(hdr), 16);
    std::streamsize got = in_->gcount();
    if (got == 0) return std::nullopt;
    if (got < 16) throw TruncatedRecord("truncated record header");

    std::uint32_t ts_sec = u32(hdr + 0);
    std::uint32_t ts_sub = u32(hdr + 4);
    std::uint32_t incl = u32(hdr + 8);
    std::uint32_t orig = u32(hdr + 12);
    if (incl > snaplen_)
      throw TruncatedRecord("captured length exceeds snaplen");
    if (incl > orig)
      throw TruncatedRecord("captured length exceeds original length");

    RawFrame f;
    f.captured_bytes.resize(incl);
    if (incl > 0) {
      in_->read(reinterpret_cast<char*>(f.captured_bytes.data()), incl);
      if (in_->gcount() != static_cast<std::streamsize>(incl))
        throw TruncatedRecord("record body shorter than declared length");
    }
    std::uint64_t us = nanos_ ? ts_sub / 1000 : ts_sub;
    f.timestamp_us = static_cast<std::uint64_t>(ts_sec) * 1'000'000 + us;
    f.original_length = orig;
    return f;
  }

 private:
  void read_global_header() {
    std::uint8_t hdr[24];
    in_->read(reinterpret_cast<char*>(hdr), 24);
    if (in_->gcount() < 24) throw TruncatedHeader("pcap global header is 24 bytes");

    std::uint32_t magic;
    std::memcpy(&magic, hdr, 4);
    if (magic == kMagicUs) {
      swap_ = false; nanos_ = false;
    } else if (magic == kMagicNs) {
      swap_ = false; nanos_ = true;
    } else if (magic == byteswap(kMagicUs)) {
      swap_ = true; nanos_ = false;
    } else if (magic == byteswap(kMagicNs)) {
      swap_ = true; nanos_ = true;
    } else {
      throw UnknownMagic("unknown pcap magic");
    }
    snaplen_ = u32(hdr + 16);
    std::uint32_t linktype = u32(hdr + 20);
    if (linktype != 1)
      throw UnsupportedLinkType("link type " + std::to_string(linktype) +
                                " (only Ethernet/1 supported)");
  }

  static std::uint32_t byteswap(std::uint32_t x) {
    return (x >> 24) | ((x >> 8) & 0xFF00) | ((x << 8) & 0xFF0000) | (x << 24);
  }

  std::uint32_t u32(const std::uint8_t* p) const {
    std::uint32_t x;
    std::memcpy(&x, p, 4);
    return swap_ ? byteswap(x) : x;
  }

  std::unique_ptr<std::istream> owned_;
  std::istream* in_ = nullptr;
  bool swap_ = false;
  bool nanos_ = false;
  std::uint32_t snaplen_ = 0;
};

/// Decode one Ethernet frame into an IPv4 TCP/UDP packet. Frames the
/// pipeline cannot use are skipped (counted), never fatal.
inline std::optional<DecodedPacket> decode_packet(const RawFrame& frame,
                                                  SkipCounters& skips) {
  const auto& b = frame.captured_bytes;
  if (b.size() < 14) {
    skips.bump(SkipReason::ShortFrame);
    return std::nullopt;
  }
  std::size_t l3 = 14;
  std::uint16_t ethertype = std::uint16_t(b[12]) << 8 | b[13];
  if (ethertype == 0x8100) {  // one 802.1Q tag
    if (b.size() < 18) {
      skips.bump(SkipReason::ShortFrame);
      return std::nullopt;
    }
    ethertype = std::uint16_t(b[16]) << 8 | b[17];
    l3 = 18;
  }
  if (ethertype != 0x0800) {
    skips.bump(SkipReason::NonIpv4);
    return std::nullopt;
  }
  if (b.size() < l3 + 20) {
    skips.bump(SkipReason::TruncatedIpHeader);
    return std::nullopt;
  }
  const std::uint8_t* ip = b.data() + l3;
  if ((ip[0] >> 4) != 4) {
    skips.bump(SkipReason::BadIpVersion);
    return std::nullopt;
  }
  std::size_t ihl = (ip[0] & 0x0F) * 4u;
  if (ihl < 20 || b.size() < l3 + ihl) {
    skips.bump(SkipReason::TruncatedIpHeader);
    return std::nullopt;
  }
  std::uint16_t frag = std::uint16_t(ip[6]) << 8 | ip[7];
  if ((frag & 0x2000) != 0 || (frag & 0x1FFF) != 0) {  // MF or offset
    skips.bump(SkipReason::Fragmented);
    return std::nullopt;
  }
  std::uint8_t proto = ip[9];
  if (proto != 6 && proto != 17) {
    skips.bump(SkipReason::UnsupportedProtocol);
    return std::nullopt;
  }

  std::size_t avail = b.size() - l3;  // bytes from IP header onward
  std::size_t l4 = ihl;
  std::size_t l4_min = (proto == 6) ? 20 : 8;
  if (avail < l4 + l4_min) {
    skips.bump(SkipReason::TruncatedTransport);
    return std::nullopt;
  }
  const std::uint8_t* tp = ip + l4;
  if (proto == 6) {
    std::size_t data_off = (tp[12] >> 4) * 4u;
    if (data_off < 20) {
      skips.bump(SkipReason::TruncatedTransport);
      return std::nullopt;
    }
  }

  DecodedPacket pkt;
  pkt.timestamp_us = frame.timestamp_us;
  std::copy(ip + 12, ip + 16, pkt.src_ip.begin());
  std::copy(ip + 16, ip + 20, pkt.dst_ip.begin());
  pkt.src_port = std::uint16_t(tp[0]) << 8 | tp[1];
  pkt.dst_port = std::uint16_t(tp[2]) << 8 | tp[3];
  pkt.protocol = (proto == 6) ? Transport::Tcp : Transport::Udp;
  if (proto == 6) pkt.tcp_flags = tp[13];
  pkt.ip_total_length = std::uint16_t(ip[2]) << 8 | ip[3];
  pkt.ip_and_payload.assign(ip, b.data() + b.size());
  pkt.transport_offset = l4;
  pkt.layout.ip_checksum = 10;
  pkt.layout.src_ip = 12;
  pkt.layout.dst_ip = 16;
  pkt.layout.l4_checksum = l4 + ((proto == 6) ? 16 : 6);
  return pkt;
}

inline std::uint32_t ip_to_u32(const std::array<std::uint8_t, 4>& ip) {
  return std::uint32_t(ip[0]) << 24 | std::uint32_t(ip[1]) << 16 |
         std::uint32_t(ip[2]) << 8 | std::uint32_t(ip[3]);
}

inline std::string ip_to_string(const std::array<std::uint8_t, 4>& ip) {
  return std::to_string(ip[0]) + "." + std::to_string(ip[1]) + "." +
         std::to_string(ip[2]) + "." + std::to_string(ip[3]);
}

}  // namespace did
