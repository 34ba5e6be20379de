#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "did/context.hpp"
#include "did/errors.hpp"
#include "did/flow.hpp"

namespace did {

/// Shape and scaling of the enriched normalized matrix.
struct MatrixConfig {
  std::uint32_t max_packets = 100;  // P
  std::uint32_t max_bytes = 200;    // B, must cover the masked header offsets
  std::uint64_t gap_scale_ms = 1'200'000;  // clamp-scale for time gaps
  // denominators for the context row: gap, src_bucket, src_time,
  // dst_bucket, dst_time
  std::array<double, 5> ctx_scales{1'200'000.0, 1000.0, 1000.0, 1000.0, 1000.0};

  std::uint32_t rows() const { return 1 + max_packets; }
  std::uint32_t cols() const { return 1 + max_bytes; }

  friend bool operator==(const MatrixConfig&, const MatrixConfig&) = default;
};

/// (1+P) x (1+B) matrix of values in [0,1]: one context row, then one row
/// per packet (inter-arrival gap + masked normalized bytes).
struct FlowMatrix {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;  // row-major
  std::int32_t label = -1;    // class id, -1 if unlabeled
  std::string flow_id;

  float at(std::uint32_t r, std::uint32_t c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  float& at(std::uint32_t r, std::uint32_t c) {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
};

/// Copy of ip_and_payload with identity/noise fields zeroed: IP checksum,
/// source and destination IP, transport checksum. For UDP, 12 zero bytes are
/// inserted after the 8-byte header so the transport header occupies the
/// 20 bytes a minimal TCP header would.
inline std::vector<std::uint8_t> mask_packet(const DecodedPacket& pkt) {
  std::vector<std::uint8_t> out = pkt.ip_and_payload;
  auto zero = [&out](std::size_t off, std::size_t n) {
    for (std::size_t i = off; i < off + n && i < out.size(); ++i) out[i] = 0;
  };
  zero(pkt.layout.ip_checksum, 2);
  zero(pkt.layout.src_ip, 4);
  zero(pkt.layout.dst_ip, 4);
  zero(pkt.layout.l4_checksum, 2);
  if (pkt.protocol == Transport::Udp) {
    std::size_t at = std::min(pkt.transport_offset + 8, out.size());
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), 12, 0);
  }
  return out;
}

inline float clamp_unit(double v) {
  return static_cast<float>(std::min(std::max(v, 0.0), 1.0));
}

/// Build the enriched normalized matrix for one flow. Pure function.
inline FlowMatrix build_matrix(const FlowRecord& flow,
                               const ContextFeatures& ctx,
                               const MatrixConfig& cfg) {
  if (flow.packets.empty()) throw EmptyFlow("flow has no packets");

  FlowMatrix m;
  m.rows = cfg.rows();
  m.cols = cfg.cols();
  m.values.assign(static_cast<std::size_t>(m.rows) * m.cols, 0.0f);
  m.flow_id = flow.id();

  m.at(0, 0) = clamp_unit(ctx.gap_ms / cfg.ctx_scales[0]);
  m.at(0, 1) = clamp_unit(ctx.src_count_bucket / cfg.ctx_scales[1]);
  m.at(0, 2) = clamp_unit(ctx.src_count_time / cfg.ctx_scales[2]);
  m.at(0, 3) = clamp_unit(ctx.dst_count_bucket / cfg.ctx_scales[3]);
  m.at(0, 4) = clamp_unit(ctx.dst_count_time / cfg.ctx_scales[4]);

  std::size_t n = std::min<std::size_t>(flow.packets.size(), cfg.max_packets);
  for (std::size_t i = 0; i < n; ++i) {
    const DecodedPacket& pkt = flow.packets[i];
    std::uint32_t row = static_cast<std::uint32_t>(i) + 1;
    if (i > 0) {
      double gap_ms =
          static_cast<double>(pkt.timestamp_us -
                              flow.packets[i - 1].timestamp_us) /
          1000.0;
      m.at(row, 0) = clamp_unit(gap_ms / static_cast<double>(cfg.gap_scale_ms));
    }
    std::vector<std::uint8_t> bytes = mask_packet(pkt);
    std::size_t nb = std::min<std::size_t>(bytes.size(), cfg.max_bytes);
    for (std::size_t j = 0; j < nb; ++j)
      m.at(row, static_cast<std::uint32_t>(j) + 1) =
          static_cast<float>(bytes[j]) / 255.0f;
  }
  return m;
}

}  // namespace did
