#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "did/dataset.hpp"
#include "did/errors.hpp"
#include "did/pcap.hpp"
#include "did/rng.hpp"

namespace did {

/// Writes classic pcap (little-endian, microsecond magic, Ethernet).
class PcapWriter {
 public:
  explicit PcapWriter(std::ostream& out, std::uint32_t snaplen = 65535)
      : out_(&out) {
    write_u32(CaptureReader::kMagicUs);
    write_u16(2);  // major
    write_u16(4);  // minor
    write_u32(0);  // thiszone
    write_u32(0);  // sigfigs
    write_u32(snaplen);
    write_u32(1);  // Ethernet
  }

  void write_frame(std::uint64_t timestamp_us,
                   const std::vector<std::uint8_t>& bytes) {
    write_u32(static_cast<std::uint32_t>(timestamp_us / 1'000'000));
    write_u32(static_cast<std::uint32_t>(timestamp_us % 1'000'000));
    write_u32(static_cast<std::uint32_t>(bytes.size()));
    write_u32(static_cast<std::uint32_t>(bytes.size()));
    out_->write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
  }

 private:
  void write_u16(std::uint16_t v) {
    out_->write(reinterpret_cast<const char*>(&v), 2);
  }
  void write_u32(std::uint32_t v) {
    out_->write(reinterpret_cast<const char*>(&v), 4);
  }
  std::ostream* out_;
};

namespace synth {

/// Ethernet + IPv4 + TCP/UDP frame with zero checksums (masked downstream).
struct FrameSpec {
  std::uint32_t src_ip = 0, dst_ip = 0;
  std::uint16_t src_port = 0, dst_port = 0;
  Transport protocol = Transport::Tcp;
  std::uint8_t tcp_flags = 0;
  std::vector<std::uint8_t> payload;
};

inline std::vector<std::uint8_t> build_frame(const FrameSpec& s) {
  std::size_t l4_len = (s.protocol == Transport::Tcp) ? 20 : 8;
  std::size_t ip_len = 20 + l4_len + s.payload.size();
  std::vector<std::uint8_t> f;
  f.reserve(14 + ip_len);
  auto u16be = [&f](std::uint16_t v) {
    f.push_back(static_cast<std::uint8_t>(v >> 8));
    f.push_back(static_cast<std::uint8_t>(v));
  };
  auto u32be = [&f](std::uint32_t v) {
    f.push_back(static_cast<std::uint8_t>(v >> 24));
    f.push_back(static_cast<std::uint8_t>(v >> 16));
    f.push_back(static_cast<std::uint8_t>(v >> 8));
    f.push_back(static_cast<std::uint8_t>(v));
  };
  // MACs derived from the IPs, purely cosmetic
  for (int i = 0; i < 2; ++i) {
    std::uint32_t ip = i == 0 ? s.dst_ip : s.src_ip;
    f.push_back(0x02);
    f.push_back(0x00);
    u32be(ip);
  }
  u16be(0x0800);
  // IPv4
  f.push_back(0x45);
  f.push_back(0x00);
  u16be(static_cast<std::uint16_t>(ip_len));
  u16be(0);        // identification
  u16be(0x4000);   // DF, no fragmentation
  f.push_back(64); // TTL
  f.push_back(s.protocol == Transport::Tcp ? 6 : 17);
  u16be(0);        // header checksum, masked downstream
  u32be(s.src_ip);
  u32be(s.dst_ip);
  if (s.protocol == Transport::Tcp) {
    u16be(s.src_port);
    u16be(s.dst_port);
    u32be(0);  // seq
    u32be(0);  // ack
    f.push_back(0x50);  // data offset 5
    f.push_back(s.tcp_flags);
    u16be(65535);  // window
    u16be(0);      // checksum
    u16be(0);      // urgent
  } else {
    u16be(s.src_port);
    u16be(s.dst_port);
    u16be(static_cast<std::uint16_t>(8 + s.payload.size()));
    u16be(0);  // checksum
  }
  f.insert(f.end(), s.payload.begin(), s.payload.end());
  return f;
}

enum class AttackKind { Pattern, Flood, Scan };

struct ScenarioConfig {
  std::uint64_t seed = 0;
  std::size_t n_benign = 0;
  std::size_t n_attack = 0;
  AttackKind attack = AttackKind::Pattern;

  // benign profile: printable payload bytes, fixed-length data packets,
  // a few request/response turns per flow
  std::uint8_t alphabet_lo = 0x20, alphabet_hi = 0x7E;
  std::size_t payload_len = 120;
  std::size_t min_turns = 2, max_turns = 6;
  double udp_fraction = 0.1;  // benign flows carried over UDP

  // pattern attacks: motif bytes outside the benign alphabet, spliced into
  // each initiator data packet at a random offset
  std::vector<std::uint8_t> motif{0xF7, 0x00, 0xF1, 0x7F, 0xFE, 0x02, 0xF9,
                                  0x00, 0xFD, 0x7F, 0xF3, 0x01};

  // timing
  double mean_flow_gap_ms = 80.0;   // benign flow inter-start
  double mean_packet_gap_ms = 8.0;  // within a flow
  std::size_t flood_burst = 50;     // flood flows per burst
  double flood_burst_span_ms = 1000.0;
  double flood_gap_ms = 5000.0;     // between bursts

  std::uint32_t flood_target_ip = 0;  // 0 = pick from the server pool
  std::uint16_t scan_port_base = 1;

  bool disjoint_ip_pools = false;  // default shares pools across classes
};

struct ScenarioSummary {
  std::size_t frames = 0;
  std::size_t flows = 0;
  std::map<int, std::size_t> flows_per_class;
};

namespace detail {

struct GenFlow {
  int class_id = 0;
  std::uint64_t start_us = 0;
  FrameSpec base;  // endpoints/protocol template
  // (offset_us, from_initiator, tcp_flags, payload)
  struct Pkt {
    std::uint64_t offset_us;
    bool from_initiator;
    std::uint8_t flags;
    std::vector<std::uint8_t> payload;
  };
  std::vector<Pkt> pkts;
};

inline std::vector<std::uint8_t> random_payload(rng::Engine& eng,
                                                const ScenarioConfig& cfg) {
  std::vector<std::uint8_t> p(cfg.payload_len);
  for (auto& b : p)
    b = static_cast<std::uint8_t>(
        cfg.alphabet_lo +
        rng::uniform_int(eng, cfg.alphabet_hi - cfg.alphabet_lo + 1u));
  return p;
}

/// Benign-shaped TCP conversation: SYN, SYN|ACK, data turns, FIN.
inline void fill_tcp_conversation(GenFlow& flow, rng::Engine& eng,
                                  const ScenarioConfig& cfg,
                                  bool with_motif) {
  std::uint64_t off = 0;
  auto gap = [&] {
    off += static_cast<std::uint64_t>(
        rng::exponential(eng, cfg.mean_packet_gap_ms) * 1000.0) + 100;
    return off;
  };
  flow.pkts.push_back({0, true, kTcpSyn, {}});
  flow.pkts.push_back({gap(), false, kTcpSyn | kTcpAck, {}});
  std::size_t turns =
      cfg.min_turns + rng::uniform_int(eng, cfg.max_turns - cfg.min_turns + 1);
  for (std::size_t t = 0; t < turns; ++t) {
    auto req = random_payload(eng, cfg);
    if (with_motif && !cfg.motif.empty() && req.size() >= cfg.motif.size()) {
      std::size_t at =
          rng::uniform_int(eng, req.size() - cfg.motif.size() + 1);
      std::copy(cfg.motif.begin(), cfg.motif.end(), req.begin() +
                static_cast<std::ptrdiff_t>(at));
    }
    flow.pkts.push_back({gap(), true, kTcpAck | kTcpPsh, std::move(req)});
    flow.pkts.push_back({gap(), false, kTcpAck | kTcpPsh,
                         random_payload(eng, cfg)});
  }
  flow.pkts.push_back({gap(), true, kTcpFin | kTcpAck, {}});
}

inline void fill_udp_exchange(GenFlow& flow, rng::Engine& eng,
                              const ScenarioConfig& cfg) {
  std::uint64_t off = 0;
  flow.pkts.push_back({0, true, 0, random_payload(eng, cfg)});
  off += static_cast<std::uint64_t>(
      rng::exponential(eng, cfg.mean_packet_gap_ms) * 1000.0) + 100;
  flow.pkts.push_back({off, false, 0, random_payload(eng, cfg)});
}

}  // namespace detail

/// Deterministically generate a labeled capture: interleaved benign and
/// attack flows written as a classic pcap plus a ground-truth label
/// manifest in the dataset rule format.
inline ScenarioSummary generate(const ScenarioConfig& cfg,
                                const std::string& pcap_path,
                                const std::string& manifest_path) {
  rng::Engine eng(cfg.seed);

  // address pools; shared across classes unless opted out
  std::vector<std::uint32_t> clients, servers;
  for (std::uint32_t i = 1; i <= 40; ++i) clients.push_back(0x0A000000u + i);
  for (std::uint32_t i = 1; i <= 8; ++i) servers.push_back(0x0A010000u + i);
  std::vector<std::uint32_t> atk_clients = clients, atk_servers = servers;
  if (cfg.disjoint_ip_pools) {
    atk_clients.clear();
    atk_servers.clear();
    for (std::uint32_t i = 1; i <= 40; ++i)
      atk_clients.push_back(0x0A020000u + i);
    for (std::uint32_t i = 1; i <= 8; ++i)
      atk_servers.push_back(0x0A030000u + i);
  }

  std::uint16_t next_port = 10000;  // unique ephemeral port per flow
  auto take_port = [&next_port] {
    if (next_port >= 65500) next_port = 10000;
    return next_port++;
  };

  std::vector<detail::GenFlow> flows;

  // benign flow start times
  std::uint64_t t = 1'000'000;
  for (std::size_t i = 0; i < cfg.n_benign; ++i) {
    detail::GenFlow f;
    f.class_id = 0;
    t += static_cast<std::uint64_t>(
        rng::exponential(eng, cfg.mean_flow_gap_ms) * 1000.0) + 50;
    f.start_us = t;
    f.base.src_ip = clients[rng::uniform_int(eng, clients.size())];
    f.base.dst_ip = servers[rng::uniform_int(eng, servers.size())];
    f.base.src_port = take_port();
    f.base.dst_port = 80;
    bool udp = rng::uniform_real(eng) < cfg.udp_fraction;
    f.base.protocol = udp ? Transport::Udp : Transport::Tcp;
    if (udp) {
      f.base.dst_port = 53;
      detail::fill_udp_exchange(f, eng, cfg);
    } else {
      detail::fill_tcp_conversation(f, eng, cfg, false);
    }
    flows.push_back(std::move(f));
  }
  std::uint64_t t_end = t;

  // attack flows, interleaved over the same span
  if (cfg.attack == AttackKind::Pattern) {
    std::uint64_t ta = 1'000'000;
    for (std::size_t i = 0; i < cfg.n_attack; ++i) {
      detail::GenFlow f;
      f.class_id = 1;
      ta += static_cast<std::uint64_t>(
          rng::exponential(eng, cfg.mean_flow_gap_ms) * 1000.0) + 50;
      f.start_us = ta;
      f.base.src_ip = atk_clients[rng::uniform_int(eng, atk_clients.size())];
      f.base.dst_ip = atk_servers[rng::uniform_int(eng, atk_servers.size())];
      f.base.src_port = take_port();
      f.base.dst_port = 80;
      f.base.protocol = Transport::Tcp;
      detail::fill_tcp_conversation(f, eng, cfg, true);
      flows.push_back(std::move(f));
    }
  } else if (cfg.attack == AttackKind::Flood) {
    std::uint32_t target = cfg.flood_target_ip
                               ? cfg.flood_target_ip
                               : atk_servers[rng::uniform_int(
                                     eng, atk_servers.size())];
    std::uint64_t burst_start = 2'000'000;
    std::size_t in_burst = 0;
    std::uint64_t tb = burst_start;
    for (std::size_t i = 0; i < cfg.n_attack; ++i) {
      if (in_burst == cfg.flood_burst) {
        in_burst = 0;
        burst_start += static_cast<std::uint64_t>(
            (cfg.flood_burst_span_ms + cfg.flood_gap_ms) * 1000.0);
        tb = burst_start;
      }
      detail::GenFlow f;
      f.class_id = 1;
      tb += static_cast<std::uint64_t>(
          rng::uniform_real(eng) * cfg.flood_burst_span_ms * 1000.0 /
          static_cast<double>(cfg.flood_burst)) + 10;
      f.start_us = tb;
      f.base.src_ip = atk_clients[rng::uniform_int(eng, atk_clients.size())];
      f.base.dst_ip = target;
      f.base.src_port = take_port();
      f.base.dst_port = 80;
      f.base.protocol = Transport::Tcp;
      detail::fill_tcp_conversation(f, eng, cfg, false);
      flows.push_back(std::move(f));
      ++in_burst;
    }
  } else {  // Scan: one initiator sweeping responder ports
    std::uint32_t scanner = atk_clients[rng::uniform_int(eng, atk_clients.size())];
    std::uint32_t victim = atk_servers[rng::uniform_int(eng, atk_servers.size())];
    std::uint64_t ts = 2'000'000;
    for (std::size_t i = 0; i < cfg.n_attack; ++i) {
      detail::GenFlow f;
      f.class_id = 1;
      ts += static_cast<std::uint64_t>(rng::uniform_real(eng) * 2000.0) + 10;
      f.start_us = ts;
      f.base.src_ip = scanner;
      f.base.dst_ip = victim;
      f.base.src_port = take_port();
      f.base.dst_port = static_cast<std::uint16_t>(
          cfg.scan_port_base + (i % 1024));
      f.base.protocol = Transport::Tcp;
      f.pkts.push_back({0, true, kTcpSyn, {}});
      f.pkts.push_back({200, false, kTcpRst | kTcpAck, {}});
      flows.push_back(std::move(f));
    }
    (void)t_end;
  }

  // expand to timestamped frames and sort globally
  struct Event {
    std::uint64_t ts;
    std::size_t seq;  // tie-break: generation order
    std::vector<std::uint8_t> frame;
  };
  std::vector<Event> events;
  std::size_t seq = 0;
  for (const auto& f : flows) {
    for (const auto& p : f.pkts) {
      FrameSpec s = f.base;
      if (!p.from_initiator) {
        std::swap(s.src_ip, s.dst_ip);
        std::swap(s.src_port, s.dst_port);
      }
      s.tcp_flags = p.flags;
      s.payload = p.payload;
      events.push_back({f.start_us + p.offset_us, seq++,
                        synth::build_frame(s)});
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.ts != b.ts ? a.ts < b.ts : a.seq < b.seq;
  });

  {
    std::ofstream out(pcap_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + pcap_path);
    PcapWriter writer(out);
    for (const auto& e : events) writer.write_frame(e.ts, e.frame);
    if (!out) throw IoError("pcap write failed");
  }

  // ground truth: one rule per attack flow (initiator ip:port is unique
  // within the capture), benign via default class 0
  {
    std::ofstream out(manifest_path);
    if (!out) throw IoError("cannot open for writing: " + manifest_path);
    const char* cls_name = cfg.attack == AttackKind::Pattern ? "pattern"
                           : cfg.attack == AttackKind::Flood ? "flood"
                                                             : "scan";
    LabelManifest manifest;
    for (const auto& f : flows) {
      if (f.class_id == 0) continue;
      LabelRule r;
      r.class_id = f.class_id;
      r.class_name = cls_name;
      r.protocol = f.base.protocol;
      r.src = CidrPort{f.base.src_ip, 32, f.base.src_port};
      r.dst = CidrPort{f.base.dst_ip, 32, f.base.dst_port};
      manifest.rules.push_back(std::move(r));
    }
    manifest.save(out);
    if (!out) throw IoError("manifest write failed");
  }

  ScenarioSummary summary;
  summary.frames = events.size();
  summary.flows = flows.size();
  for (const auto& f : flows) ++summary.flows_per_class[f.class_id];
  return summary;
}

}  // namespace synth
}  // namespace did
