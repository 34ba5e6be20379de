#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <list>
#include <string>
#include <unordered_map>
#include <vector>

#include "did/errors.hpp"
#include "did/pcap.hpp"

namespace did {

struct Endpoint {
  std::array<std::uint8_t, 4> ip{};
  std::uint16_t port = 0;

  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

/// Direction-insensitive flow key: the lexicographically smaller
/// (ip, port) pair is stored first, so both directions of a conversation
/// map to the same key.
struct FlowKey {
  Endpoint a;
  Endpoint b;
  Transport protocol = Transport::Tcp;

  friend bool operator==(const FlowKey&, const FlowKey&) = default;

  static FlowKey of(const DecodedPacket& p) {
    Endpoint src{p.src_ip, p.src_port};
    Endpoint dst{p.dst_ip, p.dst_port};
    FlowKey k;
    if (src <= dst) {
      k.a = src; k.b = dst;
    } else {
      k.a = dst; k.b = src;
    }
    k.protocol = p.protocol;
    return k;
  }
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    mix(ip_to_u32(k.a.ip));
    mix(k.a.port);
    mix(ip_to_u32(k.b.ip));
    mix(k.b.port);
    mix(static_cast<std::uint64_t>(k.protocol));
    return static_cast<std::size_t>(h);
  }
};

enum class Termination { Fin, Timeout, CaptureEnd };

struct FlowRecord {
  FlowKey key;
  Endpoint initiator;  // sender of the first packet
  Endpoint responder;
  std::uint64_t start_time_us = 0;
  std::uint64_t end_time_us = 0;
  std::vector<DecodedPacket> packets;  // arrival order, both directions
  Termination termination = Termination::CaptureEnd;
  std::uint64_t flow_index = 0;  // global flow-start order

  std::string id() const {
    return ip_to_string(initiator.ip) + ":" + std::to_string(initiator.port) +
           "-" + ip_to_string(responder.ip) + ":" +
           std::to_string(responder.port) +
           (key.protocol == Transport::Tcp ? "/tcp@" : "/udp@") +
           std::to_string(start_time_us);
  }
};

/// Groups packets into flows. Flows close on TCP FIN or RST, on exceeding
/// the maximum flow time relative to the arriving packet's timestamp, or at
/// end of capture. Single writer; timestamps must be non-decreasing.
class FlowTable {
 public:
  using FlowStartFn = std::function<void(const Endpoint& initiator,
                                         const Endpoint& responder,
                                         std::uint64_t start_time_us,
                                         std::uint64_t flow_index)>;

  explicit FlowTable(std::uint64_t max_flow_ms = 1'200'000,
                     std::size_t max_live_flows = 0)
      : max_flow_us_(max_flow_ms * 1000), max_live_(max_live_flows) {}

  void on_flow_start(FlowStartFn fn) { on_start_ = std::move(fn); }

  std::vector<FlowRecord> ingest(const DecodedPacket& pkt) {
    if (pkt.timestamp_us < last_ts_)
      throw OutOfOrderTimestamp("packet timestamp decreased: " +
                                std::to_string(pkt.timestamp_us) + " after " +
                                std::to_string(last_ts_));
    last_ts_ = pkt.timestamp_us;

    std::vector<FlowRecord> closed;
    // expire flows whose age exceeds the cap, oldest first
    while (!order_.empty()) {
      auto it = live_.find(order_.front());
      if (pkt.timestamp_us - it->second.record.start_time_us <= max_flow_us_)
        break;
      closed.push_back(close(it, Termination::Timeout));
    }

    FlowKey key = FlowKey::of(pkt);
    auto it = live_.find(key);
    if (it == live_.end()) {
      if (max_live_ > 0 && live_.size() >= max_live_) {
        auto oldest = live_.find(order_.front());
        closed.push_back(close(oldest, Termination::Timeout));
      }
      FlowRecord rec;
      rec.key = key;
      rec.initiator = {pkt.src_ip, pkt.src_port};
      rec.responder = {pkt.dst_ip, pkt.dst_port};
      rec.start_time_us = pkt.timestamp_us;
      rec.flow_index = next_index_++;
      if (on_start_)
        on_start_(rec.initiator, rec.responder, rec.start_time_us,
                  rec.flow_index);
      order_.push_back(key);
      auto pos = std::prev(order_.end());
      it = live_.emplace(key, Live{std::move(rec), pos}).first;
    }

    Live& live = it->second;
    live.record.end_time_us = pkt.timestamp_us;
    live.record.packets.push_back(pkt);
    if (pkt.protocol == Transport::Tcp && (pkt.tcp_flags & (kTcpFin | kTcpRst)))
      closed.push_back(close(it, Termination::Fin));
    return closed;
  }

  /// Close everything at end of capture, in flow-start order.
  std::vector<FlowRecord> flush() {
    std::vector<FlowRecord> closed;
    while (!order_.empty())
      closed.push_back(close(live_.find(order_.front()), Termination::CaptureEnd));
    return closed;
  }

  std::size_t live_count() const { return live_.size(); }
  std::uint64_t flows_started() const { return next_index_; }

 private:
  struct Live {
    FlowRecord record;
    std::list<FlowKey>::iterator order_pos;
  };

  FlowRecord close(std::unordered_map<FlowKey, Live, FlowKeyHash>::iterator it,
                   Termination why) {
    FlowRecord rec = std::move(it->second.record);
    rec.termination = why;
    order_.erase(it->second.order_pos);
    live_.erase(it);
    return rec;
  }

  std::uint64_t max_flow_us_;
  std::size_t max_live_;
  std::uint64_t last_ts_ = 0;
  std::uint64_t next_index_ = 0;
  std::unordered_map<FlowKey, Live, FlowKeyHash> live_;
  std::list<FlowKey> order_;  // live flows in start order
  FlowStartFn on_start_;
};

}  // namespace did
