#pragma once

#include <cstdint>
#include <deque>
#include <unordered_map>

#include "did/errors.hpp"

namespace did {

/// The five intra-flow features computed at each flow start, over strictly
/// preceding flow starts.
struct ContextFeatures {
  double gap_ms = 0;               // since the previous flow start, any flow
  std::uint32_t src_count_bucket = 0;  // same initiator IP, last N starts
  std::uint32_t src_count_time = 0;    // same initiator IP, last T ms
  std::uint32_t dst_count_bucket = 0;  // same responder IP, last N starts
  std::uint32_t dst_count_time = 0;    // same responder IP, last T ms

  friend bool operator==(const ContextFeatures&,
                         const ContextFeatures&) = default;
};

/// Streaming tracker for flow-start events: a fixed-size bucket of the most
/// recent N starts plus a sliding time window of T milliseconds, each
/// counting source/destination IP repetitions.
class ContextTracker {
 public:
  ContextTracker(std::size_t bucket_size, std::uint64_t window_ms)
      : bucket_size_(bucket_size), window_us_(window_ms * 1000) {}

  ContextFeatures observe_flow(std::uint32_t initiator_ip,
                               std::uint32_t responder_ip,
                               std::uint64_t start_time_us) {
    if (seen_any_ && start_time_us < last_start_us_)
      throw OutOfOrderTimestamp("flow start timestamp decreased");

    // window keeps starts with t > current - T
    while (!time_win_.empty() &&
           start_time_us >= window_us_ &&
           time_win_.front().start_us <= start_time_us - window_us_) {
      decr(src_time_, time_win_.front().src);
      decr(dst_time_, time_win_.front().dst);
      time_win_.pop_front();
    }

    ContextFeatures f;
    if (seen_any_)
      f.gap_ms = static_cast<double>(start_time_us - last_start_us_) / 1000.0;
    f.src_count_bucket = lookup(src_bucket_, initiator_ip);
    f.dst_count_bucket = lookup(dst_bucket_, responder_ip);
    f.src_count_time = lookup(src_time_, initiator_ip);
    f.dst_count_time = lookup(dst_time_, responder_ip);

    Entry e{start_time_us, initiator_ip, responder_ip};
    bucket_.push_back(e);
    ++src_bucket_[initiator_ip];
    ++dst_bucket_[responder_ip];
    if (bucket_.size() > bucket_size_) {
      decr(src_bucket_, bucket_.front().src);
      decr(dst_bucket_, bucket_.front().dst);
      bucket_.pop_front();
    }
    time_win_.push_back(e);
    ++src_time_[initiator_ip];
    ++dst_time_[responder_ip];

    seen_any_ = true;
    last_start_us_ = start_time_us;
    return f;
  }

 private:
  struct Entry {
    std::uint64_t start_us;
    std::uint32_t src;
    std::uint32_t dst;
  };
  using CountMap = std::unordered_map<std::uint32_t, std::uint32_t>;

  static std::uint32_t lookup(const CountMap& m, std::uint32_t ip) {
    auto it = m.find(ip);
    return it == m.end() ? 0 : it->second;
  }
  static void decr(CountMap& m, std::uint32_t ip) {
    auto it = m.find(ip);
    if (--it->second == 0) m.erase(it);
  }

  std::size_t bucket_size_;
  std::uint64_t window_us_;
  bool seen_any_ = false;
  std::uint64_t last_start_us_ = 0;
  std::deque<Entry> bucket_;
  std::deque<Entry> time_win_;
  CountMap src_bucket_, dst_bucket_, src_time_, dst_time_;
};

}  // namespace did
