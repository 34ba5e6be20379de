#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "did/config.hpp"
#include "did/context.hpp"
#include "did/dataset.hpp"
#include "did/flow.hpp"
#include "did/matrix.hpp"
#include "did/pcap.hpp"

namespace did {

struct ExtractResult {
  std::vector<FlowRecord> flows;  // flow-start order
  std::vector<ContextFeatures> context;  // parallel to flows
  SkipCounters skips;
  std::uint64_t packets_decoded = 0;
};

/// Single pass over a capture: decode, assemble flows, and compute the
/// intra-flow context features at each flow start in arrival order.
inline ExtractResult extract_flows(const std::string& pcap_path,
                                   const RunConfig& cfg) {
  ExtractResult res;
  CaptureReader reader(pcap_path);
  FlowTable table(cfg.max_flow_ms);
  ContextTracker tracker(cfg.ctx_bucket, cfg.ctx_window_ms);

  std::vector<ContextFeatures> ctx_by_index;
  table.on_flow_start([&](const Endpoint& initiator, const Endpoint& responder,
                          std::uint64_t start_us, std::uint64_t) {
    ctx_by_index.push_back(tracker.observe_flow(
        ip_to_u32(initiator.ip), ip_to_u32(responder.ip), start_us));
  });

  auto emit = [&res](std::vector<FlowRecord>&& closed) {
    for (auto& f : closed) res.flows.push_back(std::move(f));
  };
  while (auto frame = reader.next_frame()) {
    auto pkt = decode_packet(*frame, res.skips);
    if (!pkt) continue;
    ++res.packets_decoded;
    emit(table.ingest(*pkt));
  }
  emit(table.flush());

  std::sort(res.flows.begin(), res.flows.end(),
            [](const FlowRecord& a, const FlowRecord& b) {
              return a.flow_index < b.flow_index;
            });
  res.context.reserve(res.flows.size());
  for (const auto& f : res.flows) res.context.push_back(ctx_by_index[f.flow_index]);
  return res;
}

struct FeaturizeResult {
  std::vector<FlowMatrix> records;  // flow-start order
  SkipCounters skips;
  std::uint64_t packets_decoded = 0;
  std::vector<double> per_flow_ms;  // build_matrix timing, filled when timed
};

/// pcap (+ optional labels) -> enriched normalized matrices.
inline FeaturizeResult featurize(const std::string& pcap_path,
                                 const RunConfig& cfg,
                                 const LabelManifest* labels = nullptr,
                                 bool timed = false) {
  ExtractResult ex = extract_flows(pcap_path, cfg);
  FeaturizeResult res;
  res.skips = ex.skips;
  res.packets_decoded = ex.packets_decoded;
  res.records.reserve(ex.flows.size());
  for (std::size_t i = 0; i < ex.flows.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    FlowMatrix m = build_matrix(ex.flows[i], ex.context[i], cfg.matrix);
    if (timed) {
      auto t1 = std::chrono::steady_clock::now();
      res.per_flow_ms.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    if (labels) m.label = labels->label(ex.flows[i]);
    if (cfg.zero_context)
      for (std::uint32_t c = 0; c < m.cols; ++c) m.at(0, c) = 0.0f;
    res.records.push_back(std::move(m));
  }
  return res;
}

/// Blank the context row in place (ablation for timing-only attacks).
inline void zero_context_row(std::vector<FlowMatrix>& records) {
  for (auto& m : records)
    for (std::uint32_t c = 0; c < m.cols; ++c) m.at(0, c) = 0.0f;
}

}  // namespace did
