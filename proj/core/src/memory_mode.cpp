#include "nvsim/memory_mode.hpp"

#include <fmt/format.h>

#include "nvsim/cluster.hpp"
#include "nvsim/error.hpp"

namespace nvsim {

std::string_view to_string(MemoryMode mode) { return mode == MemoryMode::SLM ? "SLM" : "DLM"; }

std::optional<MemoryMode> parse_memory_mode(std::string_view text) {
  if (text == "SLM") return MemoryMode::SLM;
  if (text == "DLM") return MemoryMode::DLM;
  return std::nullopt;
}

MemoryView visible_memory(const NodeSpec& node, MemoryMode mode) {
  if (mode == MemoryMode::SLM) {
    return MemoryView{node.dram_bytes(), node.bapm_bytes(), true};
  }
  return MemoryView{node.bapm_bytes(), 0, false};
}

bool supports_dlm(const NodeSpec& node) { return node.dram_dimms_per_socket >= 1 && node.has_bapm(); }

double effective_latency_ns(const NodeSpec& node, double hit_rate) {
  if (!(hit_rate >= 0.0 && hit_rate <= 1.0)) {
    throw SimError(ErrorCode::HitRateOutOfRange, fmt::format("hit rate {} not in [0, 1]", hit_rate));
  }
  const double dram = static_cast<double>(node.dram_latency.count());
  const double miss = dram * node.bapm_latency_ratio;
  return miss - hit_rate * (miss - dram);
}

double effective_latency_ns(const NodeSpec& node, MemoryMode current, double hit_rate) {
  if (current != MemoryMode::DLM) {
    throw SimError(ErrorCode::InvalidArgument,
                   fmt::format("node {} is in SLM; query DRAM and B-APM latencies per space", node.node_id));
  }
  return effective_latency_ns(node, hit_rate);
}

}  // namespace nvsim
