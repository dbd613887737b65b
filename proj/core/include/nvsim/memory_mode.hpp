#pragma once

#include <optional>
#include <string_view>

#include "nvsim/units.hpp"

namespace nvsim {

struct NodeSpec;

/// Single-level memory exposes DRAM and B-APM as two address spaces (the
/// B-APM space is persistent). Dual-level memory turns DRAM into a cache in
/// front of B-APM: only the B-APM capacity is visible and nothing on it is
/// guaranteed to survive.
enum class MemoryMode { SLM, DLM };

std::string_view to_string(MemoryMode mode);
std::optional<MemoryMode> parse_memory_mode(std::string_view text);

struct MemoryView {
  Bytes volatile_bytes = 0;
  Bytes persistent_bytes = 0;
  bool persistence_guaranteed = true;

  friend bool operator==(const MemoryView&, const MemoryView&) = default;
};

MemoryView visible_memory(const NodeSpec& node, MemoryMode mode);

/// Average access latency in DLM as a linear mixture of a DRAM-cache hit and a
/// B-APM access. Throws HitRateOutOfRange unless 0 <= hit_rate <= 1.
double effective_latency_ns(const NodeSpec& node, double hit_rate);

/// Same, but bound to the node's current mode: only meaningful in DLM, where
/// the DRAM acts as a cache. Throws InvalidArgument for SLM.
double effective_latency_ns(const NodeSpec& node, MemoryMode current, double hit_rate);

/// DLM needs at least one DRAM DIMM behind every memory controller.
bool supports_dlm(const NodeSpec& node);

}  // namespace nvsim
