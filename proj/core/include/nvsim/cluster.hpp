#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvsim/error.hpp"
#include "nvsim/memory_mode.hpp"
#include "nvsim/units.hpp"

namespace nvsim {

/// Hardware description of one compute node. Bandwidths are node aggregates.
struct NodeSpec {
  int node_id = 0;
  std::uint32_t sockets = 2;
  std::uint32_t channels_per_socket = 6;
  std::uint32_t slots_per_channel = 2;
  Bytes dram_dimm_bytes = 0;
  Bytes bapm_dimm_bytes = 0;
  std::uint32_t dram_dimms_per_socket = 0;
  std::uint32_t bapm_dimms_per_socket = 0;
  BytesPerSecond dram_bw = 0;
  BytesPerSecond bapm_bw = 0;
  FlopsPerSecond flops = 0;
  BytesPerSecond link_bw = 0;
  SimDuration dram_latency{};
  double bapm_latency_ratio = 5.0;
  MemoryMode initial_mode = MemoryMode::SLM;

  Bytes dram_bytes() const;
  Bytes bapm_bytes() const;
  bool has_bapm() const { return bapm_bytes() > 0; }

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct ClusterSpec {
  std::vector<NodeSpec> nodes;
  BytesPerSecond external_fs_bw = 0;
  Bytes external_fs_capacity = 0;
  SimDuration mode_switch_seconds = std::chrono::seconds{300};
  bool bisection_model = true;  // flat full bisection; the only supported model
  /// Fraction of a member's unreserved B-APM contributed to a distributed FS.
  double distributed_fs_fraction = 1.0;
  /// Multiplicative slowdown of file-system access to B-APM (1.0 = none).
  double fs_overhead = 1.0;

  friend bool operator==(const ClusterSpec&, const ClusterSpec&) = default;
};

struct Diagnostic {
  ErrorCode code;
  int node_id = -1;  // -1 for cluster-level findings
  std::string message;
};

struct ValidationReport {
  std::vector<Diagnostic> errors;
  std::vector<Diagnostic> warnings;

  bool ok() const { return errors.empty(); }
  /// Throws SimError with the first error, if any.
  void throw_if_failed() const;
};

/// Checks slot population, positivity, id density and DLM/DRAM compatibility.
/// A B-APM/DRAM DIMM density ratio outside [2, 5] only produces a warning.
ValidationReport validate_cluster(const ClusterSpec& spec);

/// Scaling projection for n identical nodes. Totals are exact integers in base
/// units; the display strings follow the projection-table rounding rule.
struct AggregateReport {
  std::uint64_t node_count = 0;
  unsigned __int128 total_flops = 0;       // flop/s
  unsigned __int128 total_bapm_bytes = 0;  // bytes
  unsigned __int128 total_bapm_bw = 0;     // bytes/s

  double compute_pflops() const;
  double bapm_capacity_pb() const;
  double bapm_io_bw_tbs() const;

  std::string compute_pflops_display() const;
  std::string bapm_capacity_pb_display() const;
  std::string bapm_io_bw_tbs_display() const;
};

AggregateReport aggregate_for(std::uint64_t node_count, Bytes bapm_per_node, FlopsPerSecond flops_per_node,
                              BytesPerSecond bapm_bw_per_node);

/// Report for a validated homogeneous cluster. Throws HeterogeneousCluster if
/// nodes differ in B-APM capacity, compute rate or B-APM bandwidth.
AggregateReport aggregate_metrics(const ClusterSpec& spec);

/// Renders numerator/denominator truncated toward zero: values of at least 5
/// keep their integer part, smaller values keep two significant digits
/// (trailing zeros dropped). Exact integer arithmetic throughout.
std::string truncate_for_display(unsigned __int128 numerator, unsigned __int128 denominator);

/// Smallest n with n * per_node_bw >= target_bw.
std::uint64_t crossover_nodes(BytesPerSecond target_bw, BytesPerSecond per_node_bw);

}  // namespace nvsim
