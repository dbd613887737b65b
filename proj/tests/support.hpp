#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nvsim/cluster.hpp"
#include "nvsim/error.hpp"
#include "nvsim/units.hpp"
#include "nvsim/workload.hpp"

namespace nvsim::testing {

inline constexpr Bytes GB = 1'000'000'000;
inline constexpr Bytes TB = 1'000 * GB;
inline constexpr BytesPerSecond GBps = 1'000'000'000;

inline SimDuration secs(double s) { return SimDuration{static_cast<std::int64_t>(s * 1e9 + (s >= 0 ? 0.5 : -0.5))}; }
inline SimTime at_s(double s) { return kSimEpoch + secs(s); }

// 2 sockets x (6 DRAM 16 GB + 6 B-APM 250 GB): 192 GB DRAM, 3 TB B-APM.
inline NodeSpec reference_node(int id, MemoryMode mode = MemoryMode::SLM) {
  NodeSpec n;
  n.node_id = id;
  n.sockets = 2;
  n.channels_per_socket = 6;
  n.slots_per_channel = 2;
  n.dram_dimm_bytes = 16 * GB;
  n.bapm_dimm_bytes = 250 * GB;
  n.dram_dimms_per_socket = 6;
  n.bapm_dimms_per_socket = 6;
  n.dram_bw = 100 * GBps;
  n.bapm_bw = 20 * GBps;
  n.flops = 2'000'000'000'000;
  n.link_bw = 12'500'000'000;
  n.dram_latency = SimDuration{100};
  n.bapm_latency_ratio = 5.0;
  n.initial_mode = mode;
  return n;
}

inline NodeSpec plain_node(int id) {
  NodeSpec n = reference_node(id);
  n.bapm_dimms_per_socket = 0;
  n.bapm_dimm_bytes = 0;
  n.bapm_bw = 0;
  return n;
}

inline ClusterSpec reference_cluster(int nodes, BytesPerSecond external_bw = 100 * GBps) {
  ClusterSpec c;
  for (int i = 0; i < nodes; ++i) c.nodes.push_back(reference_node(i));
  c.external_fs_bw = external_bw;
  c.external_fs_capacity = 100'000 * TB;
  c.mode_switch_seconds = std::chrono::seconds{300};
  return c;
}

inline JobSpec make_job(std::string id, std::uint32_t nodes, double compute_s, double submit_s = 0) {
  JobSpec j;
  j.job_id = std::move(id);
  j.owner = "alice";
  j.submit_time = at_s(submit_s);
  j.nodes_requested = nodes;
  j.bapm_bytes_per_node = 100 * GB;
  j.compute_seconds = secs(compute_s);
  j.walltime_limit = secs(compute_s);
  return j;
}

/// Random cluster (1..16 nodes) for property runs: mixes node sizes, DLM
/// starting modes and occasional B-APM-less nodes.
inline ClusterSpec random_cluster(std::mt19937_64& rng) {
  const int n = 1 + static_cast<int>(rng() % 16);
  ClusterSpec c = reference_cluster(n, (20 + rng() % 181) * GBps);
  for (auto& node : c.nodes) {
    if (rng() % 5 == 0) node.initial_mode = MemoryMode::DLM;
    if (rng() % 3 == 0) node.bapm_dimm_bytes = 64 * GB;
    if (rng() % 4 == 0) node.link_bw = 25 * GBps;
  }
  if (n > 1 && rng() % 6 == 0) {
    const int id = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    c.nodes[static_cast<std::size_t>(id)] = plain_node(id);
  }
  c.mode_switch_seconds = std::chrono::seconds{60 + static_cast<std::int64_t>(rng() % 300)};
  if (rng() % 4 == 0) c.distributed_fs_fraction = 0.5;
  return c;
}

/// Random workload (<= 50 jobs) for the cluster, including foreign inputs
/// with and without grants and some datasets already resident on nodes.
inline WorkloadSpec random_workload(std::mt19937_64& rng, const ClusterSpec& cluster) {
  SynthParams p;
  p.seed = rng();
  p.jobs = 1 + static_cast<std::uint32_t>(rng() % 50);
  p.max_nodes = 1 + static_cast<std::uint32_t>(rng() % std::min<std::size_t>(cluster.nodes.size(), 6));
  p.min_compute = std::chrono::seconds{30};
  p.max_compute = std::chrono::seconds{1800};
  p.mean_interarrival = std::chrono::seconds{static_cast<std::int64_t>(rng() % 240)};
  p.workflow_probability = 0.4;
  p.retention_ttl = std::chrono::seconds{600 + static_cast<std::int64_t>(rng() % 7200)};
  p.dlm_probability = 0.2;
  p.foreign_input_probability = 0.15;
  p.walltime_factor = 1.0 + static_cast<double>(rng() % 100) / 100.0;
  WorkloadSpec w = synth_workload(p, cluster);
  // Put some external inputs on node B-APM up front.
  std::vector<Bytes> used(cluster.nodes.size(), 0);
  for (DataSetSpec& d : w.datasets) {
    if (rng() % 4 != 0) continue;
    const std::size_t node = rng() % cluster.nodes.size();
    const NodeSpec& ns = cluster.nodes[node];
    if (!ns.has_bapm() || ns.initial_mode == MemoryMode::DLM) continue;
    if (used[node] + d.size > ns.bapm_bytes() / 4) continue;
    used[node] += d.size;
    d.node = static_cast<int>(node);
    if (!w.workflows.empty() && rng() % 2 == 0) d.workflow = w.workflows[rng() % w.workflows.size()].id;
  }
  return w;
}

/// Code of the SimError thrown by f, or nullopt when it returns normally.
template <class F>
std::optional<ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const SimError& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace nvsim::testing
