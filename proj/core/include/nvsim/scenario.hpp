#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nvsim/cluster.hpp"
#include "nvsim/engine.hpp"
#include "nvsim/scheduler.hpp"
#include "nvsim/simulation.hpp"
#include "nvsim/workload.hpp"

namespace nvsim {

/// Built-in burst-buffer walkthrough: one two-node job stages its input from
/// the external file system into a distributed file system built from the
/// nodes' B-APM, reads it, checkpoints into it, and stages its output back.
struct BurstBufferOptions {
  std::uint64_t seed = 0;
  bool stage_in = true;
  /// Fault injection: launch without waiting for the stage-in.
  bool force_early_launch = false;
  Policy policy;
};

ClusterSpec burst_buffer_cluster(std::uint64_t seed);
WorkloadSpec burst_buffer_workload(std::uint64_t seed, bool stage_in);

inline constexpr const char* kBurstBufferJob = "bb";

struct StepMark {
  int step = 0;
  std::string name;
  SimTime time{};
  std::uint64_t seq = 0;
};

/// Checks that the job's trace shows, in this order: submit, allocate (SLM,
/// distributed FS mounted), stage-in, launch, reads, writes, finish,
/// stage-out. Without stage-in the third step is skipped and every read must
/// come from the external file system. Throws OrderingViolation naming the
/// first inverted or missing step.
std::vector<StepMark> verify_burst_buffer(const Trace& trace, bool stage_in, const std::string& job = kBurstBufferJob);

struct BurstBufferRun {
  std::unique_ptr<Simulation> sim;
  std::vector<StepMark> steps;
};

/// Builds and runs the scenario, then verifies it.
BurstBufferRun run_burst_buffer(const BurstBufferOptions& options);

}  // namespace nvsim
